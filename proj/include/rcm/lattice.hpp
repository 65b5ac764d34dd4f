#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <stdexcept>
#include <string>
#include <vector>

namespace rcm {

using Vertex = std::int64_t;

constexpr int kMaxDim = 6;

enum class Boundary : std::uint8_t { free = 0, torus = 1 };

inline std::string boundary_name(Boundary b) {
  return b == Boundary::free ? "free" : "torus";
}

using Coords = std::array<std::int64_t, kMaxDim>;

// Finite box or torus of side L in dimension d. Vertices are indexed
// row-major with axis 0 fastest; each undirected edge is stored once as a
// (vertex, positive axis) slot.
struct LatticeSpec {
  int d = 2;
  std::int64_t L = 2;
  Boundary boundary = Boundary::torus;

  LatticeSpec() = default;
  LatticeSpec(int dim, std::int64_t side, Boundary b) : d(dim), L(side), boundary(b) {
    validate();
  }

  void validate() const {
    if (d < 2 || d > kMaxDim) throw std::invalid_argument("lattice dimension must be in [2," + std::to_string(kMaxDim) + "]");
    if (L < 2) throw std::invalid_argument("lattice side must be >= 2");
  }

  std::int64_t vertex_count() const {
    std::int64_t n = 1;
    for (int k = 0; k < d; ++k) n *= L;
    return n;
  }

  // Slots, including nonexistent free-boundary ones (held at zero).
  std::int64_t edge_slot_count() const { return vertex_count() * d; }

  // Actual undirected edge count: d*L^d on the torus, d*L^(d-1)*(L-1) free.
  std::int64_t edge_count() const {
    if (boundary == Boundary::torus) return edge_slot_count();
    std::int64_t per_axis = (vertex_count() / L) * (L - 1);
    return per_axis * d;
  }

  Coords decode(Vertex v) const {
    Coords c{};
    for (int k = 0; k < d; ++k) {
      c[k] = v % L;
      v /= L;
    }
    return c;
  }

  Vertex encode(const Coords& c) const {
    Vertex v = 0;
    for (int k = d - 1; k >= 0; --k) v = v * L + c[k];
    return v;
  }

  bool in_range(const Coords& c) const {
    for (int k = 0; k < d; ++k)
      if (c[k] < 0 || c[k] >= L) return false;
    return true;
  }

  // Neighbor along axis in direction dir (+1/-1); -1 if absent (free edge).
  Vertex neighbor(Vertex v, int axis, int dir) const {
    Coords c = decode(v);
    std::int64_t x = c[axis] + dir;
    if (boundary == Boundary::torus) {
      if (x < 0) x += L;
      if (x >= L) x -= L;
    } else {
      if (x < 0 || x >= L) return -1;
    }
    c[axis] = x;
    return encode(c);
  }

  // Does the edge slot (v, +axis) exist?
  bool edge_exists(Vertex v, int axis) const {
    if (boundary == Boundary::torus) return true;
    return decode(v)[axis] != L - 1;
  }

  bool operator==(const LatticeSpec& o) const {
    return d == o.d && L == o.L && boundary == o.boundary;
  }

  // Lattice center, the finite-volume stand-in for the origin of Z^d.
  Vertex center_vertex() const {
    Coords c{};
    for (int k = 0; k < d; ++k) c[k] = L / 2;
    return encode(c);
  }
};

// Undirected edge slot id for (v, +axis).
inline std::int64_t edge_slot(const LatticeSpec& spec, Vertex v, int axis) {
  return v * spec.d + axis;
}

// Boolean field over edge slots (alpha / alpha' of the percolation picture).
struct EdgeMask {
  LatticeSpec spec;
  std::vector<std::uint8_t> open;  // indexed by edge slot

  bool is_open(Vertex v, int axis) const { return open[edge_slot(spec, v, axis)] != 0; }
};

// Enumerates the up-to-2d incident edges of a vertex. Returns pairs
// (neighbor vertex, edge slot).
inline int incident_edges(const LatticeSpec& spec, Vertex v,
                          std::array<std::pair<Vertex, std::int64_t>, 2 * kMaxDim>& out) {
  int cnt = 0;
  for (int axis = 0; axis < spec.d; ++axis) {
    if (spec.edge_exists(v, axis)) {
      Vertex w = spec.neighbor(v, axis, +1);
      out[cnt++] = {w, edge_slot(spec, v, axis)};
    }
    Vertex u = spec.neighbor(v, axis, -1);
    if (u >= 0) out[cnt++] = {u, edge_slot(spec, u, axis)};
  }
  return cnt;
}

inline std::int64_t linf_distance(const LatticeSpec& spec, Vertex a, Vertex b) {
  Coords ca = spec.decode(a), cb = spec.decode(b);
  std::int64_t m = 0;
  for (int k = 0; k < spec.d; ++k) {
    std::int64_t dk = std::abs(ca[k] - cb[k]);
    if (spec.boundary == Boundary::torus) dk = std::min(dk, spec.L - dk);
    m = std::max(m, dk);
  }
  return m;
}

inline std::int64_t l1_distance(const LatticeSpec& spec, Vertex a, Vertex b) {
  Coords ca = spec.decode(a), cb = spec.decode(b);
  std::int64_t s = 0;
  for (int k = 0; k < spec.d; ++k) {
    std::int64_t dk = std::abs(ca[k] - cb[k]);
    if (spec.boundary == Boundary::torus) dk = std::min(dk, spec.L - dk);
    s += dk;
  }
  return s;
}

inline double euclid_distance(const LatticeSpec& spec, Vertex a, Vertex b) {
  Coords ca = spec.decode(a), cb = spec.decode(b);
  double s = 0;
  for (int k = 0; k < spec.d; ++k) {
    std::int64_t dk = std::abs(ca[k] - cb[k]);
    if (spec.boundary == Boundary::torus) dk = std::min(dk, spec.L - dk);
    s += static_cast<double>(dk) * static_cast<double>(dk);
  }
  return std::sqrt(s);
}

}  // namespace rcm
