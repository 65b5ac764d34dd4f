#include "rcm/effective.hpp"

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/IterativeLinearSolvers>
#include <algorithm>
#include <stdexcept>
#include <unordered_map>

namespace rcm {

bool Window::contains(const LatticeSpec& spec, Vertex v) const {
  if (full) return true;
  Coords c = spec.decode(v);
  for (int k = 0; k < spec.d; ++k)
    if (c[k] < lo[k] || c[k] > hi[k]) return false;
  return true;
}

std::int32_t EffectiveWeights::local_index(Vertex v) const {
  auto it = std::lower_bound(vertices.begin(), vertices.end(), v);
  if (it == vertices.end() || *it != v) return -1;
  return static_cast<std::int32_t>(it - vertices.begin());
}

double EffectiveWeights::weight_between(Vertex x, Vertex y) const {
  std::int32_t i = local_index(x), j = local_index(y);
  if (i < 0 || j < 0) return 0.0;
  if (i > j) std::swap(i, j);
  auto cmp = [](const Entry& e, std::pair<std::int32_t, std::int32_t> key) {
    return e.i != key.first ? e.i < key.first : e.j < key.second;
  };
  auto it = std::lower_bound(entries.begin(), entries.end(), std::make_pair(i, j), cmp);
  if (it != entries.end() && it->i == i && it->j == j) return it->w;
  return 0.0;
}

std::vector<double> EffectiveWeights::row_sums() const {
  std::vector<double> s(vertices.size(), 0.0);
  for (const auto& e : entries) {
    s[static_cast<size_t>(e.i)] += e.w;
    s[static_cast<size_t>(e.j)] += e.w;
  }
  return s;
}

double EffectiveWeights::max_asymmetry() const {
  double m = 0.0;
  for (const auto& e : entries) m = std::max(m, e.asym);
  return m;
}

namespace {

struct RawEntry {
  std::int32_t i, j;
  double side_i, side_j;  // independent accumulations from each endpoint
  bool partial;
  std::int64_t seq;
};

// Per-hole harmonic system: H(z, b) = probability that the embedded chain
// started at z inside the hole first hits C^xi at boundary vertex b.
// (I - P_hh) H = B with P the jump matrix restricted to the hole.
Eigen::MatrixXd solve_hole(const Environment& env, const std::vector<Vertex>& hole,
                           const std::vector<Vertex>& boundary,
                           const EffectiveOptions& options) {
  const auto m = static_cast<std::int64_t>(hole.size());
  const auto nb = static_cast<std::int64_t>(boundary.size());
  std::unordered_map<Vertex, std::int32_t> hole_idx, bdry_idx;
  hole_idx.reserve(hole.size());
  for (std::int64_t k = 0; k < m; ++k) hole_idx[hole[static_cast<size_t>(k)]] = static_cast<std::int32_t>(k);
  for (std::int64_t k = 0; k < nb; ++k) bdry_idx[boundary[static_cast<size_t>(k)]] = static_cast<std::int32_t>(k);

  Eigen::MatrixXd B = Eigen::MatrixXd::Zero(m, nb);
  std::vector<Eigen::Triplet<double>> trips;
  std::array<std::pair<Vertex, std::int64_t>, 2 * kMaxDim> inc;
  for (std::int64_t zi = 0; zi < m; ++zi) {
    Vertex z = hole[static_cast<size_t>(zi)];
    double n = env.vertex_weight(z);
    if (!(n > 0.0)) throw std::runtime_error("hole vertex with zero weight");
    trips.emplace_back(zi, zi, 1.0);
    int cnt = incident_edges(env.spec, z, inc);
    for (int i = 0; i < cnt; ++i) {
      double w = env.values[static_cast<size_t>(inc[i].second)];
      if (w <= 0.0) continue;
      Vertex nb_v = inc[i].first;
      auto hit = hole_idx.find(nb_v);
      if (hit != hole_idx.end()) {
        trips.emplace_back(zi, hit->second, -w / n);
      } else {
        auto bit = bdry_idx.find(nb_v);
        if (bit == bdry_idx.end())
          throw std::runtime_error("hole leaks to a vertex outside hole and C^xi");
        B(zi, bit->second) += w / n;
      }
    }
  }

  if (m <= options.dense_hole_limit) {
    Eigen::MatrixXd A = Eigen::MatrixXd::Identity(m, m);
    for (const auto& t : trips)
      if (t.row() != t.col()) A(t.row(), t.col()) += t.value();
    return A.partialPivLu().solve(B);
  }
  Eigen::SparseMatrix<double> A(m, m);
  A.setFromTriplets(trips.begin(), trips.end());
  if (m <= options.direct_hole_limit) {
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu(A);
    if (lu.info() != Eigen::Success) throw std::runtime_error("singular hole system");
    return lu.solve(B);
  }
  Eigen::BiCGSTAB<Eigen::SparseMatrix<double>> it(A);
  it.setTolerance(1e-12);
  Eigen::MatrixXd H(m, nb);
  for (std::int64_t c = 0; c < nb; ++c) H.col(c) = it.solve(Eigen::VectorXd(B.col(c)));
  return H;
}

}  // namespace

EffectiveWeights effective_conductances(const Environment& env, double xi, const Window& window,
                                        const EffectiveOptions& options) {
  XiStructure xs = build_xi_structure(env, xi);
  return effective_conductances(env, xs, window, options);
}

EffectiveWeights effective_conductances(const Environment& env, const XiStructure& xs,
                                        const Window& window, const EffectiveOptions& options) {
  const LatticeSpec& spec = env.spec;
  EffectiveWeights out;
  out.spec = spec;
  out.xi = xs.xi;

  const std::int64_t nvert = spec.vertex_count();
  for (Vertex v = 0; v < nvert; ++v)
    if (xs.in_cxi(v) && window.contains(spec, v)) out.vertices.push_back(v);
  if (out.vertices.empty())
    throw std::runtime_error("effective_conductances: no C^xi vertex in window");

  std::vector<std::int32_t> local(static_cast<size_t>(nvert), -1);
  for (size_t k = 0; k < out.vertices.size(); ++k)
    local[static_cast<size_t>(out.vertices[k])] = static_cast<std::int32_t>(k);

  out.n_full.resize(out.vertices.size());
  for (size_t k = 0; k < out.vertices.size(); ++k)
    out.n_full[k] = env.vertex_weight(out.vertices[k]);
  out.return_mass.assign(out.vertices.size(), 0.0);

  std::vector<RawEntry> raw;
  std::int64_t seq = 0;

  // Direct jumps: every positive edge between C^xi vertices lands in C^xi,
  // including edges below the threshold.
  for (size_t k = 0; k < out.vertices.size(); ++k) {
    Vertex x = out.vertices[k];
    for (int axis = 0; axis < spec.d; ++axis) {
      if (!spec.edge_exists(x, axis)) continue;
      double w = env.conductance(x, axis);
      if (w <= 0.0) continue;
      Vertex y = spec.neighbor(x, axis, +1);
      std::int32_t i = static_cast<std::int32_t>(k), j = local[static_cast<size_t>(y)];
      if (j < 0 || i == j) continue;
      if (i > j) std::swap(i, j);
      raw.push_back({i, j, w, w, false, seq++});
    }
  }

  // Hole excursions, one independent solve per hole.
  const auto nholes = static_cast<std::int64_t>(xs.holes.holes.size());
  std::vector<std::vector<RawEntry>> hole_entries(static_cast<size_t>(nholes));
  std::vector<std::vector<std::pair<std::int32_t, double>>> hole_diag(static_cast<size_t>(nholes));
  std::vector<std::string> hole_error(static_cast<size_t>(nholes));

#pragma omp parallel for schedule(dynamic) if (options.parallel)
  for (std::int64_t h = 0; h < nholes; ++h) {
    try {
      const auto& hole = xs.holes.holes[static_cast<size_t>(h)];
      const auto& bdry = xs.holes.adjacency[static_cast<size_t>(h)];
      if (bdry.empty()) throw std::runtime_error("hole not attached to C^xi");
      bool partial = false;
      if (!window.full) {
        for (Vertex z : hole)
          if (!window.contains(spec, z)) {
            partial = true;
            break;
          }
      }
      Eigen::MatrixXd H = solve_hole(env, hole, bdry, options);

      std::unordered_map<Vertex, std::int32_t> hole_idx;
      for (size_t k = 0; k < hole.size(); ++k) hole_idx[hole[k]] = static_cast<std::int32_t>(k);
      auto& ents = hole_entries[static_cast<size_t>(h)];
      auto& diag = hole_diag[static_cast<size_t>(h)];
      std::array<std::pair<Vertex, std::int64_t>, 2 * kMaxDim> inc;
      for (size_t bx = 0; bx < bdry.size(); ++bx) {
        Vertex x = bdry[bx];
        std::int32_t xi_local = local[static_cast<size_t>(x)];
        if (xi_local < 0) continue;  // boundary vertex outside the window
        int cnt = incident_edges(spec, x, inc);
        for (int i = 0; i < cnt; ++i) {
          double wxz = env.values[static_cast<size_t>(inc[i].second)];
          if (wxz <= 0.0) continue;
          auto zit = hole_idx.find(inc[i].first);
          if (zit == hole_idx.end()) continue;
          for (size_t by = 0; by < bdry.size(); ++by) {
            double hz = H(zit->second, static_cast<std::int64_t>(by));
            if (hz <= 0.0) continue;
            Vertex y = bdry[by];
            double contrib = wxz * hz;
            if (y == x) {
              diag.emplace_back(xi_local, contrib);
              continue;
            }
            std::int32_t yj = local[static_cast<size_t>(y)];
            if (yj < 0) continue;
            // Each unordered pair is accumulated from both endpoints; the
            // two sides are independent harmonic estimates of the same
            // symmetric weight and their gap is the symmetry residual.
            if (xi_local < yj)
              ents.push_back({xi_local, yj, contrib, 0.0, partial, 0});
            else
              ents.push_back({yj, xi_local, 0.0, contrib, partial, 0});
          }
        }
      }
    } catch (const std::exception& e) {
#pragma omp critical
      hole_error[static_cast<size_t>(h)] = e.what();
    }
  }

  for (std::int64_t h = 0; h < nholes; ++h)
    if (!hole_error[static_cast<size_t>(h)].empty())
      throw std::runtime_error("hole " + std::to_string(h) + ": " + hole_error[static_cast<size_t>(h)]);

  for (std::int64_t h = 0; h < nholes; ++h) {
    for (auto& e : hole_entries[static_cast<size_t>(h)]) {
      e.seq = seq++;
      raw.push_back(e);
    }
    for (auto& dpair : hole_diag[static_cast<size_t>(h)])
      out.return_mass[static_cast<size_t>(dpair.first)] += dpair.second;
  }

  std::sort(raw.begin(), raw.end(), [](const RawEntry& a, const RawEntry& b) {
    if (a.i != b.i) return a.i < b.i;
    if (a.j != b.j) return a.j < b.j;
    return a.seq < b.seq;
  });
  size_t k = 0;
  while (k < raw.size()) {
    double side_i = 0.0, side_j = 0.0;
    bool partial = false;
    size_t begin = k;
    while (k < raw.size() && raw[k].i == raw[begin].i && raw[k].j == raw[begin].j) {
      side_i += raw[k].side_i;
      side_j += raw[k].side_j;
      partial = partial || raw[k].partial;
      ++k;
    }
    out.entries.push_back({raw[begin].i, raw[begin].j, 0.5 * (side_i + side_j),
                           std::abs(side_i - side_j), partial});
  }
  return out;
}

double dirichlet_form(const EffectiveWeights& weights, const std::vector<double>& f) {
  if (f.size() != weights.vertices.size())
    throw std::invalid_argument("dirichlet_form: f has wrong size");
  double s = 0.0;
  for (const auto& e : weights.entries) {
    double df = f[static_cast<size_t>(e.i)] - f[static_cast<size_t>(e.j)];
    s += e.w * df * df;
  }
  return s;
}

double dirichlet_form_mask(const EdgeMask& mask, const std::vector<Vertex>& comp,
                           const std::vector<double>& f) {
  if (f.size() != comp.size()) throw std::invalid_argument("dirichlet_form_mask: f has wrong size");
  const LatticeSpec& spec = mask.spec;
  std::unordered_map<Vertex, size_t> idx;
  idx.reserve(comp.size());
  for (size_t k = 0; k < comp.size(); ++k) idx[comp[k]] = k;
  double s = 0.0;
  for (size_t k = 0; k < comp.size(); ++k) {
    Vertex x = comp[k];
    for (int axis = 0; axis < spec.d; ++axis) {
      if (!spec.edge_exists(x, axis)) continue;
      if (!mask.open[static_cast<size_t>(edge_slot(spec, x, axis))]) continue;
      auto it = idx.find(spec.neighbor(x, axis, +1));
      if (it == idx.end()) continue;
      double df = f[k] - f[it->second];
      s += df * df;
    }
  }
  return s;
}

}  // namespace rcm
