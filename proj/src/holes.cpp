#include "rcm/holes.hpp"

#include <algorithm>
#include <deque>
#include <map>
#include <queue>
#include <stdexcept>

#include "rcm/rng.hpp"

namespace rcm {

XiStructure build_xi_structure(const Environment& env, double xi) {
  XiStructure xs;
  xs.xi = xi;
  xs.alpha = threshold_mask(env, 0.0);
  xs.alpha_prime = threshold_mask(env, xi);
  xs.alpha_labeling = label_clusters(env.spec, xs.alpha);
  xs.prime_labeling = label_clusters(env.spec, xs.alpha_prime);
  xs.alpha_giant = giant_cluster(xs.alpha_labeling);
  if (xs.alpha_giant.size <= 1)
    throw std::runtime_error("degenerate environment: giant alpha-cluster is trivial");

  // C^xi proxy: the largest alpha'-cluster inside the giant alpha-cluster.
  // Every alpha'-cluster sits inside a single alpha-cluster since alpha' is
  // a subset of alpha edgewise.
  const std::int64_t n = env.spec.vertex_count();
  std::vector<std::int64_t> size_in_giant(xs.prime_labeling.sizes.size(), 0);
  for (Vertex v = 0; v < n; ++v) {
    if (xs.alpha_labeling.label[v] == xs.alpha_giant.id)
      ++size_in_giant[static_cast<size_t>(xs.prime_labeling.label[v])];
  }
  for (std::int32_t id = 0; id < xs.prime_labeling.cluster_count(); ++id) {
    if (size_in_giant[static_cast<size_t>(id)] > xs.cxi_size) {
      xs.cxi_id = id;
      xs.cxi_size = size_in_giant[static_cast<size_t>(id)];
    }
  }

  // Holes: grid-connected components of (giant alpha-cluster) \ C^xi.
  xs.hole_of.assign(static_cast<size_t>(n), -1);
  std::array<std::pair<Vertex, std::int64_t>, 2 * kMaxDim> inc;
  std::vector<Vertex> stack;
  for (Vertex s = 0; s < n; ++s) {
    if (xs.hole_of[s] >= 0) continue;
    if (!xs.in_alpha_giant(s) || xs.in_cxi(s)) continue;
    std::int32_t idx = static_cast<std::int32_t>(xs.holes.holes.size());
    xs.holes.holes.emplace_back();
    xs.holes.adjacency.emplace_back();
    auto& hole = xs.holes.holes.back();
    auto& adj = xs.holes.adjacency.back();
    xs.hole_of[s] = idx;
    stack.push_back(s);
    while (!stack.empty()) {
      Vertex v = stack.back();
      stack.pop_back();
      hole.push_back(v);
      int cnt = incident_edges(env.spec, v, inc);
      for (int i = 0; i < cnt; ++i) {
        Vertex w = inc[i].first;
        if (xs.in_cxi(w)) {
          adj.push_back(w);
        } else if (xs.hole_of[w] < 0 && xs.in_alpha_giant(w)) {
          xs.hole_of[w] = idx;
          stack.push_back(w);
        }
      }
    }
    std::sort(hole.begin(), hole.end());
    std::sort(adj.begin(), adj.end());
    adj.erase(std::unique(adj.begin(), adj.end()), adj.end());
  }
  return xs;
}

HoleSet find_holes(const Environment& env, double xi) {
  return build_xi_structure(env, xi).holes;
}

std::vector<Vertex> interior_boundary(const std::vector<Vertex>& A, const LatticeSpec& spec) {
  std::vector<Vertex> sorted = A;
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  auto in_A = [&](Vertex v) {
    return std::binary_search(sorted.begin(), sorted.end(), v);
  };
  std::vector<Vertex> out;
  std::array<std::pair<Vertex, std::int64_t>, 2 * kMaxDim> inc;
  for (Vertex v : sorted) {
    int cnt = incident_edges(spec, v, inc);
    for (int i = 0; i < cnt; ++i) {
      if (!in_A(inc[i].first)) {
        out.push_back(v);
        break;
      }
    }
  }
  return out;
}

namespace {

// Offsets with 0 < |delta|_2 <= l (closed convention).
std::vector<Coords> ball_offsets(int d, double l) {
  std::vector<Coords> out;
  std::int64_t fl = static_cast<std::int64_t>(std::floor(l));
  if (fl < 1) return out;
  Coords delta{};
  std::vector<std::int64_t> idx(static_cast<size_t>(d), -fl);
  while (true) {
    double norm2 = 0;
    bool zero = true;
    for (int k = 0; k < d; ++k) {
      norm2 += static_cast<double>(idx[k]) * static_cast<double>(idx[k]);
      if (idx[k] != 0) zero = false;
    }
    if (!zero && norm2 <= l * l + 1e-12) {
      for (int k = 0; k < d; ++k) delta[k] = idx[k];
      out.push_back(delta);
    }
    int k = 0;
    while (k < d && ++idx[k] > fl) idx[k++] = -fl;
    if (k == d) break;
  }
  return out;
}

// Steps from v by delta, honoring the boundary. Returns -1 off a free edge.
Vertex step_offset(const LatticeSpec& spec, Vertex v, const Coords& delta) {
  Coords c = spec.decode(v);
  for (int k = 0; k < spec.d; ++k) {
    std::int64_t x = c[k] + delta[k];
    if (spec.boundary == Boundary::torus) {
      x %= spec.L;
      if (x < 0) x += spec.L;
    } else if (x < 0 || x >= spec.L) {
      return -1;
    }
    c[k] = x;
  }
  return spec.encode(c);
}

}  // namespace

std::vector<std::vector<Vertex>> l_connected_components(const std::vector<Vertex>& S, double l,
                                                        const LatticeSpec& spec) {
  if (!(l > 1.0)) throw std::invalid_argument("l_connected_components: l must be > 1");
  std::vector<Vertex> sorted = S;
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  auto offsets = ball_offsets(spec.d, l);
  auto member = [&](Vertex v) {
    return std::binary_search(sorted.begin(), sorted.end(), v);
  };
  std::vector<std::vector<Vertex>> comps;
  std::vector<std::uint8_t> visited(sorted.size(), 0);
  std::vector<Vertex> stack;
  for (size_t i = 0; i < sorted.size(); ++i) {
    if (visited[i]) continue;
    visited[i] = 1;
    comps.emplace_back();
    auto& comp = comps.back();
    stack.push_back(sorted[i]);
    while (!stack.empty()) {
      Vertex v = stack.back();
      stack.pop_back();
      comp.push_back(v);
      for (const auto& delta : offsets) {
        Vertex w = step_offset(spec, v, delta);
        if (w < 0 || !member(w)) continue;
        size_t j = static_cast<size_t>(
            std::lower_bound(sorted.begin(), sorted.end(), w) - sorted.begin());
        if (!visited[j]) {
          visited[j] = 1;
          stack.push_back(w);
        }
      }
    }
    std::sort(comp.begin(), comp.end());
  }
  return comps;
}

namespace {

// BFS over the distance-1 graph: alpha'-edges plus per-hole cliques, the
// latter expanded lazily (a hole's clique only needs one expansion).
std::vector<std::int64_t> chem_bfs(const XiStructure& xs, Vertex source) {
  const LatticeSpec& spec = xs.alpha_prime.spec;
  const std::int64_t n = spec.vertex_count();
  std::vector<std::int64_t> dist(static_cast<size_t>(n), kUnreachable);

  // vertex -> holes it borders (CSR built from adjacency lists)
  std::vector<std::int32_t> hole_count(static_cast<size_t>(n), 0);
  for (const auto& adj : xs.holes.adjacency)
    for (Vertex v : adj) ++hole_count[static_cast<size_t>(v)];
  std::vector<std::int64_t> offset(static_cast<size_t>(n) + 1, 0);
  for (std::int64_t v = 0; v < n; ++v) offset[v + 1] = offset[v] + hole_count[v];
  std::vector<std::int32_t> hole_list(static_cast<size_t>(offset[n]));
  std::vector<std::int64_t> cursor(offset.begin(), offset.end() - 1);
  for (std::int32_t h = 0; h < static_cast<std::int32_t>(xs.holes.adjacency.size()); ++h)
    for (Vertex v : xs.holes.adjacency[h]) hole_list[static_cast<size_t>(cursor[v]++)] = h;

  std::vector<std::uint8_t> hole_done(xs.holes.holes.size(), 0);
  std::queue<Vertex> queue;
  dist[source] = 0;
  queue.push(source);
  std::array<std::pair<Vertex, std::int64_t>, 2 * kMaxDim> inc;
  while (!queue.empty()) {
    Vertex v = queue.front();
    queue.pop();
    std::int64_t dv = dist[v];
    int cnt = incident_edges(spec, v, inc);
    for (int i = 0; i < cnt; ++i) {
      if (!xs.alpha_prime.open[static_cast<size_t>(inc[i].second)]) continue;
      Vertex w = inc[i].first;
      if (dist[w] < 0) {
        dist[w] = dv + 1;
        queue.push(w);
      }
    }
    for (std::int64_t k = offset[v]; k < offset[v + 1]; ++k) {
      std::int32_t h = hole_list[static_cast<size_t>(k)];
      if (hole_done[static_cast<size_t>(h)]) continue;
      hole_done[static_cast<size_t>(h)] = 1;
      for (Vertex w : xs.holes.adjacency[static_cast<size_t>(h)]) {
        if (dist[w] < 0) {
          dist[w] = dv + 1;
          queue.push(w);
        }
      }
    }
  }
  return dist;
}

}  // namespace

std::vector<std::int64_t> chemical_distances_from(const XiStructure& xs, Vertex source) {
  if (!xs.in_cxi(source)) throw std::domain_error("chemical distance: source not in C^xi");
  return chem_bfs(xs, source);
}

std::int64_t chemical_distance(const XiStructure& xs, Vertex x, Vertex y) {
  if (!xs.in_cxi(x) || !xs.in_cxi(y))
    throw std::domain_error("chemical distance: endpoint not in C^xi");
  if (x == y) return 0;
  return chem_bfs(xs, x)[static_cast<size_t>(y)];
}

SiteField sample_site_field(const LatticeSpec& spec, double r, std::uint64_t seed) {
  if (!(r >= 0.0 && r <= 1.0)) throw std::invalid_argument("site parameter must be in [0,1]");
  SiteField f;
  f.spec = spec;
  f.r = r;
  std::int64_t n = spec.vertex_count();
  f.open.assign(static_cast<size_t>(n), 0);
  for (std::int64_t v = 0; v < n; ++v)
    f.open[static_cast<size_t>(v)] =
        u01_open_closed(counter_hash(seed, static_cast<std::uint64_t>(v))) <= r ? 1 : 0;
  return f;
}

std::int64_t min_open_sites_on_path(const SiteField& field, Vertex x, Vertex y, double l) {
  const LatticeSpec& spec = field.spec;
  if (x == y) return field.open[static_cast<size_t>(x)] ? 1 : 0;
  auto offsets = ball_offsets(spec.d, l);
  if (offsets.empty()) throw std::invalid_argument("min_open_sites_on_path: l too small");
  const std::int64_t n = spec.vertex_count();
  constexpr std::int64_t inf = std::numeric_limits<std::int64_t>::max();
  std::vector<std::int64_t> cost(static_cast<size_t>(n), inf);
  std::deque<Vertex> dq;
  cost[static_cast<size_t>(x)] = field.open[static_cast<size_t>(x)] ? 1 : 0;
  dq.push_back(x);
  while (!dq.empty()) {
    Vertex v = dq.front();
    dq.pop_front();
    if (v == y) return cost[static_cast<size_t>(v)];
    for (const auto& delta : offsets) {
      Vertex w = step_offset(spec, v, delta);
      if (w < 0) continue;
      std::int64_t weight = field.open[static_cast<size_t>(w)] ? 1 : 0;
      std::int64_t c = cost[static_cast<size_t>(v)] + weight;
      if (c < cost[static_cast<size_t>(w)]) {
        cost[static_cast<size_t>(w)] = c;
        if (weight == 0) dq.push_front(w); else dq.push_back(w);
      }
    }
  }
  return cost[static_cast<size_t>(y)];
}

HoleVolumeStats hole_volume_stats(const HoleSet& holes, std::int64_t n, const LatticeSpec& spec) {
  HoleVolumeStats out;
  Coords center = spec.decode(spec.center_vertex());
  std::map<std::int64_t, std::int64_t> hist;
  for (const auto& hole : holes.holes) {
    auto vol = static_cast<std::int64_t>(hole.size());
    out.max_volume = std::max(out.max_volume, vol);
    ++hist[vol];
    bool intersects = false;
    for (Vertex v : hole) {
      Coords c = spec.decode(v);
      bool inside = true;
      for (int k = 0; k < spec.d; ++k) {
        std::int64_t dk = c[k] - center[k];
        if (dk < -n || dk > n) {
          inside = false;
          break;
        }
      }
      if (inside) {
        intersects = true;
        break;
      }
    }
    if (intersects) ++out.count_intersecting_window;
  }
  out.histogram.assign(hist.begin(), hist.end());
  return out;
}

}  // namespace rcm
