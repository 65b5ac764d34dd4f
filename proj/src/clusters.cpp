#include "rcm/clusters.hpp"

#include <numeric>
#include <stdexcept>

namespace rcm {

namespace {

struct UnionFind {
  std::vector<std::int64_t> parent;

  explicit UnionFind(std::int64_t n) : parent(static_cast<size_t>(n)) {
    std::iota(parent.begin(), parent.end(), std::int64_t{0});
  }

  std::int64_t find(std::int64_t x) {
    std::int64_t root = x;
    while (parent[root] != root) root = parent[root];
    while (parent[x] != root) {
      std::int64_t next = parent[x];
      parent[x] = root;
      x = next;
    }
    return root;
  }

  void unite(std::int64_t a, std::int64_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    // Smaller vertex id wins, so roots are cluster minima.
    if (a < b) parent[b] = a; else parent[a] = b;
  }
};

ClusterLabeling compress(const LatticeSpec& spec, std::vector<std::int64_t>& root_of) {
  std::int64_t n = spec.vertex_count();
  ClusterLabeling out;
  out.spec = spec;
  out.label.assign(static_cast<size_t>(n), -1);
  std::int32_t next_id = 0;
  for (std::int64_t v = 0; v < n; ++v) {
    std::int64_t r = root_of[v];
    if (out.label[r] < 0) {
      out.label[r] = next_id++;
      out.sizes.push_back(0);
    }
    out.label[v] = out.label[r];
    ++out.sizes[out.label[v]];
  }
  return out;
}

}  // namespace

ClusterLabeling label_clusters(const LatticeSpec& spec, const EdgeMask& mask) {
  if (!(mask.spec == spec)) throw std::invalid_argument("label_clusters: mask/spec mismatch");
  std::int64_t n = spec.vertex_count();
  UnionFind uf(n);
  for (Vertex v = 0; v < n; ++v) {
    for (int axis = 0; axis < spec.d; ++axis) {
      if (!spec.edge_exists(v, axis)) continue;
      if (!mask.open[static_cast<size_t>(edge_slot(spec, v, axis))]) continue;
      uf.unite(v, spec.neighbor(v, axis, +1));
    }
  }
  std::vector<std::int64_t> root_of(static_cast<size_t>(n));
  for (std::int64_t v = 0; v < n; ++v) root_of[v] = uf.find(v);
  return compress(spec, root_of);
}

ClusterLabeling label_clusters_reference(const LatticeSpec& spec, const EdgeMask& mask) {
  if (!(mask.spec == spec)) throw std::invalid_argument("label_clusters: mask/spec mismatch");
  std::int64_t n = spec.vertex_count();
  std::vector<std::int64_t> root_of(static_cast<size_t>(n), -1);
  std::vector<Vertex> stack;
  std::array<std::pair<Vertex, std::int64_t>, 2 * kMaxDim> inc;
  for (Vertex s = 0; s < n; ++s) {
    if (root_of[s] >= 0) continue;
    root_of[s] = s;
    stack.push_back(s);
    while (!stack.empty()) {
      Vertex v = stack.back();
      stack.pop_back();
      int cnt = incident_edges(spec, v, inc);
      for (int i = 0; i < cnt; ++i) {
        if (!mask.open[static_cast<size_t>(inc[i].second)]) continue;
        Vertex w = inc[i].first;
        if (root_of[w] < 0) {
          root_of[w] = s;
          stack.push_back(w);
        }
      }
    }
  }
  return compress(spec, root_of);
}

GiantCluster giant_cluster(const ClusterLabeling& labeling) {
  if (labeling.sizes.empty()) throw std::invalid_argument("giant_cluster: empty labeling");
  GiantCluster g;
  for (std::int32_t id = 0; id < labeling.cluster_count(); ++id) {
    if (labeling.sizes[id] > g.size) {
      g.id = id;
      g.size = labeling.sizes[id];
    }
  }
  g.density = static_cast<double>(g.size) / static_cast<double>(labeling.spec.vertex_count());
  g.deep_subcritical = g.density < 1e-3;
  return g;
}

}  // namespace rcm
