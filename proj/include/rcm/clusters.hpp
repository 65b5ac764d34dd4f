#pragma once

#include <cstdint>
#include <vector>

#include "rcm/lattice.hpp"

namespace rcm {

// Exact connected components of an open-edge subgraph. Every vertex gets a
// label; isolated vertices are singleton clusters. Ids are dense, assigned
// in order of each cluster's smallest vertex.
struct ClusterLabeling {
  LatticeSpec spec;
  std::vector<std::int32_t> label;   // vertex -> cluster id
  std::vector<std::int64_t> sizes;   // cluster id -> vertex count

  std::int64_t cluster_count() const { return static_cast<std::int64_t>(sizes.size()); }
};

struct GiantCluster {
  std::int32_t id = -1;
  std::int64_t size = 0;
  double density = 0.0;          // size / L^d
  bool deep_subcritical = false; // density < 1e-3, finite-size proxy is unreliable
};

// Union-find labeling.
ClusterLabeling label_clusters(const LatticeSpec& spec, const EdgeMask& mask);

// Independent flood-fill reference, kept for testing.
ClusterLabeling label_clusters_reference(const LatticeSpec& spec, const EdgeMask& mask);

// Largest cluster; ties broken by smallest id.
GiantCluster giant_cluster(const ClusterLabeling& labeling);

}  // namespace rcm
