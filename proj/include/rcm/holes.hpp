#pragma once

#include <cstdint>
#include <vector>

#include "rcm/clusters.hpp"
#include "rcm/environment.hpp"
#include "rcm/lattice.hpp"

namespace rcm {

// Connected components (grid adjacency) of C(alpha) \ C^xi, each with the
// set of C^xi vertices lattice-adjacent to it.
struct HoleSet {
  std::vector<std::vector<Vertex>> holes;      // sorted vertex lists
  std::vector<std::vector<Vertex>> adjacency;  // sorted C^xi vertices touching hole i
};

// Everything derived from one (environment, xi) pair: both masks, both
// labelings, the giant cluster proxies and the holes. Built once per
// environment and shared read-only across walkers / solvers.
struct XiStructure {
  double xi = 0.0;
  EdgeMask alpha;        // positivity mask
  EdgeMask alpha_prime;  // threshold mask at xi
  ClusterLabeling alpha_labeling;
  ClusterLabeling prime_labeling;
  GiantCluster alpha_giant;             // C(omega) proxy
  std::int32_t cxi_id = -1;             // id (in prime_labeling) of the C^xi proxy
  std::int64_t cxi_size = 0;
  HoleSet holes;
  std::vector<std::int32_t> hole_of;    // vertex -> hole index, -1 elsewhere

  bool in_alpha_giant(Vertex v) const { return alpha_labeling.label[v] == alpha_giant.id; }
  bool in_cxi(Vertex v) const { return prime_labeling.label[v] == cxi_id; }
};

XiStructure build_xi_structure(const Environment& env, double xi);

HoleSet find_holes(const Environment& env, double xi);

// {x in A : some lattice neighbor y of x with y not in A}. A is a sorted
// unique vertex list; result is sorted.
std::vector<Vertex> interior_boundary(const std::vector<Vertex>& A, const LatticeSpec& spec);

// Partition of S under Euclidean-distance <= l adjacency (closed ball).
std::vector<std::vector<Vertex>> l_connected_components(const std::vector<Vertex>& S, double l,
                                                        const LatticeSpec& spec);

constexpr std::int64_t kUnreachable = -1;

// BFS distance in the auxiliary graph on C^xi: unit edges are alpha'-open
// lattice edges and pairs co-adjacent to one common hole.
std::int64_t chemical_distance(const XiStructure& xs, Vertex x, Vertex y);

// All chemical distances from a source (kUnreachable where not reached).
std::vector<std::int64_t> chemical_distances_from(const XiStructure& xs, Vertex source);

// Site percolation field of parameter r.
struct SiteField {
  LatticeSpec spec;
  std::vector<std::uint8_t> open;  // vertex -> 0/1
  double r = 0.0;
};

SiteField sample_site_field(const LatticeSpec& spec, double r, std::uint64_t seed);

// Minimum over l-nearest-neighbor paths from x to y of the number of open
// sites on the path, endpoints included. 0/1-node-weight shortest path.
std::int64_t min_open_sites_on_path(const SiteField& field, Vertex x, Vertex y, double l);

struct HoleVolumeStats {
  std::int64_t max_volume = 0;
  std::vector<std::pair<std::int64_t, std::int64_t>> histogram;  // (volume, count)
  std::int64_t count_intersecting_window = 0;
};

// Window is the centered box [-n,n]^d (center of the finite lattice standing
// in for the origin).
HoleVolumeStats hole_volume_stats(const HoleSet& holes, std::int64_t n, const LatticeSpec& spec);

}  // namespace rcm
