#pragma once

#include <cstdint>
#include <vector>

#include "rcm/clusters.hpp"
#include "rcm/lattice.hpp"

namespace rcm {

// Disjoint tiling into boxes of side 2N+1 plus the concentric enlarged
// boxes of side 5N/2+1. The window is treated with free-boundary geometry;
// blocks whose box or enlarged box does not fit are colored black.
struct BoxGrid {
  LatticeSpec spec;
  std::int64_t N = 4;
  std::int64_t block_side = 9;      // 2N+1
  std::int64_t enlarged_side = 11;  // 5N/2+1
  std::int64_t blocks_per_axis = 0; // ceil(L / (2N+1)), partial blocks included
  std::int64_t block_count = 0;

  Coords block_coords(std::int64_t index) const;
  std::int64_t block_index(const Coords& bc) const;
  std::int64_t block_of_vertex(Vertex v) const;
};

enum class BoxColor : std::uint8_t { black = 0, grey = 1, pure_white = 2 };

struct BoxClassification {
  BoxGrid grid;
  std::vector<BoxColor> color;
  std::vector<std::uint8_t> immaculate;   // only ever set on pure_white blocks
  std::vector<std::uint8_t> interior;     // full 3^d neighborhood of complete blocks
  std::vector<std::vector<Vertex>> crossing_cluster;  // K_i (global ids), white blocks only

  bool is_white(std::int64_t b) const { return color[static_cast<size_t>(b)] != BoxColor::black; }

  // Fractions over interior blocks.
  double white_fraction() const;
  double pure_white_fraction() const;
  double immaculate_fraction() const;
};

struct ClassifyOptions {
  bool parallel = true;
  // "unique cluster" read strictly as: the enlarged box has exactly one
  // edge-bearing alpha-cluster (and it is crossing); default only requires
  // the crossing cluster to be unique.
  bool strict_uniqueness = false;
  // Check every subbox with side > N/10 instead of the strided grid.
  bool exhaustive_subboxes = false;
};

// Colors per the renormalization definitions: white iff the box holds an
// alpha-edge and the crossing event R_i holds; grey iff white and some
// giant-cluster edge touching the box has alpha' = 0; immaculate iff pure
// white with a fully pure-white 3^d block neighborhood.
BoxClassification classify_boxes(const EdgeMask& alpha, const EdgeMask& alpha_prime,
                                 std::int64_t N, const ClassifyOptions& options = {});

// Largest connected component (block-grid nearest-neighbor adjacency) of
// immaculate blocks; empty if none.
std::vector<std::int64_t> giant_immaculate_component(const BoxClassification& cls);

struct RenormalizedParams {
  std::int64_t N = 0;
  std::int64_t replicas = 0;
  std::int64_t interior_blocks = 0;
  double p_hat = 0.0;        // white fraction
  double p_hat_prime = 0.0;  // pure white fraction
  double p_hat_second = 0.0; // immaculate fraction
  double ci_hat = 0.0, ci_prime = 0.0, ci_second = 0.0;  // 99% binomial half-widths
  double se_hat = 0.0, se_prime = 0.0, se_second = 0.0;  // replica-level SEs
  // Reported (not asserted) domination-side relations.
  double theory_prime_from_hat = 0.0;   // p_hat * p^{e_N(d)}
  double theory_second_from_prime = 0.0;  // p_hat_prime^{3^d}
};

// Ensemble of (alpha, alpha') pairs: alpha ~ Bernoulli(q) bond percolation,
// alpha' keeps each alpha-edge independently with probability p.
RenormalizedParams estimate_renormalized_params(int d, std::int64_t window_side, double q,
                                                double p, std::int64_t N, std::int64_t replicas,
                                                std::uint64_t seed);

// The (alpha, alpha') sampler used by the estimator, exposed for tests.
std::pair<EdgeMask, EdgeMask> sample_mask_pair(const LatticeSpec& spec, double q, double p,
                                               std::uint64_t seed);

}  // namespace rcm
