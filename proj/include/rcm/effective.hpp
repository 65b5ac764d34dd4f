#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "rcm/environment.hpp"
#include "rcm/holes.hpp"
#include "rcm/lattice.hpp"

namespace rcm {

// Axis-aligned window (inclusive bounds); default is the whole lattice.
struct Window {
  bool full = true;
  Coords lo{};
  Coords hi{};

  static Window whole() { return Window{}; }
  static Window box(const Coords& lo, const Coords& hi) { return Window{false, lo, hi}; }
  bool contains(const LatticeSpec& spec, Vertex v) const;
};

// Sparse symmetric effective-conductance map on C^xi within a window.
// Entries are stored once per unordered pair (i < j, local indices).
struct EffectiveWeights {
  LatticeSpec spec;
  double xi = 0.0;

  struct Entry {
    std::int32_t i, j;
    double w;       // symmetric weight, mean of the two one-sided solves
    double asym;    // |x-side - y-side| residual of the harmonic solves
    bool partial;   // sourced from a hole that crosses the window edge
  };

  std::vector<Vertex> vertices;        // sorted C^xi vertices in the window
  std::vector<Entry> entries;          // sorted by (i, j)
  std::vector<double> n_full;          // n^w(x) per local vertex
  std::vector<double> return_mass;     // diagnostic diagonal of (2:rates)

  std::int32_t local_index(Vertex v) const;        // -1 if absent
  double weight_between(Vertex x, Vertex y) const;  // 0 if no entry
  // Off-diagonal effective weight sums per local vertex.
  std::vector<double> row_sums() const;
  double max_asymmetry() const;
};

struct EffectiveOptions {
  bool parallel = true;
  std::int64_t dense_hole_limit = 512;      // direct dense LU below this
  std::int64_t direct_hole_limit = 10000;   // sparse LU below this, BiCGSTAB above
};

// Exact computation of omega^xi: the direct jump term plus, per hole, the
// harmonic hitting distribution of the embedded chain solved as a linear
// system. The diagonal (excursion returning to its start) is discarded from
// the weights and reported separately in return_mass.
EffectiveWeights effective_conductances(const Environment& env, const XiStructure& xs,
                                        const Window& window = Window::whole(),
                                        const EffectiveOptions& options = {});
EffectiveWeights effective_conductances(const Environment& env, double xi,
                                        const Window& window = Window::whole(),
                                        const EffectiveOptions& options = {});

// Quadratic form sum_{i<j} w_ij (f_i - f_j)^2 over the stored pairs
// (equals the half-sum over ordered pairs). f is indexed like vertices.
double dirichlet_form(const EffectiveWeights& weights, const std::vector<double>& f);

// 0/1-weight variant over the alpha'-open edges within a vertex set.
double dirichlet_form_mask(const EdgeMask& mask, const std::vector<Vertex>& comp,
                           const std::vector<double>& f);

}  // namespace rcm
