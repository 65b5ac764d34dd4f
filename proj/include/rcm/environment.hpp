#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rcm/lattice.hpp"

namespace rcm {

// i.i.d. conductance law on [0,1].
struct ConductanceLaw {
  enum class Kind { constant, bernoulli, two_point, zero_uniform_mixture, polynomial_tail };

  Kind kind = Kind::constant;
  double c = 1.0;    // constant value
  double q = 1.0;    // success probability (bernoulli / two_point / mixture)
  double lo = 0.0;   // two_point low value
  double hi = 1.0;   // two_point high value
  double gamma = 1.0;  // polynomial tail exponent, P(w <= a) = a^gamma

  static ConductanceLaw constant(double value);
  static ConductanceLaw bernoulli(double q);
  static ConductanceLaw two_point(double q, double lo, double hi);
  static ConductanceLaw zero_uniform_mixture(double q);
  static ConductanceLaw polynomial_tail(double gamma);

  void validate() const;

  // Canonical tag, also used as the --law CLI syntax.
  std::string tag() const;
  static ConductanceLaw parse(const std::string& tag);

  // Probability of a strictly positive conductance (the q of percolation).
  double positive_probability() const;

  // One i.i.d. draw from a uniform (0,1] variate.
  double draw(double u) const;
};

// Immutable after construction; one double per (vertex, positive axis) slot,
// nonexistent free-boundary slots held at zero and excluded from iteration.
struct Environment {
  LatticeSpec spec;
  std::vector<double> values;  // edge slot -> conductance in [0,1]
  std::string law_tag;
  std::uint64_t seed = 0;

  double conductance_slot(std::int64_t slot) const { return values[slot]; }
  double conductance(Vertex v, int axis) const { return values[edge_slot(spec, v, axis)]; }

  // Conductance between lattice neighbors x,y (same value from either side).
  double conductance_between(Vertex x, Vertex y) const;

  // n^w(x) = sum of incident conductances; 0 for isolated vertices.
  double vertex_weight(Vertex x) const;
};

// One i.i.d. draw per edge; bit-identical for identical (spec, law, seed),
// independent of thread count.
Environment sample_environment(const LatticeSpec& spec, const ConductanceLaw& law,
                               std::uint64_t seed);
Environment sample_environment_serial(const LatticeSpec& spec, const ConductanceLaw& law,
                                      std::uint64_t seed);

// mask(e) = [w(e) >= xi] for xi > 0; strict positivity (the alpha field) at
// xi = 0.
EdgeMask threshold_mask(const Environment& env, double xi);

double weight_at(const Environment& env, Vertex x);

// "RCME" binary format, bit-exact round trip.
void write_environment(const Environment& env, const std::string& path);
Environment read_environment(const std::string& path);

}  // namespace rcm
