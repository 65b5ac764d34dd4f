#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "rcm/effective.hpp"
#include "rcm/environment.hpp"
#include "rcm/holes.hpp"

namespace rcm {

// Poincare constant A_n = inverse spectral gap (time units) of the walk on
// the box [-n,n]^d around the lattice center, jumps outside forbidden,
// self-adjoint w.r.t. the measure with weights n^w(x).
struct SpectralReport {
  std::int64_t n = 0;
  std::int64_t component_size = 0;
  double gap = 0.0;
  double poincare_constant = 0.0;  // 1 / gap
  int lanczos_iterations = 0;
  double residual = 0.0;
};

// Symmetric jump chain on an explicit vertex set: off-diagonal weights W
// (CSR, symmetric), full normalization n per vertex, and the censoring
// stay-probability on the diagonal.
struct SymmetricChain {
  std::vector<Vertex> states;  // sorted global ids
  std::vector<std::int64_t> row_ptr;
  std::vector<std::int32_t> col;
  std::vector<double> w;
  std::vector<double> n;     // full n^w(x), including censored edges
  std::vector<double> diag;  // P(x,x) = 1 - sum_y W(x,y)/n(x)

  std::int64_t size() const { return static_cast<std::int64_t>(states.size()); }
};

// Raw walk restricted to the component of the alpha-giant inside the box
// that contains the center-nearest giant vertex.
SymmetricChain box_chain_raw(const Environment& env, std::int64_t n);

// Time-changed walk: effective weights restricted to the component of
// C^xi inside the box containing the center-nearest C^xi vertex.
SymmetricChain box_chain_xi(const Environment& env, const XiStructure& xs,
                            const EffectiveWeights& weights, std::int64_t n);

// Full-state chain of the raw walk (frozen vertices keep a unit self-loop);
// used by the exact heat kernel.
SymmetricChain full_chain(const Environment& env);

// Chain of the time-changed process over all weight vertices.
SymmetricChain chain_from_weights(const EffectiveWeights& weights);

// Smallest nonzero eigenvalue of I - S where S is the similarity-symmetrized
// jump matrix; Lanczos with full reorthogonalization and exact deflation of
// the known top eigenvector sqrt(n).
SpectralReport spectral_gap(const SymmetricChain& chain, double tol = 1e-11,
                            std::uint64_t lanczos_seed = 12345);

SpectralReport poincare_constant_raw(const Environment& env, std::int64_t n);
SpectralReport poincare_constant_xi(const Environment& env, double xi, std::int64_t n);

}  // namespace rcm
