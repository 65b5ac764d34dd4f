#pragma once

#include <cstdint>
#include <vector>

#include "rcm/spectral.hpp"

namespace rcm {

// Exact transition probabilities by uniformization at rate 1:
// P_x(X(t)=.) = sum_k e^{-t} t^k/k! P^k(x,.), truncated when the Poisson
// tail drops below tail_eps. Exact for this model since all waits are Exp(1).
std::vector<double> heat_kernel_exact(const SymmetricChain& chain, std::int64_t state_index,
                                      double t, double tail_eps = 1e-12);

// On-diagonal values P_x(X(t)=x) for a whole grid of times in one pass.
std::vector<double> on_diagonal_kernel(const SymmetricChain& chain, std::int64_t state_index,
                                       const std::vector<double>& times,
                                       double tail_eps = 1e-12);

// Stationary probability at a state: n(x) / sum n.
double stationary_probability(const SymmetricChain& chain, std::int64_t state_index);

}  // namespace rcm
