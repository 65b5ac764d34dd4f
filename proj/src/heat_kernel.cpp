#include "rcm/heat_kernel.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace rcm {

namespace {

// v <- P^T v, i.e. out[i] = diag_i v_i + sum_j W_ij / n_j * v_j.
// Row-parallel over outputs, so the accumulation order per entry is fixed
// and results are independent of thread count.
void apply_jump_transpose(const SymmetricChain& chain, const std::vector<double>& in,
                          std::vector<double>& out) {
  const auto m = static_cast<std::int64_t>(chain.states.size());
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < m; ++i) {
    double acc = chain.diag[static_cast<size_t>(i)] * in[static_cast<size_t>(i)];
    for (std::int64_t k = chain.row_ptr[static_cast<size_t>(i)];
         k < chain.row_ptr[static_cast<size_t>(i) + 1]; ++k) {
      auto j = static_cast<size_t>(chain.col[static_cast<size_t>(k)]);
      acc += chain.w[static_cast<size_t>(k)] / chain.n[j] * in[j];
    }
    out[static_cast<size_t>(i)] = acc;
  }
}

void check_inputs(const SymmetricChain& chain, std::int64_t state_index, double t) {
  if (t < 0.0) throw std::domain_error("heat kernel: negative time");
  if (t > 700.0) throw std::domain_error("heat kernel: t too large for plain Poisson weights");
  if (state_index < 0 || state_index >= chain.size())
    throw std::out_of_range("heat kernel: state index out of range");
}

}  // namespace

std::vector<double> heat_kernel_exact(const SymmetricChain& chain, std::int64_t state_index,
                                      double t, double tail_eps) {
  check_inputs(chain, state_index, t);
  const auto m = static_cast<size_t>(chain.size());
  std::vector<double> v(m, 0.0), next(m, 0.0), acc(m, 0.0);
  v[static_cast<size_t>(state_index)] = 1.0;
  double w = std::exp(-t);  // Poisson(t) weight at k
  double cum = w;
  for (size_t i = 0; i < m; ++i) acc[i] += w * v[i];
  std::int64_t k = 0;
  while (1.0 - cum > tail_eps || static_cast<double>(k) < t) {
    apply_jump_transpose(chain, v, next);
    std::swap(v, next);
    ++k;
    w *= t / static_cast<double>(k);
    cum += w;
    for (size_t i = 0; i < m; ++i) acc[i] += w * v[i];
    if (k > 1000000) throw std::runtime_error("heat kernel: truncation failed to converge");
  }
  return acc;
}

std::vector<double> on_diagonal_kernel(const SymmetricChain& chain, std::int64_t state_index,
                                       const std::vector<double>& times, double tail_eps) {
  if (times.empty()) return {};
  double t_max = *std::max_element(times.begin(), times.end());
  check_inputs(chain, state_index, t_max);
  for (double t : times) check_inputs(chain, state_index, t);

  const auto m = static_cast<size_t>(chain.size());
  const auto nt = times.size();
  std::vector<double> v(m, 0.0), next(m, 0.0);
  v[static_cast<size_t>(state_index)] = 1.0;
  std::vector<double> w(nt), cum(nt), out(nt, 0.0);
  for (size_t j = 0; j < nt; ++j) {
    w[j] = std::exp(-times[j]);
    cum[j] = w[j];
    out[j] = w[j] * v[static_cast<size_t>(state_index)];
  }
  std::int64_t k = 0;
  while (true) {
    bool done = 1.0 - *std::min_element(cum.begin(), cum.end()) <= tail_eps &&
                static_cast<double>(k) >= t_max;
    if (done) break;
    apply_jump_transpose(chain, v, next);
    std::swap(v, next);
    ++k;
    for (size_t j = 0; j < nt; ++j) {
      w[j] *= times[j] / static_cast<double>(k);
      cum[j] += w[j];
      out[j] += w[j] * v[static_cast<size_t>(state_index)];
    }
    if (k > 1000000) throw std::runtime_error("heat kernel: truncation failed to converge");
  }
  return out;
}

double stationary_probability(const SymmetricChain& chain, std::int64_t state_index) {
  double total = 0.0;
  for (double x : chain.n) total += x;
  return chain.n[static_cast<size_t>(state_index)] / total;
}

}  // namespace rcm
