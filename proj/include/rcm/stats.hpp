#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace rcm {

struct MeanSE {
  double mean = 0.0;
  double se = 0.0;
  std::int64_t count = 0;
};

// Sample mean with standard error from independent replicas.
MeanSE mean_se(const std::vector<double>& xs);

struct OlsFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_se = 0.0;
};

OlsFit ols_fit(const std::vector<double>& xs, const std::vector<double>& ys);

double normal_cdf(double x);

// Kolmogorov asymptotic tail Q(lambda) = 2 sum_{j>=1} (-1)^{j-1} e^{-2 j^2 lambda^2}.
double kolmogorov_q(double lambda);

struct KsResult {
  double d = 0.0;
  double p = 0.0;
  std::int64_t n = 0;
};

// Two-sided KS test against a continuous CDF, asymptotic p-value with the
// Stephens small-sample correction.
KsResult ks_test(std::vector<double> samples, const std::function<double(double)>& cdf);

// Exact central binomial confidence interval: smallest symmetric-tail
// [k_lo, k_hi] with P(k_lo <= Bin(n,p) <= k_hi) >= level.
struct BinomialCI {
  std::int64_t k_lo = 0;
  std::int64_t k_hi = 0;
};
BinomialCI binomial_exact_ci(std::int64_t n, double p, double level);

std::uint64_t fnv1a64(const std::string& data);

}  // namespace rcm
