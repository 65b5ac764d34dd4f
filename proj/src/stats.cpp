#include "rcm/stats.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace rcm {

MeanSE mean_se(const std::vector<double>& xs) {
  MeanSE out;
  out.count = static_cast<std::int64_t>(xs.size());
  if (xs.empty()) return out;
  double m = 0.0;
  for (double x : xs) m += x;
  m /= static_cast<double>(xs.size());
  out.mean = m;
  if (xs.size() >= 2) {
    double var = 0.0;
    for (double x : xs) var += (x - m) * (x - m);
    var /= static_cast<double>(xs.size() - 1);
    out.se = std::sqrt(var / static_cast<double>(xs.size()));
  }
  return out;
}

OlsFit ols_fit(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() != ys.size() || xs.size() < 2)
    throw std::invalid_argument("ols_fit: need >= 2 paired points");
  const auto n = static_cast<double>(xs.size());
  double mx = 0.0, my = 0.0;
  for (size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
  }
  if (sxx <= 0.0) throw std::invalid_argument("ols_fit: degenerate abscissae");
  OlsFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  if (xs.size() > 2) {
    double rss = 0.0;
    for (size_t i = 0; i < xs.size(); ++i) {
      double r = ys[i] - fit.intercept - fit.slope * xs[i];
      rss += r * r;
    }
    fit.slope_se = std::sqrt(rss / (n - 2.0) / sxx);
  }
  return fit;
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double kolmogorov_q(double lambda) {
  if (lambda <= 0.0) return 1.0;
  double sum = 0.0;
  for (int j = 1; j <= 100; ++j) {
    double term = 2.0 * ((j % 2 == 1) ? 1.0 : -1.0) *
                  std::exp(-2.0 * static_cast<double>(j) * static_cast<double>(j) * lambda * lambda);
    sum += term;
    if (std::abs(term) < 1e-16) break;
  }
  return std::min(1.0, std::max(0.0, sum));
}

KsResult ks_test(std::vector<double> samples, const std::function<double(double)>& cdf) {
  if (samples.size() < 8) throw std::invalid_argument("ks_test: too few samples");
  std::sort(samples.begin(), samples.end());
  const auto n = static_cast<double>(samples.size());
  double d = 0.0;
  for (size_t i = 0; i < samples.size(); ++i) {
    double f = cdf(samples[i]);
    double lo = static_cast<double>(i) / n;
    double hi = static_cast<double>(i + 1) / n;
    d = std::max(d, std::max(std::abs(f - lo), std::abs(hi - f)));
  }
  KsResult out;
  out.d = d;
  out.n = static_cast<std::int64_t>(samples.size());
  double sq = std::sqrt(n);
  out.p = kolmogorov_q((sq + 0.12 + 0.11 / sq) * d);
  return out;
}

namespace {

double binom_log_pmf(std::int64_t n, std::int64_t k, double p) {
  if (p <= 0.0) return k == 0 ? 0.0 : -1e300;
  if (p >= 1.0) return k == n ? 0.0 : -1e300;
  double nd = static_cast<double>(n), kd = static_cast<double>(k);
  return std::lgamma(nd + 1) - std::lgamma(kd + 1) - std::lgamma(nd - kd + 1) +
         kd * std::log(p) + (nd - kd) * std::log1p(-p);
}

}  // namespace

BinomialCI binomial_exact_ci(std::int64_t n, double p, double level) {
  // Symmetric-tail interval: trim at most (1-level)/2 from each tail.
  double tail = (1.0 - level) / 2.0;
  std::vector<double> pmf(static_cast<size_t>(n) + 1);
  for (std::int64_t k = 0; k <= n; ++k) pmf[static_cast<size_t>(k)] = std::exp(binom_log_pmf(n, k, p));
  BinomialCI ci;
  double acc = 0.0;
  std::int64_t k = 0;
  while (k <= n && acc + pmf[static_cast<size_t>(k)] <= tail) acc += pmf[static_cast<size_t>(k++)];
  ci.k_lo = k;
  acc = 0.0;
  k = n;
  while (k >= 0 && acc + pmf[static_cast<size_t>(k)] <= tail) acc += pmf[static_cast<size_t>(k--)];
  ci.k_hi = k;
  return ci;
}

std::uint64_t fnv1a64(const std::string& data) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

}  // namespace rcm
