#pragma once

// Numeric statistics helpers: regularized incomplete gamma (and the
// chi-square CDF built on it), normal CDF, a two-sample
// Kolmogorov-Smirnov test and Wilson score intervals.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace psh {

// Phi(x), standard normal CDF.
inline double normal_cdf(double x) {
  return 0.5 * std::erfc(-x / std::sqrt(2.0));
}

namespace detail {

// Lower regularized incomplete gamma P(a, x) by its power series,
// P(a,x) = x^a e^-x / Gamma(a+1) * sum x^n / ((a+1)...(a+n)).
// Converges fast for x < a + 1.
inline double gamma_p_series(double a, double x) {
  double ap = a;
  double term = 1.0 / a;
  double sum = term;
  for (int n = 0; n < 500; ++n) {
    ap += 1.0;
    term *= x / ap;
    sum += term;
    if (std::fabs(term) < std::fabs(sum) * 1e-16)
      return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
  }
  throw std::runtime_error("gamma_p: series failed to converge");
}

// Upper regularized Q(a, x) by Lentz's method on the continued fraction
// Q(a,x) = x^a e^-x / Gamma(a) * 1/(x+1-a- 1*(1-a)/(x+3-a- ...)).
// Converges fast for x >= a + 1.
inline double gamma_q_contfrac(double a, double x) {
  const double tiny = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i <= 500; ++i) {
    const double an = -double(i) * (double(i) - a);
    b += 2.0;
    d = an * d + b;
    if (std::fabs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::fabs(delta - 1.0) < 1e-16)
      return h * std::exp(-x + a * std::log(x) - std::lgamma(a));
  }
  throw std::runtime_error("gamma_q: continued fraction failed to converge");
}

}  // namespace detail

// Regularized lower incomplete gamma P(a, x), absolute accuracy ~1e-14.
inline double gamma_p(double a, double x) {
  if (a <= 0.0) throw std::invalid_argument("gamma_p: a must be positive");
  if (x < 0.0) throw std::invalid_argument("gamma_p: x must be nonnegative");
  if (x == 0.0) return 0.0;
  if (x < a + 1.0) return detail::gamma_p_series(a, x);
  return 1.0 - detail::gamma_q_contfrac(a, x);
}

// P(chi^2_k < x).
inline double chi2_cdf(double k, double x) {
  if (x <= 0.0) return 0.0;
  return gamma_p(k / 2.0, x / 2.0);
}

// --- Kolmogorov-Smirnov ----------------------------------------------------

// Asymptotic survival function of the KS statistic,
// Q(t) = 2 sum_{k>=1} (-1)^{k-1} exp(-2 k^2 t^2).
inline double ks_pvalue_asymptotic(double t) {
  if (t < 1e-8) return 1.0;
  double sum = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = 2.0 * std::exp(-2.0 * double(k) * double(k) * t * t);
    sum += (k % 2 == 1) ? term : -term;
    if (term < 1e-12) break;
  }
  return std::clamp(sum, 0.0, 1.0);
}

struct KsResult {
  double statistic;  // sup |F1 - F2|
  double pvalue;     // asymptotic
};

inline KsResult ks_two_sample(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty())
    throw std::invalid_argument("ks_two_sample: empty sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = double(a.size()), nb = double(b.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    d = std::max(d, std::fabs(double(i) / na - double(j) / nb));
  }
  const double t = std::sqrt(na * nb / (na + nb)) * d;
  return {d, ks_pvalue_asymptotic(t)};
}

// --- Wilson score interval --------------------------------------------------

struct WilsonInterval {
  double lo;
  double hi;
  double half_width;
};

inline WilsonInterval wilson_interval(std::uint64_t successes,
                                      std::uint64_t trials,
                                      double z = 1.959963984540054) {
  if (trials == 0) throw std::invalid_argument("wilson_interval: no trials");
  const double n = double(trials);
  const double p = double(successes) / n;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / n;
  const double center = (p + z2 / (2.0 * n)) / denom;
  const double half =
      z / denom * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n));
  return {std::max(0.0, center - half), std::min(1.0, center + half), half};
}

}  // namespace psh
