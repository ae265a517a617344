#pragma once

// Reconstructive-privacy quantities: an adversary holding the transformed
// data has chance at most epsilon to recover the raw input (exactly, or to
// within an error radius delta). Covers random permutation (epsilon = 1/n!),
// random linear maps (chi-square upper bound on the mass of a delta-ball in
// the unobserved n-1 dimensions), and additive Gaussian noise, plus
// Monte-Carlo attack simulations that validate the analytic numbers.

#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "psh/permute.hpp"
#include "psh/rng.hpp"
#include "psh/stats.hpp"
#include "psh/tensor.hpp"

namespace psh {

using BigInt = boost::multiprecision::cpp_int;

struct PrivacyBound {
  double epsilon = 0.0;
  std::optional<double> delta;  // absent for exact-recovery bounds
  std::string assumptions;
  // log2(epsilon), finite even when epsilon underflows a double; log_form
  // flags that the double field is 0 only because of that underflow.
  double log2_epsilon = 0.0;
  bool log_form = false;
  // Exact value as exact_num / exact_den when the bound is a rational
  // (permutation case); both zero otherwise.
  BigInt exact_num = 0, exact_den = 0;
};

namespace detail {

inline BigInt factorial_big(std::size_t n) {
  BigInt f = 1;
  for (std::size_t i = 2; i <= n; ++i) f *= i;
  return f;
}

// log2 of a positive big integer: bit length plus the fractional part
// recovered from the top bits.
inline double log2_big(const BigInt& v) {
  if (v <= 0) throw std::domain_error("log2_big: positive input required");
  const auto bits = boost::multiprecision::msb(v);  // floor(log2 v)
  if (bits < 53) return std::log2(v.convert_to<double>());
  const BigInt top = v >> (bits - 52);  // 53 leading bits
  return double(bits - 52) + std::log2(top.convert_to<double>());
}

}  // namespace detail

// Recovery chance of a uniformly random permutation of n distinct values:
// exactly 1/n!. Above n = 170 the double underflows, so the bound is
// carried in log form (the exact rational is always present).
inline PrivacyBound permutation_privacy(std::size_t n) {
  if (n == 0) throw std::domain_error("permutation_privacy: n >= 1 required");
  PrivacyBound b;
  b.exact_num = 1;
  b.exact_den = detail::factorial_big(n);
  b.log2_epsilon = -detail::log2_big(b.exact_den);
  b.log_form = n > 170;
  b.epsilon = b.log_form ? 0.0 : 1.0 / b.exact_den.convert_to<double>();
  b.assumptions = "no auxiliary information; distinct entries";
  return b;
}

// Upper bound for a random linear map R^n -> R^m with i.i.d. standard
// normal data and map entries: the adversary's chance of landing within
// delta of the raw vector is below the mass of the delta-ball under a
// standard normal in the n-1 unobserved dimensions,
//   epsilon < P(chi2_{n-1} < delta^2).
// This is an upper bound, not the achievable rate; observed leakage is
// typically far smaller.
inline PrivacyBound linear_privacy_bound(std::size_t n, double delta) {
  if (n < 2)
    throw std::domain_error("linear_privacy_bound: n >= 2 required");
  if (!(delta > 0))
    throw std::domain_error("linear_privacy_bound: delta > 0 required");
  PrivacyBound b;
  b.epsilon = chi2_cdf(double(n - 1), delta * delta);
  b.delta = delta;
  b.log2_epsilon = b.epsilon > 0 ? std::log2(b.epsilon)
                                 : -std::numeric_limits<double>::infinity();
  b.log_form = b.epsilon == 0.0;
  b.assumptions =
      "data and map entries i.i.d. standard normal; upper bound only";
  return b;
}

// Additive Gaussian noise of scale sigma: guessing the observed value is
// within delta = k*sigma of the truth with chance Phi(k) - Phi(-k).
inline PrivacyBound noise_privacy(double sigma, double k) {
  if (!(sigma > 0) || !(k > 0))
    throw std::domain_error("noise_privacy: sigma > 0 and k > 0 required");
  PrivacyBound b;
  b.epsilon = normal_cdf(k) - normal_cdf(-k);
  b.delta = k * sigma;
  b.log2_epsilon = std::log2(b.epsilon);
  b.assumptions = "noise scale sigma known to the adversary";
  return b;
}

// Hypothesis count for an attacker holding m of n samples who tries to
// line them up with the transformed columns: C(n,m) * m! = n!/(n-m)!.
struct JoinAttackSpace {
  BigInt count;
  double log2;
};

inline JoinAttackSpace join_attack_space(std::size_t n, std::size_t m) {
  if (m > n) throw std::domain_error("join_attack_space: m <= n required");
  BigInt c = 1;
  for (std::size_t i = n - m + 1; i <= n; ++i) c *= i;
  return {c, c == 1 ? 0.0 : detail::log2_big(c)};
}

// --- Monte-Carlo attack simulation -------------------------------------------

enum class TransformKind : std::uint8_t { Permutation, Linear, Noise };
enum class AttackerStrategy : std::uint8_t { RandomGuess, BestKnown };

inline const char* transform_kind_name(TransformKind k) {
  switch (k) {
    case TransformKind::Permutation: return "permutation";
    case TransformKind::Linear: return "linear";
    case TransformKind::Noise: return "noise";
  }
  throw std::domain_error("bad TransformKind");
}

inline TransformKind transform_kind_from_name(const std::string& s) {
  if (s == "permutation") return TransformKind::Permutation;
  if (s == "linear") return TransformKind::Linear;
  if (s == "noise") return TransformKind::Noise;
  throw std::domain_error("unknown transform kind: " + s);
}

inline const char* attacker_strategy_name(AttackerStrategy s) {
  switch (s) {
    case AttackerStrategy::RandomGuess: return "random_guess";
    case AttackerStrategy::BestKnown: return "best_known";
  }
  throw std::domain_error("bad AttackerStrategy");
}

inline AttackerStrategy attacker_strategy_from_name(const std::string& s) {
  if (s == "random_guess") return AttackerStrategy::RandomGuess;
  if (s == "best_known") return AttackerStrategy::BestKnown;
  throw std::domain_error("unknown attacker strategy: " + s);
}

struct AttackParams {
  TransformKind kind = TransformKind::Permutation;
  AttackerStrategy strategy = AttackerStrategy::BestKnown;
  std::size_t n = 4;    // raw vector length (permutation, linear)
  std::size_t m = 3;    // transformed dimension (linear)
  double sigma = 1.0;   // noise scale (noise)
  double delta = 0.1;   // success radius (linear, noise)
};

struct AttackResult {
  std::size_t successes = 0;
  std::size_t trials = 0;
  double rate = 0.0;
  WilsonInterval interval;  // 95% by default
};

namespace detail {

// Gaussian elimination with partial pivoting on a dense m x m system.
inline std::vector<double> solve_linear_system(std::vector<double> a,
                                               std::vector<double> b) {
  const std::size_t m = b.size();
  for (std::size_t col = 0; col < m; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < m; ++r)
      if (std::fabs(a[r * m + col]) > std::fabs(a[piv * m + col])) piv = r;
    if (std::fabs(a[piv * m + col]) < 1e-12)
      throw std::runtime_error("solve_linear_system: singular matrix");
    if (piv != col) {
      for (std::size_t c = 0; c < m; ++c)
        std::swap(a[piv * m + c], a[col * m + c]);
      std::swap(b[piv], b[col]);
    }
    for (std::size_t r = col + 1; r < m; ++r) {
      const double f = a[r * m + col] / a[col * m + col];
      for (std::size_t c = col; c < m; ++c) a[r * m + c] -= f * a[col * m + c];
      b[r] -= f * b[col];
    }
  }
  std::vector<double> x(m);
  for (std::size_t ri = m; ri-- > 0;) {
    double s = b[ri];
    for (std::size_t c = ri + 1; c < m; ++c) s -= a[ri * m + c] * x[c];
    x[ri] = s / a[ri * m + ri];
  }
  return x;
}

// Least-norm preimage of y under A (m x n, m <= n): A^T (A A^T)^{-1} y.
inline std::vector<double> least_norm_preimage(const std::vector<double>& A,
                                               std::size_t m, std::size_t n,
                                               const std::vector<double>& y) {
  std::vector<double> gram(m * m, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < n; ++k) s += A[i * n + k] * A[j * n + k];
      gram[i * m + j] = s;
    }
  const std::vector<double> z = solve_linear_system(std::move(gram), y);
  std::vector<double> x(n, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    double s = 0.0;
    for (std::size_t i = 0; i < m; ++i) s += A[i * n + k] * z[i];
    x[k] = s;
  }
  return x;
}

inline bool permutation_trial(const AttackParams& p, Rng& rng) {
  // Raw data: n distinct reals. The adversary sees a uniformly shuffled
  // copy and outputs an ordering; success means exact recovery.
  const std::size_t n = p.n;
  std::vector<double> raw(n);
  for (std::size_t i = 0; i < n; ++i) raw[i] = rng.next_unit();
  const Permutation secret = Permutation::from_seed(rng.next_u64(), n);
  const std::vector<double> seen = [&] {
    Tensor t({n});
    for (std::size_t i = 0; i < n; ++i) t[i] = raw[i];
    return secret.apply(t).data();
  }();
  std::vector<double> guess = seen;
  if (p.strategy == AttackerStrategy::RandomGuess) {
    Tensor t({n});
    for (std::size_t i = 0; i < n; ++i) t[i] = seen[i];
    guess = Permutation::from_seed(rng.next_u64(), n).apply(t).data();
  }
  // best_known: with no auxiliary information nothing beats a fixed
  // ordering, so the adversary returns the observation as-is.
  for (std::size_t i = 0; i < n; ++i)
    if (guess[i] != raw[i]) return false;
  return true;
}

inline bool linear_trial(const AttackParams& p, Rng& rng) {
  const std::size_t n = p.n, m = p.m;
  std::vector<double> x(n), A(m * n);
  for (auto& v : x) v = rng.normal();
  for (auto& v : A) v = rng.normal();
  std::vector<double> y(m, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t k = 0; k < n; ++k) y[i] += A[i * n + k] * x[k];
  std::vector<double> guess;
  if (p.strategy == AttackerStrategy::BestKnown) {
    guess = least_norm_preimage(A, m, n, y);
  } else {
    guess.resize(n);
    for (auto& v : guess) v = rng.normal();
  }
  double d2 = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double d = guess[k] - x[k];
    d2 += d * d;
  }
  return d2 < p.delta * p.delta;
}

inline bool noise_trial(const AttackParams& p, Rng& rng) {
  const double x = rng.normal();
  const double seen = x + p.sigma * rng.normal();
  const double guess =
      p.strategy == AttackerStrategy::BestKnown ? seen : rng.normal();
  return std::fabs(guess - x) < p.delta;
}

}  // namespace detail

// Empirical recovery rate over independent trials. Each trial runs on its
// own substream derived from (base seed, trial index), so the estimate
// does not depend on execution order and trials can run concurrently.
inline AttackResult attack_simulate(const AttackParams& p, std::size_t trials,
                                    Rng& rng) {
  if (trials < 100)
    throw std::domain_error("attack_simulate: at least 100 trials");
  if (p.kind == TransformKind::Linear && (p.m == 0 || p.m > p.n))
    throw std::domain_error("attack_simulate: need 1 <= m <= n");
  if (p.kind == TransformKind::Permutation && p.n == 0)
    throw std::domain_error("attack_simulate: n >= 1 required");
  const std::uint64_t base = rng.next_u64();
  AttackResult r;
  r.trials = trials;
  for (std::size_t t = 0; t < trials; ++t) {
    Rng sub = Rng::derive(base, t);
    bool hit = false;
    switch (p.kind) {
      case TransformKind::Permutation: hit = detail::permutation_trial(p, sub); break;
      case TransformKind::Linear: hit = detail::linear_trial(p, sub); break;
      case TransformKind::Noise: hit = detail::noise_trial(p, sub); break;
    }
    if (hit) ++r.successes;
  }
  r.rate = double(r.successes) / double(trials);
  r.interval = wilson_interval(r.successes, trials);
  return r;
}

// The analytic counterpart an attack_simulate run should stay below.
inline PrivacyBound attack_bound(const AttackParams& p) {
  switch (p.kind) {
    case TransformKind::Permutation: return permutation_privacy(p.n);
    case TransformKind::Linear: return linear_privacy_bound(p.n, p.delta);
    case TransformKind::Noise:
      return noise_privacy(p.sigma, p.delta / p.sigma);
  }
  throw std::logic_error("attack_bound: unreachable");
}

}  // namespace psh
