#pragma once

// Closed-form sample counts and constants that turn a scenario solution
// into a probabilistic guarantee.

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "scbc/core.hpp"

namespace scbc {

struct SampleComplexityInputs {
  double epsilon_bar = 1.0;
  double beta = 0.0;
  /// Upper summation limit of the binomial tail (number of coefficients + 2).
  std::size_t q_dim = 0;
};

/// (epsilon / L_x)^n.
inline double epsilon_bar(double epsilon, double lipschitz_bound, std::size_t n) {
  detail::require(epsilon > 0.0 && lipschitz_bound > 0.0,
                  "epsilon_bar: epsilon and lipschitz_bound must be positive");
  detail::require(epsilon <= lipschitz_bound, "epsilon exceeds lipschitz_bound");
  return std::pow(epsilon / lipschitz_bound, static_cast<double>(n));
}

/// log of sum_{i=0}^{q_dim} C(N,i) e^i (1-e)^(N-i), i.e. log P(Bin(N,e) <= q_dim).
/// Terms are generated by the ratio recurrence in log space and combined with
/// log-sum-exp, which stays accurate for N in the millions.
inline double log_binomial_tail(std::uint64_t n, double eps, std::size_t q_dim) {
  detail::require(eps > 0.0 && eps <= 1.0, "binomial tail: epsilon_bar must lie in (0,1]");
  if (n <= q_dim) return 0.0;
  if (eps == 1.0) return -std::numeric_limits<double>::infinity();
  const double log_eps = std::log(eps);
  const double log_one_minus = std::log1p(-eps);
  const double log_ratio = log_eps - log_one_minus;
  double log_term = static_cast<double>(n) * log_one_minus;
  double terms[512];
  std::vector<double> heap;
  double* t = terms;
  if (q_dim + 1 > 512) {
    heap.resize(q_dim + 1);
    t = heap.data();
  }
  double peak = log_term;
  for (std::size_t i = 0; i <= q_dim; ++i) {
    t[i] = log_term;
    peak = std::max(peak, log_term);
    log_term += std::log(static_cast<double>(n - i) / static_cast<double>(i + 1)) + log_ratio;
  }
  double s = 0.0;
  for (std::size_t i = 0; i <= q_dim; ++i) s += std::exp(t[i] - peak);
  return peak + std::log(s);
}

inline double binomial_tail(std::uint64_t n, double eps, std::size_t q_dim) {
  return std::exp(log_binomial_tail(n, eps, q_dim));
}

/// Least N with P(Bin(N, epsilon_bar) <= q_dim) <= beta.
///
/// The tail equals 1 for N <= q_dim. Above that the search doubles an upper
/// bracket until the tail drops to beta, bisects, and finally confirms that
/// N-1 still violates the threshold.
inline std::uint64_t minimal_scenario_count(const SampleComplexityInputs& inp) {
  const double eps = inp.epsilon_bar;
  const double beta = inp.beta;
  detail::require(eps > 0.0 && eps <= 1.0, "minimal_scenario_count: epsilon_bar must lie in (0,1]");
  detail::require(beta >= 0.0 && beta <= 1.0, "minimal_scenario_count: beta must lie in [0,1]");
  if (eps == 1.0) return inp.q_dim + 1;
  if (beta == 0.0) {
    throw InvalidInput("minimal_scenario_count: beta = 0 with epsilon_bar < 1 is unbounded");
  }
  if (beta >= 1.0) return 0;
  const double log_beta = std::log(beta);
  auto ok = [&](std::uint64_t n) { return log_binomial_tail(n, eps, inp.q_dim) <= log_beta; };

  std::uint64_t lo = inp.q_dim;  // tail(lo) = 1 > beta
  std::uint64_t hi = std::max<std::uint64_t>(inp.q_dim + 1, 1);
  while (!ok(hi)) {
    lo = hi;
    detail::require(hi < (std::uint64_t{1} << 62), "minimal_scenario_count: count overflow");
    hi *= 2;
  }
  while (hi - lo > 1) {
    const std::uint64_t mid = lo + (hi - lo) / 2;
    if (ok(mid)) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  // The bracket only assumes monotonicity; walk down while N-1 still passes.
  while (hi > inp.q_dim + 1 && ok(hi - 1)) --hi;
  return hi;
}

/// Smallest N_hat >= M_hat / (delta^2 beta_s).
inline std::uint64_t empirical_count(double m_hat, double delta, double beta_s) {
  detail::require(m_hat > 0.0, "empirical_count: variance bound must be positive");
  detail::require(delta > 0.0, "empirical_count: delta must be positive");
  detail::require(beta_s > 0.0 && beta_s <= 1.0, "empirical_count: beta_s must lie in (0,1]");
  const double denom = delta * delta * beta_s;
  auto n = static_cast<std::uint64_t>(std::ceil(m_hat / denom));
  while (static_cast<double>(n) * denom < m_hat) ++n;
  while (n > 1 && static_cast<double>(n - 1) * denom >= m_hat) --n;
  return std::max<std::uint64_t>(n, 1);
}

/// Upper bound on Var(B(f_a(x) + w)) for a 1-D polynomial barrier under
/// additive noise.
///
/// coeff_bounds[q] bounds |b| of the monomial x^(k-q) (basis order, highest
/// power first); fa_bound bounds |f_a(x)|; noise_moments[m-1] = E[w^m] for
/// m = 1..2k. Each g_j(x) = sum_{i>=j} b_i C(i,j) f_a^(i-j) is bounded by the
/// triangle inequality, and the double sum over (j, z) uses the absolute
/// covariance |E[w^(j+z)] - E[w^j] E[w^z]|.
inline double variance_bound_additive_1d(std::span<const double> coeff_bounds, double fa_bound,
                                         std::span<const double> noise_moments) {
  detail::require(!coeff_bounds.empty(), "variance_bound_additive_1d: no coefficients");
  const std::size_t k = coeff_bounds.size() - 1;
  if (k == 0) return 0.0;
  detail::require(noise_moments.size() >= 2 * k,
                  "variance_bound_additive_1d: noise moments missing up to order " +
                      std::to_string(2 * k));
  detail::require(fa_bound >= 0.0, "variance_bound_additive_1d: fa_bound must be non-negative");
  auto coeff = [&](std::size_t power) { return std::abs(coeff_bounds[k - power]); };
  auto moment = [&](std::size_t m) { return m == 0 ? 1.0 : noise_moments[m - 1]; };

  std::vector<double> g(k + 1, 0.0);
  for (std::size_t j = 1; j <= k; ++j) {
    for (std::size_t i = j; i <= k; ++i) {
      g[j] += coeff(i) * static_cast<double>(binomial(i, j)) *
              std::pow(fa_bound, static_cast<double>(i - j));
    }
  }
  double v = 0.0;
  for (std::size_t j = 1; j <= k; ++j) {
    for (std::size_t z = 1; z <= k; ++z) {
      v += g[j] * g[z] * std::abs(moment(j + z) - moment(j) * moment(z));
    }
  }
  return v;
}

/// Raw moments E[w^m], m = 1..order, of N(0, sigma^2).
inline std::vector<double> gaussian_moments(double sigma, std::size_t order) {
  std::vector<double> m(order, 0.0);
  double even = 1.0;  // (2p-1)!! sigma^(2p)
  for (std::size_t p = 1; 2 * p <= order; ++p) {
    even *= static_cast<double>(2 * p - 1) * sigma * sigma;
    m[2 * p - 1] = even;
  }
  return m;
}

/// 2 m lambda_max(P) (L L_hat + 1) for a quadratic barrier and additive-noise
/// nonlinear dynamics with |f_a(x)| <= L|x| and |grad f_a|_F <= L_hat.
inline double lipschitz_quadratic(double m, double lambda_max_p, double l, double l_hat) {
  return 2.0 * m * lambda_max_p * (l * l_hat + 1.0);
}

/// 2 m lambda_max(P) (L^2 + 1) for linear dynamics with |A|_F <= L.
inline double lipschitz_linear(double m, double lambda_max_p, double frobenius_bound) {
  return 2.0 * m * lambda_max_p * (frobenius_bound * frobenius_bound + 1.0);
}

}  // namespace scbc
