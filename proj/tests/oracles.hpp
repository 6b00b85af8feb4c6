#pragma once

// Independent reference computations used only by tests. None of these
// share code paths with the library implementations they check.

#include <gmpxx.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <vector>

namespace oracle {

/// Exact P(Bin(n, eps) <= q) with eps taken as the exact rational value of the double.
inline mpq_class binomial_tail_exact(std::uint64_t n, double eps, std::size_t q) {
  const mpq_class e(eps);
  const mpq_class one_minus = 1 - e;
  mpq_class sum = 0;
  mpz_class choose = 1;
  for (std::uint64_t i = 0; i <= q && i <= n; ++i) {
    if (i > 0) {
      choose *= (n - i + 1);
      choose /= i;
    }
    mpq_class pe;
    mpq_class pq;
    mpz_class num_e, den_e, num_q, den_q;
    mpz_pow_ui(num_e.get_mpz_t(), e.get_num_mpz_t(), i);
    mpz_pow_ui(den_e.get_mpz_t(), e.get_den_mpz_t(), i);
    mpz_pow_ui(num_q.get_mpz_t(), one_minus.get_num_mpz_t(), n - i);
    mpz_pow_ui(den_q.get_mpz_t(), one_minus.get_den_mpz_t(), n - i);
    mpq_class term(mpz_class(choose * num_e * num_q), mpz_class(den_e * den_q));
    term.canonicalize();
    sum += term;
  }
  return sum;
}

/// Least n with exact tail <= beta, by linear scan from q+1 (n <= limit).
inline std::uint64_t minimal_count_exact(double eps, double beta, std::size_t q,
                                         std::uint64_t limit) {
  const mpq_class b(beta);
  for (std::uint64_t n = 0; n <= limit; ++n) {
    if (binomial_tail_exact(n, eps, q) <= b) return n;
  }
  return 0;
}

/// Dense linear system solve by Gaussian elimination with partial pivoting;
/// returns false if (numerically) singular.
inline bool solve_square(std::vector<double> a, std::vector<double> b, std::size_t n,
                         std::vector<double>& x) {
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t p = col;
    for (std::size_t r = col + 1; r < n; ++r) {
      if (std::abs(a[r * n + col]) > std::abs(a[p * n + col])) p = r;
    }
    if (std::abs(a[p * n + col]) < 1e-10) return false;
    if (p != col) {
      for (std::size_t k = 0; k < n; ++k) std::swap(a[p * n + k], a[col * n + k]);
      std::swap(b[p], b[col]);
    }
    for (std::size_t r = col + 1; r < n; ++r) {
      const double f = a[r * n + col] / a[col * n + col];
      for (std::size_t k = col; k < n; ++k) a[r * n + k] -= f * a[col * n + k];
      b[r] -= f * b[col];
    }
  }
  x.assign(n, 0.0);
  for (std::size_t i = n; i-- > 0;) {
    double s = b[i];
    for (std::size_t k = i + 1; k < n; ++k) s -= a[i * n + k] * x[k];
    x[i] = s / a[i * n + i];
  }
  return true;
}

struct DenseLp {
  std::size_t vars = 0;
  std::vector<double> a;  // rows * vars
  std::vector<double> u;
  std::vector<double> c;
  std::size_t rows() const { return u.size(); }
};

/// min c^T d over {A d <= u} by enumerating every vars-sized row subset,
/// solving for the vertex and keeping the best feasible one. Assumes a
/// bounded, feasible polytope with at least one vertex.
inline double vertex_enumeration(const DenseLp& lp, double feas_tol = 1e-7) {
  const std::size_t n = lp.vars;
  const std::size_t m = lp.rows();
  double best = std::numeric_limits<double>::infinity();
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  std::vector<double> sa(n * n);
  std::vector<double> sb(n);
  std::vector<double> x;
  while (true) {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t k = 0; k < n; ++k) sa[i * n + k] = lp.a[idx[i] * n + k];
      sb[i] = lp.u[idx[i]];
    }
    if (solve_square(sa, sb, n, x)) {
      bool feasible = true;
      for (std::size_t r = 0; r < m && feasible; ++r) {
        double s = 0.0;
        double scale = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
          s += lp.a[r * n + k] * x[k];
          scale = std::max(scale, std::abs(lp.a[r * n + k]));
        }
        feasible = s - lp.u[r] <= feas_tol * std::max(1.0, scale);
      }
      if (feasible) {
        double obj = 0.0;
        for (std::size_t k = 0; k < n; ++k) obj += lp.c[k] * x[k];
        best = std::min(best, obj);
      }
    }
    // next combination
    std::size_t i = n;
    while (i > 0 && idx[i - 1] == m - n + (i - 1)) --i;
    if (i == 0) break;
    ++idx[i - 1];
    for (std::size_t k = i; k < n; ++k) idx[k] = idx[k - 1] + 1;
  }
  return best;
}

/// Random bounded feasible LP: a box |d_k| <= box plus random rows that are
/// slack (or tight) at a random interior point.
inline DenseLp random_lp(std::mt19937_64& gen, std::size_t vars, std::size_t rows, double box) {
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::uniform_real_distribution<double> slack(0.0, 1.0);
  DenseLp lp;
  lp.vars = vars;
  std::vector<double> x0(vars);
  for (double& v : x0) v = 0.5 * box * unit(gen);
  for (std::size_t k = 0; k < vars; ++k) {
    for (double sgn : {1.0, -1.0}) {
      for (std::size_t j = 0; j < vars; ++j) lp.a.push_back(j == k ? sgn : 0.0);
      lp.u.push_back(box);
    }
  }
  while (lp.rows() < rows) {
    double s = 0.0;
    for (std::size_t k = 0; k < vars; ++k) {
      const double v = unit(gen);
      lp.a.push_back(v);
      s += v * x0[k];
    }
    lp.u.push_back(s + slack(gen));
  }
  lp.c.resize(vars);
  for (double& v : lp.c) v = unit(gen);
  return lp;
}

/// Fraction of trajectories that stay out of the unsafe interval for
/// `horizon` steps when started uniformly in [init_lo, init_hi].
inline double safety_probability_mc(const std::function<double(double, std::mt19937_64&)>& step,
                                    double init_lo, double init_hi, double unsafe_lo,
                                    double unsafe_hi, unsigned horizon, std::size_t trajectories,
                                    std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> start(init_lo, init_hi);
  std::size_t safe = 0;
  for (std::size_t t = 0; t < trajectories; ++t) {
    double x = start(gen);
    bool ok = !(unsafe_lo <= x && x <= unsafe_hi);
    for (unsigned k = 0; k < horizon && ok; ++k) {
      x = step(x, gen);
      ok = !(unsafe_lo <= x && x <= unsafe_hi);
    }
    if (ok) ++safe;
  }
  return static_cast<double>(safe) / static_cast<double>(trajectories);
}

}  // namespace oracle
