#pragma once

// Domain types shared by every stage of the verification pipeline:
// boxes, monomial bases, polynomial barrier certificates, problem
// parameters and verdicts.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace scbc {

using State = std::vector<double>;

/// Thrown whenever an operation receives arguments outside its contract.
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

namespace detail {

inline void require(bool ok, const std::string& what) {
  if (!ok) throw InvalidInput(what);
}

inline void require_dim(std::size_t got, std::size_t want, const char* where) {
  if (got != want) {
    throw InvalidInput(std::string(where) + ": dimension mismatch (got " +
                       std::to_string(got) + ", expected " +
                       std::to_string(want) + ")");
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Region
// ---------------------------------------------------------------------------

/// Closed axis-aligned box [lower, upper].
class Region {
 public:
  Region() = default;
  Region(std::vector<double> lower, std::vector<double> upper)
      : lower_(std::move(lower)), upper_(std::move(upper)) {
    detail::require(lower_.size() == upper_.size(),
                    "Region: lower and upper bounds differ in dimension");
    detail::require(!lower_.empty(), "Region: zero-dimensional box");
    for (std::size_t i = 0; i < lower_.size(); ++i) {
      detail::require(std::isfinite(lower_[i]) && std::isfinite(upper_[i]),
                      "Region: non-finite bound");
      detail::require(lower_[i] <= upper_[i],
                      "Region: lower bound exceeds upper bound in dimension " +
                          std::to_string(i));
    }
  }

  /// 1-D convenience constructor.
  static Region interval(double lo, double hi) { return Region({lo}, {hi}); }

  std::size_t dimension() const { return lower_.size(); }
  const std::vector<double>& lower() const { return lower_; }
  const std::vector<double>& upper() const { return upper_; }

  bool contains(std::span<const double> x) const {
    detail::require_dim(x.size(), dimension(), "region_contains");
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (!(lower_[i] <= x[i] && x[i] <= upper_[i])) return false;
    }
    return true;
  }

  bool contains(const Region& other) const {
    if (other.dimension() != dimension()) return false;
    for (std::size_t i = 0; i < dimension(); ++i) {
      if (other.lower_[i] < lower_[i] || other.upper_[i] > upper_[i]) return false;
    }
    return true;
  }

  bool intersects(const Region& other) const {
    if (other.dimension() != dimension()) return false;
    for (std::size_t i = 0; i < dimension(); ++i) {
      if (other.upper_[i] < lower_[i] || upper_[i] < other.lower_[i]) return false;
    }
    return true;
  }

  double volume() const {
    double v = 1.0;
    for (std::size_t i = 0; i < dimension(); ++i) v *= upper_[i] - lower_[i];
    return v;
  }

  /// Largest Euclidean norm attained on the box.
  double max_norm() const {
    double s = 0.0;
    for (std::size_t i = 0; i < dimension(); ++i) {
      const double m = std::max(std::abs(lower_[i]), std::abs(upper_[i]));
      s += m * m;
    }
    return std::sqrt(s);
  }

  friend bool operator==(const Region&, const Region&) = default;

 private:
  std::vector<double> lower_;
  std::vector<double> upper_;
};

inline bool region_contains(const Region& r, std::span<const double> x) {
  return r.contains(x);
}

// ---------------------------------------------------------------------------
// MonomialBasis
// ---------------------------------------------------------------------------

inline std::uint64_t binomial(std::uint64_t n, std::uint64_t k) {
  if (k > n) return 0;
  k = std::min(k, n - k);
  std::uint64_t r = 1;
  for (std::uint64_t i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

/// All monomials x^e with |e| <= degree, in graded lexicographic order:
/// total degree descending, then exponent tuples lexicographically
/// descending. For n = 1, k = 2 this is (x^2, x, 1).
class MonomialBasis {
 public:
  MonomialBasis() = default;
  MonomialBasis(std::size_t dimension, unsigned degree)
      : dimension_(dimension), degree_(degree) {
    detail::require(dimension >= 1, "MonomialBasis: dimension must be >= 1");
    std::vector<unsigned> e(dimension, 0);
    for (int total = static_cast<int>(degree); total >= 0; --total) {
      emit(e, 0, static_cast<unsigned>(total));
    }
  }

  std::size_t dimension() const { return dimension_; }
  unsigned degree() const { return degree_; }
  std::size_t size() const { return exponents_.size() / std::max<std::size_t>(dimension_, 1); }

  std::span<const unsigned> exponent(std::size_t q) const {
    return {exponents_.data() + q * dimension_, dimension_};
  }

  /// Index of the constant monomial (always last in graded order).
  std::size_t constant_index() const { return size() - 1; }

  /// Monomial values at x, written into out (length size()).
  void features(std::span<const double> x, std::span<double> out) const {
    detail::require_dim(x.size(), dimension_, "monomial_features");
    detail::require_dim(out.size(), size(), "monomial_features(out)");
    // powers[d * (k+1) + p] = x_d^p
    double powers_buf[64];
    std::vector<double> powers_heap;
    const std::size_t stride = degree_ + 1;
    double* powers = powers_buf;
    if (dimension_ * stride > 64) {
      powers_heap.resize(dimension_ * stride);
      powers = powers_heap.data();
    }
    for (std::size_t d = 0; d < dimension_; ++d) {
      double p = 1.0;
      for (std::size_t j = 0; j <= degree_; ++j) {
        powers[d * stride + j] = p;
        p *= x[d];
      }
    }
    for (std::size_t q = 0, n = size(); q < n; ++q) {
      double v = 1.0;
      const unsigned* e = exponents_.data() + q * dimension_;
      for (std::size_t d = 0; d < dimension_; ++d) v *= powers[d * stride + e[d]];
      out[q] = v;
    }
  }

  std::vector<double> features(std::span<const double> x) const {
    std::vector<double> out(size());
    features(x, out);
    return out;
  }

  /// Human-readable monomial name, e.g. "x1^2*x2" or "1".
  std::string monomial_name(std::size_t q) const {
    std::string s;
    auto e = exponent(q);
    for (std::size_t d = 0; d < dimension_; ++d) {
      if (e[d] == 0) continue;
      if (!s.empty()) s += "*";
      s += dimension_ == 1 ? std::string("x") : "x" + std::to_string(d + 1);
      if (e[d] > 1) s += "^" + std::to_string(e[d]);
    }
    return s.empty() ? "1" : s;
  }

  friend bool operator==(const MonomialBasis& a, const MonomialBasis& b) {
    return a.dimension_ == b.dimension_ && a.degree_ == b.degree_;
  }

 private:
  void emit(std::vector<unsigned>& e, std::size_t d, unsigned remaining) {
    if (d + 1 == dimension_) {
      e[d] = remaining;
      exponents_.insert(exponents_.end(), e.begin(), e.end());
      return;
    }
    for (int v = static_cast<int>(remaining); v >= 0; --v) {
      e[d] = static_cast<unsigned>(v);
      emit(e, d + 1, remaining - static_cast<unsigned>(v));
    }
  }

  std::size_t dimension_ = 0;
  unsigned degree_ = 0;
  std::vector<unsigned> exponents_;
};

inline std::vector<double> monomial_features(const MonomialBasis& basis,
                                             std::span<const double> x) {
  return basis.features(x);
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// ---------------------------------------------------------------------------
// BarrierCertificate
// ---------------------------------------------------------------------------

/// Minimum margin used to represent the strict inequality lambda > 1.
inline constexpr double kLambdaMargin = 1e-6;

struct BarrierCertificate {
  MonomialBasis basis;
  std::vector<double> coefficients;
  double lambda = 2.0;
  double c = 0.0;
  double kappa = 0.0;

  void validate() const {
    detail::require_dim(coefficients.size(), basis.size(), "BarrierCertificate");
    detail::require(lambda > 1.0, "BarrierCertificate: lambda must exceed 1");
    detail::require(c >= 0.0, "BarrierCertificate: c must be non-negative");
  }
};

inline double evaluate_barrier(const MonomialBasis& basis,
                               std::span<const double> coefficients,
                               std::span<const double> x) {
  detail::require_dim(coefficients.size(), basis.size(), "evaluate_barrier(b)");
  detail::require_dim(x.size(), basis.dimension(), "evaluate_barrier");
  double s = 0.0;
  for (std::size_t q = 0; q < basis.size(); ++q) {
    auto e = basis.exponent(q);
    double m = 1.0;
    for (std::size_t d = 0; d < x.size(); ++d) {
      for (unsigned p = 0; p < e[d]; ++p) m *= x[d];
    }
    s += coefficients[q] * m;
  }
  return s;
}

inline double evaluate_barrier(const BarrierCertificate& cert,
                               std::span<const double> x) {
  return evaluate_barrier(cert.basis, cert.coefficients, x);
}

/// Largest eigenvalue of the symmetric 2x2 form [b0, b1/2; b1/2, b2] that
/// represents a 1-D quadratic b0 x^2 + b1 x + b2 over (x, 1).
inline double quadratic_form_lambda_max(double b0, double b1, double b2) {
  const double mean = 0.5 * (b0 + b2);
  const double half = 0.5 * (b0 - b2);
  return mean + std::sqrt(half * half + 0.25 * b1 * b1);
}

// ---------------------------------------------------------------------------
// VerificationProblem / Verdict
// ---------------------------------------------------------------------------

struct VerificationProblem {
  Region state_region;
  Region initial_region;
  Region unsafe_region;
  unsigned horizon = 1;
  double rho = 0.1;
  double beta = 0.005;
  double beta_s = 0.005;
  double delta = 0.015;
  double mu = -1e-3;
  double epsilon = 0.03;
  double lipschitz_bound = 1.0;
  double variance_bound = 1.0;

  std::size_t dimension() const { return state_region.dimension(); }

  void validate() const {
    using detail::require;
    const std::size_t n = state_region.dimension();
    require(n >= 1, "VerificationProblem: empty state region");
    require(initial_region.dimension() == n && unsafe_region.dimension() == n,
            "VerificationProblem: region dimensions differ");
    require(state_region.contains(initial_region),
            "VerificationProblem: initial region not inside state region");
    require(state_region.contains(unsafe_region),
            "VerificationProblem: unsafe region not inside state region");
    require(!initial_region.intersects(unsafe_region),
            "VerificationProblem: initial and unsafe regions intersect");
    require(rho > 0.0 && rho <= 1.0, "VerificationProblem: rho must lie in (0,1]");
    require(beta >= 0.0 && beta <= 1.0, "VerificationProblem: beta must lie in [0,1]");
    require(beta_s > 0.0 && beta_s <= 1.0,
            "VerificationProblem: beta_s must lie in (0,1]");
    require(delta > 0.0, "VerificationProblem: delta must be positive");
    require(mu < 0.0, "VerificationProblem: mu must be negative");
    require(epsilon >= 0.0 && epsilon <= 1.0,
            "VerificationProblem: epsilon must lie in [0,1]");
    require(lipschitz_bound > 0.0,
            "VerificationProblem: lipschitz_bound must be positive");
    require(epsilon <= lipschitz_bound, "epsilon exceeds lipschitz_bound");
    require(variance_bound > 0.0, "VerificationProblem: variance_bound must be positive");
  }
};

enum class VerdictStatus { Certified, Inconclusive };

inline const char* to_string(VerdictStatus s) {
  return s == VerdictStatus::Certified ? "Certified" : "Inconclusive";
}

struct Verdict {
  VerdictStatus status = VerdictStatus::Inconclusive;
  double probability_lower_bound = 0.0;
  double confidence = 0.0;
  double kappa_star = 0.0;
  double epsilon = 0.0;
};

}  // namespace scbc
