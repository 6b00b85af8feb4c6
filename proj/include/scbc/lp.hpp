#pragma once

// min c^T d  s.t.  a_r^T d <= u_r   for a handful of free variables and up to
// millions of rows.
//
// Outer loop: cutting planes over a working set of rows. Inner loop: the
// working-set LP is solved through its dual in standard form,
//     min u^T y  s.t.  A^T y = -c,  y >= 0,
// with a revised simplex whose basis is only (#variables x #variables). The
// primal point is the simplex multiplier vector of the dual. Every row is
// scaled to unit max-norm first; violations are reported in those units.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "scbc/rng.hpp"
#include "scbc/sampling.hpp"
#include "scbc/scp.hpp"

namespace scbc {

enum class LpStatus { Optimal, Infeasible, Unbounded, IterationLimit };

inline const char* to_string(LpStatus s) {
  switch (s) {
    case LpStatus::Optimal: return "Optimal";
    case LpStatus::Infeasible: return "Infeasible";
    case LpStatus::Unbounded: return "Unbounded";
    case LpStatus::IterationLimit: return "IterationLimit";
  }
  return "?";
}

struct LpOptions {
  double tol_feas = 1e-9;
  double tol_opt = 1e-9;
  /// Sampled rows seeded into the first working set.
  std::size_t initial_rows = 10000;
  /// Most violated rows added per outer iteration.
  std::size_t cut_limit = 64;
  std::size_t max_outer = 10000;
  std::size_t max_pivots = 2000000;
  /// Artificial box |d_j| <= working_box that keeps every working-set LP bounded.
  double working_box = 1e6;
  std::uint64_t seed = 0x4c50534f4c564552ULL;
  unsigned workers = 1;
  /// Optional separation oracle for constraints not listed in the system
  /// (e.g. the eigenvalue bound); returns a row a with a^T d <= rhs.
  std::function<std::optional<std::vector<double>>(std::span<const double>)> separator;
  double separator_rhs = 0.0;
};

struct LpSolution {
  LpStatus status = LpStatus::IterationLimit;
  std::vector<double> d_star;
  double objective = std::numeric_limits<double>::quiet_NaN();
  /// Binding rows at the optimum (indices into the system).
  std::vector<std::size_t> active_rows;
  std::vector<RowTag> active_tags;
  /// Rows supporting an infeasibility (Farkas) ray.
  std::vector<std::size_t> certificate_rows;
  /// Separator rows generated during the solve.
  std::vector<std::vector<double>> generated_rows;
  std::size_t iterations = 0;
  std::size_t pivots = 0;
  std::size_t working_rows = 0;
  /// max over rows of the normalized violation at d_star.
  double max_residual = 0.0;
};

namespace detail {

inline std::vector<double> row_scales(const ConstraintSystem& cs) {
  std::vector<double> s(cs.rows());
  for (std::size_t r = 0; r < cs.rows(); ++r) {
    double m = 0.0;
    for (double v : cs.row(r)) m = std::max(m, std::abs(v));
    s[r] = m > 0.0 ? 1.0 / m : 1.0;
  }
  return s;
}

struct RankedRow {
  double violation;
  std::size_t index;
};

inline bool ranks_before(const RankedRow& a, const RankedRow& b) {
  return a.violation > b.violation || (a.violation == b.violation && a.index < b.index);
}

/// Top `limit` rows whose normalized violation exceeds `threshold`.
inline std::vector<RankedRow> scan_violations(const ConstraintSystem& cs,
                                              std::span<const double> scale,
                                              std::span<const double> d, std::size_t limit,
                                              double threshold, unsigned workers,
                                              double* max_violation = nullptr) {
  const std::size_t n = cs.rows();
  const std::size_t chunks = std::max<std::size_t>(1, std::min<std::size_t>(workers, n / 4096 + 1));
  std::vector<std::vector<RankedRow>> partial(chunks);
  std::vector<double> worst(chunks, -std::numeric_limits<double>::infinity());
  const std::size_t per = (n + chunks - 1) / chunks;
  parallel_ranges(0, chunks, static_cast<unsigned>(chunks), [&](std::size_t lo, std::size_t hi) {
    for (std::size_t ch = lo; ch < hi; ++ch) {
      auto& out = partial[ch];
      const std::size_t begin = ch * per;
      const std::size_t end = std::min(n, begin + per);
      for (std::size_t r = begin; r < end; ++r) {
        const double v = cs.row_value(r, d) * scale[r];
        worst[ch] = std::max(worst[ch], v);
        if (v > threshold) {
          out.push_back({v, r});
          if (out.size() >= 4 * limit + 64) {
            std::partial_sort(out.begin(), out.begin() + static_cast<std::ptrdiff_t>(limit),
                              out.end(), ranks_before);
            out.resize(limit);
          }
        }
      }
    }
  });
  std::vector<RankedRow> all;
  for (auto& p : partial) all.insert(all.end(), p.begin(), p.end());
  const std::size_t keep = std::min(limit, all.size());
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(keep), all.end(),
                    ranks_before);
  all.resize(keep);
  if (max_violation != nullptr) {
    *max_violation = n == 0 ? -std::numeric_limits<double>::infinity()
                            : *std::max_element(worst.begin(), worst.end());
  }
  return all;
}

/// Revised simplex on  min u^T y  s.t.  A^T y = -c, y >= 0  where the columns
/// of A^T are the working rows followed by 2m box columns +-e_j.
class DualSimplex {
 public:
  DualSimplex(std::size_t m, std::span<const double> c, double box)
      : m_(m), c_(c.begin(), c.end()), box_(box) {
    for (std::size_t j = 0; j < m_; ++j) {
      add_column_internal(unit(j, 1.0), box_);
      add_column_internal(unit(j, -1.0), box_);
    }
    basis_.resize(m_);
    for (std::size_t j = 0; j < m_; ++j) basis_[j] = -c_[j] >= 0.0 ? 2 * j : 2 * j + 1;
    refactor();
  }

  /// Appends a working row (already normalized); returns its column id.
  std::size_t add_column(std::span<const double> a, double u) {
    add_column_internal(std::vector<double>(a.begin(), a.end()), u);
    return cost_.size() - 1;
  }

  static constexpr std::size_t box_columns(std::size_t m) { return 2 * m; }

  enum class Result { Optimal, Infeasible, PivotLimit };

  Result solve(double tol_opt, std::size_t& pivots, std::size_t max_pivots) {
    std::vector<double> w(m_);
    std::size_t since_refactor = 0;
    while (true) {
      if (pivots >= max_pivots) return Result::PivotLimit;
      compute_multipliers();
      // Bland: lowest-index column with negative reduced cost.
      std::size_t enter = npos;
      for (std::size_t j = 0; j < cost_.size(); ++j) {
        if (in_basis_[j]) continue;
        const double rc = cost_[j] - dot(pi_, column(j));
        if (rc < -tol_opt) {
          enter = j;
          break;
        }
      }
      if (enter == npos) return Result::Optimal;
      // w = B^-1 a_enter
      auto a = column(enter);
      for (std::size_t i = 0; i < m_; ++i) {
        double s = 0.0;
        for (std::size_t k = 0; k < m_; ++k) s += binv_[i * m_ + k] * a[k];
        w[i] = s;
      }
      std::size_t leave = npos;
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < m_; ++i) {
        if (w[i] <= 1e-12) continue;
        const double ratio = std::max(0.0, xb_[i]) / w[i];
        const bool tie = leave != npos && std::abs(ratio - best) <= 1e-12 * (1.0 + best);
        if (leave == npos || (!tie && ratio < best) || (tie && basis_[i] < basis_[leave])) {
          best = std::min(best, ratio);
          leave = i;
        }
      }
      if (leave == npos) {
        ray_.assign(1, enter);
        for (std::size_t i = 0; i < m_; ++i) {
          if (w[i] < -1e-12) ray_.push_back(basis_[i]);
        }
        return Result::Infeasible;
      }
      pivot(leave, enter, w);
      ++pivots;
      if (++since_refactor >= 64) {
        refactor();
        since_refactor = 0;
      }
    }
  }

  /// Primal point (simplex multipliers of the dual).
  const std::vector<double>& point() {
    compute_multipliers();
    return pi_;
  }
  const std::vector<std::size_t>& basis() const { return basis_; }
  const std::vector<double>& basic_values() const { return xb_; }
  const std::vector<std::size_t>& ray() const { return ray_; }

 private:
  static constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();

  std::vector<double> unit(std::size_t j, double v) const {
    std::vector<double> e(m_, 0.0);
    e[j] = v;
    return e;
  }

  void add_column_internal(std::vector<double> a, double u) {
    cols_.insert(cols_.end(), a.begin(), a.end());
    cost_.push_back(u);
    in_basis_.push_back(false);
  }

  std::span<const double> column(std::size_t j) const { return {cols_.data() + j * m_, m_}; }

  void compute_multipliers() {
    // pi = B^-T c_B
    pi_.assign(m_, 0.0);
    for (std::size_t k = 0; k < m_; ++k) {
      double s = 0.0;
      for (std::size_t i = 0; i < m_; ++i) s += cost_[basis_[i]] * binv_[i * m_ + k];
      pi_[k] = s;
    }
  }

  void pivot(std::size_t leave, std::size_t enter, const std::vector<double>& w) {
    const double t = std::max(0.0, xb_[leave]) / w[leave];
    for (std::size_t i = 0; i < m_; ++i) xb_[i] -= t * w[i];
    xb_[leave] = t;
    const double piv = w[leave];
    for (std::size_t k = 0; k < m_; ++k) binv_[leave * m_ + k] /= piv;
    for (std::size_t i = 0; i < m_; ++i) {
      if (i == leave || w[i] == 0.0) continue;
      const double f = w[i];
      for (std::size_t k = 0; k < m_; ++k) binv_[i * m_ + k] -= f * binv_[leave * m_ + k];
    }
    in_basis_[basis_[leave]] = false;
    basis_[leave] = enter;
    in_basis_[enter] = true;
  }

  /// Rebuilds B^-1 and x_B = B^-1 (-c) by Gauss-Jordan with partial pivoting.
  void refactor() {
    std::fill(in_basis_.begin(), in_basis_.end(), false);
    for (std::size_t j : basis_) in_basis_[j] = true;
    std::vector<double> mat(m_ * 2 * m_, 0.0);
    for (std::size_t i = 0; i < m_; ++i) {
      for (std::size_t k = 0; k < m_; ++k) mat[i * 2 * m_ + k] = cols_[basis_[k] * m_ + i];
      mat[i * 2 * m_ + m_ + i] = 1.0;
    }
    const std::size_t w = 2 * m_;
    for (std::size_t col = 0; col < m_; ++col) {
      std::size_t p = col;
      for (std::size_t r = col + 1; r < m_; ++r) {
        if (std::abs(mat[r * w + col]) > std::abs(mat[p * w + col])) p = r;
      }
      if (p != col) {
        for (std::size_t k = 0; k < w; ++k) std::swap(mat[p * w + k], mat[col * w + k]);
      }
      const double d = mat[col * w + col];
      for (std::size_t k = 0; k < w; ++k) mat[col * w + k] /= d;
      for (std::size_t r = 0; r < m_; ++r) {
        if (r == col) continue;
        const double f = mat[r * w + col];
        if (f == 0.0) continue;
        for (std::size_t k = 0; k < w; ++k) mat[r * w + k] -= f * mat[col * w + k];
      }
    }
    binv_.assign(m_ * m_, 0.0);
    for (std::size_t i = 0; i < m_; ++i) {
      for (std::size_t k = 0; k < m_; ++k) binv_[i * m_ + k] = mat[i * w + m_ + k];
    }
    xb_.assign(m_, 0.0);
    for (std::size_t i = 0; i < m_; ++i) {
      double s = 0.0;
      for (std::size_t k = 0; k < m_; ++k) s += binv_[i * m_ + k] * -c_[k];
      xb_[i] = s;
    }
  }

  std::size_t m_;
  std::vector<double> c_;
  double box_;
  std::vector<double> cols_;
  std::vector<double> cost_;
  std::vector<bool> in_basis_;
  std::vector<std::size_t> basis_;
  std::vector<double> binv_;
  std::vector<double> xb_;
  std::vector<double> pi_;
  std::vector<std::size_t> ray_;
};

inline bool is_sampled_row(RowKind k) {
  return k == RowKind::NonNegative || k == RowKind::Initial || k == RowKind::Unsafe ||
         k == RowKind::Expectation;
}

}  // namespace detail

/// Indices of the `limit` rows with the largest positive normalized
/// violation at d, ties broken by lowest index.
inline std::vector<std::size_t> most_violated(const ConstraintSystem& cs,
                                              std::span<const double> d, std::size_t limit,
                                              unsigned workers = 1) {
  detail::require_dim(d.size(), cs.cols(), "most_violated");
  const auto scale = detail::row_scales(cs);
  const auto ranked = detail::scan_violations(cs, scale, d, limit, 0.0, workers);
  std::vector<std::size_t> out;
  out.reserve(ranked.size());
  for (const auto& r : ranked) out.push_back(r.index);
  return out;
}

/// Cutting-plane solve of min objective^T d over the system.
inline LpSolution solve(const ConstraintSystem& cs, const LpOptions& opt = {}) {
  const std::size_t m = cs.cols();
  detail::require(m > 0, "solve: system has no columns");
  detail::require_dim(cs.objective.size(), m, "solve(objective)");
  detail::require(opt.tol_feas > 0.0 && opt.tol_opt > 0.0, "solve: tolerances must be positive");

  LpSolution sol;
  const std::vector<double> scale = detail::row_scales(cs);
  detail::DualSimplex simplex(m, cs.objective, opt.working_box);
  const std::size_t box_cols = detail::DualSimplex::box_columns(m);

  // column id (beyond the box) -> system row, or npos for generated rows
  constexpr std::size_t kGenerated = std::numeric_limits<std::size_t>::max();
  std::vector<std::size_t> column_row;
  std::vector<bool> in_working(cs.rows(), false);
  std::vector<double> scaled(m);
  auto add_row = [&](std::size_t r) {
    if (in_working[r]) return;
    in_working[r] = true;
    const auto a = cs.row(r);
    for (std::size_t j = 0; j < m; ++j) scaled[j] = a[j] * scale[r];
    simplex.add_column(scaled, cs.rhs[r] * scale[r]);
    column_row.push_back(r);
  };

  // Structural rows always; then a deterministic subset of sampled rows.
  std::vector<std::size_t> sampled;
  for (std::size_t r = 0; r < cs.rows(); ++r) {
    if (detail::is_sampled_row(cs.tags[r].kind)) {
      sampled.push_back(r);
    } else {
      add_row(r);
    }
  }
  if (sampled.size() <= opt.initial_rows) {
    for (std::size_t r : sampled) add_row(r);
  } else {
    rng::CounterStream stream(opt.seed);
    // partial Fisher-Yates over the sampled indices
    for (std::size_t t = 0; t < opt.initial_rows; ++t) {
      const std::size_t pick = t + static_cast<std::size_t>(stream.below(sampled.size() - t));
      std::swap(sampled[t], sampled[pick]);
    }
    std::vector<std::size_t> chosen(sampled.begin(),
                                    sampled.begin() + static_cast<std::ptrdiff_t>(opt.initial_rows));
    std::sort(chosen.begin(), chosen.end());
    for (std::size_t r : chosen) add_row(r);
  }

  std::vector<double> d;
  while (true) {
    if (sol.iterations >= opt.max_outer) {
      sol.status = LpStatus::IterationLimit;
      break;
    }
    ++sol.iterations;
    const auto res = simplex.solve(opt.tol_opt, sol.pivots, opt.max_pivots);
    d = simplex.point();
    if (res == detail::DualSimplex::Result::PivotLimit) {
      sol.status = LpStatus::IterationLimit;
      break;
    }
    if (res == detail::DualSimplex::Result::Infeasible) {
      sol.status = LpStatus::Infeasible;
      for (std::size_t col : simplex.ray()) {
        if (col >= box_cols && column_row[col - box_cols] != kGenerated) {
          sol.certificate_rows.push_back(column_row[col - box_cols]);
        }
      }
      std::sort(sol.certificate_rows.begin(), sol.certificate_rows.end());
      break;
    }
    const auto worst =
        detail::scan_violations(cs, scale, d, opt.cut_limit, opt.tol_feas, opt.workers);
    bool added = false;
    for (const auto& w : worst) {
      if (!in_working[w.index]) {
        add_row(w.index);
        added = true;
      }
    }
    if (opt.separator) {
      if (auto cut = opt.separator(d)) {
        double mx = 0.0;
        for (double v : *cut) mx = std::max(mx, std::abs(v));
        const double s = mx > 0.0 ? 1.0 / mx : 1.0;
        std::vector<double> a(cut->begin(), cut->end());
        for (double& v : a) v *= s;
        // Cuts violated by less than the feasibility tolerance cannot move
        // the inner solution; accepting them would loop.
        if (dot(a, d) - opt.separator_rhs * s > opt.tol_feas) {
          simplex.add_column(a, opt.separator_rhs * s);
          column_row.push_back(kGenerated);
          sol.generated_rows.push_back(*cut);
          added = true;
        }
      }
    }
    if (!added) {
      // Violations that remain are rows already in the working set; they
      // can only come from round-off in the inner solve.
      sol.status = LpStatus::Optimal;
      break;
    }
  }

  sol.d_star = d;
  sol.working_rows = column_row.size();
  if (!d.empty()) {
    sol.objective = dot(cs.objective, d);
    double mx = 0.0;
    detail::scan_violations(cs, scale, d, 1, std::numeric_limits<double>::infinity(), opt.workers,
                            &mx);
    sol.max_residual = mx;
  }
  if (sol.status == LpStatus::Optimal) {
    for (double v : d) {
      if (std::abs(v) >= opt.working_box * (1.0 - 1e-9)) {
        sol.status = LpStatus::Unbounded;
        break;
      }
    }
    const auto& basis = simplex.basis();
    const auto& xb = simplex.basic_values();
    for (std::size_t i = 0; i < basis.size(); ++i) {
      if (basis[i] < box_cols || xb[i] <= opt.tol_opt) continue;
      const std::size_t r = column_row[basis[i] - box_cols];
      if (r != kGenerated) sol.active_rows.push_back(r);
    }
    std::sort(sol.active_rows.begin(), sol.active_rows.end());
    for (std::size_t r : sol.active_rows) sol.active_tags.push_back(cs.tags[r]);
  }
  return sol;
}

}  // namespace scbc
