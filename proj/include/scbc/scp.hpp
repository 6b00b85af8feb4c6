#pragma once

// Scenario program as an explicit affine system a^T d <= u over the decision
// vector d = [K; lambda; c; b_1..b_Q], plus an LP text dump/reader for
// cross-checking against external solvers.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "scbc/core.hpp"
#include "scbc/sampling.hpp"

namespace scbc {

enum class RowKind : std::uint8_t {
  NonNegative,   // g1
  Initial,       // g2
  Unsafe,        // g3
  Probability,   // g4
  Expectation,   // g5 (empirical)
  Bound,         // variable bound
  Gershgorin,    // lambda_max(P) surrogate
  EigenCut,      // lambda_max(P) tangent cut
  CoefficientBox,
  Other,
};

struct RowTag {
  RowKind kind = RowKind::Other;
  std::uint64_t index = 0;  // sample index, variable index or cut counter

  friend bool operator==(const RowTag&, const RowTag&) = default;
};

inline std::string to_string(const RowTag& t) {
  switch (t.kind) {
    case RowKind::NonNegative: return "g1_" + std::to_string(t.index);
    case RowKind::Initial: return "g2_" + std::to_string(t.index);
    case RowKind::Unsafe: return "g3_" + std::to_string(t.index);
    case RowKind::Probability: return "g4";
    case RowKind::Expectation: return "g5_" + std::to_string(t.index);
    case RowKind::Bound: return "bound_" + std::to_string(t.index);
    case RowKind::Gershgorin: return "gersh_" + std::to_string(t.index);
    case RowKind::EigenCut: return "eig_" + std::to_string(t.index);
    case RowKind::CoefficientBox: return "box_" + std::to_string(t.index);
    case RowKind::Other: return "r_" + std::to_string(t.index);
  }
  return "r";
}

inline RowTag parse_row_tag(const std::string& s) {
  static const std::map<std::string, RowKind> kinds = {
      {"g1", RowKind::NonNegative}, {"g2", RowKind::Initial},     {"g3", RowKind::Unsafe},
      {"g5", RowKind::Expectation}, {"bound", RowKind::Bound},    {"gersh", RowKind::Gershgorin},
      {"eig", RowKind::EigenCut},   {"box", RowKind::CoefficientBox}, {"r", RowKind::Other}};
  if (s == "g4") return {RowKind::Probability, 0};
  const auto us = s.rfind('_');
  if (us == std::string::npos) return {RowKind::Other, 0};
  auto it = kinds.find(s.substr(0, us));
  if (it == kinds.end()) return {RowKind::Other, 0};
  return {it->second, std::stoull(s.substr(us + 1))};
}

/// Dense row-major affine system.
struct ConstraintSystem {
  std::vector<std::string> columns;
  std::vector<double> objective;
  std::vector<double> coefficients;  // rows * cols
  std::vector<double> rhs;
  std::vector<RowTag> tags;

  std::size_t cols() const { return columns.size(); }
  std::size_t rows() const { return rhs.size(); }

  std::span<const double> row(std::size_t r) const {
    return {coefficients.data() + r * cols(), cols()};
  }

  void add_row(std::span<const double> a, double u, RowTag tag) {
    detail::require_dim(a.size(), cols(), "ConstraintSystem::add_row");
    coefficients.insert(coefficients.end(), a.begin(), a.end());
    rhs.push_back(u);
    tags.push_back(tag);
  }

  double row_value(std::size_t r, std::span<const double> d) const { return dot(row(r), d) - rhs[r]; }
};

/// Column layout of the barrier program.
inline constexpr std::size_t kColK = 0;
inline constexpr std::size_t kColLambda = 1;
inline constexpr std::size_t kColC = 2;
inline constexpr std::size_t kColB0 = 3;

enum class SpectralMode { Off, Gershgorin, Eigen };

struct AssemblyOptions {
  /// Offset subtracted from every sampled row (0 = plain program).
  double tighten = 0.0;
  /// Bound on lambda_max of the 1-D quadratic form; <= 0 disables.
  double p_max = 0.0;
  SpectralMode spectral = SpectralMode::Eigen;
  /// |b| <= b_max on every coefficient when no spectral rows are active; <= 0 disables.
  double b_max = 1e3;
  double lambda_margin = kLambdaMargin;
  unsigned workers = 1;
};

inline bool spectral_rows_active(const AssemblyOptions& opt) {
  return opt.p_max > 0.0 && opt.spectral != SpectralMode::Off;
}

inline std::vector<std::string> barrier_columns(const MonomialBasis& basis) {
  std::vector<std::string> cols = {"K", "lambda", "c"};
  for (std::size_t q = 0; q < basis.size(); ++q) cols.push_back("b" + std::to_string(q + 1));
  return cols;
}

/// Builds the empirical scenario program. Per sample x_i:
///   g1: -B(x_i) - K                            <= -tighten
///   g2: B(x_i) - K                             <= 1 - tighten      (x_i in X_in)
///   g3: -B(x_i) + lambda - K                   <= -tighten         (x_i in X_u)
///   g5: mean_j B(x_ij^+) - B(x_i) - c - K       <= -delta - tighten
/// plus one global row (T_h/rho) c - lambda - K <= -1/rho + mu and bounds.
inline ConstraintSystem assemble(const VerificationProblem& problem, const MonomialBasis& basis,
                                 const ScenarioDataset& ds, const AssemblyOptions& opt = {}) {
  detail::require_dim(ds.dimension, problem.dimension(), "assemble(dataset)");
  detail::require_dim(basis.dimension(), problem.dimension(), "assemble(basis)");
  detail::require(opt.tighten >= 0.0, "assemble: tighten must be non-negative");
  if (ds.compact) {
    detail::require(ds.basis == basis, "assemble: compact dataset was built for another basis");
  }
  const std::size_t q = basis.size();
  const std::size_t nc = 3 + q;
  const std::size_t n = ds.size();

  ConstraintSystem cs;
  cs.columns = barrier_columns(basis);
  cs.objective.assign(nc, 0.0);
  cs.objective[kColK] = 1.0;

  // Row offsets per sample so the fill can run in parallel yet stay in order.
  std::vector<std::size_t> offset(n + 1, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto x = ds.sample(i);
    offset[i + 1] = offset[i] + 2 + (problem.initial_region.contains(x) ? 1 : 0) +
                    (problem.unsafe_region.contains(x) ? 1 : 0);
  }
  const std::size_t sampled = offset[n];
  cs.coefficients.assign(sampled * nc, 0.0);
  cs.rhs.assign(sampled, 0.0);
  cs.tags.assign(sampled, RowTag{});

  detail::parallel_ranges(0, n, opt.workers, [&](std::size_t lo, std::size_t hi) {
    std::vector<double> f(q);
    for (std::size_t i = lo; i < hi; ++i) {
      const auto x = ds.sample(i);
      basis.features(x, f);
      const std::vector<double> mean = empirical_successor_features(ds, basis, i);
      std::size_t r = offset[i];
      auto put = [&](RowKind kind, double lambda_coef, double c_coef, auto&& b_of, double u) {
        double* a = cs.coefficients.data() + r * nc;
        a[kColK] = -1.0;
        a[kColLambda] = lambda_coef;
        a[kColC] = c_coef;
        for (std::size_t t = 0; t < q; ++t) a[kColB0 + t] = b_of(t);
        cs.rhs[r] = u;
        cs.tags[r] = {kind, i};
        ++r;
      };
      put(RowKind::NonNegative, 0.0, 0.0, [&](std::size_t t) { return -f[t]; }, -opt.tighten);
      if (problem.initial_region.contains(x)) {
        put(RowKind::Initial, 0.0, 0.0, [&](std::size_t t) { return f[t]; }, 1.0 - opt.tighten);
      }
      if (problem.unsafe_region.contains(x)) {
        put(RowKind::Unsafe, 1.0, 0.0, [&](std::size_t t) { return -f[t]; }, -opt.tighten);
      }
      put(RowKind::Expectation, 0.0, -1.0, [&](std::size_t t) { return mean[t] - f[t]; },
          -problem.delta - opt.tighten);
    }
  });

  std::vector<double> a(nc, 0.0);
  auto reset = [&] { std::fill(a.begin(), a.end(), 0.0); };

  a[kColK] = -1.0;
  a[kColLambda] = -1.0;
  a[kColC] = static_cast<double>(problem.horizon) / problem.rho;
  cs.add_row(a, -1.0 / problem.rho + problem.mu, {RowKind::Probability, 0});

  reset();
  a[kColLambda] = -1.0;
  cs.add_row(a, -(1.0 + opt.lambda_margin), {RowKind::Bound, kColLambda});
  reset();
  a[kColC] = -1.0;
  cs.add_row(a, 0.0, {RowKind::Bound, kColC});

  if (spectral_rows_active(opt)) {
    detail::require(basis.dimension() == 1 && basis.degree() == 2,
                    "assemble: p_max rows need a 1-D quadratic basis");
    // Coefficients (b_x2, b_x, b_1) form P = [b_x2, b_x/2; b_x/2, b_1].
    if (opt.spectral == SpectralMode::Gershgorin) {
      std::uint64_t id = 0;
      for (std::size_t diag : {std::size_t{0}, std::size_t{2}}) {
        for (double sgn : {1.0, -1.0}) {
          reset();
          a[kColB0 + diag] = 1.0;
          a[kColB0 + 1] = 0.5 * sgn;
          cs.add_row(a, opt.p_max, {RowKind::Gershgorin, id++});
        }
      }
    } else {
      // Seed the eigenvalue constraint with the two axis directions; the
      // solver adds tangent cuts for the rest.
      for (std::size_t diag : {std::size_t{0}, std::size_t{2}}) {
        reset();
        a[kColB0 + diag] = 1.0;
        cs.add_row(a, opt.p_max, {RowKind::EigenCut, diag / 2});
      }
    }
  } else if (opt.b_max > 0.0) {
    for (std::size_t t = 0; t < q; ++t) {
      for (double sgn : {1.0, -1.0}) {
        reset();
        a[kColB0 + t] = sgn;
        cs.add_row(a, opt.b_max, {RowKind::CoefficientBox, kColB0 + t});
      }
    }
  }
  return cs;
}

/// Tangent cut v^T P v <= p_max for the quadratic form at the current
/// coefficients, or nothing if lambda_max(P) <= p_max + tol.
inline std::optional<std::vector<double>> eigen_cut(std::span<const double> d, double p_max,
                                                    double tol) {
  const double b0 = d[kColB0];
  const double b1 = d[kColB0 + 1];
  const double b2 = d[kColB0 + 2];
  const double lmax = quadratic_form_lambda_max(b0, b1, b2);
  if (lmax <= p_max + tol) return std::nullopt;
  // Eigenvector of [b0, h; h, b2] for lmax.
  const double h = 0.5 * b1;
  double v0;
  double v1;
  if (std::abs(h) > 1e-300) {
    v0 = h;
    v1 = lmax - b0;
  } else if (b0 >= b2) {
    v0 = 1.0;
    v1 = 0.0;
  } else {
    v0 = 0.0;
    v1 = 1.0;
  }
  const double norm = std::hypot(v0, v1);
  v0 /= norm;
  v1 /= norm;
  std::vector<double> a(d.size(), 0.0);
  a[kColB0] = v0 * v0;
  a[kColB0 + 1] = v0 * v1;
  a[kColB0 + 2] = v1 * v1;
  return a;
}

struct ConstraintEvaluation {
  double max_violation = -std::numeric_limits<double>::infinity();
  std::size_t worst_row = 0;
  RowTag worst_tag{};
  bool vacuous = true;
};

/// max_r (a_r^T d - u_r) and the row attaining it.
inline ConstraintEvaluation evaluate_constraints(const ConstraintSystem& cs,
                                                 std::span<const double> d) {
  detail::require_dim(d.size(), cs.cols(), "evaluate_constraints");
  ConstraintEvaluation ev;
  for (std::size_t r = 0; r < cs.rows(); ++r) {
    const double v = cs.row_value(r, d);
    if (ev.vacuous || v > ev.max_violation) {
      ev.max_violation = v;
      ev.worst_row = r;
      ev.worst_tag = cs.tags[r];
      ev.vacuous = false;
    }
  }
  return ev;
}

// ---------------------------------------------------------------------------
// LP text format (CPLEX-style subset)
// ---------------------------------------------------------------------------

namespace detail {

inline std::string fmt_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void write_linear(std::ostream& os, std::span<const double> a,
                         const std::vector<std::string>& names) {
  bool first = true;
  for (std::size_t j = 0; j < a.size(); ++j) {
    if (a[j] == 0.0) continue;
    const bool neg = std::signbit(a[j]);
    os << (first ? (neg ? "- " : "") : (neg ? " - " : " + ")) << fmt_real(std::abs(a[j])) << " "
       << names[j];
    first = false;
  }
  if (first) os << "0 " << names[0];
}

}  // namespace detail

/// Deterministic dump: every row (bounds included) is written as a
/// constraint and all variables are declared free.
inline void write_lp(std::ostream& os, const ConstraintSystem& cs) {
  os << "\\ scenario barrier program: " << cs.rows() << " rows, " << cs.cols() << " columns\n";
  os << "Minimize\n obj: ";
  detail::write_linear(os, cs.objective, cs.columns);
  os << "\nSubject To\n";
  for (std::size_t r = 0; r < cs.rows(); ++r) {
    os << " " << to_string(cs.tags[r]) << ": ";
    detail::write_linear(os, cs.row(r), cs.columns);
    os << " <= " << detail::fmt_real(cs.rhs[r]) << "\n";
  }
  os << "Bounds\n";
  for (const auto& name : cs.columns) os << " " << name << " free\n";
  os << "End\n";
}

/// Reads the subset of the LP format produced by write_lp.
inline ConstraintSystem read_lp(std::istream& is) {
  ConstraintSystem cs;
  std::vector<std::pair<std::string, std::vector<std::pair<std::string, double>>>> rows;
  std::vector<double> rhs;
  std::vector<std::pair<std::string, double>> obj;
  std::map<std::string, std::size_t> index;
  auto column = [&](const std::string& name) {
    auto it = index.find(name);
    if (it != index.end()) return it->second;
    index.emplace(name, cs.columns.size());
    cs.columns.push_back(name);
    return cs.columns.size() - 1;
  };
  auto parse_terms = [&](std::istringstream& ls, std::vector<std::pair<std::string, double>>& out,
                         std::string& rel, double& rhs_value) {
    std::string tok;
    double sign = 1.0;
    while (ls >> tok) {
      if (tok == "+") {
        sign = 1.0;
      } else if (tok == "-") {
        sign = -1.0;
      } else if (tok == "<=" || tok == ">=" || tok == "=") {
        rel = tok;
        if (!(ls >> rhs_value)) throw InvalidInput("read_lp: missing right-hand side");
        return;
      } else {
        const double coef = std::stod(tok);
        std::string name;
        if (!(ls >> name)) throw InvalidInput("read_lp: dangling coefficient");
        column(name);
        out.emplace_back(name, sign * coef);
        sign = 1.0;
      }
    }
  };

  std::vector<std::string> lines;
  for (std::string l; std::getline(is, l);) lines.push_back(l);
  // Column order comes from the Bounds section.
  std::string section;
  for (const auto& l : lines) {
    if (l == "Minimize" || l == "Subject To" || l == "Bounds" || l == "End") {
      section = l;
    } else if (section == "Bounds" && !l.empty()) {
      std::istringstream ls(l);
      std::string name;
      ls >> name;
      column(name);
    }
  }
  section.clear();
  for (const auto& line : lines) {
    if (line.empty() || line[0] == '\\') continue;
    if (line == "Minimize" || line == "Subject To" || line == "Bounds" || line == "End") {
      section = line;
      continue;
    }
    const auto colon = line.find(':');
    if (section == "Minimize") {
      std::istringstream ls(line.substr(colon + 1));
      std::string rel;
      double dummy = 0.0;
      parse_terms(ls, obj, rel, dummy);
    } else if (section == "Subject To") {
      if (colon == std::string::npos) throw InvalidInput("read_lp: unnamed row");
      std::string name = line.substr(0, colon);
      name.erase(0, name.find_first_not_of(' '));
      std::istringstream ls(line.substr(colon + 1));
      std::string rel;
      double u = 0.0;
      std::vector<std::pair<std::string, double>> terms;
      parse_terms(ls, terms, rel, u);
      if (rel == ">=") {
        for (auto& t : terms) t.second = -t.second;
        u = -u;
      } else if (rel != "<=") {
        throw InvalidInput("read_lp: only inequality rows are supported");
      }
      rows.emplace_back(name, std::move(terms));
      rhs.push_back(u);
    } else if (section == "Bounds") {
      std::istringstream ls(line);
      std::string name;
      std::string kw;
      ls >> name >> kw;
      if (kw != "free") throw InvalidInput("read_lp: only free bounds are supported");
      column(name);
    }
  }
  const std::size_t nc = cs.columns.size();
  cs.objective.assign(nc, 0.0);
  for (auto& [name, v] : obj) cs.objective[index[name]] += v;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    std::vector<double> a(nc, 0.0);
    for (auto& [name, v] : rows[r].second) a[index[name]] += v;
    cs.add_row(a, rhs[r], parse_row_tag(rows[r].first));
  }
  return cs;
}

}  // namespace scbc
