#pragma once

// End-to-end pipeline: counts -> dataset -> scenario program -> LP -> verdict.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "scbc/bounds.hpp"
#include "scbc/core.hpp"
#include "scbc/lp.hpp"
#include "scbc/sampling.hpp"
#include "scbc/scp.hpp"
#include "scbc/systems.hpp"

namespace scbc {

/// 1 - (1 + c T_h) / lambda, clamped below at 0.
inline double theorem1_bound(double lambda, double c, unsigned horizon) {
  detail::require(lambda > 1.0, "theorem1_bound: lambda must exceed 1");
  detail::require(c >= 0.0, "theorem1_bound: c must be non-negative");
  return std::max(0.0, 1.0 - (1.0 + c * static_cast<double>(horizon)) / lambda);
}

inline double theorem1_bound(const BarrierCertificate& cert, unsigned horizon) {
  return theorem1_bound(cert.lambda, cert.c, horizon);
}

struct VerifyOptions {
  AssemblyOptions assembly;
  LpOptions lp;
  /// Shift every sampled row by L_x * epsilon^(1/n) and decide on K* <= 0.
  bool tighten = false;
  /// Experiment-only overrides; may only lower the counts. Any override
  /// watermarks the report as not certified.
  std::optional<std::uint64_t> unsound_n;
  std::optional<std::uint64_t> unsound_n_hat;
  /// Summation limit for the scenario count; 0 means Q + 2.
  std::size_t q_dim_override = 0;
  bool compact = true;
  unsigned workers = 1;
};

struct SampleCounts {
  double epsilon_bar = 0.0;
  std::size_t q_dim = 0;
  std::uint64_t n_required = 0;
  std::uint64_t n_hat_required = 0;
  std::uint64_t n = 0;
  std::uint64_t n_hat = 0;
  bool unsound = false;
};

inline SampleCounts compute_counts(const VerificationProblem& problem, const MonomialBasis& basis,
                                   const VerifyOptions& opt) {
  problem.validate();
  SampleCounts sc;
  sc.epsilon_bar = epsilon_bar(problem.epsilon, problem.lipschitz_bound, problem.dimension());
  sc.q_dim = opt.q_dim_override != 0 ? opt.q_dim_override : basis.size() + 2;
  sc.n_required = minimal_scenario_count({sc.epsilon_bar, problem.beta, sc.q_dim});
  sc.n_hat_required = empirical_count(problem.variance_bound, problem.delta, problem.beta_s);
  sc.n = sc.n_required;
  sc.n_hat = sc.n_hat_required;
  if (opt.unsound_n) {
    detail::require(*opt.unsound_n >= 1, "unsound N override must be >= 1");
    detail::require(*opt.unsound_n <= sc.n_required,
                    "unsound N override may only lower the scenario count");
    sc.n = *opt.unsound_n;
    sc.unsound = true;
  }
  if (opt.unsound_n_hat) {
    detail::require(*opt.unsound_n_hat >= 1, "unsound N_hat override must be >= 1");
    detail::require(*opt.unsound_n_hat <= sc.n_hat_required,
                    "unsound N_hat override may only lower the empirical count");
    sc.n_hat = *opt.unsound_n_hat;
    sc.unsound = true;
  }
  return sc;
}

inline double tighten_amount(const VerificationProblem& problem) {
  return problem.lipschitz_bound *
         std::pow(problem.epsilon, 1.0 / static_cast<double>(problem.dimension()));
}

struct RegionCounts {
  std::uint64_t total = 0;
  std::uint64_t initial = 0;
  std::uint64_t unsafe = 0;
};

struct VerificationReport {
  Verdict verdict;
  BarrierCertificate certificate;
  SampleCounts counts;
  VerificationProblem problem;
  double mu = 0.0;
  double p_max = 0.0;
  std::string spectral_mode;
  std::uint64_t run_seed = 0;
  bool tighten = false;
  double tighten_offset = 0.0;
  double theorem1 = 0.0;
  /// K* + epsilon (or K* in tightened mode); must be <= 0 to certify.
  double decision_margin = 0.0;
  RegionCounts regions;
  LpStatus lp_status = LpStatus::IterationLimit;
  std::size_t lp_iterations = 0;
  std::size_t lp_pivots = 0;
  std::size_t lp_working_rows = 0;
  std::size_t lp_rows = 0;
  double lp_max_residual = 0.0;
  std::vector<std::string> active_rows;
  std::vector<std::string> infeasibility_certificate;
  /// Exact largest eigenvalue of the quadratic form (1-D quadratic only).
  std::optional<double> lambda_max_p;
  std::optional<double> gershgorin_bound;
  std::string watermark;
  std::string failure_stage;
  std::string failure_message;
  std::string reason;
  std::uint64_t config_digest = 0;
  std::uint64_t dataset_digest = 0;
  double seconds_sampling = 0.0;
  double seconds_assembly = 0.0;
  double seconds_solve = 0.0;
};

inline RegionCounts count_regions(const VerificationProblem& problem, const ScenarioDataset& ds) {
  RegionCounts rc;
  rc.total = ds.size();
  for (std::size_t i = 0; i < ds.size(); ++i) {
    if (problem.initial_region.contains(ds.sample(i))) ++rc.initial;
    if (problem.unsafe_region.contains(ds.sample(i))) ++rc.unsafe;
  }
  return rc;
}

inline const char* to_string(SpectralMode m) {
  switch (m) {
    case SpectralMode::Off: return "off";
    case SpectralMode::Gershgorin: return "gershgorin";
    case SpectralMode::Eigen: return "eigen";
  }
  return "?";
}

namespace detail {

using Clock = std::chrono::steady_clock;

inline double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

}  // namespace detail

/// Applies the decision rule. Every precondition of a certified claim is
/// re-checked here from the raw numbers rather than trusted from earlier stages.
inline void decide(VerificationReport& rep, std::uint64_t n_used, std::uint64_t n_hat_used) {
  const auto& p = rep.problem;
  Verdict& v = rep.verdict;
  v.kappa_star = rep.certificate.kappa;
  v.epsilon = rep.tighten ? 0.0 : p.epsilon;
  v.confidence = rep.tighten ? 1.0 - p.beta_s : 1.0 - p.beta - p.beta_s;
  rep.decision_margin = v.kappa_star + v.epsilon;
  v.status = VerdictStatus::Inconclusive;
  v.probability_lower_bound = 0.0;

  if (rep.lp_status != LpStatus::Optimal) {
    rep.reason = std::string("scenario program not solved to optimality: ") +
                 to_string(rep.lp_status);
    return;
  }
  const bool counts_ok = n_used >= rep.counts.n_required && n_hat_used >= rep.counts.n_hat_required;
  if (!counts_ok && !rep.counts.unsound) {
    rep.reason = "dataset smaller than the required sample counts";
    return;
  }
  if (!(rep.decision_margin <= 0.0)) {
    rep.reason = rep.tighten ? "K* > 0 in tightened mode" : "K* + epsilon > 0";
    return;
  }
  v.status = VerdictStatus::Certified;
  v.probability_lower_bound = 1.0 - p.rho;
  rep.reason = rep.counts.unsound ? "decision rule met on an under-sampled dataset"
                                  : "decision rule met";
}

/// Scenario program + LP + verdict on an existing dataset.
inline VerificationReport verify_dataset(const VerificationProblem& problem,
                                         const MonomialBasis& basis, const ScenarioDataset& ds,
                                         const SampleCounts& counts, const VerifyOptions& opt) {
  problem.validate();
  VerificationReport rep;
  rep.problem = problem;
  rep.counts = counts;
  rep.mu = problem.mu;
  rep.p_max = opt.assembly.p_max;
  rep.spectral_mode = spectral_rows_active(opt.assembly) ? to_string(opt.assembly.spectral) : "off";
  rep.run_seed = ds.run_seed;
  rep.dataset_digest = ds.digest;
  rep.tighten = opt.tighten;
  rep.tighten_offset = opt.tighten ? tighten_amount(problem) : 0.0;
  rep.regions = count_regions(problem, ds);
  rep.certificate.basis = basis;
  rep.certificate.coefficients.assign(basis.size(), 0.0);
  if (counts.unsound) rep.watermark = "UNSOUND EXPERIMENT - NOT CERTIFIED";

  if (!ds.complete) {
    rep.failure_stage = "sampling";
    rep.failure_message = "dataset is incomplete";
    decide(rep, ds.size(), ds.n_hat);
    return rep;
  }

  AssemblyOptions aopt = opt.assembly;
  aopt.tighten = rep.tighten_offset;
  aopt.workers = opt.workers;
  auto t0 = detail::Clock::now();
  ConstraintSystem cs;
  try {
    cs = assemble(problem, basis, ds, aopt);
  } catch (const std::exception& e) {
    rep.failure_stage = "assembly";
    rep.failure_message = e.what();
    decide(rep, ds.size(), ds.n_hat);
    return rep;
  }
  rep.seconds_assembly = detail::seconds_since(t0);
  rep.lp_rows = cs.rows();

  LpOptions lopt = opt.lp;
  lopt.workers = opt.workers;
  if (spectral_rows_active(aopt) && aopt.spectral == SpectralMode::Eigen) {
    const double p_max = aopt.p_max;
    const double tol = lopt.tol_feas;
    lopt.separator = [p_max, tol](std::span<const double> d) { return eigen_cut(d, p_max, tol); };
    lopt.separator_rhs = p_max;
  }
  t0 = detail::Clock::now();
  const LpSolution sol = solve(cs, lopt);
  rep.seconds_solve = detail::seconds_since(t0);
  rep.lp_status = sol.status;
  rep.lp_iterations = sol.iterations;
  rep.lp_pivots = sol.pivots;
  rep.lp_working_rows = sol.working_rows;
  rep.lp_max_residual = sol.max_residual;
  for (const auto& t : sol.active_tags) rep.active_rows.push_back(to_string(t));
  for (std::size_t r : sol.certificate_rows) rep.infeasibility_certificate.push_back(to_string(cs.tags[r]));
  if (sol.status != LpStatus::Optimal) {
    rep.failure_stage = "solve";
    rep.failure_message = std::string("LP status ") + to_string(sol.status);
  }
  if (!sol.d_star.empty()) {
    rep.certificate.kappa = sol.d_star[kColK];
    rep.certificate.lambda = sol.d_star[kColLambda];
    rep.certificate.c = std::max(0.0, sol.d_star[kColC]);
    rep.certificate.coefficients.assign(sol.d_star.begin() + kColB0, sol.d_star.end());
  }
  if (basis.dimension() == 1 && basis.degree() == 2) {
    const auto& b = rep.certificate.coefficients;
    rep.lambda_max_p = quadratic_form_lambda_max(b[0], b[1], b[2]);
    rep.gershgorin_bound = std::max(b[0], b[2]) + 0.5 * std::abs(b[1]);
  }
  if (rep.certificate.lambda > 1.0) rep.theorem1 = theorem1_bound(rep.certificate, problem.horizon);
  decide(rep, ds.size(), ds.n_hat);
  return rep;
}

/// Full pipeline from a black-box system.
inline VerificationReport run_verification(const VerificationProblem& problem,
                                           const BlackBoxSystem& sys, const MonomialBasis& basis,
                                           std::uint64_t run_seed, const VerifyOptions& opt = {}) {
  const SampleCounts counts = compute_counts(problem, basis, opt);
  detail::require_dim(sys.state_dimension, problem.dimension(), "run_verification(system)");
  auto t0 = detail::Clock::now();
  ScenarioDataset ds;
  try {
    const auto states = draw_states(problem.state_region, counts.n, run_seed);
    CollectOptions copt;
    copt.workers = opt.workers;
    if (opt.compact) copt.compact_basis = basis;
    ds = collect_successors(sys, states, counts.n_hat, run_seed, copt);
  } catch (const std::exception& e) {
    VerificationReport rep;
    rep.problem = problem;
    rep.counts = counts;
    rep.run_seed = run_seed;
    rep.certificate.basis = basis;
    rep.certificate.coefficients.assign(basis.size(), 0.0);
    rep.failure_stage = "sampling";
    rep.failure_message = e.what();
    rep.lp_status = LpStatus::IterationLimit;
    decide(rep, 0, 0);
    return rep;
  }
  const double sampling = detail::seconds_since(t0);
  VerificationReport rep = verify_dataset(problem, basis, ds, counts, opt);
  rep.seconds_sampling = sampling;
  return rep;
}

// ---------------------------------------------------------------------------
// Grid audit
// ---------------------------------------------------------------------------

struct AuditRow {
  State x;
  double barrier = 0.0;
  std::string region_tag;
  double expected_next = 0.0;
  /// E[B(f(x,w))] - B(x) - c
  double slack = 0.0;
};

struct AuditTable {
  std::vector<AuditRow> rows;
  double max_initial = -std::numeric_limits<double>::infinity();
  double min_unsafe = std::numeric_limits<double>::infinity();
  double max_slack = -std::numeric_limits<double>::infinity();
  double lambda = 0.0;
  double c = 0.0;

  bool initial_ok() const { return max_initial <= 1.0; }
  bool unsafe_ok() const { return min_unsafe >= lambda; }
};

/// Evaluates the certificate on a uniform mesh of X (`grid` points per axis):
/// barrier level on X_in and X_u, and a Monte-Carlo estimate of the expected
/// one-step change with `mc` successor draws per point.
inline AuditTable audit_certificate(const BarrierCertificate& cert,
                                    const VerificationProblem& problem, const BlackBoxSystem& sys,
                                    std::size_t grid, std::size_t mc,
                                    std::uint64_t seed = 0x4155444954ULL) {
  const std::size_t n = problem.dimension();
  detail::require(n <= 2, "audit_certificate: grid audit supports at most two dimensions");
  detail::require(grid >= 2, "audit_certificate: grid must have at least two points per axis");
  detail::require(mc >= 1, "audit_certificate: need at least one Monte-Carlo draw");
  detail::require_dim(sys.state_dimension, n, "audit_certificate(system)");
  AuditTable t;
  t.lambda = cert.lambda;
  t.c = cert.c;
  const auto& lo = problem.state_region.lower();
  const auto& hi = problem.state_region.upper();
  const std::size_t points = n == 1 ? grid : grid * grid;
  State x(n);
  State next(n);
  for (std::size_t p = 0; p < points; ++p) {
    std::size_t rem = p;
    for (std::size_t d = 0; d < n; ++d) {
      const std::size_t idx = rem % grid;
      rem /= grid;
      x[d] = lo[d] + (hi[d] - lo[d]) * static_cast<double>(idx) / static_cast<double>(grid - 1);
    }
    AuditRow row;
    row.x = x;
    row.barrier = evaluate_barrier(cert, x);
    if (problem.initial_region.contains(x)) {
      row.region_tag = "initial";
      t.max_initial = std::max(t.max_initial, row.barrier);
    } else if (problem.unsafe_region.contains(x)) {
      row.region_tag = "unsafe";
      t.min_unsafe = std::min(t.min_unsafe, row.barrier);
    } else {
      row.region_tag = "state";
    }
    double acc = 0.0;
    for (std::size_t j = 0; j < mc; ++j) {
      step(sys, x, rng::noise_seed(seed, p, j), next);
      acc += evaluate_barrier(cert, next);
    }
    row.expected_next = acc / static_cast<double>(mc);
    row.slack = row.expected_next - row.barrier - cert.c;
    t.max_slack = std::max(t.max_slack, row.slack);
    t.rows.push_back(std::move(row));
  }
  return t;
}

inline void write_audit_csv(std::ostream& os, const AuditTable& t) {
  const std::size_t n = t.rows.empty() ? 1 : t.rows.front().x.size();
  if (n == 1) {
    os << "x";
  } else {
    for (std::size_t d = 0; d < n; ++d) os << (d ? "," : "") << "x" << d + 1;
  }
  os << ",B,region_tag,expected_next_B,martingale_slack\n";
  char buf[64];
  auto put = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    os << buf;
  };
  for (const auto& r : t.rows) {
    for (std::size_t d = 0; d < r.x.size(); ++d) {
      if (d) os << ",";
      put(r.x[d]);
    }
    os << ",";
    put(r.barrier);
    os << "," << r.region_tag << ",";
    put(r.expected_next);
    os << ",";
    put(r.slack);
    os << "\n";
  }
}

}  // namespace scbc
