#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "scbc/config.hpp"
#include "scbc/report.hpp"
#include "scbc/verify.hpp"

using namespace scbc;

namespace {

RunConfig config(const std::string& name) { return load_config(std::string(SCBC_CONFIG_DIR) + "/" + name); }

VerificationReport run(const RunConfig& c) {
  return run_verification(c.problem(), c.make_system(), c.basis(), c.run_seed, c.verify_options());
}

BarrierCertificate reference_certificate() {
  BarrierCertificate cert;
  cert.basis = MonomialBasis(1, 2);
  cert.coefficients = {0.0872, -2.1528, 11.9027};
  cert.lambda = 18.7479;
  cert.c = 0.2891;
  cert.kappa = -0.0761;
  return cert;
}

VerificationReport solved_report(double kappa, double epsilon) {
  VerificationReport rep;
  rep.problem.state_region = Region::interval(0, 1);
  rep.problem.initial_region = Region::interval(0, 0.1);
  rep.problem.unsafe_region = Region::interval(0.9, 1);
  rep.problem.epsilon = epsilon;
  rep.problem.lipschitz_bound = 1;
  rep.certificate.kappa = kappa;
  rep.lp_status = LpStatus::Optimal;
  rep.counts.n_required = 100;
  rep.counts.n_hat_required = 10;
  return rep;
}

}  // namespace

TEST(Theorem1, Examples) {
  EXPECT_NEAR(theorem1_bound(18.7479, 0.2891, 3), 0.90039, 1e-5);
  EXPECT_NEAR(theorem1_bound(reference_certificate(), 3), 0.9003995114, 1e-9);
  EXPECT_DOUBLE_EQ(theorem1_bound(2.0, 0.0, 7), 0.5);
  EXPECT_DOUBLE_EQ(theorem1_bound(4.0, 123.0, 0), 0.75);
  EXPECT_EQ(theorem1_bound(1.5, 10.0, 3), 0.0);
  EXPECT_THROW(theorem1_bound(1.0, 0.0, 3), InvalidInput);
  EXPECT_THROW(theorem1_bound(0.5, 0.0, 3), InvalidInput);
  EXPECT_THROW(theorem1_bound(2.0, -0.1, 3), InvalidInput);
}

TEST(Decide, CertifiesOnlyWhenEveryConditionHolds) {
  auto rep = solved_report(-0.05, 0.03);
  decide(rep, 100, 10);
  EXPECT_EQ(rep.verdict.status, VerdictStatus::Certified);
  EXPECT_DOUBLE_EQ(rep.verdict.probability_lower_bound, 0.9);
  EXPECT_DOUBLE_EQ(rep.verdict.confidence, 0.99);
  EXPECT_LE(rep.verdict.kappa_star + rep.verdict.epsilon, 0.0);

  rep = solved_report(-0.02, 0.03);
  decide(rep, 100, 10);
  EXPECT_EQ(rep.verdict.status, VerdictStatus::Inconclusive);
  EXPECT_EQ(rep.verdict.probability_lower_bound, 0.0);

  rep = solved_report(-0.05, 0.03);
  decide(rep, 99, 10);
  EXPECT_EQ(rep.verdict.status, VerdictStatus::Inconclusive);
  rep = solved_report(-0.05, 0.03);
  decide(rep, 100, 9);
  EXPECT_EQ(rep.verdict.status, VerdictStatus::Inconclusive);

  rep = solved_report(-0.05, 0.03);
  rep.lp_status = LpStatus::Infeasible;
  decide(rep, 100, 10);
  EXPECT_EQ(rep.verdict.status, VerdictStatus::Inconclusive);

  // Boundary: margin exactly zero certifies.
  rep = solved_report(-0.25, 0.25);
  decide(rep, 100, 10);
  EXPECT_EQ(rep.verdict.status, VerdictStatus::Certified);
}

TEST(Decide, RhoOneStillNeedsTheMargin) {
  auto rep = solved_report(0.1, 0.03);
  rep.problem.rho = 1.0;
  decide(rep, 100, 10);
  EXPECT_EQ(rep.verdict.status, VerdictStatus::Inconclusive);
  rep = solved_report(-0.1, 0.03);
  rep.problem.rho = 1.0;
  decide(rep, 100, 10);
  EXPECT_EQ(rep.verdict.status, VerdictStatus::Certified);
  EXPECT_EQ(rep.verdict.probability_lower_bound, 0.0);
}

TEST(Decide, TightenedModeConfidence) {
  auto rep = solved_report(-0.001, 0.03);
  rep.tighten = true;
  decide(rep, 100, 10);
  EXPECT_EQ(rep.verdict.status, VerdictStatus::Certified);
  EXPECT_DOUBLE_EQ(rep.verdict.confidence, 1.0 - rep.problem.beta_s);
}

TEST(ComputeCounts, RoomAndOverrides) {
  auto c = config("room.cfg");
  const auto counts = compute_counts(c.problem(), c.basis(), c.verify_options());
  EXPECT_EQ(counts.q_dim, 5u);
  EXPECT_EQ(counts.n_required, 1018779u);
  EXPECT_EQ(counts.n_hat_required, 4445u);
  EXPECT_FALSE(counts.unsound);
  auto opt = c.verify_options();
  opt.unsound_n = 5000;
  EXPECT_TRUE(compute_counts(c.problem(), c.basis(), opt).unsound);
  opt.unsound_n = 2000000;
  EXPECT_THROW(compute_counts(c.problem(), c.basis(), opt), InvalidInput);
}

TEST(RunVerification, StableLinearSystemIsCertified) {
  const auto rep = run(config("linear_stable.cfg"));
  EXPECT_EQ(rep.lp_status, LpStatus::Optimal);
  EXPECT_EQ(rep.verdict.status, VerdictStatus::Certified) << rep.reason;
  EXPECT_EQ(rep.watermark, "UNSOUND EXPERIMENT - NOT CERTIFIED");
  EXPECT_LE(rep.verdict.kappa_star + rep.verdict.epsilon, 0.0);
  EXPECT_EQ(rep.regions.total, 2000u);
}

TEST(RunVerification, UnstableLinearSystemIsInconclusiveNotUnsafe) {
  const auto rep = run(config("linear_unstable.cfg"));
  EXPECT_EQ(rep.verdict.status, VerdictStatus::Inconclusive);
  EXPECT_FALSE(rep.reason.empty());
}

TEST(RunVerification, RaisingRhoNeverRevokesACertificate) {
  auto c = config("linear_stable.cfg");
  for (double rho : {0.1, 0.2, 0.5, 1.0}) {
    c.rho = rho;
    EXPECT_EQ(run(c).verdict.status, VerdictStatus::Certified) << "rho=" << rho;
  }
}

TEST(RunVerification, ReportBytesAreDeterministic) {
  auto c = config("linear_stable.cfg");
  c.workers = 1;
  const auto a = dump_json(report_to_json(run(c), false));
  const auto b = dump_json(report_to_json(run(c), false));
  c.workers = 4;
  const auto d = dump_json(report_to_json(run(c), false));
  EXPECT_EQ(a, b);
  EXPECT_EQ(a, d);
}

TEST(RunVerification, SamplingFailureGivesPartialReport) {
  auto c = config("linear_stable.cfg");
  BlackBoxSystem broken;
  broken.state_dimension = 1;
  broken.step_fn = [](std::span<const double>, std::uint64_t, std::span<double>) {
    throw PluginError("boom");
  };
  const auto rep = run_verification(c.problem(), broken, c.basis(), 1, c.verify_options());
  EXPECT_EQ(rep.verdict.status, VerdictStatus::Inconclusive);
  EXPECT_EQ(rep.failure_stage, "sampling");
  EXPECT_NE(rep.failure_message.find("boom"), std::string::npos);
}

TEST(Audit, ReferenceCertificateLevels) {
  const auto c = config("room.cfg");
  const auto t = audit_certificate(reference_certificate(), c.problem(), c.make_system(), 131, 200);
  // Minimum over X_u is at 28; maximum over X_in is at the right end 18.
  EXPECT_NEAR(t.min_unsafe, 0.0872 * 784 - 2.1528 * 28 + 11.9027, 1e-9);
  EXPECT_TRUE(t.unsafe_ok());
  EXPECT_NEAR(t.max_initial, 1.4051, 1e-4);
  EXPECT_FALSE(t.initial_ok());
}

TEST(Audit, ConstantBarrierFailsUnsafeCheck) {
  const auto c = config("room.cfg");
  BarrierCertificate cert;
  cert.basis = MonomialBasis(1, 2);
  cert.coefficients = {0.0, 0.0, 0.5};
  for (double lambda : {1.01, 2.0, 50.0}) {
    cert.lambda = lambda;
    const auto t = audit_certificate(cert, c.problem(), c.make_system(), 21, 1);
    EXPECT_FALSE(t.unsafe_ok());
    EXPECT_TRUE(t.initial_ok());
  }
}

TEST(Audit, DeterministicSlackIsPointwise) {
  auto c = config("room.cfg");
  c.sigma_w = 0.0;
  const auto sys = c.make_system();
  const auto cert = reference_certificate();
  const auto t = audit_certificate(cert, c.problem(), sys, 53, 3);
  ASSERT_EQ(t.rows.size(), 53u);
  for (const auto& r : t.rows) {
    const double next = evaluate_barrier(cert, step(sys, r.x, 0));
    EXPECT_NEAR(r.slack, next - evaluate_barrier(cert, r.x) - cert.c, 1e-12);
  }
  std::ostringstream os;
  write_audit_csv(os, t);
  EXPECT_EQ(os.str().substr(0, os.str().find('\n')), "x,B,region_tag,expected_next_B,martingale_slack");
  EXPECT_THROW(audit_certificate(cert, c.problem(), sys, 1, 1), InvalidInput);
}
