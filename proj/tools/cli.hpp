#pragma once

// scbc command-line front end. Exit codes: 0 success / Certified,
// 1 error, 2 Inconclusive.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "scbc/bounds.hpp"
#include "scbc/config.hpp"
#include "scbc/report.hpp"
#include "scbc/sampling.hpp"
#include "scbc/scp.hpp"
#include "scbc/verify.hpp"

namespace scbc::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitInconclusive = 2;

struct CommonFlags {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> workers;
  std::string out_dir = ".";
  bool tighten = false;
  std::optional<std::uint64_t> unsound_n;
  std::optional<std::uint64_t> unsound_n_hat;
  std::string dataset;
  std::string certificate;
};

inline void add_common(CLI::App* sub, CommonFlags& f, bool needs_dataset = false) {
  sub->add_option("--config", f.config_path, "key=value configuration file")->required();
  sub->add_option("--seed", f.seed, "run seed (overrides run_seed)");
  sub->add_option("--workers", f.workers, "worker threads");
  sub->add_option("--out", f.out_dir, "output directory");
  sub->add_flag("--tighten", f.tighten, "tightened scenario program");
  sub->add_option("--unsound-N", f.unsound_n, "lower N for experiments (watermarked)");
  sub->add_option("--unsound-Nhat", f.unsound_n_hat, "lower N_hat for experiments (watermarked)");
  if (needs_dataset) sub->add_option("--dataset", f.dataset, "dataset file (BCDS1)");
}

inline RunConfig resolve_config(const CommonFlags& f) {
  RunConfig c = load_config(f.config_path);
  if (f.seed) c.run_seed = *f.seed;
  if (f.workers) c.workers = *f.workers;
  if (f.tighten) c.tighten = true;
  if (f.unsound_n) c.unsound_n = f.unsound_n;
  if (f.unsound_n_hat) c.unsound_n_hat = f.unsound_n_hat;
  return c;
}

inline std::filesystem::path default_dataset(const CommonFlags& f) {
  return f.dataset.empty() ? std::filesystem::path(f.out_dir) / "dataset.bcds"
                           : std::filesystem::path(f.dataset);
}

inline void write_file(const std::filesystem::path& p, const std::string& s) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out << s;
}

inline int cmd_counts(const CommonFlags& f, std::ostream& out) {
  const RunConfig c = resolve_config(f);
  const VerificationProblem p = c.problem();
  const SampleCounts sc = compute_counts(p, c.basis(), c.verify_options());
  char buf[64];
  auto row = [&](const char* k, double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    out << std::left << std::setw(18) << k << buf << "\n";
  };
  auto irow = [&](const char* k, std::uint64_t v) {
    out << std::left << std::setw(18) << k << v << "\n";
  };
  out << std::left << std::setw(18) << "quantity" << "value\n";
  row("epsilon", p.epsilon);
  row("lipschitz_bound", p.lipschitz_bound);
  row("epsilon_bar", sc.epsilon_bar);
  row("beta", p.beta);
  irow("q_dim", sc.q_dim);
  irow("N", sc.n_required);
  row("variance_bound", p.variance_bound);
  row("delta", p.delta);
  row("beta_s", p.beta_s);
  irow("N_hat", sc.n_hat_required);
  row("confidence", c.tighten ? 1.0 - p.beta_s : 1.0 - p.beta - p.beta_s);
  if (sc.unsound) {
    irow("N_used", sc.n);
    irow("N_hat_used", sc.n_hat);
    out << "watermark         UNSOUND EXPERIMENT - NOT CERTIFIED\n";
  }
  return kExitOk;
}

inline int cmd_sample(const CommonFlags& f, std::ostream& out, std::ostream& err) {
  const RunConfig c = resolve_config(f);
  const VerificationProblem p = c.problem();
  const MonomialBasis basis = c.basis();
  const SampleCounts sc = compute_counts(p, basis, c.verify_options());
  const BlackBoxSystem sys = c.make_system();
  std::filesystem::create_directories(f.out_dir);
  const auto path = default_dataset(f);

  DatasetBuildSpec spec;
  spec.state_region = p.state_region;
  spec.n = sc.n;
  spec.n_hat = sc.n_hat;
  spec.run_seed = c.run_seed;
  spec.digest = dataset_digest(c, sys, sc.n, sc.n_hat);
  spec.degree = c.degree;
  spec.compact = c.compact;
  spec.chunk_size = c.chunk_size;
  spec.workers = c.workers;
  const auto res = build_dataset_file(path, sys, spec, [&](std::uint64_t done, std::uint64_t total) {
    err << "sample: " << done << "/" << total << "\n";
  });
  if (res.resumed) err << "sample: resumed at record " << res.resumed_from << "\n";
  if (!res.error.empty()) {
    err << "sample: stopped early (" << res.error << "); partial file " << path.string()
        << " holds " << res.header.written << " records and is marked incomplete\n";
    return kExitError;
  }
  out << "dataset " << path.string() << " N=" << res.header.n << " N_hat=" << res.header.n_hat
      << " digest=" << hex64(res.header.digest) << "\n";
  return kExitOk;
}

/// Loads the dataset and checks it belongs to this configuration.
inline ScenarioDataset load_matching_dataset(const CommonFlags& f, const RunConfig& c,
                                             const BlackBoxSystem& sys, const SampleCounts& sc) {
  const auto path = default_dataset(f);
  if (!std::filesystem::exists(path)) {
    throw std::runtime_error("dataset not found: " + path.string());
  }
  const DatasetHeader h = read_dataset_header(path);
  if (h.digest != dataset_digest(c, sys, sc.n, sc.n_hat)) {
    throw std::runtime_error("dataset/config mismatch");
  }
  ScenarioDataset ds = read_dataset_file(path);
  if (!ds.complete) throw std::runtime_error("dataset is incomplete; rerun sample to resume");
  return ds;
}

inline int cmd_verify(const CommonFlags& f, std::ostream& out, std::ostream& err) {
  const RunConfig c = resolve_config(f);
  const VerificationProblem p = c.problem();
  const MonomialBasis basis = c.basis();
  const VerifyOptions vopt = c.verify_options();
  const SampleCounts sc = compute_counts(p, basis, vopt);
  const BlackBoxSystem sys = c.make_system();
  const ScenarioDataset ds = load_matching_dataset(f, c, sys, sc);

  VerificationReport rep = verify_dataset(p, basis, ds, sc, vopt);
  rep.config_digest = config_digest(c);
  std::filesystem::create_directories(f.out_dir);
  const std::filesystem::path dir(f.out_dir);
  write_file(dir / "report.json", dump_json(report_to_json(rep)));
  write_file(dir / "certificate.json", dump_json(certificate_to_json(rep.certificate)));
  if (p.dimension() <= 2 && rep.certificate.lambda > 1.0) {
    const AuditTable t = audit_certificate(rep.certificate, p, sys, c.audit_grid, c.audit_mc);
    std::ofstream csv(dir / "audit.csv");
    write_audit_csv(csv, t);
  } else {
    err << "verify: audit skipped (state dimension > 2 or no usable certificate)\n";
  }
  out << "verdict " << to_string(rep.verdict.status) << " K*=" << rep.verdict.kappa_star
      << " margin=" << rep.decision_margin;
  if (rep.verdict.status == VerdictStatus::Certified) {
    out << " P>=" << rep.verdict.probability_lower_bound
        << " confidence>=" << rep.verdict.confidence;
  }
  if (!rep.watermark.empty()) out << " [" << rep.watermark << "]";
  out << "\n";
  if (!rep.failure_stage.empty()) {
    err << "verify: stage " << rep.failure_stage << ": " << rep.failure_message << "\n";
  }
  return rep.verdict.status == VerdictStatus::Certified ? kExitOk : kExitInconclusive;
}

inline int cmd_audit(const CommonFlags& f, std::ostream& out) {
  const RunConfig c = resolve_config(f);
  const VerificationProblem p = c.problem();
  std::ifstream in(f.certificate);
  if (!in) throw std::runtime_error("cannot open certificate " + f.certificate);
  const BarrierCertificate cert = certificate_from_json(Json::parse(in));
  const AuditTable t = audit_certificate(cert, p, c.make_system(), c.audit_grid, c.audit_mc);
  std::filesystem::create_directories(f.out_dir);
  std::ofstream csv(std::filesystem::path(f.out_dir) / "audit.csv");
  write_audit_csv(csv, t);
  out << "max_B_initial " << t.max_initial << (t.initial_ok() ? " ok" : " VIOLATED") << "\n"
      << "min_B_unsafe " << t.min_unsafe << (t.unsafe_ok() ? " ok" : " VIOLATED") << "\n"
      << "max_martingale_slack " << t.max_slack << "\n";
  return kExitOk;
}

inline int cmd_lp_dump(const CommonFlags& f, std::ostream& out) {
  const RunConfig c = resolve_config(f);
  const VerificationProblem p = c.problem();
  const MonomialBasis basis = c.basis();
  const VerifyOptions vopt = c.verify_options();
  const SampleCounts sc = compute_counts(p, basis, vopt);
  const BlackBoxSystem sys = c.make_system();
  const ScenarioDataset ds = load_matching_dataset(f, c, sys, sc);
  AssemblyOptions aopt = vopt.assembly;
  aopt.tighten = vopt.tighten ? tighten_amount(p) : 0.0;
  const ConstraintSystem cs = assemble(p, basis, ds, aopt);
  std::filesystem::create_directories(f.out_dir);
  const auto path = std::filesystem::path(f.out_dir) / "program.lp";
  std::ofstream lp(path);
  write_lp(lp, cs);
  out << "wrote " << path.string() << " (" << cs.rows() << " rows)\n";
  return kExitOk;
}

inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout,
                   std::ostream& err = std::cerr) {
  CLI::App app{"Data-driven barrier-certificate safety verification"};
  app.require_subcommand(1);
  CommonFlags f;

  auto* counts = app.add_subcommand("counts", "print the scenario and empirical sample counts");
  add_common(counts, f);
  auto* sample = app.add_subcommand("sample", "build (or resume) the scenario dataset file");
  add_common(sample, f, true);
  auto* verify = app.add_subcommand("verify", "solve the scenario program and issue a verdict");
  add_common(verify, f, true);
  auto* audit = app.add_subcommand("audit", "grid audit of a certificate");
  add_common(audit, f);
  audit->add_option("--certificate", f.certificate, "certificate.json")->required();
  auto* dump = app.add_subcommand("lp-dump", "write the scenario program in LP text format");
  add_common(dump, f, true);

  auto* bounds = app.add_subcommand("bounds", "evaluate a closed-form bound");
  bounds->require_subcommand(1);
  double eps_bar = 0, beta = 0, m_hat = 0, delta = 0, beta_s = 0;
  double m = 0, lam = 0, l = 0, l_hat = 0, frob = 0;
  std::size_t q_dim = 0;
  auto* b_n = bounds->add_subcommand("min-n", "least scenario count");
  b_n->add_option("--epsilon-bar", eps_bar)->required();
  b_n->add_option("--beta", beta)->required();
  b_n->add_option("--q-dim", q_dim, "summation limit (Q+2)")->required();
  auto* b_nh = bounds->add_subcommand("n-hat", "Chebyshev successor count");
  b_nh->add_option("--variance-bound", m_hat)->required();
  b_nh->add_option("--delta", delta)->required();
  b_nh->add_option("--beta-s", beta_s)->required();
  auto* b_lq = bounds->add_subcommand("lipschitz-quadratic", "2 m lambda_max (L L_hat + 1)");
  b_lq->add_option("--m", m)->required();
  b_lq->add_option("--lambda-max", lam)->required();
  b_lq->add_option("--L", l)->required();
  b_lq->add_option("--L-hat", l_hat)->required();
  auto* b_ll = bounds->add_subcommand("lipschitz-linear", "2 m lambda_max (F^2 + 1)");
  b_ll->add_option("--m", m)->required();
  b_ll->add_option("--lambda-max", lam)->required();
  b_ll->add_option("--frobenius", frob)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e, out, err);
    return rc == 0 ? kExitOk : kExitError;
  }

  try {
    if (counts->parsed()) return cmd_counts(f, out);
    if (sample->parsed()) return cmd_sample(f, out, err);
    if (verify->parsed()) return cmd_verify(f, out, err);
    if (audit->parsed()) return cmd_audit(f, out);
    if (dump->parsed()) return cmd_lp_dump(f, out);
    if (b_n->parsed()) {
      out << minimal_scenario_count({eps_bar, beta, q_dim}) << "\n";
    } else if (b_nh->parsed()) {
      out << empirical_count(m_hat, delta, beta_s) << "\n";
    } else if (b_lq->parsed()) {
      out << lipschitz_quadratic(m, lam, l, l_hat) << "\n";
    } else if (b_ll->parsed()) {
      out << lipschitz_linear(m, lam, frob) << "\n";
    }
    return kExitOk;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitError;
  }
}

}  // namespace scbc::cli
