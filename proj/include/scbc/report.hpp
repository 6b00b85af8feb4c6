#pragma once

// JSON documents emitted by the verifier: report.json (schema version 1) and
// certificate.json.

#include <string>

#include "json.hpp"
#include "scbc/config.hpp"
#include "scbc/verify.hpp"

namespace scbc {

using Json = nlohmann::ordered_json;

inline constexpr int kReportVersion = 1;

inline Json certificate_to_json(const BarrierCertificate& cert) {
  Json j;
  j["report_version"] = kReportVersion;
  j["dimension"] = cert.basis.dimension();
  j["degree"] = cert.basis.degree();
  Json monomials = Json::array();
  Json exponents = Json::array();
  for (std::size_t q = 0; q < cert.basis.size(); ++q) {
    monomials.push_back(cert.basis.monomial_name(q));
    auto e = cert.basis.exponent(q);
    exponents.push_back(std::vector<unsigned>(e.begin(), e.end()));
  }
  j["monomials"] = monomials;
  j["exponents"] = exponents;
  j["coefficients"] = cert.coefficients;
  j["lambda"] = cert.lambda;
  j["c"] = cert.c;
  j["kappa"] = cert.kappa;
  return j;
}

inline BarrierCertificate certificate_from_json(const Json& j) {
  BarrierCertificate cert;
  cert.basis = MonomialBasis(j.at("dimension").get<std::size_t>(), j.at("degree").get<unsigned>());
  cert.coefficients = j.at("coefficients").get<std::vector<double>>();
  detail::require_dim(cert.coefficients.size(), cert.basis.size(), "certificate_from_json");
  cert.lambda = j.at("lambda").get<double>();
  cert.c = j.at("c").get<double>();
  cert.kappa = j.at("kappa").get<double>();
  return cert;
}

namespace detail {

inline Json region_json(const Region& r) {
  return Json{{"lower", r.lower()}, {"upper", r.upper()}};
}

template <class T>
Json optional_json(const std::optional<T>& v) {
  return v ? Json(*v) : Json(nullptr);
}

}  // namespace detail

/// Deterministic report document; wall-clock timings live under "timing"
/// and are the only fields that differ between identical runs.
inline Json report_to_json(const VerificationReport& r, bool include_timing = true) {
  const auto& p = r.problem;
  Json j;
  j["report_version"] = kReportVersion;
  j["verdict"] = {
      {"status", to_string(r.verdict.status)},
      {"probability_lower_bound", r.verdict.probability_lower_bound},
      {"confidence", r.verdict.confidence},
      {"kappa_star", r.verdict.kappa_star},
      {"epsilon", r.verdict.epsilon},
      {"decision_margin", r.decision_margin},
      {"reason", r.reason},
  };
  j["sound"] = !r.counts.unsound;
  j["watermark"] = r.watermark;
  j["certificate"] = certificate_to_json(r.certificate);
  j["theorem1_bound"] = r.theorem1;
  j["counts"] = {
      {"N", r.counts.n},
      {"N_hat", r.counts.n_hat},
      {"N_required", r.counts.n_required},
      {"N_hat_required", r.counts.n_hat_required},
      {"q_dim", r.counts.q_dim},
      {"epsilon_bar", r.counts.epsilon_bar},
  };
  j["inputs"] = {
      {"state_region", detail::region_json(p.state_region)},
      {"initial_region", detail::region_json(p.initial_region)},
      {"unsafe_region", detail::region_json(p.unsafe_region)},
      {"horizon", p.horizon},
      {"rho", p.rho},
      {"beta", p.beta},
      {"beta_s", p.beta_s},
      {"delta", p.delta},
      {"epsilon", p.epsilon},
      {"epsilon_bar", r.counts.epsilon_bar},
      {"mu", r.mu},
      {"lipschitz_bound", p.lipschitz_bound},
      {"variance_bound", p.variance_bound},
      {"p_max", r.p_max},
      {"spectral_mode", r.spectral_mode},
      {"run_seed", r.run_seed},
      {"tighten", r.tighten},
      {"tighten_offset", r.tighten_offset},
  };
  j["region_samples"] = {
      {"total", r.regions.total}, {"initial", r.regions.initial}, {"unsafe", r.regions.unsafe}};
  j["solver"] = {
      {"status", to_string(r.lp_status)},
      {"rows", r.lp_rows},
      {"working_rows", r.lp_working_rows},
      {"outer_iterations", r.lp_iterations},
      {"pivots", r.lp_pivots},
      {"max_normalized_residual", r.lp_max_residual},
      {"active_rows", r.active_rows},
      {"infeasibility_certificate", r.infeasibility_certificate},
      {"lambda_max_p", detail::optional_json(r.lambda_max_p)},
      {"gershgorin_bound", detail::optional_json(r.gershgorin_bound)},
  };
  j["failure"] = {{"stage", r.failure_stage}, {"message", r.failure_message}};
  j["digests"] = {{"config", hex64(r.config_digest)}, {"dataset", hex64(r.dataset_digest)}};
  if (include_timing) {
    j["timing"] = {{"sampling_seconds", r.seconds_sampling},
                   {"assembly_seconds", r.seconds_assembly},
                   {"solve_seconds", r.seconds_solve}};
  }
  return j;
}

inline std::string dump_json(const Json& j) { return j.dump(2) + "\n"; }

}  // namespace scbc
