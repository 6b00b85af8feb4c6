#pragma once

// Plain-text key=value run configuration. Blank lines and '#' comments are
// ignored; unknown keys are rejected.

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "scbc/core.hpp"
#include "scbc/systems.hpp"
#include "scbc/verify.hpp"

namespace scbc {

class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& key, const std::string& what)
      : std::runtime_error(key.empty() ? what : "config key '" + key + "': " + what), key_(key) {}
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

struct RunConfig {
  std::string system = "room";
  double sigma_w = 0.0125;
  double linear_a = 0.5;
  std::size_t plugin_dimension = 0;

  std::vector<double> state_lower{17.0}, state_upper{30.0};
  std::vector<double> initial_lower{17.0}, initial_upper{18.0};
  std::vector<double> unsafe_lower{28.0}, unsafe_upper{30.0};
  unsigned horizon = 3;
  double rho = 0.1;
  double beta = 0.005;
  double beta_s = 0.005;
  double delta = 0.015;
  double mu = -1e-3;
  double epsilon = 0.03;
  double lipschitz_bound = 2160.0;
  double variance_bound = 0.005;

  unsigned degree = 2;
  std::uint64_t run_seed = 1;
  double p_max = 0.0;
  double b_max = 1e3;
  std::string spectral_mode = "eigen";
  bool tighten = false;
  bool compact = true;
  std::optional<std::uint64_t> unsound_n;
  std::optional<std::uint64_t> unsound_n_hat;
  std::size_t q_dim = 0;
  std::size_t chunk_size = std::size_t{1} << 16;
  std::size_t audit_grid = 201;
  std::size_t audit_mc = 2000;
  unsigned workers = 1;

  VerificationProblem problem() const {
    VerificationProblem p;
    try {
      p.state_region = Region(state_lower, state_upper);
      p.initial_region = Region(initial_lower, initial_upper);
      p.unsafe_region = Region(unsafe_lower, unsafe_upper);
    } catch (const InvalidInput& e) {
      throw ConfigError("", e.what());
    }
    p.horizon = horizon;
    p.rho = rho;
    p.beta = beta;
    p.beta_s = beta_s;
    p.delta = delta;
    p.mu = mu;
    p.epsilon = epsilon;
    p.lipschitz_bound = lipschitz_bound;
    p.variance_bound = variance_bound;
    p.validate();
    return p;
  }

  MonomialBasis basis() const { return MonomialBasis(state_lower.size(), degree); }

  BlackBoxSystem make_system() const {
    if (system == "room") {
      RoomTemperatureParams rp;
      rp.sigma_w = sigma_w;
      return make_room_system(rp);
    }
    if (system == "linear") return make_linear_system(linear_a, sigma_w);
    if (system.rfind("plugin:", 0) == 0) {
      const std::size_t dim = plugin_dimension != 0 ? plugin_dimension : state_lower.size();
      return make_plugin_system(system.substr(7), dim);
    }
    throw ConfigError("system", "expected room, linear or plugin:<path>, got '" + system + "'");
  }

  SpectralMode spectral() const {
    if (spectral_mode == "eigen") return SpectralMode::Eigen;
    if (spectral_mode == "gershgorin") return SpectralMode::Gershgorin;
    if (spectral_mode == "off") return SpectralMode::Off;
    throw ConfigError("spectral_mode", "expected eigen, gershgorin or off");
  }

  VerifyOptions verify_options() const {
    VerifyOptions o;
    o.assembly.p_max = p_max;
    o.assembly.b_max = b_max;
    o.assembly.spectral = spectral();
    o.tighten = tighten;
    o.unsound_n = unsound_n;
    o.unsound_n_hat = unsound_n_hat;
    o.q_dim_override = q_dim;
    o.compact = compact;
    o.workers = workers;
    return o;
  }

  /// Sorted key=value lines with normalized numbers; worker count and
  /// output-only settings are excluded.
  std::map<std::string, std::string> canonical() const;
};

namespace detail {

inline std::string canon_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string canon_list(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? " " : "") + canon_real(v[i]);
  return s;
}

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a(const std::string& s, std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline double parse_real(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError(key, "not a number: '" + v + "'");
  }
}

inline std::uint64_t parse_uint(const std::string& key, const std::string& v) {
  if (v.empty() || v.find_first_not_of("0123456789") != std::string::npos) {
    throw ConfigError(key, "not a non-negative integer: '" + v + "'");
  }
  try {
    return std::stoull(v);
  } catch (const std::exception&) {
    throw ConfigError(key, "integer out of range: '" + v + "'");
  }
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(key, "not a boolean: '" + v + "'");
}

inline std::vector<double> parse_list(const std::string& key, const std::string& v) {
  std::vector<double> out;
  std::string s = v;
  for (char& ch : s) {
    if (ch == ',') ch = ' ';
  }
  std::istringstream is(s);
  std::string tok;
  while (is >> tok) out.push_back(parse_real(key, tok));
  if (out.empty()) throw ConfigError(key, "empty list");
  return out;
}

}  // namespace detail

inline std::map<std::string, std::string> RunConfig::canonical() const {
  using detail::canon_list;
  using detail::canon_real;
  std::map<std::string, std::string> m;
  m["system"] = system;
  m["sigma_w"] = canon_real(sigma_w);
  m["linear_a"] = canon_real(linear_a);
  m["plugin_dimension"] = std::to_string(plugin_dimension);
  m["state_lower"] = canon_list(state_lower);
  m["state_upper"] = canon_list(state_upper);
  m["initial_lower"] = canon_list(initial_lower);
  m["initial_upper"] = canon_list(initial_upper);
  m["unsafe_lower"] = canon_list(unsafe_lower);
  m["unsafe_upper"] = canon_list(unsafe_upper);
  m["horizon"] = std::to_string(horizon);
  m["rho"] = canon_real(rho);
  m["beta"] = canon_real(beta);
  m["beta_s"] = canon_real(beta_s);
  m["delta"] = canon_real(delta);
  m["mu"] = canon_real(mu);
  m["epsilon"] = canon_real(epsilon);
  m["lipschitz_bound"] = canon_real(lipschitz_bound);
  m["variance_bound"] = canon_real(variance_bound);
  m["degree"] = std::to_string(degree);
  m["run_seed"] = std::to_string(run_seed);
  m["p_max"] = canon_real(p_max);
  m["b_max"] = canon_real(b_max);
  m["spectral_mode"] = spectral_mode;
  m["tighten"] = tighten ? "true" : "false";
  m["compact"] = compact ? "true" : "false";
  m["unsound_N"] = unsound_n ? std::to_string(*unsound_n) : "";
  m["unsound_Nhat"] = unsound_n_hat ? std::to_string(*unsound_n_hat) : "";
  m["q_dim"] = std::to_string(q_dim);
  m["audit_grid"] = std::to_string(audit_grid);
  m["audit_mc"] = std::to_string(audit_mc);
  return m;
}

inline void set_config_value(RunConfig& c, const std::string& key, const std::string& v) {
  using namespace detail;
  if (key == "system") c.system = v;
  else if (key == "sigma_w") c.sigma_w = parse_real(key, v);
  else if (key == "linear_a") c.linear_a = parse_real(key, v);
  else if (key == "plugin_dimension") c.plugin_dimension = parse_uint(key, v);
  else if (key == "state_lower") c.state_lower = parse_list(key, v);
  else if (key == "state_upper") c.state_upper = parse_list(key, v);
  else if (key == "initial_lower") c.initial_lower = parse_list(key, v);
  else if (key == "initial_upper") c.initial_upper = parse_list(key, v);
  else if (key == "unsafe_lower") c.unsafe_lower = parse_list(key, v);
  else if (key == "unsafe_upper") c.unsafe_upper = parse_list(key, v);
  else if (key == "horizon") c.horizon = static_cast<unsigned>(parse_uint(key, v));
  else if (key == "rho") c.rho = parse_real(key, v);
  else if (key == "beta") c.beta = parse_real(key, v);
  else if (key == "beta_s") c.beta_s = parse_real(key, v);
  else if (key == "delta") c.delta = parse_real(key, v);
  else if (key == "mu") c.mu = parse_real(key, v);
  else if (key == "epsilon") c.epsilon = parse_real(key, v);
  else if (key == "lipschitz_bound") c.lipschitz_bound = parse_real(key, v);
  else if (key == "variance_bound") c.variance_bound = parse_real(key, v);
  else if (key == "degree") c.degree = static_cast<unsigned>(parse_uint(key, v));
  else if (key == "run_seed") c.run_seed = parse_uint(key, v);
  else if (key == "p_max") c.p_max = parse_real(key, v);
  else if (key == "b_max") c.b_max = parse_real(key, v);
  else if (key == "spectral_mode") c.spectral_mode = v;
  else if (key == "tighten") c.tighten = parse_bool(key, v);
  else if (key == "compact") c.compact = parse_bool(key, v);
  else if (key == "unsound_N") c.unsound_n = parse_uint(key, v);
  else if (key == "unsound_Nhat") c.unsound_n_hat = parse_uint(key, v);
  else if (key == "q_dim") c.q_dim = parse_uint(key, v);
  else if (key == "chunk_size") c.chunk_size = parse_uint(key, v);
  else if (key == "audit_grid") c.audit_grid = parse_uint(key, v);
  else if (key == "audit_mc") c.audit_mc = parse_uint(key, v);
  else if (key == "workers") c.workers = static_cast<unsigned>(parse_uint(key, v));
  else throw ConfigError(key, "unknown key");
}

inline RunConfig parse_config(std::istream& is) {
  RunConfig c;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("", "line " + std::to_string(lineno) + ": expected key=value");
    }
    set_config_value(c, detail::trim(line.substr(0, eq)), detail::trim(line.substr(eq + 1)));
  }
  return c;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("", "cannot open config file " + path);
  return parse_config(in);
}

inline std::uint64_t config_digest(const RunConfig& c) {
  std::uint64_t h = detail::fnv1a("scbc-config-v1\n");
  for (const auto& [k, v] : c.canonical()) h = detail::fnv1a(k + "=" + v + "\n", h);
  return h;
}

/// Digest of everything that determines the dataset bytes.
inline std::uint64_t dataset_digest(const RunConfig& c, const BlackBoxSystem& sys,
                                    std::uint64_t n, std::uint64_t n_hat) {
  std::string s = "scbc-dataset-v1\n" + sys.description + "\n" +
                  detail::canon_list(c.state_lower) + "\n" + detail::canon_list(c.state_upper) +
                  "\n" + std::to_string(n) + " " + std::to_string(n_hat) + " " +
                  std::to_string(c.run_seed) + " " + std::to_string(c.degree) + " " +
                  (c.compact ? "compact" : "raw") + "\n";
  return detail::fnv1a(s);
}

inline std::string hex64(std::uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace scbc
