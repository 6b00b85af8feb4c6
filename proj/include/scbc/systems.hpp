#pragma once

// Black-box access to dynamics. Nothing downstream inspects f: every
// successor comes from BlackBoxSystem::step.

#include <array>
#include <cerrno>
#include <cmath>
#include <csignal>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <memory>
#include <mutex>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include "scbc/core.hpp"
#include "scbc/rng.hpp"

namespace scbc {

/// Raised when an external plugin misbehaves (crash, malformed reply).
class PluginError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// x -> successor under the noise realization identified by seed.
using StepFunction =
    std::function<void(std::span<const double> x, std::uint64_t seed, std::span<double> out)>;

struct BlackBoxSystem {
  std::size_t state_dimension = 0;
  StepFunction step_fn;
  /// Canonical description (model name and parameters); feeds the
  /// dataset digest so a dataset is never reused with another system.
  std::string description;
};

inline void step(const BlackBoxSystem& sys, std::span<const double> x,
                 std::uint64_t seed, std::span<double> out) {
  detail::require_dim(x.size(), sys.state_dimension, "step");
  detail::require_dim(out.size(), sys.state_dimension, "step(out)");
  for (double v : x) detail::require(std::isfinite(v), "step: non-finite input state");
  sys.step_fn(x, seed, out);
}

inline State step(const BlackBoxSystem& sys, std::span<const double> x,
                  std::uint64_t seed) {
  State out(sys.state_dimension);
  step(sys, x, seed, out);
  return out;
}

// ---------------------------------------------------------------------------
// Room temperature model
// ---------------------------------------------------------------------------

struct RoomTemperatureParams {
  double tau_s = 5.0;
  double alpha_e = 8e-3;
  double alpha_h = 3.6e-3;
  double t_ambient = 15.0;
  double t_heater = 55.0;
  double sigma_w = 0.0125;
  /// Heater valve controller, highest degree first.
  std::array<double, 5> controller = {-1.018e-6, 7.563e-5, -0.001872, 0.02022, 0.3944};
};

/// Quartic valve-opening feedback u(x).
inline double controller_output(double x, const RoomTemperatureParams& p = {}) {
  double u = 0.0;
  for (double a : p.controller) u = u * x + a;
  return u;
}

/// Closed-loop step with noise value w (already a standard normal draw).
inline double room_step(double x, double w, const RoomTemperatureParams& p) {
  const double u = controller_output(x, p);
  return x + p.tau_s * (p.alpha_e * (p.t_ambient - x) + p.alpha_h * (p.t_heater - x) * u) +
         p.sigma_w * w;
}

inline BlackBoxSystem make_room_system(const RoomTemperatureParams& p = {}) {
  std::ostringstream desc;
  desc.precision(17);
  desc << "room tau_s=" << p.tau_s << " alpha_e=" << p.alpha_e << " alpha_h=" << p.alpha_h
       << " t_ambient=" << p.t_ambient << " t_heater=" << p.t_heater
       << " sigma_w=" << p.sigma_w << " u=";
  for (double a : p.controller) desc << a << ",";
  BlackBoxSystem sys;
  sys.state_dimension = 1;
  sys.description = desc.str();
  sys.step_fn = [p](std::span<const double> x, std::uint64_t seed, std::span<double> out) {
    const double w = p.sigma_w == 0.0 ? 0.0 : rng::standard_normal(seed);
    out[0] = room_step(x[0], w, p);
  };
  return sys;
}

// ---------------------------------------------------------------------------
// Scalar linear model x+ = a x + sigma w
// ---------------------------------------------------------------------------

inline BlackBoxSystem make_linear_system(double a, double sigma_w) {
  std::ostringstream desc;
  desc.precision(17);
  desc << "linear a=" << a << " sigma_w=" << sigma_w;
  BlackBoxSystem sys;
  sys.state_dimension = 1;
  sys.description = desc.str();
  sys.step_fn = [a, sigma_w](std::span<const double> x, std::uint64_t seed,
                             std::span<double> out) {
    const double w = sigma_w == 0.0 ? 0.0 : rng::standard_normal(seed);
    out[0] = a * x[0] + sigma_w * w;
  };
  return sys;
}

// ---------------------------------------------------------------------------
// External plugin over stdin/stdout
// ---------------------------------------------------------------------------

/// Child process speaking the line protocol
///   request:  "STEP x1 ... xn SEED s"
///   response: "OK y1 ... yn"
/// Requests are serialized; one request is in flight at a time.
class PluginProcess {
 public:
  PluginProcess(const std::string& path, std::size_t dimension) : dimension_(dimension) {
    int to_child[2];
    int from_child[2];
    if (pipe(to_child) != 0 || pipe(from_child) != 0) {
      throw PluginError("plugin: pipe() failed");
    }
    pid_ = fork();
    if (pid_ < 0) throw PluginError("plugin: fork() failed");
    if (pid_ == 0) {
      dup2(to_child[0], STDIN_FILENO);
      dup2(from_child[1], STDOUT_FILENO);
      close(to_child[0]);
      close(to_child[1]);
      close(from_child[0]);
      close(from_child[1]);
      execl(path.c_str(), path.c_str(), static_cast<char*>(nullptr));
      _exit(127);
    }
    close(to_child[0]);
    close(from_child[1]);
    out_ = fdopen(to_child[1], "w");
    in_ = fdopen(from_child[0], "r");
    if (out_ == nullptr || in_ == nullptr) throw PluginError("plugin: fdopen() failed");
    std::signal(SIGPIPE, SIG_IGN);
  }

  PluginProcess(const PluginProcess&) = delete;
  PluginProcess& operator=(const PluginProcess&) = delete;

  ~PluginProcess() {
    if (out_ != nullptr) std::fclose(out_);
    if (in_ != nullptr) std::fclose(in_);
    if (pid_ > 0) {
      int status = 0;
      waitpid(pid_, &status, 0);
    }
  }

  void step(std::span<const double> x, std::uint64_t seed, std::span<double> out) {
    std::lock_guard lock(mu_);
    if (failed_) throw PluginError("plugin: process already failed");
    std::string req = "STEP";
    char buf[64];
    for (double v : x) {
      std::snprintf(buf, sizeof buf, " %.17g", v);
      req += buf;
    }
    std::snprintf(buf, sizeof buf, " SEED %llu\n", static_cast<unsigned long long>(seed));
    req += buf;
    if (std::fputs(req.c_str(), out_) < 0 || std::fflush(out_) != 0) {
      failed_ = true;
      throw PluginError("plugin: write failed");
    }
    std::string line;
    int ch;
    while ((ch = std::fgetc(in_)) != EOF && ch != '\n') line.push_back(static_cast<char>(ch));
    if (ch == EOF && line.empty()) {
      failed_ = true;
      throw PluginError("plugin: unexpected end of output");
    }
    std::istringstream is(line);
    std::string tag;
    is >> tag;
    if (tag != "OK") {
      failed_ = true;
      throw PluginError("plugin: malformed response '" + line + "'");
    }
    for (std::size_t d = 0; d < dimension_; ++d) {
      if (!(is >> out[d])) {
        failed_ = true;
        throw PluginError("plugin: response has too few values '" + line + "'");
      }
    }
  }

 private:
  std::size_t dimension_;
  pid_t pid_ = -1;
  std::FILE* out_ = nullptr;
  std::FILE* in_ = nullptr;
  std::mutex mu_;
  bool failed_ = false;
};

inline BlackBoxSystem make_plugin_system(const std::string& path, std::size_t dimension) {
  auto proc = std::make_shared<PluginProcess>(path, dimension);
  BlackBoxSystem sys;
  sys.state_dimension = dimension;
  sys.description = "plugin:" + path;
  sys.step_fn = [proc](std::span<const double> x, std::uint64_t seed, std::span<double> out) {
    proc->step(x, seed, out);
  };
  return sys;
}

}  // namespace scbc
