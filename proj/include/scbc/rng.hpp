#pragma once

// Counter-based random streams. Every random quantity in the pipeline is a
// pure function of (run_seed, sample_index, realization_index), so parallel
// workers reproduce the same dataset regardless of scheduling.

#include <cmath>
#include <cstdint>
#include <numbers>

namespace scbc::rng {

/// splitmix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Seed of realization j of sample i under run_seed.
constexpr std::uint64_t noise_seed(std::uint64_t run_seed, std::uint64_t i,
                                   std::uint64_t j) {
  return mix64(mix64(mix64(run_seed) ^ i) + j);
}

/// Independent stream used for the uniform state draws (kept apart from
/// the successor seeds by a domain constant).
constexpr std::uint64_t state_seed(std::uint64_t run_seed, std::uint64_t i,
                                   std::uint64_t d) {
  return noise_seed(run_seed ^ 0x5354415445535452ULL, i, d);
}

/// Uniform double in [0, 1) from the top 53 bits.
constexpr double to_unit(std::uint64_t z) {
  return static_cast<double>(z >> 11) * 0x1.0p-53;
}

/// Uniform double in (0, 1].
constexpr double to_unit_open0(std::uint64_t z) {
  return (static_cast<double>(z >> 11) + 1.0) * 0x1.0p-53;
}

/// Standard normal draw number `k` derived from seed, by the Box-Muller
/// cosine branch applied to two counter-derived uniforms.
inline double standard_normal(std::uint64_t seed, std::uint64_t k = 0) {
  const std::uint64_t base = mix64(seed + 2 * k);
  const double u1 = to_unit_open0(base);
  const double u2 = to_unit(mix64(base ^ 0xd1b54a32d192ed03ULL));
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

/// Sequential generator over a counter stream; used by tests and by the
/// initial working-set selection of the LP solver.
class CounterStream {
 public:
  explicit CounterStream(std::uint64_t seed) : seed_(seed) {}
  std::uint64_t next() { return noise_seed(seed_, counter_++, 0); }
  double uniform() { return to_unit(next()); }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal() { return standard_normal(next()); }
  std::uint64_t below(std::uint64_t n) { return next() % n; }

 private:
  std::uint64_t seed_;
  std::uint64_t counter_ = 0;
};

}  // namespace scbc::rng
