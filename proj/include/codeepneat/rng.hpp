#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string>

namespace codeepneat {

// Random stream used by every stochastic operator. The engine is a standard
// Mersenne Twister; the distributions are implemented here so that draws are
// identical across standard libraries and carry no hidden cached state, which
// keeps checkpoints exact.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform index in [0, n). n must be positive.
  std::size_t index(std::size_t n);

  // Uniform integer in [lo, hi].
  std::int64_t integer(std::int64_t lo, std::int64_t hi);

  bool bernoulli(double p) { return p >= 1.0 || (p > 0.0 && uniform() < p); }

  // Standard normal via Box-Muller; consumes two uniforms per call.
  double normal();
  double normal(double mean, double sigma) { return mean + sigma * normal(); }

  // Independent child stream seeded from this one.
  Rng split() { return Rng(splitmix64(next_u64())); }

  std::string state() const;
  void set_state(const std::string& text);

  friend bool operator==(const Rng& a, const Rng& b) { return a.engine_ == b.engine_; }

  static std::uint64_t splitmix64(std::uint64_t x);

 private:
  std::mt19937_64 engine_;
};

// Deterministic seed derivation for per-network evaluation budgets.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t salt);

}  // namespace codeepneat
