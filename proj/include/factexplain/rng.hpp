#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace fx {

/// splitmix64 finalizer; used to decorrelate derived seeds.
[[nodiscard]] std::uint64_t mix64(std::uint64_t x);

/// FNV-1a over the label bytes.
[[nodiscard]] std::uint64_t hash_label(std::string_view label);

/// Seed for a named sub-component: mix(seed ^ hash(label)). Adding a new label never
/// perturbs the streams of existing ones.
[[nodiscard]] std::uint64_t derive_seed(std::uint64_t seed, std::string_view label);

/// Seed for the i-th item of a family (graph index, trial index, ...).
[[nodiscard]] std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index);

/// Deterministic random source. All distributions are implemented here rather than via
/// <random> distribution classes, whose output is implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(mix64(seed)) {}

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform in [0, 1).
  double uniform();
  /// Uniform in the open interval (0, 1).
  double uniform_open();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);
  int uniform_int(int lo, int hi_inclusive);
  bool bernoulli(double p) { return uniform() < p; }
  double normal(double mean = 0.0, double stddev = 1.0);

  template <class It>
  void shuffle(It first, It last) {
    const auto n = static_cast<std::uint64_t>(last - first);
    for (std::uint64_t i = n; i > 1; --i) {
      const auto j = below(i);
      std::swap(first[i - 1], first[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace fx
