#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string_view>
#include <utility>

namespace compinv {

/// Derives an independent 64-bit seed for a named consumer of a base seed.
///
/// Each pipeline stage (composition draws, noise, matrix, network init, batch order)
/// pulls from its own named stream, so adding draws in one stage never shifts another.
std::uint64_t derive_seed(std::uint64_t base, std::string_view name);

/// Seeded random stream with platform-independent variate generation.
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the standard; the
/// variate transforms are implemented here because the std distributions are not
/// required to produce identical values across standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Stream for a named stage, derived from `base`.
  static Rng substream(std::uint64_t base, std::string_view name) {
    return Rng(derive_seed(base, name));
  }

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform on [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Unit-rate exponential.
  double exponential();

  /// Standard normal (Marsaglia polar method).
  double normal();

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  /// Uniform integer in [0, n), unbiased.
  std::uint64_t below(std::uint64_t n);

  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
  double spare_normal_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace compinv
