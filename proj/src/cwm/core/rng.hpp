#pragma once

#include <cstdint>
#include <random>
#include <string>

#include "cwm/core/scalar.hpp"

namespace cwm {

/// Seeded random stream. Uniform/normal draws are computed from raw engine
/// bits so sequences do not depend on the standard library's distributions.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, n). Unbiased.
  std::uint64_t uniform_int(std::uint64_t n);
  double normal();

  /// Independent child stream derived from this stream's next output and `tag`.
  Rng fork(std::uint64_t tag);

  std::string save_state() const;
  void load_state(const std::string& state);

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace cwm
