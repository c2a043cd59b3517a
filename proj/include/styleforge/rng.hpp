#pragma once

#include <cstdint>
#include <random>

#include "styleforge/tensor.hpp"

namespace styleforge {

/// Seeded generator. All randomness in a run flows from one user seed,
/// split into independent streams with for_stream.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Independent stream keyed by (seed, a, b), e.g. (seed, step, purpose).
  static Rng for_stream(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0);

  double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }
  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(engine_); }
  int uniform_int(int n) { return std::uniform_int_distribution<int>(0, n - 1)(engine_); }
  double normal() { return normal_(engine_); }

  Tensor normal_tensor(Shape shape, double stddev = 1.0);

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace styleforge
