#pragma once

#include <cstdint>
#include <random>
#include <span>

#include "blompe/linalg.hpp"

namespace blompe {

/// Mixes a base seed with a stream id (splitmix64 finalizer). Used to give
/// every start, cluster, design point or cell its own reproducible stream.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

/// Deterministic random source. The transforms from raw 64-bit draws are
/// implemented here rather than through <random> distributions, whose
/// output is implementation-defined, so that seeded outputs are identical
/// across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  double normal();
  Vector normal_vector(Eigen::Index dim);
  double exponential();

  /// Index drawn proportionally to non-negative weights.
  std::size_t categorical(std::span<const double> weights);
  std::size_t uniform_index(std::size_t n);

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace blompe
