#include "blompe/random.hpp"

#include <cmath>
#include <numeric>

#include "blompe/error.hpp"

namespace blompe {

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

double Rng::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  // Marsaglia polar method.
  double u, v, s;
  do {
    u = 2.0 * uniform() - 1.0;
    v = 2.0 * uniform() - 1.0;
    s = u * u + v * v;
  } while (s >= 1.0 || s == 0.0);
  const double f = std::sqrt(-2.0 * std::log(s) / s);
  spare_ = v * f;
  has_spare_ = true;
  return u * f;
}

Vector Rng::normal_vector(Eigen::Index dim) {
  Vector z(dim);
  for (Eigen::Index i = 0; i < dim; ++i) z(i) = normal();
  return z;
}

double Rng::exponential() { return -std::log1p(-uniform()); }

std::size_t Rng::categorical(std::span<const double> weights) {
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  if (!(total > 0.0)) fail(Errc::domain, "categorical weights must have positive mass");
  double u = uniform() * total;
  for (std::size_t k = 0; k < weights.size(); ++k) {
    if (u < weights[k]) return k;
    u -= weights[k];
  }
  // Rounding can leave u marginally above the last cumulative weight.
  for (std::size_t k = weights.size(); k-- > 0;) {
    if (weights[k] > 0.0) return k;
  }
  return weights.size() - 1;
}

std::size_t Rng::uniform_index(std::size_t n) {
  return static_cast<std::size_t>(uniform() * static_cast<double>(n)) % n;
}

}  // namespace blompe
