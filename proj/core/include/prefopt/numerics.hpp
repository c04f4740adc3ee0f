#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace prefopt {

// Numerically stable scalar helpers shared by every loss.

/// log(1 + exp(x)) without overflow for large |x|.
double softplus(double x);

/// log sigma(x) = -softplus(-x).
double log_sigmoid(double x);

double sigmoid(double x);

/// log(p / (1 - p)); p must lie in (0, 1).
double logit(double p);

double logsumexp(std::span<const double> values);

/// Seeded pseudo-random source. Distribution sampling is done by hand on top of
/// the raw 64-bit engine so streams are bit-identical across standard
/// libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on [0, 1) with 53 bits of resolution.
  double uniform01();

  /// Unbiased integer in [0, bound).
  std::uint64_t uniform_index(std::uint64_t bound);

  double normal();

  template <typename T>
  void shuffle(std::vector<T>& values) {
    for (std::size_t i = values.size(); i > 1; --i) {
      const std::size_t j = uniform_index(i);
      std::swap(values[i - 1], values[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_normal_ = false;
  double spare_normal_ = 0.0;
};

std::uint64_t splitmix64(std::uint64_t x);

/// Independent seed for stream `stream` under a master seed.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

/// Counter-based uniform draw on [0, 1): a pure function of (seed, index), so
/// per-item noise does not depend on evaluation order.
double counter_uniform(std::uint64_t seed, std::uint64_t index);

}  // namespace prefopt
