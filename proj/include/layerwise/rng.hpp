// Counter-based deterministic generator (splitmix64 over seed + counter).
// The stream for a given seed is identical on every platform, and substreams
// derived with split() stay reproducible no matter how callers interleave.
#pragma once

#include <cstdint>
#include <cmath>
#include <numbers>
#include <vector>

#include "layerwise/matrix.hpp"

namespace lw {

class RngState {
 public:
  explicit RngState(std::uint64_t seed = 0) : seed_(seed), counter_(0) {}

  std::uint64_t seed() const { return seed_; }
  std::uint64_t counter() const { return counter_; }

  std::uint64_t next_u64() {
    std::uint64_t z = seed_ + (++counter_) * 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  // [0, 1) with 53 random bits
  double uniform() { return (next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // [0, n)
  std::uint64_t uniform_index(std::uint64_t n) { return next_u64() % n; }

  // Box-Muller; two uniforms per draw, no cached spare, so the stream
  // position is a pure function of the draw count.
  double normal(double mean = 0.0, double stddev = 1.0) {
    double u1 = uniform();
    while (u1 == 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    return mean + stddev * r * std::cos(2.0 * std::numbers::pi * u2);
  }

  // Independent substream; tag picks the branch.
  RngState split(std::uint64_t tag) {
    RngState sub(seed_ ^ (0xD1B54A32D192ED03ull * (tag + 1)) ^ next_u64());
    return sub;
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(uniform_index(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  Matrix uniform_matrix(std::size_t rows, std::size_t cols, double lo, double hi) {
    Matrix m(rows, cols);
    for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = uniform(lo, hi);
    return m;
  }

  Matrix normal_matrix(std::size_t rows, std::size_t cols, double mean = 0.0,
                       double stddev = 1.0) {
    Matrix m(rows, cols);
    for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = normal(mean, stddev);
    return m;
  }

 private:
  std::uint64_t seed_;
  std::uint64_t counter_;
};

// Glorot-style uniform(-sqrt(6/(fan_in+fan_out)), +...) initialization.
inline Matrix glorot_uniform(RngState& rng, std::size_t fan_in, std::size_t fan_out,
                             std::size_t rows, std::size_t cols) {
  const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  return rng.uniform_matrix(rows, cols, -a, a);
}

}  // namespace lw
