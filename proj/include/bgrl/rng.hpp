#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <random>
#include <string_view>

namespace bgrl {

// SplitMix64 finalizer.
std::uint64_t splitmix64(std::uint64_t x);

// Child seed for (seed, role tag, index). The tag is folded in with 64-bit
// FNV-1a, then the three parts are mixed through splitmix64 one at a time:
//   h = splitmix64(seed ^ splitmix64(fnv1a(tag)) ^ splitmix64(index + 1))
// so parallel consumers can draw from disjoint streams without coordinating.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag,
                          std::uint64_t index = 0);

// mt19937_64 stream with hand-rolled transforms. std::*_distribution output
// is implementation-defined, so uniforms use the top 53 bits and Gaussians
// use the polar-free Box-Muller transform with one cached deviate.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // uniform in [0, 1)
  double uniform();
  // standard normal
  double normal();
  // uniform integer in [0, n)
  std::size_t index(std::size_t n);

  Eigen::VectorXd normal_vector(Eigen::Index n);

  std::uint64_t next_u64() { return engine_(); }

 private:
  std::mt19937_64 engine_;
  double cached_ = 0.0;
  bool has_cached_ = false;
};

}  // namespace bgrl
