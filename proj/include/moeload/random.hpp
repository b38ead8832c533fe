#pragma once

#include <array>
#include <cstdint>

namespace moeload {

// SplitMix64 step; used to expand seeds into xoshiro state.
std::uint64_t splitmix64(std::uint64_t& state);

// xoshiro256** 1.0 (Blackman & Vigna). All synthetic data in this project is drawn from
// this generator so outputs are identical across platforms and standard libraries.
class Xoshiro256 {
 public:
  using result_type = std::uint64_t;

  explicit Xoshiro256(std::uint64_t seed);
  // Independent substream for (seed, stream), e.g. one per MoE layer.
  Xoshiro256(std::uint64_t seed, std::uint64_t stream);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return ~result_type{0}; }

  result_type operator()();

  // Uniform on the open interval (0, 1).
  double uniform();
  double normal();
  std::int64_t binomial(std::int64_t trials, double p);

 private:
  std::array<std::uint64_t, 4> s_{};
};

}  // namespace moeload
