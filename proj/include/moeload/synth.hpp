#pragma once

#include "moeload/trace.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace moeload {

// Drifting-logit router model. Per layer the logits follow a Gaussian random walk whose
// step size decays from sigma0 towards sigma_inf; routing is softmax(z / temperature) and
// each iteration's counts are a multinomial draw of tokens_per_iteration tokens.
struct SynthConfig {
  Index num_layers = 6;
  Index experts_per_layer = 16;
  std::int64_t tokens_per_iteration = 65536;
  Index num_iterations = 10000;
  double sigma0 = 0.2;
  double sigma_inf = 0.005;
  double decay_T = 1000.0;
  double temperature = 1.0;
  std::uint64_t seed = 0;
  // When set, the step size is sigma0 before this iteration and sigma_inf from it onwards.
  std::optional<Index> hard_transition_at;
  // Defaults to 2, 4, ..., 2 * num_layers.
  std::vector<int> layer_ids;

  void validate() const;
  std::vector<int> resolved_layer_ids() const;
  double step_size(Index t) const;
};

LoadTrace generate_trace(const SynthConfig& cfg);

struct ArmaSynthConfig {
  std::vector<double> phi;
  std::vector<double> theta;
  int d = 0;
  Index length = 1000;
  double noise_sigma = 1.0;  // zero allowed, for impulse-response runs
  std::uint64_t seed = 0;
  // Added to the first retained innovation.
  double initial_shock = 0.0;
};

// Simulates an ARMA(p, q) process after 10 * (p + q + 1) burn-in samples, then integrates
// it d times.
VecX generate_arma(const ArmaSynthConfig& cfg);

}  // namespace moeload
