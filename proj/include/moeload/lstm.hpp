#pragma once

#include "moeload/types.hpp"

#include <cstdint>
#include <vector>

namespace moeload {

struct LstmConfig {
  Index hidden = 64;
  double learning_rate = 1e-3;
  int epochs = 200;
  Index truncation = 32;  // BPTT segment length
  Index batch_size = 1;   // segments per Adam step
  std::uint64_t seed = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
};

// Gate blocks are stacked as [input; forget; cell; output] along the rows of the
// input/recurrent weights and the gate bias.
struct LstmParameters {
  MatX input_weights;      // 4H x D
  MatX recurrent_weights;  // 4H x H
  VecX gate_bias;          // 4H
  MatX head_weights;       // D x H
  VecX head_bias;          // D

  static LstmParameters zeros(Index input_dim, Index hidden);

  Index input_dim() const { return input_weights.cols(); }
  Index hidden() const { return recurrent_weights.cols(); }

  // Visits the five tensors in a fixed order; `fn` receives (name, tensor).
  template <typename Fn>
  void for_each(Fn&& fn) {
    fn("input_weights", input_weights);
    fn("recurrent_weights", recurrent_weights);
    fn("gate_bias", gate_bias);
    fn("head_weights", head_weights);
    fn("head_bias", head_bias);
  }
};

class LstmForecaster {
 public:
  LstmForecaster(LstmParameters params, LstmConfig config);

  // Uniform(-1/sqrt(H), 1/sqrt(H)) weights and biases, forget-gate bias +1.
  static LstmForecaster initialize(Index input_dim, const LstmConfig& config);

  const LstmParameters& parameters() const { return params_; }
  LstmParameters& parameters() { return params_; }
  const LstmConfig& config() const { return config_; }
  Index input_dim() const { return params_.input_dim(); }
  Index hidden() const { return params_.hidden(); }

  double final_loss = 0.0;
  double initial_loss = 0.0;
  std::vector<double> loss_history;  // full-data loss after each epoch

 private:
  LstmParameters params_;
  LstmConfig config_;
};

// Runs the recurrence from a zero state; row t of the result is the head output after
// consuming input row t.
MatX lstm_forward(const LstmParameters& params, const MatX& inputs);
MatX lstm_forward(const LstmForecaster& forecaster, const MatX& inputs);

struct LstmLossGradient {
  double loss = 0.0;
  LstmParameters gradient;
};

// Mean squared error between lstm_forward(inputs) and targets (averaged over all entries)
// and its gradient by backpropagation through time.
LstmLossGradient lstm_loss_gradient(const LstmParameters& params, const MatX& inputs,
                                    const MatX& targets);

// Mean one-step-ahead MSE over the same truncated segments used for training.
double lstm_dataset_loss(const LstmParameters& params, const MatX& data, Index truncation);

LstmForecaster lstm_train(const MatX& data, const LstmConfig& config);

// Warms up on the last `truncation` history rows, then rolls out `horizon` steps feeding each
// simplex-projected prediction back as the next input.
MatX lstm_forecast(const LstmForecaster& forecaster, const MatX& history, Index horizon,
                   const LayerSlices& slices);

}  // namespace moeload
