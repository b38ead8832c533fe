#include "moeload/lstm.hpp"

#include "moeload/error.hpp"
#include "moeload/random.hpp"
#include "moeload/simplex.hpp"

#include <cmath>
#include <string>

namespace moeload {

namespace {

VecX sigmoid(const VecX& a) { return (1.0 + (-a.array()).exp()).inverse(); }

struct StepCache {
  VecX input_gate, forget_gate, cell_gate, output_gate;
  VecX c_prev, c, tanh_c, h_prev, h;
};

void check_shape(const LstmParameters& params, const MatX& inputs) {
  if (inputs.rows() > 0 && inputs.cols() != params.input_dim()) {
    fail(ErrorCode::kShapeMismatch, "input rows have " + std::to_string(inputs.cols()) +
                                        " entries, model expects " +
                                        std::to_string(params.input_dim()));
  }
}

// One LSTM step; updates (h, c) in place and optionally records intermediates.
void step(const LstmParameters& params, const Eigen::Ref<const VecX>& x, VecX& h, VecX& c,
          StepCache* cache) {
  const Index H = params.hidden();
  const VecX a = params.input_weights * x + params.recurrent_weights * h + params.gate_bias;
  VecX i = sigmoid(a.segment(0, H));
  VecX f = sigmoid(a.segment(H, H));
  VecX g = a.segment(2 * H, H).array().tanh();
  VecX o = sigmoid(a.segment(3 * H, H));
  VecX c_new = f.cwiseProduct(c) + i.cwiseProduct(g);
  VecX tanh_c = c_new.array().tanh();
  VecX h_new = o.cwiseProduct(tanh_c);
  if (cache) {
    cache->input_gate = std::move(i);
    cache->forget_gate = std::move(f);
    cache->cell_gate = std::move(g);
    cache->output_gate = std::move(o);
    cache->c_prev = c;
    cache->h_prev = h;
    cache->c = c_new;
    cache->tanh_c = tanh_c;
    cache->h = h_new;
  }
  c = std::move(c_new);
  h = std::move(h_new);
}

// Training segments: [start, start + len] rows, inputs are the first len rows.
struct Segment {
  Index start;
  Index length;
};

std::vector<Segment> segments(Index rows, Index truncation) {
  std::vector<Segment> out;
  for (Index s = 0; s + 1 < rows; s += truncation) {
    out.push_back({s, std::min(truncation, rows - 1 - s)});
  }
  return out;
}

void add_scaled(LstmParameters& acc, const LstmParameters& g, double scale) {
  acc.input_weights += scale * g.input_weights;
  acc.recurrent_weights += scale * g.recurrent_weights;
  acc.gate_bias += scale * g.gate_bias;
  acc.head_weights += scale * g.head_weights;
  acc.head_bias += scale * g.head_bias;
}

bool all_finite(const LstmParameters& p) {
  return p.input_weights.allFinite() && p.recurrent_weights.allFinite() && p.gate_bias.allFinite() &&
         p.head_weights.allFinite() && p.head_bias.allFinite();
}

class Adam {
 public:
  Adam(const LstmParameters& shape, const LstmConfig& cfg)
      : m_(LstmParameters::zeros(shape.input_dim(), shape.hidden())),
        v_(LstmParameters::zeros(shape.input_dim(), shape.hidden())),
        cfg_(cfg) {}

  void update(LstmParameters& params, LstmParameters& grad) {
    ++t_;
    const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    auto apply = [&](auto& p, auto& g, auto& m, auto& v) {
      m = cfg_.beta1 * m + (1.0 - cfg_.beta1) * g;
      v = cfg_.beta2 * v + (1.0 - cfg_.beta2) * g.cwiseProduct(g);
      p.array() -= cfg_.learning_rate * (m.array() / c1) / ((v.array() / c2).sqrt() + cfg_.adam_epsilon);
    };
    apply(params.input_weights, grad.input_weights, m_.input_weights, v_.input_weights);
    apply(params.recurrent_weights, grad.recurrent_weights, m_.recurrent_weights, v_.recurrent_weights);
    apply(params.gate_bias, grad.gate_bias, m_.gate_bias, v_.gate_bias);
    apply(params.head_weights, grad.head_weights, m_.head_weights, v_.head_weights);
    apply(params.head_bias, grad.head_bias, m_.head_bias, v_.head_bias);
  }

 private:
  LstmParameters m_;
  LstmParameters v_;
  LstmConfig cfg_;
  long t_ = 0;
};

}  // namespace

LstmParameters LstmParameters::zeros(Index input_dim, Index hidden) {
  return {MatX::Zero(4 * hidden, input_dim), MatX::Zero(4 * hidden, hidden), VecX::Zero(4 * hidden),
          MatX::Zero(input_dim, hidden), VecX::Zero(input_dim)};
}

LstmForecaster::LstmForecaster(LstmParameters params, LstmConfig config)
    : params_(std::move(params)), config_(config) {
  const Index D = params_.input_dim();
  const Index H = params_.hidden();
  if (params_.input_weights.rows() != 4 * H || params_.recurrent_weights.rows() != 4 * H ||
      params_.gate_bias.size() != 4 * H || params_.head_weights.rows() != D ||
      params_.head_weights.cols() != H || params_.head_bias.size() != D) {
    fail(ErrorCode::kShapeMismatch, "inconsistent LSTM parameter shapes");
  }
  if (!all_finite(params_)) fail(ErrorCode::kInvalidArgument, "non-finite LSTM parameters");
}

LstmForecaster LstmForecaster::initialize(Index input_dim, const LstmConfig& config) {
  if (input_dim <= 0 || config.hidden <= 0) {
    fail(ErrorCode::kInvalidConfig, "input_dim and hidden must be positive");
  }
  Xoshiro256 rng(config.seed);
  const double bound = 1.0 / std::sqrt(static_cast<double>(config.hidden));
  auto params = LstmParameters::zeros(input_dim, config.hidden);
  params.for_each([&](const char*, auto& tensor) {
    for (Index k = 0; k < tensor.size(); ++k) tensor.data()[k] = bound * (2.0 * rng.uniform() - 1.0);
  });
  params.gate_bias.segment(config.hidden, config.hidden).setOnes();
  return LstmForecaster(std::move(params), config);
}

MatX lstm_forward(const LstmParameters& params, const MatX& inputs) {
  check_shape(params, inputs);
  MatX out(inputs.rows(), params.input_dim());
  VecX h = VecX::Zero(params.hidden());
  VecX c = VecX::Zero(params.hidden());
  for (Index t = 0; t < inputs.rows(); ++t) {
    step(params, inputs.row(t).transpose(), h, c, nullptr);
    out.row(t) = (params.head_weights * h + params.head_bias).transpose();
  }
  return out;
}

MatX lstm_forward(const LstmForecaster& forecaster, const MatX& inputs) {
  return lstm_forward(forecaster.parameters(), inputs);
}

LstmLossGradient lstm_loss_gradient(const LstmParameters& params, const MatX& inputs,
                                    const MatX& targets) {
  check_shape(params, inputs);
  if (targets.rows() != inputs.rows() || targets.cols() != params.input_dim()) {
    fail(ErrorCode::kShapeMismatch, "targets must match the input shape");
  }
  const Index T = inputs.rows();
  const Index H = params.hidden();
  LstmLossGradient result{0.0, LstmParameters::zeros(params.input_dim(), H)};
  if (T == 0) return result;
  auto& grad = result.gradient;
  const double scale = 1.0 / static_cast<double>(T * params.input_dim());

  std::vector<StepCache> caches(static_cast<std::size_t>(T));
  MatX residual(T, params.input_dim());
  VecX h = VecX::Zero(H);
  VecX c = VecX::Zero(H);
  for (Index t = 0; t < T; ++t) {
    step(params, inputs.row(t).transpose(), h, c, &caches[static_cast<std::size_t>(t)]);
    residual.row(t) = (params.head_weights * h + params.head_bias).transpose() - targets.row(t);
  }
  result.loss = residual.squaredNorm() * scale;

  VecX dh_next = VecX::Zero(H);
  VecX dc_next = VecX::Zero(H);
  VecX da(4 * H);
  for (Index t = T - 1; t >= 0; --t) {
    const auto& s = caches[static_cast<std::size_t>(t)];
    const VecX dy = 2.0 * scale * residual.row(t).transpose();
    grad.head_weights += dy * s.h.transpose();
    grad.head_bias += dy;
    const VecX dh = params.head_weights.transpose() * dy + dh_next;
    const VecX dc = dh.cwiseProduct(s.output_gate).cwiseProduct((1.0 - s.tanh_c.array().square()).matrix()) + dc_next;
    da.segment(0, H) = dc.cwiseProduct(s.cell_gate).array() * s.input_gate.array() * (1.0 - s.input_gate.array());
    da.segment(H, H) = dc.cwiseProduct(s.c_prev).array() * s.forget_gate.array() * (1.0 - s.forget_gate.array());
    da.segment(2 * H, H) = dc.cwiseProduct(s.input_gate).array() * (1.0 - s.cell_gate.array().square());
    da.segment(3 * H, H) = dh.cwiseProduct(s.tanh_c).array() * s.output_gate.array() * (1.0 - s.output_gate.array());
    grad.input_weights += da * inputs.row(t);
    grad.recurrent_weights += da * s.h_prev.transpose();
    grad.gate_bias += da;
    dh_next = params.recurrent_weights.transpose() * da;
    dc_next = dc.cwiseProduct(s.forget_gate);
  }
  return result;
}

double lstm_dataset_loss(const LstmParameters& params, const MatX& data, Index truncation) {
  double total = 0.0;
  Index count = 0;
  for (const auto& seg : segments(data.rows(), truncation)) {
    const MatX out = lstm_forward(params, data.middleRows(seg.start, seg.length));
    total += (out - data.middleRows(seg.start + 1, seg.length)).squaredNorm();
    count += seg.length * data.cols();
  }
  return count == 0 ? 0.0 : total / static_cast<double>(count);
}

LstmForecaster lstm_train(const MatX& data, const LstmConfig& config) {
  if (config.truncation < 1 || config.batch_size < 1 || config.epochs < 0 ||
      !(config.learning_rate > 0.0)) {
    fail(ErrorCode::kInvalidConfig, "truncation, batch_size and learning_rate must be positive");
  }
  if (data.rows() < config.truncation + 1) {
    fail(ErrorCode::kInsufficientData, "need at least " + std::to_string(config.truncation + 1) +
                                           " rows, got " + std::to_string(data.rows()));
  }
  auto model = LstmForecaster::initialize(data.cols(), config);
  auto& params = model.parameters();
  const auto segs = segments(data.rows(), config.truncation);
  Adam adam(params, config);

  const auto checked_loss = [&](int epoch) {
    const double loss = lstm_dataset_loss(params, data, config.truncation);
    if (!std::isfinite(loss)) {
      fail(ErrorCode::kDivergedLoss, "non-finite training loss at epoch " + std::to_string(epoch));
    }
    return loss;
  };

  model.initial_loss = checked_loss(0);
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    for (std::size_t b = 0; b < segs.size(); b += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t end = std::min(segs.size(), b + static_cast<std::size_t>(config.batch_size));
      auto batch_grad = LstmParameters::zeros(params.input_dim(), params.hidden());
      for (std::size_t k = b; k < end; ++k) {
        const auto& seg = segs[k];
        const auto lg = lstm_loss_gradient(params, data.middleRows(seg.start, seg.length),
                                           data.middleRows(seg.start + 1, seg.length));
        add_scaled(batch_grad, lg.gradient, 1.0 / static_cast<double>(end - b));
      }
      if (!all_finite(batch_grad)) {
        fail(ErrorCode::kDivergedLoss, "non-finite gradient at epoch " + std::to_string(epoch));
      }
      adam.update(params, batch_grad);
    }
    model.loss_history.push_back(checked_loss(epoch + 1));
  }
  model.final_loss = model.loss_history.empty() ? model.initial_loss : model.loss_history.back();
  return model;
}

MatX lstm_forecast(const LstmForecaster& forecaster, const MatX& history, Index horizon,
                   const LayerSlices& slices) {
  const auto& params = forecaster.parameters();
  if (horizon < 0) fail(ErrorCode::kInvalidArgument, "horizon must be non-negative");
  MatX out(horizon, params.input_dim());
  if (horizon == 0) return out;
  if (history.rows() < 1) fail(ErrorCode::kInsufficientData, "LSTM forecast needs history");
  check_shape(params, history);
  Index covered = 0;
  for (const auto& s : slices) covered += s.size;
  if (covered != params.input_dim()) {
    fail(ErrorCode::kShapeMismatch, "layer slices do not cover the model input");
  }

  const Index context = std::min(history.rows(), forecaster.config().truncation);
  VecX h = VecX::Zero(params.hidden());
  VecX c = VecX::Zero(params.hidden());
  for (Index t = history.rows() - context; t < history.rows(); ++t) {
    step(params, history.row(t).transpose(), h, c, nullptr);
  }
  for (Index s = 0; s < horizon; ++s) {
    VecX y = params.head_weights * h + params.head_bias;
    if (!y.allFinite()) fail(ErrorCode::kNonFiniteForecast, "LSTM produced a non-finite value");
    simplex_project_inplace(y, slices);
    out.row(s) = y.transpose();
    if (s + 1 < horizon) step(params, y, h, c, nullptr);
  }
  return out;
}

}  // namespace moeload
