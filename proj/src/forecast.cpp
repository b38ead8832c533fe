#include "moeload/forecast.hpp"

#include "moeload/error.hpp"

#include <string>

namespace moeload {

VecX sw_avg_forecast(const VecX& history, Index window, Index horizon) {
  if (window < 1) fail(ErrorCode::kInvalidArgument, "SW_Avg window must be positive");
  if (horizon < 0) fail(ErrorCode::kInvalidArgument, "horizon must be non-negative");
  if (history.size() < window) {
    fail(ErrorCode::kSeriesTooShort, "HistoryTooShort: need " + std::to_string(window) +
                                         " values, got " + std::to_string(history.size()));
  }
  // Ring buffer of the current window; `head` is the oldest entry.
  std::vector<double> ring(history.data() + history.size() - window, history.data() + history.size());
  std::size_t head = 0;
  const auto w = static_cast<std::size_t>(window);
  VecX out(horizon);
  for (Index s = 0; s < horizon; ++s) {
    // Deviations from the oldest value, summed oldest to newest: a constant window averages
    // to exactly that constant.
    const double base = ring[head];
    double sum = 0.0;
    for (std::size_t i = 1; i < w; ++i) sum += ring[(head + i) % w] - base;
    const double prediction = base + sum / static_cast<double>(window);
    out(s) = prediction;
    ring[head] = prediction;
    head = (head + 1) % w;
  }
  return out;
}

std::string_view to_string(Method method) {
  switch (method) {
    case Method::kSwAvg: return "sw_avg";
    case Method::kArima: return "arima";
    case Method::kLstm: return "lstm";
    case Method::kOracle: return "oracle";
  }
  return "unknown";
}

Method parse_method(std::string_view name, bool allow_oracle) {
  if (name == "sw_avg") return Method::kSwAvg;
  if (name == "arima") return Method::kArima;
  if (name == "lstm") return Method::kLstm;
  if (name == "oracle" && allow_oracle) return Method::kOracle;
  fail(ErrorCode::kConfigError, "unknown forecasting method '" + std::string(name) + "'");
}

namespace {

VecX arima_series_forecast(const VecX& series, const ArimaConfig& cfg, Index horizon,
                           ArimaModel& model_out) {
  VecX used = series;
  if (cfg.max_history > 0 && series.size() > cfg.max_history) used = series.tail(cfg.max_history);
  ArimaOrder order = cfg.order;
  if (cfg.auto_d) order.d = select_d(used, cfg.d_max);
  model_out = fit_arima(used, order, cfg.fit);
  return arima_forecast(model_out, used, horizon);
}

}  // namespace

ForecastResult forecast(const ForecastRequest& request) {
  const MatX& history = request.history;
  if (history.rows() == 0 || history.cols() == 0) {
    fail(ErrorCode::kInvalidArgument, "forecast history is empty");
  }
  if (request.horizon < 1) fail(ErrorCode::kInvalidArgument, "horizon must be >= 1");
  LayerSlices slices = request.slices;
  if (slices.empty()) slices.push_back({0, history.cols()});
  Index covered = 0;
  for (const auto& s : slices) {
    if (s.offset != covered || s.size <= 0) {
      fail(ErrorCode::kShapeMismatch, "layer slices must partition the series");
    }
    covered += s.size;
  }
  if (covered != history.cols()) fail(ErrorCode::kShapeMismatch, "layer slices must cover every series");

  ForecastResult result;
  result.config = request.config;
  result.predictions.resize(request.horizon, history.cols());
  switch (request.config.method) {
    case Method::kSwAvg:
      for (Index j = 0; j < history.cols(); ++j) {
        result.predictions.col(j) =
            sw_avg_forecast(history.col(j), request.config.sw_avg.window, request.horizon);
      }
      break;
    case Method::kArima:
      result.arima_models.resize(static_cast<std::size_t>(history.cols()));
      for (Index j = 0; j < history.cols(); ++j) {
        result.predictions.col(j) = arima_series_forecast(
            history.col(j), request.config.arima, request.horizon,
            result.arima_models[static_cast<std::size_t>(j)]);
      }
      break;
    case Method::kLstm:
      if (!request.lstm) fail(ErrorCode::kConfigError, "LSTM forecasting requires a trained model");
      result.predictions = lstm_forecast(*request.lstm, history, request.horizon, slices);
      result.lstm_final_loss = request.lstm->final_loss;
      break;
    case Method::kOracle:
      fail(ErrorCode::kConfigError, "the oracle method is only available in evaluation");
  }
  if (!result.predictions.allFinite()) {
    fail(ErrorCode::kNonFiniteForecast, std::string(to_string(request.config.method)) +
                                            " produced a non-finite prediction");
  }
  for (Index s = 0; s < result.predictions.rows(); ++s) {
    auto row = result.predictions.row(s);
    simplex_project_inplace(row, slices);
  }
  return result;
}

}  // namespace moeload
