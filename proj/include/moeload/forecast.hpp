#pragma once

#include "moeload/arima.hpp"
#include "moeload/lstm.hpp"
#include "moeload/simplex.hpp"
#include "moeload/types.hpp"

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace moeload {

// Mean of the last `window` values, rolled forward `horizon` times with each prediction
// appended to the window. Every mean is recomputed from scratch as
//   oldest + (sum over the rest, oldest to newest, of (x_i - oldest)) / window,
// so results carry no accumulated rounding and constant windows are exact fixed points.
VecX sw_avg_forecast(const VecX& history, Index window, Index horizon);

enum class Method { kSwAvg, kArima, kLstm, kOracle };

std::string_view to_string(Method method);
// Throws ConfigError for unknown names; "oracle" is accepted only when allow_oracle is set.
Method parse_method(std::string_view name, bool allow_oracle = false);

struct SwAvgConfig {
  Index window = 1000;
};

struct ArimaConfig {
  ArimaOrder order{5, 1, 5};
  bool auto_d = false;  // choose d with select_d(d_max) instead of order.d
  int d_max = 2;
  Index max_history = 0;  // fit on at most this many trailing values; 0 = all
  ArimaFitOptions fit;
};

struct MethodConfig {
  Method method = Method::kSwAvg;
  SwAvgConfig sw_avg;
  ArimaConfig arima;
  LstmConfig lstm;
};

struct ForecastRequest {
  MatX history;  // [iteration][series]
  Index horizon = 1;
  MethodConfig config;
  LayerSlices slices;                      // empty: one slice over all series
  const LstmForecaster* lstm = nullptr;    // required for Method::kLstm
};

struct ForecastResult {
  MatX predictions;  // [step][series], simplex-valid per slice
  MethodConfig config;
  std::vector<ArimaModel> arima_models;  // one per series for ARIMA
  std::optional<double> lstm_final_loss;
};

// SW_Avg and ARIMA run independently per series; the LSTM runs jointly over the row.
ForecastResult forecast(const ForecastRequest& request);

}  // namespace moeload
