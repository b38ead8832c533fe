#include "moeload/evaluator.hpp"

#include <cmath>
#include <map>
#include <memory>
#include <string>

namespace moeload {

std::string_view to_string(Metric metric) {
  return metric == Metric::kMeanRelative ? "mean_relative" : "total_variation";
}

std::string_view to_string(EvalMode mode) {
  return mode == EvalMode::kSliding ? "sliding" : "blocked";
}

void EvalConfig::validate() const {
  if (horizon < 1) fail(ErrorCode::kInvalidArgument, "horizon must be >= 1");
  if (stride < 1) fail(ErrorCode::kInvalidArgument, "stride must be >= 1");
  if (warmup < 0) fail(ErrorCode::kInvalidArgument, "warmup must be non-negative");
  if (!(epsilon > 0.0)) fail(ErrorCode::kInvalidArgument, "epsilon must be positive");
}

namespace {

EvalReport run_eval(const LoadTrace* train, const LoadTrace& test, const MethodConfig& method,
                    const EvalConfig& cfg, const std::vector<Index>& origins) {
  if (origins.empty()) {
    fail(ErrorCode::kTraceTooShort, "test trace of " + std::to_string(test.num_iterations()) +
                                        " iterations admits no evaluation origin for horizon " +
                                        std::to_string(cfg.horizon));
  }
  const Index m = test.num_layers();
  const Index e = test.experts_per_layer();
  const LayerSlices slices = uniform_slices(m, e);
  const MatX props = flatten_all_experts(test);

  EvalReport report;
  report.method = method;
  report.config = cfg;
  report.layer_ids = test.layer_ids();

  std::unique_ptr<LstmForecaster> lstm;
  if (method.method == Method::kLstm) {
    if (!train) fail(ErrorCode::kConfigError, "LSTM evaluation requires a training trace");
    if (train->num_layers() != m || train->experts_per_layer() != e) {
      fail(ErrorCode::kShapeMismatch, "training and test traces have different layer shapes");
    }
    lstm = std::make_unique<LstmForecaster>(lstm_train(flatten_all_experts(*train), method.lstm));
    report.lstm_final_loss = lstm->final_loss;
  }

  const Index k = cfg.horizon;
  for (const Index origin : origins) {
    MatX pred;
    if (method.method == Method::kOracle) {
      pred = props.middleRows(origin, k);
    } else {
      ForecastRequest request{props.topRows(origin), k, method, slices, lstm.get()};
      pred = forecast(request).predictions;
    }
    const auto actual = props.middleRows(origin, k);
    for (Index l = 0; l < m; ++l) {
      EvalPoint point{origin, l, 0.0, 0.0, 0.0};
      const auto pred_layer = pred.middleCols(l * e, e);
      const auto true_layer = actual.middleCols(l * e, e);
      if (cfg.scoring == Scoring::kBlockMean) {
        const RowVecX p = pred_layer.colwise().mean();
        const RowVecX t = true_layer.colwise().mean();
        point.mean_relative = error_rate(p, t, Metric::kMeanRelative, cfg.epsilon);
        point.total_variation = error_rate(p, t, Metric::kTotalVariation, cfg.epsilon);
      } else {
        for (Index s = 0; s < k; ++s) {
          point.mean_relative += error_rate(pred_layer.row(s), true_layer.row(s), Metric::kMeanRelative, cfg.epsilon);
          point.total_variation += error_rate(pred_layer.row(s), true_layer.row(s), Metric::kTotalVariation, cfg.epsilon);
        }
        point.mean_relative /= static_cast<double>(k);
        point.total_variation /= static_cast<double>(k);
      }
      point.error = cfg.metric == Metric::kMeanRelative ? point.mean_relative : point.total_variation;
      report.points.push_back(point);
    }
  }

  report.layer_means.assign(static_cast<std::size_t>(m), 0.0);
  for (const auto& point : report.points) {
    report.layer_means[static_cast<std::size_t>(point.layer)] += point.error;
    report.overall_mean += point.error;
    report.overall_total_variation += point.total_variation;
    report.overall_mean_relative += point.mean_relative;
  }
  const auto per_layer = static_cast<double>(origins.size());
  for (auto& mean : report.layer_means) mean /= per_layer;
  const auto total = static_cast<double>(report.points.size());
  report.overall_mean /= total;
  report.overall_total_variation /= total;
  report.overall_mean_relative /= total;
  return report;
}

}  // namespace

EvalReport sliding_eval(const LoadTrace* train, const LoadTrace& test, const MethodConfig& method,
                        EvalConfig cfg) {
  cfg.validate();
  cfg.mode = EvalMode::kSliding;
  std::vector<Index> origins;
  const Index first = cfg.warmup > 0 ? cfg.warmup : cfg.horizon;
  for (Index t = first; t + cfg.horizon <= test.num_iterations(); t += cfg.stride) origins.push_back(t);
  return run_eval(train, test, method, cfg, origins);
}

EvalReport blocked_eval(const LoadTrace* train, const LoadTrace& test, const MethodConfig& method,
                        EvalConfig cfg) {
  cfg.validate();
  cfg.mode = EvalMode::kBlocked;
  std::vector<Index> origins;
  const Index k = cfg.horizon;
  for (Index t = k; t + k <= test.num_iterations(); t += k) origins.push_back(t);
  return run_eval(train, test, method, cfg, origins);
}

EvalReport evaluate(const LoadTrace* train, const LoadTrace& test, const MethodConfig& method,
                    const EvalConfig& cfg) {
  return cfg.mode == EvalMode::kSliding ? sliding_eval(train, test, method, cfg)
                                        : blocked_eval(train, test, method, cfg);
}

StateConditionedSummary state_conditioned_summary(const EvalReport& report,
                                                  std::span<const StateTimeline> timelines) {
  std::map<int, const StateTimeline*> by_layer;
  for (const auto& timeline : timelines) by_layer[timeline.layer_id] = &timeline;

  StateConditionedSummary summary;
  struct Acc {
    double transient = 0.0, stable = 0.0;
    Index n_transient = 0, n_stable = 0;
  };
  std::vector<Acc> acc(report.layer_ids.size());
  Acc all;
  for (const auto& point : report.points) {
    const int layer_id = report.layer_ids.at(static_cast<std::size_t>(point.layer));
    const auto it = by_layer.find(layer_id);
    if (it == by_layer.end()) {
      fail(ErrorCode::kCoverageMismatch, "no state timeline for layer " + std::to_string(layer_id));
    }
    if (point.origin >= static_cast<Index>(it->second->labels.size())) {
      fail(ErrorCode::kCoverageMismatch, "timeline for layer " + std::to_string(layer_id) +
                                             " ends before origin " + std::to_string(point.origin));
    }
    auto& a = acc[static_cast<std::size_t>(point.layer)];
    if (it->second->at(point.origin) == LoadState::kStable) {
      a.stable += point.error;
      ++a.n_stable;
      all.stable += point.error;
      ++all.n_stable;
    } else {
      a.transient += point.error;
      ++a.n_transient;
      all.transient += point.error;
      ++all.n_transient;
    }
    summary.overall_mean += point.error;
  }
  if (!report.points.empty()) summary.overall_mean /= static_cast<double>(report.points.size());
  const auto mean_or_absent = [](double sum, Index n) -> std::optional<double> {
    if (n == 0) return std::nullopt;
    return sum / static_cast<double>(n);
  };
  for (std::size_t l = 0; l < acc.size(); ++l) {
    summary.layers.push_back({report.layer_ids[l], mean_or_absent(acc[l].transient, acc[l].n_transient),
                              mean_or_absent(acc[l].stable, acc[l].n_stable), acc[l].n_transient,
                              acc[l].n_stable});
  }
  summary.transient_mean = mean_or_absent(all.transient, all.n_transient);
  summary.stable_mean = mean_or_absent(all.stable, all.n_stable);
  return summary;
}

double sampling_floor(Index experts, std::int64_t tokens, double k_eff) {
  if (experts < 1 || tokens < 1 || !(k_eff > 0.0)) {
    fail(ErrorCode::kInvalidArgument, "sampling floor needs positive experts, tokens and samples");
  }
  const double p = 1.0 / static_cast<double>(experts);
  return std::sqrt((1.0 - p) / (p * static_cast<double>(tokens) * k_eff));
}

double sw_avg_effective_samples(Index window, Index horizon) {
  return 1.0 / (1.0 / static_cast<double>(window) + 1.0 / static_cast<double>(horizon));
}

}  // namespace moeload
