#pragma once

#include "moeload/forecast.hpp"
#include "moeload/trace.hpp"
#include "moeload/window_stats.hpp"

#include <optional>
#include <span>
#include <vector>

namespace moeload {

enum class Metric { kMeanRelative, kTotalVariation };
enum class EvalMode { kSliding, kBlocked };
enum class Scoring { kBlockMean, kStepwise };

std::string_view to_string(Metric metric);
std::string_view to_string(EvalMode mode);

// mean_relative: (1/E) sum |pred_j - true_j| / max(true_j, epsilon)
// total_variation: (1/2) sum |pred_j - true_j|
template <typename DerivedA, typename DerivedB>
double error_rate(const Eigen::MatrixBase<DerivedA>& pred, const Eigen::MatrixBase<DerivedB>& truth,
                  Metric metric, double epsilon = 1e-6) {
  if (pred.size() != truth.size() || pred.size() == 0) {
    fail(ErrorCode::kLengthMismatch, "prediction and truth lengths differ");
  }
  const auto p = pred.derived().reshaped().array();
  const auto t = truth.derived().reshaped().array();
  if (metric == Metric::kTotalVariation) return 0.5 * (p - t).abs().sum();
  return ((p - t).abs() / t.max(epsilon)).mean();
}

struct EvalConfig {
  Index horizon = 1000;
  Index stride = 1000;          // sliding mode origin spacing
  Index warmup = 0;             // first origin for sliding mode; 0 means `horizon`
  EvalMode mode = EvalMode::kBlocked;
  Metric metric = Metric::kMeanRelative;
  Scoring scoring = Scoring::kBlockMean;
  double epsilon = 1e-6;

  void validate() const;
};

struct EvalPoint {
  Index origin = 0;   // offset into the test trace of the first forecast iteration
  Index layer = 0;    // position in layer_ids
  double error = 0.0;            // headline metric
  double total_variation = 0.0;  // always co-reported
  double mean_relative = 0.0;
};

struct EvalReport {
  MethodConfig method;
  EvalConfig config;
  std::vector<int> layer_ids;
  std::vector<EvalPoint> points;  // origin-major, then layer
  std::vector<double> layer_means;
  double overall_mean = 0.0;
  double overall_total_variation = 0.0;
  double overall_mean_relative = 0.0;
  std::optional<double> lstm_final_loss;
};

// Rolling-origin evaluation; origins at warmup, warmup + stride, ... while a full horizon fits.
EvalReport sliding_eval(const LoadTrace* train, const LoadTrace& test, const MethodConfig& method,
                        EvalConfig cfg);

// One forecast per consecutive horizon-sized block; the first block is seed history only.
EvalReport blocked_eval(const LoadTrace* train, const LoadTrace& test, const MethodConfig& method,
                        EvalConfig cfg);

EvalReport evaluate(const LoadTrace* train, const LoadTrace& test, const MethodConfig& method,
                    const EvalConfig& cfg);

struct StateSummary {
  int layer_id = 0;
  std::optional<double> transient_mean;
  std::optional<double> stable_mean;
  Index transient_count = 0;
  Index stable_count = 0;
};

struct StateConditionedSummary {
  std::vector<StateSummary> layers;
  std::optional<double> transient_mean;  // over all layers
  std::optional<double> stable_mean;
  double overall_mean = 0.0;
};

// Groups each evaluation origin by the state label of its layer at that iteration.
StateConditionedSummary state_conditioned_summary(const EvalReport& report,
                                                  std::span<const StateTimeline> timelines);

// Relative standard deviation of a proportion p = 1/E estimated from k_eff multinomial draws of
// N tokens each: sqrt((1 - p) / (p N k_eff)).
double sampling_floor(Index experts, std::int64_t tokens, double k_eff);

// Effective sample count of a block-mean SW_Avg comparison: 1 / (1/window + 1/horizon).
double sw_avg_effective_samples(Index window, Index horizon);

}  // namespace moeload
