#include "moeload/window_stats.hpp"

namespace moeload {

WindowStats layer_window_stats(const ProportionSeries& props, const WindowConfig& cfg) {
  cfg.validate();
  detail::require_length(props.num_iterations(), cfg.window);
  const Index windows = window_count(props.num_iterations(), cfg);
  WindowStats stats{props.layer_id, cfg.window, cfg.stride, {},
                    MatX(windows, props.num_experts()), MatX(windows, props.num_experts())};
  for (Index k = 0; k < windows; ++k) stats.start_iterations.push_back(k * cfg.stride);
  for (Index j = 0; j < props.num_experts(); ++j) {
    stats.variance.col(j) = window_variance(props.values.col(j), cfg);
    stats.range.col(j) = window_range(props.values.col(j), cfg);
  }
  return stats;
}

void DetectorConfig::validate() const {
  if (window < 2) fail(ErrorCode::kInvalidArgument, "detector window must be >= 2");
  if (!(tau_rho > 0.0)) fail(ErrorCode::kInvalidArgument, "tau_rho must be positive");
  if (consec < 1) fail(ErrorCode::kInvalidArgument, "consec must be >= 1");
}

StateTimeline detect_state(const ProportionSeries& props, const DetectorConfig& cfg) {
  cfg.validate();
  const Index n = props.num_iterations();
  if (n < cfg.window * cfg.consec) {
    fail(ErrorCode::kSeriesTooShort, "detector needs " + std::to_string(cfg.window * cfg.consec) +
                                         " iterations, series has " + std::to_string(n));
  }
  const double threshold = cfg.tau_rho / static_cast<double>(props.num_experts());
  const WindowConfig disjoint{cfg.window, cfg.window};

  // Largest per-window range over all experts.
  VecX worst = VecX::Zero(window_count(n, disjoint));
  for (Index j = 0; j < props.num_experts(); ++j) {
    worst = worst.cwiseMax(window_range(props.values.col(j), disjoint));
  }

  StateTimeline timeline;
  timeline.layer_id = props.layer_id;
  timeline.params = cfg;
  Index run = 0;
  for (Index k = 0; k < worst.size(); ++k) {
    run = worst(k) < threshold ? run + 1 : 0;
    if (run == cfg.consec) {
      timeline.transition = (k + 1) * cfg.window;
      break;
    }
  }
  const Index boundary = timeline.transition.value_or(n);
  timeline.labels.assign(static_cast<std::size_t>(n), LoadState::kTransient);
  std::fill(timeline.labels.begin() + boundary, timeline.labels.end(), LoadState::kStable);
  return timeline;
}

}  // namespace moeload
