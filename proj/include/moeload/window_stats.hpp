#pragma once

#include "moeload/error.hpp"
#include "moeload/trace.hpp"

#include <algorithm>
#include <deque>
#include <optional>
#include <string>
#include <vector>

namespace moeload {

struct WindowConfig {
  Index window = 100;
  Index stride = 1;

  void validate() const {
    if (window < 2) fail(ErrorCode::kInvalidArgument, "window size must be >= 2");
    if (stride < 1) fail(ErrorCode::kInvalidArgument, "stride must be >= 1");
  }
};

inline Index window_count(Index length, const WindowConfig& cfg) {
  return length < cfg.window ? 0 : (length - cfg.window) / cfg.stride + 1;
}

namespace detail {

inline void require_length(Index length, Index window) {
  if (length < window) {
    fail(ErrorCode::kSeriesTooShort, "series length " + std::to_string(length) +
                                         " is shorter than window " + std::to_string(window));
  }
}

}  // namespace detail

// Population variance (1/w) * sum (x_i - mean)^2 of each window starting at 0, stride, ...
//
// Windows are advanced with the fixed-size Welford add/remove update and re-anchored with an
// exact two-pass pass every `window` slides, so rounding drift stays bounded.
template <typename Derived>
Vector<typename Derived::Scalar> window_variance(const Eigen::DenseBase<Derived>& series,
                                                 const WindowConfig& cfg) {
  using Scalar = typename Derived::Scalar;
  cfg.validate();
  const Index n = series.size();
  detail::require_length(n, cfg.window);
  const Index w = cfg.window;
  const Scalar inv_w = Scalar(1) / static_cast<Scalar>(w);
  const auto& x = series.derived();

  Vector<Scalar> out(window_count(n, cfg));
  Scalar mean = 0;
  Scalar m2 = 0;
  // Two-pass over values shifted by the window's first element: exact zero for constant
  // windows and less cancellation when the mean is far from zero.
  const auto anchor = [&](Index start) {
    const Scalar shift = x(start);
    const auto shifted = x.segment(start, w).array() - shift;
    const Scalar offset = shifted.sum() * inv_w;
    m2 = (shifted - offset).square().sum();
    mean = shift + offset;
  };

  Index pos = 0;  // start of the window described by (mean, m2)
  Index since_anchor = 0;
  anchor(0);
  for (Index k = 0; k < out.size(); ++k) {
    const Index target = k * cfg.stride;
    if (target - pos >= w) {
      anchor(target);
      pos = target;
      since_anchor = 0;
    }
    while (pos < target) {
      if (since_anchor >= w) {
        anchor(target);
        pos = target;
        since_anchor = 0;
        break;
      }
      const Scalar x_old = x(pos);
      const Scalar x_new = x(pos + w);
      const Scalar new_mean = mean + (x_new - x_old) * inv_w;
      m2 += (x_new - x_old) * (x_new - new_mean + x_old - mean);
      mean = new_mean;
      ++pos;
      ++since_anchor;
    }
    out(k) = std::max(m2, Scalar(0)) * inv_w;
  }
  return out;
}

// max - min of each window, O(n) total through monotonic deques of indices.
template <typename Derived>
Vector<typename Derived::Scalar> window_range(const Eigen::DenseBase<Derived>& series,
                                              const WindowConfig& cfg) {
  using Scalar = typename Derived::Scalar;
  cfg.validate();
  const Index n = series.size();
  detail::require_length(n, cfg.window);
  const Index w = cfg.window;
  const auto& x = series.derived();

  Vector<Scalar> out(window_count(n, cfg));
  std::deque<Index> maxq;
  std::deque<Index> minq;
  for (Index i = 0; i < n; ++i) {
    while (!maxq.empty() && x(maxq.back()) <= x(i)) maxq.pop_back();
    while (!minq.empty() && x(minq.back()) >= x(i)) minq.pop_back();
    maxq.push_back(i);
    minq.push_back(i);
    const Index start = i - w + 1;
    if (start < 0) continue;
    while (maxq.front() < start) maxq.pop_front();
    while (minq.front() < start) minq.pop_front();
    if (start % cfg.stride == 0) out(start / cfg.stride) = x(maxq.front()) - x(minq.front());
  }
  return out;
}

// Per-expert variance and range for every window position of one layer.
struct WindowStats {
  int layer_id = 0;
  Index window = 0;
  Index stride = 0;
  std::vector<Index> start_iterations;  // offsets into the proportion series
  MatX variance;                        // [window][expert]
  MatX range;                           // [window][expert]
};

WindowStats layer_window_stats(const ProportionSeries& props, const WindowConfig& cfg);

enum class LoadState { kTransient, kStable };

struct DetectorConfig {
  Index window = 100;
  double tau_rho = 0.5;  // range threshold as a multiple of the uniform share 1/E
  Index consec = 5;

  void validate() const;
};

struct StateTimeline {
  int layer_id = 0;
  std::vector<LoadState> labels;           // one per iteration of the input series
  std::optional<Index> transition;         // first stable iteration, if any
  DetectorConfig params;

  LoadState at(Index iteration) const { return labels.at(static_cast<std::size_t>(iteration)); }
};

// A layer turns stable at the end of the first run of `consec` consecutive aligned,
// non-overlapping windows in which every expert's range is below tau_rho / E.
StateTimeline detect_state(const ProportionSeries& props, const DetectorConfig& cfg);

}  // namespace moeload
