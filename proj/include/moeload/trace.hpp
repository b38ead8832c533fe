#pragma once

#include "moeload/types.hpp"

#include <cstdint>
#include <vector>

namespace moeload {

enum class RowSumMode {
  kStrict,   // every (iteration, layer) row sums to tokens_per_iteration
  kLenient,  // every row sum is positive
};

// Per-iteration, per-layer, per-expert token counts.
//
// Counts are stored as one row per (iteration, layer) pair, iteration-major, with
// layers in `layer_ids()` order. Instances are validated on construction and
// immutable afterwards.
class LoadTrace {
 public:
  LoadTrace(std::vector<int> layer_ids, Index experts_per_layer, std::int64_t tokens_per_iteration,
            CountMatrix counts, RowSumMode mode = RowSumMode::kStrict,
            std::int64_t first_iteration = 0);

  Index num_iterations() const { return num_iterations_; }
  Index num_layers() const { return static_cast<Index>(layer_ids_.size()); }
  Index experts_per_layer() const { return experts_per_layer_; }
  std::int64_t tokens_per_iteration() const { return tokens_per_iteration_; }
  std::int64_t first_iteration() const { return first_iteration_; }
  const std::vector<int>& layer_ids() const { return layer_ids_; }
  const CountMatrix& counts() const { return counts_; }

  // Position of `layer_id` within layer_ids(); throws UnknownLayer.
  Index layer_index(int layer_id) const;

  auto row(Index iteration, Index layer_index) const {
    return counts_.row(iteration * num_layers() + layer_index);
  }

  std::int64_t count(Index iteration, Index layer_index, Index expert) const {
    return counts_(iteration * num_layers() + layer_index, expert);
  }

  bool operator==(const LoadTrace& other) const;

 private:
  std::vector<int> layer_ids_;
  Index experts_per_layer_;
  std::int64_t tokens_per_iteration_;
  std::int64_t first_iteration_;
  Index num_iterations_;
  CountMatrix counts_;
};

// Load proportions of one layer: values(t, j) is expert j's share of iteration t.
struct ProportionSeries {
  int layer_id = 0;
  MatX values;

  Index num_iterations() const { return values.rows(); }
  Index num_experts() const { return values.cols(); }
};

ProportionSeries to_proportions(const LoadTrace& trace, int layer_id);

VecX expert_series(const ProportionSeries& props, Index expert);

struct IterationRange {
  Index begin = 0;
  Index end = 0;  // exclusive
};

// Rows are layer-major then expert: [layer0 e0..eE-1, layer1 e0.., ...].
MatX flatten_all_experts(const LoadTrace& trace, IterationRange range);
MatX flatten_all_experts(const LoadTrace& trace);

}  // namespace moeload
