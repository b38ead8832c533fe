#include "moeload/trace.hpp"

#include "moeload/error.hpp"

#include <algorithm>
#include <set>
#include <string>

namespace moeload {

LoadTrace::LoadTrace(std::vector<int> layer_ids, Index experts_per_layer,
                     std::int64_t tokens_per_iteration, CountMatrix counts, RowSumMode mode,
                     std::int64_t first_iteration)
    : layer_ids_(std::move(layer_ids)),
      experts_per_layer_(experts_per_layer),
      tokens_per_iteration_(tokens_per_iteration),
      first_iteration_(first_iteration),
      num_iterations_(0),
      counts_(std::move(counts)) {
  if (layer_ids_.empty()) fail(ErrorCode::kValidationError, "trace has no MoE layers");
  if (std::set<int>(layer_ids_.begin(), layer_ids_.end()).size() != layer_ids_.size()) {
    fail(ErrorCode::kValidationError, "duplicate MoE layer id");
  }
  if (experts_per_layer_ <= 0) fail(ErrorCode::kValidationError, "experts_per_layer must be positive");
  if (tokens_per_iteration_ <= 0) {
    fail(ErrorCode::kValidationError, "tokens_per_iteration must be positive");
  }
  if (first_iteration_ < 0) fail(ErrorCode::kValidationError, "first_iteration must be non-negative");
  if (counts_.cols() != experts_per_layer_ && counts_.rows() > 0) {
    fail(ErrorCode::kValidationError, "counts have " + std::to_string(counts_.cols()) +
                                          " columns, expected " + std::to_string(experts_per_layer_));
  }
  if (counts_.rows() == 0) counts_.resize(0, experts_per_layer_);
  const Index m = num_layers();
  if (counts_.rows() % m != 0) {
    fail(ErrorCode::kValidationError, "count rows are not a multiple of the layer count");
  }
  num_iterations_ = counts_.rows() / m;

  for (Index r = 0; r < counts_.rows(); ++r) {
    const Index t = r / m;
    const int layer = layer_ids_[static_cast<std::size_t>(r % m)];
    const auto where = "iteration " + std::to_string(first_iteration_ + t) + ", layer " +
                       std::to_string(layer) + ": ";
    if ((counts_.row(r).array() < 0).any()) fail(ErrorCode::kValidationError, where + "negative count");
    const std::int64_t sum = counts_.row(r).sum();
    if (mode == RowSumMode::kStrict && sum != tokens_per_iteration_) {
      fail(ErrorCode::kValidationError, where + "row sum " + std::to_string(sum) + " != " +
                                            std::to_string(tokens_per_iteration_));
    }
    if (mode == RowSumMode::kLenient && sum <= 0) {
      fail(ErrorCode::kValidationError, where + "row sum is zero");
    }
  }
}

Index LoadTrace::layer_index(int layer_id) const {
  const auto it = std::find(layer_ids_.begin(), layer_ids_.end(), layer_id);
  if (it == layer_ids_.end()) fail(ErrorCode::kUnknownLayer, "layer " + std::to_string(layer_id));
  return static_cast<Index>(it - layer_ids_.begin());
}

bool LoadTrace::operator==(const LoadTrace& other) const {
  return layer_ids_ == other.layer_ids_ && experts_per_layer_ == other.experts_per_layer_ &&
         tokens_per_iteration_ == other.tokens_per_iteration_ &&
         first_iteration_ == other.first_iteration_ && num_iterations_ == other.num_iterations_ &&
         counts_ == other.counts_;
}

namespace {

void write_proportions(const LoadTrace& trace, Index layer, Index t, double* out) {
  const auto row = trace.row(t, layer);
  const std::int64_t sum = row.sum();
  if (sum <= 0) {
    fail(ErrorCode::kZeroRowSum, "iteration " + std::to_string(trace.first_iteration() + t) +
                                     ", layer " +
                                     std::to_string(trace.layer_ids()[static_cast<std::size_t>(layer)]));
  }
  const auto denom = static_cast<double>(sum);
  for (Index j = 0; j < row.size(); ++j) out[j] = static_cast<double>(row(j)) / denom;
}

}  // namespace

ProportionSeries to_proportions(const LoadTrace& trace, int layer_id) {
  const Index layer = trace.layer_index(layer_id);
  ProportionSeries props{layer_id, MatX(trace.num_iterations(), trace.experts_per_layer())};
  for (Index t = 0; t < trace.num_iterations(); ++t) {
    write_proportions(trace, layer, t, props.values.row(t).data());
  }
  return props;
}

VecX expert_series(const ProportionSeries& props, Index expert) {
  if (expert < 0 || expert >= props.num_experts()) {
    fail(ErrorCode::kIndexOutOfRange, "expert " + std::to_string(expert) + " of " +
                                          std::to_string(props.num_experts()));
  }
  return props.values.col(expert);
}

MatX flatten_all_experts(const LoadTrace& trace, IterationRange range) {
  if (range.begin < 0 || range.end < range.begin || range.end > trace.num_iterations()) {
    fail(ErrorCode::kRangeOutOfBounds, "[" + std::to_string(range.begin) + ", " +
                                           std::to_string(range.end) + ") of " +
                                           std::to_string(trace.num_iterations()));
  }
  const Index m = trace.num_layers();
  const Index e = trace.experts_per_layer();
  MatX out(range.end - range.begin, m * e);
  for (Index t = range.begin; t < range.end; ++t) {
    for (Index l = 0; l < m; ++l) {
      write_proportions(trace, l, t, out.row(t - range.begin).data() + l * e);
    }
  }
  return out;
}

MatX flatten_all_experts(const LoadTrace& trace) {
  return flatten_all_experts(trace, {0, trace.num_iterations()});
}

}  // namespace moeload
