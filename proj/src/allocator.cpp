#include "moeload/allocator.hpp"

#include "moeload/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace moeload {

std::string_view to_string(AllocationMode mode) {
  return mode == AllocationMode::kProportional ? "proportional" : "headroom";
}

namespace {

void check_simplex(const VecX& p) {
  if (p.size() == 0) fail(ErrorCode::kInvalidArgument, "empty proportion vector");
  if (!p.allFinite() || (p.array() < 0.0).any() || std::abs(p.sum() - 1.0) > 1e-6) {
    fail(ErrorCode::kInvalidArgument, "proportions must lie on the probability simplex");
  }
}

AllocationPlan apportion(const VecX& shares, std::int64_t total_units, std::int64_t min_units,
                         int layer_id, AllocationMode mode) {
  const auto e = static_cast<std::int64_t>(shares.size());
  if (total_units < 0 || min_units < 0 || total_units < e * min_units) {
    fail(ErrorCode::kInfeasibleMinimum, std::to_string(total_units) + " units cannot give " +
                                            std::to_string(e) + " experts " +
                                            std::to_string(min_units) + " each");
  }
  const std::int64_t free_units = total_units - e * min_units;
  const VecX targets = shares * static_cast<double>(free_units);
  auto units = largest_remainder(targets, free_units);
  for (auto& u : units) u += min_units;
  return {layer_id, std::move(units), total_units, mode};
}

}  // namespace

std::vector<std::int64_t> largest_remainder(const VecX& targets, std::int64_t total) {
  const auto n = static_cast<std::size_t>(targets.size());
  if (n == 0) {
    if (total != 0) fail(ErrorCode::kInvalidArgument, "cannot apportion units among zero targets");
    return {};
  }
  if (!targets.allFinite() || (targets.array() < 0.0).any()) {
    fail(ErrorCode::kInvalidArgument, "apportionment targets must be finite and non-negative");
  }
  std::vector<std::int64_t> units(n);
  std::vector<double> remainder(n);
  std::int64_t assigned = 0;
  for (std::size_t j = 0; j < n; ++j) {
    const double floor_value = std::floor(targets(static_cast<Index>(j)));
    units[j] = static_cast<std::int64_t>(floor_value);
    remainder[j] = targets(static_cast<Index>(j)) - floor_value;
    assigned += units[j];
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
  // Rounding in the targets can leave the floors one unit off in either direction.
  std::int64_t left = total - assigned;
  for (std::size_t k = 0; left > 0; k = (k + 1) % n, --left) ++units[order[k]];
  for (std::size_t k = n; left < 0 && k-- > 0;) {
    if (units[order[k]] > 0) {
      --units[order[k]];
      ++left;
    }
  }
  return units;
}

AllocationPlan allocate(const VecX& proportions, std::int64_t total_units, std::int64_t min_units,
                        int layer_id) {
  check_simplex(proportions);
  return apportion(proportions / proportions.sum(), total_units, min_units, layer_id,
                   AllocationMode::kProportional);
}

AllocationPlan headroom_allocate(const VecX& proportions, const VecX& recent_range,
                                 std::int64_t total_units, std::int64_t min_units, int layer_id) {
  check_simplex(proportions);
  if (recent_range.size() != proportions.size()) {
    fail(ErrorCode::kInvalidArgument, "range vector length differs from the proportion vector");
  }
  if (!recent_range.allFinite() || (recent_range.array() < 0.0).any()) {
    fail(ErrorCode::kInvalidArgument, "ranges must be finite and non-negative");
  }
  const VecX padded = proportions + recent_range;
  return apportion(padded / padded.sum(), total_units, min_units, layer_id,
                   AllocationMode::kHeadroom);
}

}  // namespace moeload
