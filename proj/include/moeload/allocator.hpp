#pragma once

#include "moeload/types.hpp"

#include <cstdint>
#include <string_view>
#include <vector>

namespace moeload {

enum class AllocationMode { kProportional, kHeadroom };

std::string_view to_string(AllocationMode mode);

struct AllocationPlan {
  int layer_id = 0;
  std::vector<std::int64_t> units_per_expert;
  std::int64_t total_units = 0;
  AllocationMode mode = AllocationMode::kProportional;
};

// Hamilton apportionment of `total` units to non-negative targets summing to `total`:
// floors first, leftovers by descending remainder, ties to the lower index.
std::vector<std::int64_t> largest_remainder(const VecX& targets, std::int64_t total);

// Every expert gets min_units; the remaining units follow p_j by largest remainder.
AllocationPlan allocate(const VecX& proportions, std::int64_t total_units, std::int64_t min_units = 0,
                        int layer_id = 0);

// Targets proportional to p_j + range_j (renormalized) so bursty experts get extra units.
AllocationPlan headroom_allocate(const VecX& proportions, const VecX& recent_range,
                                 std::int64_t total_units, std::int64_t min_units = 0,
                                 int layer_id = 0);

}  // namespace moeload
