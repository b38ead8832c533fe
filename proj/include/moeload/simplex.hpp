#pragma once

#include "moeload/types.hpp"

namespace moeload {

// Per slice: negatives clamp to 0, then divide by the slice sum (uniform if the sum is 0).
template <typename Derived>
void simplex_project_inplace(Eigen::DenseBase<Derived>& row, const LayerSlices& slices) {
  using Scalar = typename Derived::Scalar;
  for (const auto& slice : slices) {
    auto part = row.derived().segment(slice.offset, slice.size);
    part = part.cwiseMax(Scalar(0));
    const Scalar sum = part.sum();
    if (sum > Scalar(0)) {
      part /= sum;
    } else {
      part.setConstant(Scalar(1) / static_cast<Scalar>(slice.size));
    }
  }
}

template <typename Derived>
Vector<typename Derived::Scalar> simplex_project(const Eigen::DenseBase<Derived>& row,
                                                 const LayerSlices& slices) {
  Vector<typename Derived::Scalar> out = row.derived().reshaped();
  simplex_project_inplace(out, slices);
  return out;
}

}  // namespace moeload
