#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <utility>
#include <vector>

namespace moeload {

using Index = Eigen::Index;

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using RowVector = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

using MatX = Matrix<double>;
using VecX = Vector<double>;
using RowVecX = RowVector<double>;

using CountMatrix = Matrix<std::int64_t>;

// Contiguous [offset, offset + size) block of columns belonging to one MoE layer.
struct Slice {
  Index offset = 0;
  Index size = 0;

  bool operator==(const Slice&) const = default;
};

using LayerSlices = std::vector<Slice>;

inline LayerSlices uniform_slices(Index num_layers, Index experts_per_layer) {
  LayerSlices slices;
  slices.reserve(static_cast<std::size_t>(num_layers));
  for (Index l = 0; l < num_layers; ++l) {
    slices.push_back({l * experts_per_layer, experts_per_layer});
  }
  return slices;
}

}  // namespace moeload
