#pragma once

#include <moeload/types.hpp>

#include <cmath>
#include <numbers>

namespace fixtures {

// 200 rows of 3 load proportions rotating with period 25: row t is
// (1 + 0.5 sin(2 pi t / 25 + 2 pi j / 3)) / 3, which sums to exactly 1 up to rounding.
inline moeload::MatX lstm_overfit_rows() {
  moeload::MatX data(200, 3);
  for (moeload::Index t = 0; t < data.rows(); ++t) {
    for (moeload::Index j = 0; j < 3; ++j) {
      const double phase = 2.0 * std::numbers::pi * (static_cast<double>(t) / 25.0 +
                                                     static_cast<double>(j) / 3.0);
      data(t, j) = (1.0 + 0.5 * std::sin(phase)) / 3.0;
    }
  }
  return data;
}

}  // namespace fixtures
