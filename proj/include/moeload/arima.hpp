#pragma once

#include "moeload/error.hpp"
#include "moeload/types.hpp"

#include <span>
#include <string>
#include <vector>

namespace moeload {

// d-th forward difference: out[i] = (Delta^d x)[i], length n - d.
template <typename Derived>
Vector<typename Derived::Scalar> difference(const Eigen::DenseBase<Derived>& series, int d) {
  if (d < 0) fail(ErrorCode::kInvalidArgument, "difference order must be non-negative");
  if (series.size() <= d) {
    fail(ErrorCode::kSeriesTooShort, "differencing order " + std::to_string(d) + " needs more than " +
                                         std::to_string(d) + " values");
  }
  Vector<typename Derived::Scalar> out = series.derived();
  for (int k = 0; k < d; ++k) {
    const Index len = out.size() - 1;
    out = (out.tail(len) - out.head(len)).eval();
  }
  return out;
}

// Inverse of difference(): given the d values that precede the differenced data, rebuilds
// anchors ++ reconstruction (length anchors.size() + diffed.size()).
template <typename DerivedA, typename DerivedB>
Vector<typename DerivedA::Scalar> integrate(const Eigen::DenseBase<DerivedA>& diffed, int d,
                                            const Eigen::DenseBase<DerivedB>& anchors) {
  using Scalar = typename DerivedA::Scalar;
  if (d < 0) fail(ErrorCode::kInvalidArgument, "integration order must be non-negative");
  if (anchors.size() != d) {
    fail(ErrorCode::kSeriesTooShort, "integration order " + std::to_string(d) + " needs " +
                                         std::to_string(d) + " anchor values");
  }
  // heads(k) = (Delta^k anchors)[0], the first value of each intermediate level.
  Vector<Scalar> heads(d);
  Vector<Scalar> level = anchors.derived();
  for (int k = 0; k < d; ++k) {
    heads(k) = level(0);
    const Index len = level.size() - 1;
    level = (level.tail(len) - level.head(len)).eval();
  }
  Vector<Scalar> current = diffed.derived();
  for (int k = d - 1; k >= 0; --k) {
    Vector<Scalar> up(current.size() + 1);
    up(0) = heads(k);
    for (Index t = 0; t < current.size(); ++t) up(t + 1) = up(t) + current(t);
    current = std::move(up);
  }
  return current;
}

// Smallest |z| over roots of 1 + c_1 z + ... + c_n z^n (infinity when the polynomial is 1).
double lag_polynomial_root_modulus_min(std::span<const double> coeffs);

// Smallest d in [0, d_max] whose d-th difference has variance no larger than the next one.
int select_d(const VecX& series, int d_max);

struct ArimaOrder {
  int p = 5;
  int d = 1;
  int q = 5;
};

struct ArimaFitOptions {
  int max_iterations = 500;
  double step_tolerance = 1e-10;
};

// (1 - sum phi_i L^i) (1 - L)^d X_t = intercept + (1 + sum theta_j L^j) eps_t
struct ArimaModel {
  int p = 0;
  int d = 0;
  int q = 0;
  std::vector<double> phi;
  std::vector<double> theta;
  double intercept = 0.0;
  double sigma2 = 0.0;

  // Fit diagnostics.
  bool converged = true;
  bool singular_regression = false;
  int iterations = 0;
};

// Hannan-Rissanen start followed by Levenberg-Marquardt on the conditional sum of squares
// (pre-sample residuals are zero). The intercept is finally re-solved so that in-sample
// residuals have zero mean.
ArimaModel fit_arima(const VecX& series, const ArimaOrder& order, const ArimaFitOptions& options = {});

// One-step in-sample residuals of the d-differenced series (index 0 is the first residual
// after the p conditioning values).
VecX arima_residuals(const ArimaModel& model, const VecX& series);

VecX arima_forecast(const ArimaModel& model, const VecX& series, Index horizon);

}  // namespace moeload
