#include "moeload/arima.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <limits>

namespace moeload {

double lag_polynomial_root_modulus_min(std::span<const double> coeffs) {
  Index n = static_cast<Index>(coeffs.size());
  while (n > 0 && coeffs[static_cast<std::size_t>(n - 1)] == 0.0) --n;
  if (n == 0) return std::numeric_limits<double>::infinity();
  // Roots z of 1 + c1 z + .. + cn z^n are reciprocals of the roots of y^n + c1 y^(n-1) + .. + cn.
  MatX companion = MatX::Zero(n, n);
  for (Index i = 0; i < n; ++i) companion(0, i) = -coeffs[static_cast<std::size_t>(i)];
  for (Index i = 1; i < n; ++i) companion(i, i - 1) = 1.0;
  Eigen::EigenSolver<MatX> solver(companion, false);
  const double radius = solver.eigenvalues().cwiseAbs().maxCoeff();
  return radius == 0.0 ? std::numeric_limits<double>::infinity() : 1.0 / radius;
}

namespace {

double population_variance(const VecX& x) {
  return (x.array() - x.mean()).square().mean();
}

bool is_stationary(const std::vector<double>& phi) {
  std::vector<double> poly;
  for (double f : phi) poly.push_back(-f);
  return lag_polynomial_root_modulus_min(poly) > 1.0;
}

bool is_invertible(const std::vector<double>& theta) {
  return lag_polynomial_root_modulus_min(theta) > 1.0;
}

// Least squares with a rank check; returns false on a rank-deficient design.
bool least_squares(const MatX& design, const VecX& target, VecX& solution) {
  Eigen::ColPivHouseholderQR<MatX> qr(design);
  qr.setThreshold(1e-10);
  if (qr.rank() < design.cols()) return false;
  solution = qr.solve(target);
  return solution.allFinite();
}

struct Params {
  double intercept = 0.0;
  std::vector<double> phi;
  std::vector<double> theta;
};

// Residuals e_t for t = p..n-1 and, optionally, their Jacobian w.r.t. [c, phi, theta].
void css_residuals(const VecX& w, const Params& params, VecX& e, MatX* jac) {
  const Index p = static_cast<Index>(params.phi.size());
  const Index q = static_cast<Index>(params.theta.size());
  const Index n = w.size();
  const Index n_eff = n - p;
  e.setZero(n_eff);
  if (jac) jac->setZero(n_eff, 1 + p + q);
  for (Index r = 0; r < n_eff; ++r) {
    const Index t = r + p;
    double value = w(t) - params.intercept;
    for (Index i = 1; i <= p; ++i) value -= params.phi[static_cast<std::size_t>(i - 1)] * w(t - i);
    for (Index j = 1; j <= q && r - j >= 0; ++j) {
      value -= params.theta[static_cast<std::size_t>(j - 1)] * e(r - j);
    }
    e(r) = value;
    if (!jac) continue;
    auto row = jac->row(r);
    row(0) = -1.0;
    for (Index i = 1; i <= p; ++i) row(i) = -w(t - i);
    for (Index j = 1; j <= q && r - j >= 0; ++j) row(p + j) = -e(r - j);
    for (Index j = 1; j <= q && r - j >= 0; ++j) {
      row -= params.theta[static_cast<std::size_t>(j - 1)] * jac->row(r - j);
    }
  }
}

double css(const VecX& w, const Params& params) {
  VecX e;
  css_residuals(w, params, e, nullptr);
  return e.squaredNorm();
}

VecX pack(const Params& params) {
  VecX beta(1 + params.phi.size() + params.theta.size());
  beta(0) = params.intercept;
  Index k = 1;
  for (double f : params.phi) beta(k++) = f;
  for (double t : params.theta) beta(k++) = t;
  return beta;
}

Params unpack(const VecX& beta, Index p, Index q) {
  Params params;
  params.intercept = beta(0);
  for (Index i = 0; i < p; ++i) params.phi.push_back(beta(1 + i));
  for (Index j = 0; j < q; ++j) params.theta.push_back(beta(1 + p + j));
  return params;
}

// Pulls coefficients towards zero until the AR side is stationary and the MA side invertible.
void shrink_to_admissible(Params& params) {
  for (int k = 0; k < 60 && !is_stationary(params.phi); ++k) {
    for (double& f : params.phi) f *= 0.9;
  }
  for (int k = 0; k < 60 && !is_invertible(params.theta); ++k) {
    for (double& t : params.theta) t *= 0.9;
  }
}

// Plain AR(p) by least squares on the centered series.
bool fit_ar(const VecX& x, Index p, std::vector<double>& phi) {
  phi.assign(static_cast<std::size_t>(p), 0.0);
  if (p == 0) return true;
  const Index rows = x.size() - p;
  MatX design(rows, p);
  for (Index r = 0; r < rows; ++r) {
    for (Index i = 1; i <= p; ++i) design(r, i - 1) = x(r + p - i);
  }
  VecX sol;
  if (!least_squares(design, x.tail(rows), sol)) return false;
  for (Index i = 0; i < p; ++i) phi[static_cast<std::size_t>(i)] = sol(i);
  return true;
}

// AR(p) with intercept by least squares on the raw series: the exact CSS minimiser.
bool fit_ar_css(const VecX& w, Index p, Params& params) {
  const Index rows = w.size() - p;
  MatX design(rows, p + 1);
  for (Index r = 0; r < rows; ++r) {
    design(r, 0) = 1.0;
    for (Index i = 1; i <= p; ++i) design(r, i) = w(r + p - i);
  }
  VecX sol;
  if (!least_squares(design, w.tail(rows), sol)) return false;
  params.intercept = sol(0);
  params.phi.assign(sol.data() + 1, sol.data() + 1 + p);
  return true;
}

// Hannan-Rissanen: long AR for residual proxies, then regression on lags of x and of those
// residuals. Returns false on a singular design.
bool hannan_rissanen(const VecX& x, Index p, Index q, Params& params) {
  const Index n = x.size();
  const Index long_order = std::min<Index>(std::max<Index>(20, 2 * (p + q)), (n - 1) / 2);
  std::vector<double> long_phi;
  if (long_order < 1 || !fit_ar(x, long_order, long_phi)) return false;
  VecX resid = VecX::Zero(n);
  for (Index t = long_order; t < n; ++t) {
    double value = x(t);
    for (Index i = 1; i <= long_order; ++i) value -= long_phi[static_cast<std::size_t>(i - 1)] * x(t - i);
    resid(t) = value;
  }
  const Index start = long_order + std::max(p, q);
  const Index rows = n - start;
  if (rows <= p + q) return false;
  MatX design(rows, p + q);
  for (Index r = 0; r < rows; ++r) {
    const Index t = start + r;
    for (Index i = 1; i <= p; ++i) design(r, i - 1) = x(t - i);
    for (Index j = 1; j <= q; ++j) design(r, p + j - 1) = resid(t - j);
  }
  VecX sol;
  if (!least_squares(design, x.tail(rows), sol)) return false;
  params.phi.assign(sol.data(), sol.data() + p);
  params.theta.assign(sol.data() + p, sol.data() + p + q);
  return true;
}

// Levenberg-Marquardt on the conditional sum of squares.
Params refine_css(const VecX& w, Params params, const ArimaFitOptions& options, ArimaModel& model) {
  const Index p = static_cast<Index>(params.phi.size());
  const Index q = static_cast<Index>(params.theta.size());
  VecX beta = pack(params);
  VecX e;
  MatX jac;
  css_residuals(w, params, e, &jac);
  double cost = e.squaredNorm();
  double lambda = 1e-3;
  model.converged = false;
  for (int iter = 0; iter < options.max_iterations; ++iter) {
    model.iterations = iter + 1;
    const MatX jtj = jac.transpose() * jac;
    const VecX grad = jac.transpose() * e;
    bool accepted = false;
    while (lambda < 1e16) {
      MatX lhs = jtj;
      lhs.diagonal().array() += lambda * (jtj.diagonal().array() + 1e-12);
      const VecX step = lhs.ldlt().solve(-grad);
      const VecX candidate = beta + step;
      Params trial = unpack(candidate, p, q);
      if (step.allFinite() && is_stationary(trial.phi) && is_invertible(trial.theta)) {
        const double trial_cost = css(w, trial);
        if (std::isfinite(trial_cost) && trial_cost <= cost) {
          const bool small = step.norm() <= options.step_tolerance * (beta.norm() + options.step_tolerance);
          beta = candidate;
          params = std::move(trial);
          cost = trial_cost;
          lambda = std::max(lambda / 10.0, 1e-12);
          accepted = true;
          if (small) {
            model.converged = true;
            return params;
          }
          break;
        }
      }
      lambda *= 10.0;
    }
    if (!accepted) {
      // No descent direction left at any damping: a stationary point up to rounding.
      model.converged = true;
      return params;
    }
    css_residuals(w, params, e, &jac);
  }
  return params;
}

// Residuals are affine in the intercept for fixed (phi, theta); pick the intercept that zeroes
// their sum.
void center_intercept(const VecX& w, Params& params) {
  params.intercept = 0.0;
  VecX e0;
  MatX jac;
  css_residuals(w, params, e0, &jac);
  const double slope = jac.col(0).sum();
  if (slope != 0.0 && std::isfinite(slope)) params.intercept = -e0.sum() / slope;
}

}  // namespace

int select_d(const VecX& series, int d_max) {
  if (d_max < 0) fail(ErrorCode::kInvalidArgument, "d_max must be non-negative");
  if (series.size() <= d_max + 10) {
    fail(ErrorCode::kSeriesTooShort, "select_d needs more than d_max + 10 values");
  }
  VecX current = series;
  for (int d = 0; d < d_max; ++d) {
    VecX next = difference(current, 1);
    if (population_variance(current) <= population_variance(next)) return d;
    current = std::move(next);
  }
  return d_max;
}

ArimaModel fit_arima(const VecX& series, const ArimaOrder& order, const ArimaFitOptions& options) {
  if (order.p < 0 || order.d < 0 || order.q < 0) {
    fail(ErrorCode::kInvalidArgument, "ARIMA orders must be non-negative");
  }
  const Index p = order.p;
  const Index q = order.q;
  if (series.size() <= order.d) fail(ErrorCode::kSeriesTooShort, "series shorter than d + 1");
  const VecX w = difference(series, order.d);
  if (w.size() < 10 * (p + q + 1)) {
    fail(ErrorCode::kSeriesTooShort, "differenced length " + std::to_string(w.size()) +
                                         " < 10 * (p + q + 1)");
  }

  ArimaModel model;
  model.p = order.p;
  model.d = order.d;
  model.q = order.q;

  const double mean = w.mean();
  const VecX x = w.array() - mean;
  Params params;
  params.phi.assign(static_cast<std::size_t>(p), 0.0);
  params.theta.assign(static_cast<std::size_t>(q), 0.0);

  if (population_variance(w) == 0.0) {
    model.phi = params.phi;
    model.theta = params.theta;
    model.intercept = mean;
    model.sigma2 = 0.0;
    return model;
  }

  if (q == 0) {
    // CSS for a pure AR model is ordinary least squares; no refinement needed.
    if (!fit_ar_css(w, p, params)) {
      model.singular_regression = true;
      params.phi.assign(static_cast<std::size_t>(p), 0.0);
    }
  } else {
    if (!hannan_rissanen(x, p, q, params)) {
      model.singular_regression = true;
      if (!fit_ar(x, p, params.phi)) params.phi.assign(static_cast<std::size_t>(p), 0.0);
      params.theta.assign(static_cast<std::size_t>(q), 0.0);
    }
    shrink_to_admissible(params);
    double phi_sum = 0.0;
    for (double f : params.phi) phi_sum += f;
    params.intercept = mean * (1.0 - phi_sum);
    params = refine_css(w, std::move(params), options, model);
  }

  center_intercept(w, params);
  VecX e;
  css_residuals(w, params, e, nullptr);
  model.phi = params.phi;
  model.theta = params.theta;
  model.intercept = params.intercept;
  model.sigma2 = e.squaredNorm() / static_cast<double>(e.size());
  return model;
}

VecX arima_residuals(const ArimaModel& model, const VecX& series) {
  const VecX w = difference(series, model.d);
  if (w.size() <= model.p) fail(ErrorCode::kSeriesTooShort, "series too short for the AR order");
  VecX e;
  css_residuals(w, Params{model.intercept, model.phi, model.theta}, e, nullptr);
  return e;
}

VecX arima_forecast(const ArimaModel& model, const VecX& series, Index horizon) {
  if (horizon < 0) fail(ErrorCode::kInvalidArgument, "horizon must be non-negative");
  if (series.size() <= model.d + model.p) {
    fail(ErrorCode::kSeriesTooShort, "series too short for ARIMA(" + std::to_string(model.p) + "," +
                                         std::to_string(model.d) + "," + std::to_string(model.q) + ")");
  }
  const VecX w = difference(series, model.d);
  const VecX resid = arima_residuals(model, series);
  const Index n = w.size();
  const Index p = model.p;
  const Index q = model.q;

  // Extended differenced series and innovations; future innovations are zero.
  VecX ext_w(n + horizon);
  ext_w.head(n) = w;
  VecX ext_e = VecX::Zero(n + horizon);
  ext_e.segment(p, resid.size()) = resid;
  for (Index s = 0; s < horizon; ++s) {
    const Index t = n + s;
    double value = model.intercept;
    for (Index i = 1; i <= p; ++i) value += model.phi[static_cast<std::size_t>(i - 1)] * ext_w(t - i);
    for (Index j = 1; j <= q && t - j >= 0; ++j) {
      value += model.theta[static_cast<std::size_t>(j - 1)] * ext_e(t - j);
    }
    ext_w(t) = value;
  }
  const VecX future_w = ext_w.tail(horizon);
  if (model.d == 0) return future_w;
  const VecX anchors = series.tail(model.d);
  return integrate(future_w, model.d, anchors).tail(horizon);
}

}  // namespace moeload
