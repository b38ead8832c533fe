#include "moeload/synth.hpp"

#include "moeload/arima.hpp"
#include "moeload/error.hpp"
#include "moeload/random.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace moeload {

void SynthConfig::validate() const {
  const auto bad = [](const std::string& what) { fail(ErrorCode::kInvalidConfig, what); };
  if (num_layers <= 0) bad("num_layers must be positive");
  if (experts_per_layer <= 0) bad("experts_per_layer must be positive");
  if (tokens_per_iteration <= 0) bad("tokens_per_iteration must be positive");
  if (num_iterations <= 0) bad("num_iterations must be positive");
  if (!(sigma0 >= 0.0) || !(sigma_inf >= 0.0)) bad("sigma0 and sigma_inf must be non-negative");
  if (sigma_inf > sigma0) bad("sigma_inf must not exceed sigma0");
  if (!(decay_T > 0.0)) bad("decay_T must be positive");
  if (!(temperature > 0.0)) bad("temperature must be positive");
  if (hard_transition_at && *hard_transition_at < 0) bad("hard_transition_at must be non-negative");
  if (!layer_ids.empty() && static_cast<Index>(layer_ids.size()) != num_layers) {
    bad("layer_ids must list num_layers ids");
  }
}

std::vector<int> SynthConfig::resolved_layer_ids() const {
  if (!layer_ids.empty()) return layer_ids;
  std::vector<int> ids;
  for (Index l = 0; l < num_layers; ++l) ids.push_back(static_cast<int>(2 * (l + 1)));
  return ids;
}

double SynthConfig::step_size(Index t) const {
  if (hard_transition_at) return t < *hard_transition_at ? sigma0 : sigma_inf;
  return sigma_inf + (sigma0 - sigma_inf) * std::exp(-static_cast<double>(t) / decay_T);
}

namespace {

void generate_layer(const SynthConfig& cfg, Index layer, CountMatrix& counts) {
  const Index e = cfg.experts_per_layer;
  const Index m = cfg.num_layers;
  Xoshiro256 rng(cfg.seed, static_cast<std::uint64_t>(layer));
  VecX z = VecX::Zero(e);
  VecX p(e);
  for (Index t = 0; t < cfg.num_iterations; ++t) {
    if (t > 0) {
      const double sigma = cfg.step_size(t);
      for (Index j = 0; j < e; ++j) z(j) += sigma * rng.normal();
    }
    p = ((z.array() - z.maxCoeff()) / cfg.temperature).exp();
    p /= p.sum();

    // Sequential binomial decomposition of Multinomial(N, p).
    std::int64_t remaining = cfg.tokens_per_iteration;
    double mass = 1.0;
    auto row = counts.row(t * m + layer);
    for (Index j = 0; j + 1 < e; ++j) {
      std::int64_t c = 0;
      if (remaining > 0 && mass > 0.0) {
        const double ratio = std::clamp(p(j) / mass, 0.0, 1.0);
        c = rng.binomial(remaining, ratio);
      }
      row(j) = c;
      remaining -= c;
      mass -= p(j);
    }
    row(e - 1) = remaining;
  }
}

void check_roots(const std::vector<double>& coeffs, const char* what) {
  if (coeffs.empty()) return;
  if (lag_polynomial_root_modulus_min(coeffs) <= 1.0) {
    fail(ErrorCode::kNonStationaryCoefficients,
         std::string(what) + " polynomial has a root on or inside the unit circle");
  }
}

}  // namespace

LoadTrace generate_trace(const SynthConfig& cfg) {
  cfg.validate();
  const Index m = cfg.num_layers;
  CountMatrix counts(cfg.num_iterations * m, cfg.experts_per_layer);
  for (Index l = 0; l < m; ++l) generate_layer(cfg, l, counts);
  return LoadTrace(cfg.resolved_layer_ids(), cfg.experts_per_layer, cfg.tokens_per_iteration,
                   std::move(counts), RowSumMode::kStrict);
}

VecX generate_arma(const ArmaSynthConfig& cfg) {
  if (cfg.length <= 0) fail(ErrorCode::kInvalidConfig, "length must be positive");
  if (cfg.d < 0) fail(ErrorCode::kInvalidConfig, "d must be non-negative");
  if (!(cfg.noise_sigma >= 0.0)) fail(ErrorCode::kInvalidConfig, "noise_sigma must be >= 0");
  // AR side uses 1 - sum(phi L^i); MA side 1 + sum(theta L^j).
  std::vector<double> ar_poly;
  for (double f : cfg.phi) ar_poly.push_back(-f);
  check_roots(ar_poly, "AR");
  check_roots(cfg.theta, "MA");

  const Index p = static_cast<Index>(cfg.phi.size());
  const Index q = static_cast<Index>(cfg.theta.size());
  const Index burn = 10 * (p + q + 1);
  const Index total = burn + cfg.length;
  Xoshiro256 rng(cfg.seed);
  VecX w = VecX::Zero(total);
  VecX eps = VecX::Zero(total);
  for (Index t = 0; t < total; ++t) {
    eps(t) = cfg.noise_sigma * rng.normal();
    if (t == burn) eps(t) += cfg.initial_shock;
    double value = eps(t);
    for (Index i = 1; i <= p && i <= t; ++i) value += cfg.phi[static_cast<std::size_t>(i - 1)] * w(t - i);
    for (Index j = 1; j <= q && j <= t; ++j) value += cfg.theta[static_cast<std::size_t>(j - 1)] * eps(t - j);
    w(t) = value;
  }
  VecX x = w.tail(cfg.length);
  for (int k = 0; k < cfg.d; ++k) {
    for (Index t = 1; t < x.size(); ++t) x(t) += x(t - 1);
  }
  return x;
}

}  // namespace moeload
