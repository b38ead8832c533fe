#include "test_util.hpp"

#include <moeload/forecast.hpp>
#include <moeload/simplex.hpp>
#include <moeload/synth.hpp>

using namespace moeload;

TEST_CASE("simplex_project") {
  const LayerSlices one{{0, 2}};
  VecX a(2);
  a << 0.5, 0.5;
  CHECK(simplex_project(a, one) == a);

  VecX b(2);
  b << -0.1, 1.2;
  const VecX pb = simplex_project(b, one);
  CHECK(pb(0) == 0.0);
  CHECK(pb(1) == 1.0);

  const VecX pc = simplex_project(VecX::Zero(2), one);
  CHECK(pc(0) == 0.5);
  CHECK(pc(1) == 0.5);

  VecX d(5);
  d << 2.0, 2.0, -1.0, 0.0, 0.0;
  const VecX pd = simplex_project(d, LayerSlices{{0, 3}, {3, 2}});
  CHECK(pd(0) == 0.5);
  CHECK(pd(1) == 0.5);
  CHECK(pd(2) == 0.0);
  CHECK(pd(3) == 0.5);
  CHECK(pd(4) == 0.5);

  // Works in place on a row of a row-major matrix.
  MatX m(2, 2);
  m << 3.0, 1.0, 0.0, 0.0;
  auto row = m.row(0);
  simplex_project_inplace(row, one);
  CHECK(m(0, 0) == 0.75);
  CHECK(m(1, 0) == 0.0);
}

TEST_CASE("parse_method") {
  CHECK(parse_method("sw_avg") == Method::kSwAvg);
  CHECK(parse_method("arima") == Method::kArima);
  CHECK(parse_method("lstm") == Method::kLstm);
  CHECK(parse_method("oracle", true) == Method::kOracle);
  CHECK_THROWS_CODE(parse_method("oracle"), ErrorCode::kConfigError);
  CHECK_THROWS_CODE(parse_method("prophet"), ErrorCode::kConfigError);
  for (const auto m : {Method::kSwAvg, Method::kArima, Method::kLstm, Method::kOracle}) {
    CHECK(parse_method(to_string(m), true) == m);
  }
}

TEST_CASE("forecast: sw_avg on constant history") {
  RowVecX row(4);
  row << 0.125, 0.375, 0.25, 0.25;
  ForecastRequest req;
  req.history = row.replicate(30, 1);
  req.horizon = 12;
  req.config.sw_avg.window = 10;
  const auto result = forecast(req);
  REQUIRE(result.predictions.rows() == 12);
  for (Index s = 0; s < 12; ++s) CHECK(result.predictions.row(s) == row);
}

TEST_CASE("forecast: arima(5,1,5) on a stable synthetic layer is finite and simplex-valid") {
  SynthConfig cfg;
  cfg.num_layers = 1;
  cfg.experts_per_layer = 8;
  cfg.num_iterations = 1500;
  cfg.sigma0 = 0.005;
  cfg.sigma_inf = 0.005;
  cfg.seed = 14;
  const auto trace = generate_trace(cfg);
  ForecastRequest req;
  req.history = flatten_all_experts(trace);
  req.horizon = 1000;
  req.config.method = Method::kArima;
  const auto result = forecast(req);
  CHECK(result.arima_models.size() == 8);
  CHECK(result.arima_models[0].p == 5);
  CHECK(result.arima_models[0].d == 1);
  CHECK(result.arima_models[0].q == 5);
  CHECK(result.predictions.allFinite());
  for (Index s = 0; s < result.predictions.rows(); ++s) {
    CHECK(result.predictions.row(s).sum() == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(result.predictions.row(s).minCoeff() >= 0.0);
    CHECK(result.predictions.row(s).maxCoeff() <= 1.0);
  }
}

TEST_CASE("forecast: per-layer slices are projected independently") {
  SynthConfig cfg;
  cfg.num_layers = 2;
  cfg.experts_per_layer = 3;
  cfg.num_iterations = 400;
  cfg.seed = 1;
  const auto trace = generate_trace(cfg);
  ForecastRequest req;
  req.history = flatten_all_experts(trace);
  req.horizon = 20;
  req.slices = uniform_slices(2, 3);
  req.config.method = Method::kArima;
  req.config.arima.order = {1, 0, 1};
  req.config.arima.auto_d = true;
  const auto result = forecast(req);
  for (Index s = 0; s < 20; ++s) {
    CHECK(result.predictions.row(s).head(3).sum() == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(result.predictions.row(s).tail(3).sum() == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("forecast: request validation") {
  ForecastRequest req;
  req.history = MatX::Constant(20, 4, 0.25);
  req.horizon = 3;
  req.config.sw_avg.window = 5;

  SUBCASE("lstm needs a model") {
    req.config.method = Method::kLstm;
    CHECK_THROWS_CODE(forecast(req), ErrorCode::kConfigError);
  }
  SUBCASE("oracle is evaluation-only") {
    req.config.method = Method::kOracle;
    CHECK_THROWS_CODE(forecast(req), ErrorCode::kConfigError);
  }
  SUBCASE("slices must partition the columns") {
    req.slices = {{0, 2}, {3, 1}};
    CHECK_THROWS_CODE(forecast(req), ErrorCode::kShapeMismatch);
    req.slices = {{0, 2}};
    CHECK_THROWS_CODE(forecast(req), ErrorCode::kShapeMismatch);
  }
  SUBCASE("history shorter than the window") {
    req.config.sw_avg.window = 50;
    CHECK_THROWS_CODE(forecast(req), ErrorCode::kSeriesTooShort);
  }
  SUBCASE("horizon") {
    req.horizon = 0;
    CHECK_THROWS_CODE(forecast(req), ErrorCode::kInvalidArgument);
  }
}

TEST_CASE("forecast: lstm with a trained model") {
  SynthConfig cfg;
  cfg.num_layers = 2;
  cfg.experts_per_layer = 4;
  cfg.num_iterations = 200;
  cfg.seed = 2;
  const auto trace = generate_trace(cfg);
  LstmConfig lc;
  lc.hidden = 8;
  lc.epochs = 5;
  lc.truncation = 16;
  const auto model = lstm_train(flatten_all_experts(trace), lc);
  ForecastRequest req;
  req.history = flatten_all_experts(trace);
  req.horizon = 10;
  req.slices = uniform_slices(2, 4);
  req.config.method = Method::kLstm;
  req.lstm = &model;
  const auto result = forecast(req);
  REQUIRE(result.lstm_final_loss.has_value());
  CHECK(*result.lstm_final_loss == model.final_loss);
  for (Index s = 0; s < 10; ++s) {
    CHECK(result.predictions.row(s).head(4).sum() == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(result.predictions.row(s).tail(4).sum() == doctest::Approx(1.0).epsilon(1e-9));
  }
}
