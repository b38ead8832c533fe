#include "oracles.hpp"
#include "test_util.hpp"

#include <moeload/evaluator.hpp>
#include <moeload/synth.hpp>

#include <random>

using namespace moeload;

namespace {

LoadTrace constant_trace(Index iterations, Index layers, Index experts) {
  CountMatrix counts = CountMatrix::Constant(iterations * layers, experts, 5);
  std::vector<int> ids;
  for (Index l = 0; l < layers; ++l) ids.push_back(static_cast<int>(l));
  return LoadTrace(ids, experts, 5 * experts, counts);
}

LoadTrace small_synth(Index iterations, std::uint64_t seed) {
  SynthConfig cfg;
  cfg.num_layers = 2;
  cfg.experts_per_layer = 8;
  cfg.tokens_per_iteration = 4096;
  cfg.num_iterations = iterations;
  cfg.seed = seed;
  return generate_trace(cfg);
}

MethodConfig sw(Index window) {
  MethodConfig m;
  m.method = Method::kSwAvg;
  m.sw_avg.window = window;
  return m;
}

MethodConfig oracle_method() {
  MethodConfig m;
  m.method = Method::kOracle;
  return m;
}

}  // namespace

TEST_CASE("error_rate: examples") {
  VecX t(2);
  t << 0.5, 0.5;
  VecX p(2);
  p << 0.6, 0.4;
  CHECK(error_rate(t, t, Metric::kMeanRelative) == 0.0);
  CHECK(error_rate(t, t, Metric::kTotalVariation) == 0.0);
  CHECK(error_rate(p, t, Metric::kMeanRelative) == doctest::Approx(0.2).epsilon(1e-14));
  CHECK(error_rate(p, t, Metric::kTotalVariation) == doctest::Approx(0.1).epsilon(1e-14));
  CHECK_THROWS_CODE(error_rate(VecX::Ones(3), t, Metric::kTotalVariation), ErrorCode::kLengthMismatch);

  // Epsilon guard keeps a starved expert finite.
  VecX starved(2);
  starved << 0.0, 1.0;
  VecX guess(2);
  guess << 0.01, 0.99;
  CHECK(error_rate(guess, starved, Metric::kMeanRelative, 1e-6) ==
        doctest::Approx((0.01 / 1e-6 + 0.01) / 2.0));
}

TEST_CASE("error_rate: matches the formula oracle on random simplex pairs") {
  std::mt19937_64 rng(8);
  for (int rep = 0; rep < 500; ++rep) {
    const std::size_t e = 2 + static_cast<std::size_t>(rep % 130);
    const auto a = oracle::random_simplex(rng, e);
    const auto b = oracle::random_simplex(rng, e);
    const VecX pa = oracle::to_eigen(a);
    const VecX pb = oracle::to_eigen(b);
    CHECK(std::abs(error_rate(pa, pb, Metric::kMeanRelative, 1e-6) - oracle::mean_relative(a, b, 1e-6)) <= 1e-12);
    const double tv = error_rate(pa, pb, Metric::kTotalVariation);
    CHECK(std::abs(tv - oracle::total_variation(a, b)) <= 1e-12);
    CHECK(tv <= 1.0);
    // Row vectors and column vectors are interchangeable.
    CHECK(error_rate(pa.transpose(), pb.transpose(), Metric::kTotalVariation) == tv);
  }
}

TEST_CASE("error_rate: moving a coordinate toward the truth never increases the error") {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> frac(0.0, 1.0);
  for (int rep = 0; rep < 500; ++rep) {
    const auto t = oracle::random_simplex(rng, 6);
    const auto p = oracle::random_simplex(rng, 6);
    const std::size_t j = static_cast<std::size_t>(rep % 6);
    auto moved = p;
    moved[j] = p[j] + frac(rng) * (t[j] - p[j]);
    for (const auto metric : {Metric::kMeanRelative, Metric::kTotalVariation}) {
      CHECK(error_rate(oracle::to_eigen(moved), oracle::to_eigen(t), metric) <=
            error_rate(oracle::to_eigen(p), oracle::to_eigen(t), metric));
    }
  }
}

TEST_CASE("blocked_eval: block counts") {
  const auto trace = constant_trace(10000, 1, 4);
  EvalConfig cfg;
  cfg.horizon = 1000;
  auto report = blocked_eval(nullptr, trace, sw(100), cfg);
  CHECK(report.points.size() == 9);
  CHECK(report.points.front().origin == 1000);
  CHECK(report.points.back().origin == 9000);
  cfg.horizon = 2000;
  report = blocked_eval(nullptr, trace, sw(100), cfg);
  CHECK(report.points.size() == 4);
  for (const Index n : {1999, 2000, 2999, 3000, 10500}) {
    const auto t = constant_trace(n, 1, 2);
    cfg.horizon = 1000;
    if ((n - 1000) / 1000 == 0) {
      CHECK_THROWS_CODE(blocked_eval(nullptr, t, sw(10), cfg), ErrorCode::kTraceTooShort);
    } else {
      CHECK(blocked_eval(nullptr, t, sw(10), cfg).points.size() == static_cast<std::size_t>((n - 1000) / 1000));
    }
  }
}

TEST_CASE("sliding_eval: origins") {
  const auto trace = constant_trace(1000, 2, 4);
  EvalConfig cfg;
  cfg.mode = EvalMode::kSliding;
  cfg.horizon = 100;
  cfg.stride = 50;
  cfg.warmup = 200;
  const auto report = evaluate(nullptr, trace, sw(50), cfg);
  // Origins 200, 250, ..., 900, two layers each.
  CHECK(report.points.size() == 15 * 2);
  CHECK(report.points[0].origin == 200);
  CHECK(report.points[1].origin == 200);
  CHECK(report.points[1].layer == 1);
  CHECK(report.points.back().origin == 900);
  CHECK(report.config.mode == EvalMode::kSliding);
}

TEST_CASE("oracle forecaster and SW_Avg on a constant trace score zero") {
  const auto synthetic = small_synth(3000, 4);
  const auto constant = constant_trace(3000, 2, 8);
  for (const auto mode : {EvalMode::kSliding, EvalMode::kBlocked}) {
    for (const auto scoring : {Scoring::kBlockMean, Scoring::kStepwise}) {
      EvalConfig cfg;
      cfg.mode = mode;
      cfg.scoring = scoring;
      cfg.horizon = 500;
      cfg.stride = 250;
      const auto r1 = evaluate(nullptr, synthetic, oracle_method(), cfg);
      const auto r2 = evaluate(nullptr, constant, sw(100), cfg);
      for (const auto* r : {&r1, &r2}) {
        CHECK(r->overall_mean == 0.0);
        CHECK(r->overall_total_variation == 0.0);
        for (const auto& point : r->points) CHECK(point.error == 0.0);
      }
    }
  }
}

TEST_CASE("evaluation reports both metrics and per-layer means") {
  const auto trace = small_synth(3000, 5);
  EvalConfig cfg;
  cfg.horizon = 500;
  cfg.metric = Metric::kTotalVariation;
  const auto report = blocked_eval(nullptr, trace, sw(200), cfg);
  REQUIRE(report.layer_means.size() == 2);
  double l0 = 0.0;
  Index n0 = 0;
  for (const auto& point : report.points) {
    CHECK(point.error == point.total_variation);
    CHECK(point.mean_relative > 0.0);
    if (point.layer == 0) {
      l0 += point.error;
      ++n0;
    }
  }
  CHECK(report.layer_means[0] == doctest::Approx(l0 / static_cast<double>(n0)));
  CHECK(report.overall_mean == report.overall_total_variation);
}

TEST_CASE("stepwise scoring is never below block-mean scoring") {
  const auto trace = small_synth(4000, 6);
  EvalConfig cfg;
  cfg.horizon = 1000;
  const auto block = blocked_eval(nullptr, trace, sw(500), cfg);
  cfg.scoring = Scoring::kStepwise;
  const auto step = blocked_eval(nullptr, trace, sw(500), cfg);
  // |mean(a - b)| <= mean(|a - b|) per coordinate.
  for (std::size_t i = 0; i < block.points.size(); ++i) {
    CHECK(block.points[i].total_variation <= step.points[i].total_variation + 1e-15);
  }
}

TEST_CASE("lstm evaluation trains once on the training trace") {
  const auto train = small_synth(300, 1);
  const auto test = small_synth(600, 2);
  MethodConfig m;
  m.method = Method::kLstm;
  m.lstm.hidden = 4;
  m.lstm.epochs = 2;
  m.lstm.truncation = 16;
  EvalConfig cfg;
  cfg.horizon = 100;
  const auto report = blocked_eval(&train, test, m, cfg);
  CHECK(report.lstm_final_loss.has_value());
  CHECK(report.points.size() == 5 * 2);
  CHECK_THROWS_CODE(blocked_eval(nullptr, test, m, cfg), ErrorCode::kConfigError);
}

TEST_CASE("state_conditioned_summary") {
  const auto trace = small_synth(2000, 3);
  EvalConfig cfg;
  cfg.horizon = 200;
  const auto report = blocked_eval(nullptr, trace, sw(100), cfg);

  std::vector<StateTimeline> timelines;
  for (int id : trace.layer_ids()) {
    StateTimeline tl;
    tl.layer_id = id;
    tl.labels.assign(2000, LoadState::kStable);
    tl.transition = 0;
    timelines.push_back(tl);
  }
  auto summary = state_conditioned_summary(report, timelines);
  REQUIRE(summary.stable_mean.has_value());
  CHECK(*summary.stable_mean == doctest::Approx(report.overall_mean).epsilon(1e-14));
  CHECK_FALSE(summary.transient_mean.has_value());
  CHECK(summary.layers[0].transient_count == 0);
  CHECK_FALSE(summary.layers[1].transient_mean.has_value());

  // Split at iteration 1000.
  for (auto& tl : timelines) {
    std::fill(tl.labels.begin(), tl.labels.begin() + 1000, LoadState::kTransient);
    tl.transition = 1000;
  }
  summary = state_conditioned_summary(report, timelines);
  CHECK(summary.layers[0].transient_count == 4);
  CHECK(summary.layers[0].stable_count == 5);

  timelines[1].labels.resize(500);
  CHECK_THROWS_CODE(state_conditioned_summary(report, timelines), ErrorCode::kCoverageMismatch);
  timelines.pop_back();
  CHECK_THROWS_CODE(state_conditioned_summary(report, timelines), ErrorCode::kCoverageMismatch);
}

TEST_CASE("stable-phase SW_Avg error is below the transient-phase error") {
  SynthConfig sc;
  sc.num_layers = 1;
  sc.experts_per_layer = 16;
  sc.tokens_per_iteration = 262144;
  sc.num_iterations = 8000;
  sc.sigma0 = 0.03;
  sc.sigma_inf = 0.0;
  sc.hard_transition_at = 2000;
  sc.seed = 12;
  const auto trace = generate_trace(sc);
  EvalConfig cfg;
  cfg.horizon = 500;
  const auto report = blocked_eval(nullptr, trace, sw(500), cfg);
  const std::vector<StateTimeline> tl{detect_state(to_proportions(trace, 2), {100, 0.25, 5})};
  const auto summary = state_conditioned_summary(report, tl);
  REQUIRE(summary.transient_mean.has_value());
  REQUIRE(summary.stable_mean.has_value());
  CHECK(*summary.stable_mean < *summary.transient_mean);
}

TEST_CASE("sampling floor") {
  CHECK(sampling_floor(128, 262144, 500.0) ==
        doctest::Approx(std::sqrt((1.0 - 1.0 / 128.0) / (262144.0 / 128.0 * 500.0))));
  CHECK(sw_avg_effective_samples(1000, 1000) == 500.0);
  CHECK(sw_avg_effective_samples(1000, 2000) == doctest::Approx(2000.0 / 3.0));
  CHECK_THROWS_CODE(sampling_floor(0, 10, 1.0), ErrorCode::kInvalidArgument);
}

TEST_CASE("sliding SW_Avg on a stationary multinomial trace stays within twice the sampling floor") {
  SynthConfig sc;
  sc.num_layers = 1;
  sc.experts_per_layer = 128;
  sc.tokens_per_iteration = 262144;
  sc.num_iterations = 5000;
  sc.sigma0 = 0.0;
  sc.sigma_inf = 0.0;
  sc.seed = 31;
  const auto trace = generate_trace(sc);
  EvalConfig cfg;
  cfg.mode = EvalMode::kSliding;
  cfg.horizon = 1000;
  cfg.stride = 1000;
  const auto report = sliding_eval(nullptr, trace, sw(1000), cfg);
  const double floor = sampling_floor(128, 262144, sw_avg_effective_samples(1000, 1000));
  CHECK(report.overall_mean <= 2.0 * floor);
}
