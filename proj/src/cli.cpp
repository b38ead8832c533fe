#include "moeload/cli.hpp"

#include "moeload/allocator.hpp"
#include "moeload/error.hpp"
#include "moeload/evaluator.hpp"
#include "moeload/forecast.hpp"
#include "moeload/synth.hpp"
#include "moeload/trace_io.hpp"
#include "moeload/window_stats.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <functional>
#include <ostream>

#ifndef MOELOAD_VERSION
#define MOELOAD_VERSION "0.0.0"
#endif

namespace moeload::cli {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

constexpr int kManifestVersion = 1;

// Reconstructs a complete argument list for `sub` from parsed values and defaults, so the
// command can be replayed without the original config file.
std::vector<std::string> canonical_args(const CLI::App& sub) {
  std::vector<std::string> args{sub.get_name()};
  std::vector<std::string> positionals;
  for (const CLI::Option* opt : sub.get_options()) {
    if (opt->get_lnames().size() == 1 && opt->get_lnames().front() == "help") continue;
    const bool is_flag = opt->get_expected_min() == 0;
    if (opt->get_positional() && opt->get_lnames().empty() && opt->get_snames().empty()) {
      for (const auto& value : opt->results()) positionals.push_back(value);
      continue;
    }
    const std::string name = "--" + opt->get_lnames().front();
    if (is_flag) {
      if (opt->count() > 0) args.push_back(name);
      continue;
    }
    std::vector<std::string> values = opt->results();
    if (values.empty() && !opt->get_default_str().empty()) values.push_back(opt->get_default_str());
    for (const auto& value : values) {
      args.push_back(name);
      args.push_back(value);
    }
  }
  args.insert(args.end(), positionals.begin(), positionals.end());
  return args;
}

json resolved_config(const CLI::App& sub) {
  json config = json::object();
  for (const CLI::Option* opt : sub.get_options()) {
    if (opt->get_lnames().size() == 1 && opt->get_lnames().front() == "help") continue;
    const std::string key = opt->get_lnames().empty() ? opt->get_name() : opt->get_lnames().front();
    if (opt->get_expected_min() == 0) {
      config[key] = opt->count() > 0;
      continue;
    }
    const auto& values = opt->results();
    if (!values.empty()) {
      config[key] = values.size() == 1 ? json(values.front()) : json(values);
    } else if (!opt->get_default_str().empty()) {
      config[key] = opt->get_default_str();
    } else {
      config[key] = nullptr;
    }
  }
  return config;
}

fs::path sibling(const fs::path& file, const std::string& suffix) {
  fs::path out = file;
  out.replace_extension(suffix);
  return out;
}

void write_json(const fs::path& path, const json& value) {
  write_file_atomic(path, value.dump(2) + "\n");
}

void write_manifest(const CLI::App& sub, const fs::path& path, const std::vector<std::string>& inputs,
                    const std::vector<std::string>& outputs, std::optional<std::uint64_t> seed) {
  json manifest;
  manifest["manifest_version"] = kManifestVersion;
  manifest["tool"] = "moeload";
  manifest["tool_version"] = MOELOAD_VERSION;
  manifest["subcommand"] = sub.get_name();
  manifest["config"] = resolved_config(sub);
  manifest["inputs"] = inputs;
  manifest["outputs"] = outputs;
  manifest["seed"] = seed ? json(*seed) : json(nullptr);
  manifest["args"] = canonical_args(sub);
  write_json(path, manifest);
}

json arima_json(const ArimaModel& model) {
  return {{"p", model.p},         {"d", model.d},           {"q", model.q},
          {"phi", model.phi},     {"theta", model.theta},   {"intercept", model.intercept},
          {"sigma2", model.sigma2}, {"converged", model.converged},
          {"singular_regression", model.singular_regression}, {"iterations", model.iterations}};
}

json method_json(const MethodConfig& cfg) {
  json out{{"method", std::string(to_string(cfg.method))}};
  switch (cfg.method) {
    case Method::kSwAvg:
      out["window"] = cfg.sw_avg.window;
      break;
    case Method::kArima:
      out["p"] = cfg.arima.order.p;
      out["d"] = cfg.arima.order.d;
      out["q"] = cfg.arima.order.q;
      out["auto_d"] = cfg.arima.auto_d;
      out["d_max"] = cfg.arima.d_max;
      out["max_history"] = cfg.arima.max_history;
      break;
    case Method::kLstm:
      out["hidden"] = cfg.lstm.hidden;
      out["learning_rate"] = cfg.lstm.learning_rate;
      out["epochs"] = cfg.lstm.epochs;
      out["truncation"] = cfg.lstm.truncation;
      out["batch_size"] = cfg.lstm.batch_size;
      out["seed"] = cfg.lstm.seed;
      break;
    case Method::kOracle:
      break;
  }
  return out;
}

// Option bindings for forecasting methods, shared by `forecast` and `eval`.
struct MethodOptions {
  std::string method = "sw_avg";
  Index window = 1000;
  int p = 5;
  int d = 1;
  int q = 5;
  bool auto_d = false;
  int d_max = 2;
  Index max_history = 0;
  Index hidden = 64;
  double learning_rate = 1e-3;
  int epochs = 200;
  Index truncation = 32;
  Index batch_size = 1;
  std::uint64_t seed = 0;
  std::string train_trace;

  void add_to(CLI::App* sub) {
    sub->add_option("--window", window, "SW_Avg window size")->check(CLI::PositiveNumber);
    sub->add_option("--p", p, "ARIMA autoregressive order")->check(CLI::NonNegativeNumber);
    sub->add_option("--d", d, "ARIMA differencing order")->check(CLI::NonNegativeNumber);
    sub->add_option("--q", q, "ARIMA moving-average order")->check(CLI::NonNegativeNumber);
    sub->add_flag("--auto-d", auto_d, "choose d by the over-differencing test");
    sub->add_option("--d-max", d_max, "largest d considered by --auto-d")->check(CLI::NonNegativeNumber);
    sub->add_option("--max-history", max_history, "ARIMA fit window (0 = whole history)")
        ->check(CLI::NonNegativeNumber);
    sub->add_option("--hidden", hidden, "LSTM hidden size")->check(CLI::PositiveNumber);
    sub->add_option("--lr", learning_rate, "LSTM Adam learning rate")->check(CLI::PositiveNumber);
    sub->add_option("--epochs", epochs, "LSTM training epochs")->check(CLI::NonNegativeNumber);
    sub->add_option("--truncation", truncation, "LSTM BPTT segment length")->check(CLI::PositiveNumber);
    sub->add_option("--batch-size", batch_size, "LSTM segments per update")->check(CLI::PositiveNumber);
    sub->add_option("--seed", seed, "LSTM initialization seed");
    sub->add_option("--train-trace", train_trace, "trace used to train the LSTM");
  }

  MethodConfig resolve(bool allow_oracle) const {
    MethodConfig cfg;
    cfg.method = parse_method(method, allow_oracle);
    cfg.sw_avg.window = window;
    cfg.arima.order = {p, d, q};
    cfg.arima.auto_d = auto_d;
    cfg.arima.d_max = d_max;
    cfg.arima.max_history = max_history;
    cfg.lstm.hidden = hidden;
    cfg.lstm.learning_rate = learning_rate;
    cfg.lstm.epochs = epochs;
    cfg.lstm.truncation = truncation;
    cfg.lstm.batch_size = batch_size;
    cfg.lstm.seed = seed;
    return cfg;
  }
};

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

RowSumMode row_mode(bool lenient) { return lenient ? RowSumMode::kLenient : RowSumMode::kStrict; }

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Expert-load trace analysis and forecasting for Mixture-of-Experts training"};
  app.set_version_flag("--version", MOELOAD_VERSION);
  app.set_config("--config", "", "TOML/INI file with option values (flags take precedence)");
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default();

  std::function<void()> action;

  // synth
  SynthConfig synth_cfg;
  long hard_transition = -1;
  std::string synth_out;
  auto* synth = app.add_subcommand("synth", "generate a synthetic expert-load trace");
  synth->add_option("--layers", synth_cfg.num_layers, "MoE layers")->check(CLI::PositiveNumber);
  synth->add_option("--experts", synth_cfg.experts_per_layer, "experts per layer")->check(CLI::PositiveNumber);
  synth->add_option("--tokens", synth_cfg.tokens_per_iteration, "tokens per iteration and layer")
      ->check(CLI::PositiveNumber);
  synth->add_option("--iters", synth_cfg.num_iterations, "iterations")->check(CLI::PositiveNumber);
  synth->add_option("--sigma0", synth_cfg.sigma0, "initial logit step size")->check(CLI::NonNegativeNumber);
  synth->add_option("--sigma-inf", synth_cfg.sigma_inf, "residual logit step size")
      ->check(CLI::NonNegativeNumber);
  synth->add_option("--decay", synth_cfg.decay_T, "step-size decay constant (iterations)")
      ->check(CLI::PositiveNumber);
  synth->add_option("--temperature", synth_cfg.temperature, "softmax temperature")->check(CLI::PositiveNumber);
  synth->add_option("--seed", synth_cfg.seed, "generator seed");
  synth->add_option("--hard-transition", hard_transition,
                    "switch from sigma0 to sigma-inf at this iteration (negative: smooth decay)");
  synth->add_option("-o,--output", synth_out, "trace CSV path")->required();
  synth->callback([&] {
    action = [&] {
      if (hard_transition >= 0) synth_cfg.hard_transition_at = hard_transition;
      const auto trace = generate_trace(synth_cfg);
      write_trace(trace, synth_out);
      write_manifest(*synth, sibling(synth_out, ".manifest.json"), {},
                     {synth_out, metadata_path(synth_out).string()}, synth_cfg.seed);
    };
  });

  // stats
  std::string stats_trace;
  std::string stats_out;
  std::string stats_metric = "variance";
  WindowConfig stats_window;
  bool stats_lenient = false;
  auto* stats = app.add_subcommand("stats", "sliding-window variance/range of expert load proportions");
  stats->add_option("trace", stats_trace, "trace CSV/JSONL")->required();
  stats->add_option("--window", stats_window.window, "window size")->check(CLI::Range(2, 1 << 30));
  stats->add_option("--stride", stats_window.stride, "window stride")->check(CLI::PositiveNumber);
  stats->add_option("--metric", stats_metric, "statistic")->check(CLI::IsMember({"variance", "range", "both"}));
  stats->add_flag("--lenient", stats_lenient, "accept rows whose sum differs from tokens_per_iteration");
  stats->add_option("-o,--output", stats_out, "output directory")->required();
  stats->callback([&] {
    action = [&] {
      const auto trace = read_trace(stats_trace, row_mode(stats_lenient));
      fs::create_directories(stats_out);
      std::vector<std::string> outputs;
      for (const int layer : trace.layer_ids()) {
        const auto result = layer_window_stats(to_proportions(trace, layer), stats_window);
        for (const std::string metric : {"variance", "range"}) {
          if (stats_metric != "both" && stats_metric != metric) continue;
          const MatX& values = metric == "variance" ? result.variance : result.range;
          Table table;
          table.columns.push_back("window_start");
          for (Index j = 0; j < trace.experts_per_layer(); ++j) table.columns.push_back("expert_" + std::to_string(j));
          for (Index k = 0; k < values.rows(); ++k) {
            std::vector<double> row{static_cast<double>(trace.first_iteration() +
                                                        result.start_iterations[static_cast<std::size_t>(k)])};
            row.insert(row.end(), values.row(k).data(), values.row(k).data() + values.cols());
            table.rows.push_back(std::move(row));
          }
          const auto path = fs::path(stats_out) / (metric + "_layer" + std::to_string(layer) + ".csv");
          write_table(table, path);
          outputs.push_back(path.string());
        }
      }
      write_manifest(*stats, fs::path(stats_out) / "manifest.json", {stats_trace}, outputs, std::nullopt);
    };
  });

  // detect
  std::string detect_trace;
  std::string detect_out;
  DetectorConfig detect_cfg;
  bool detect_lenient = false;
  auto* detect = app.add_subcommand("detect", "classify iterations into transient and stable states");
  detect->add_option("trace", detect_trace, "trace CSV/JSONL")->required();
  detect->add_option("--window", detect_cfg.window, "window size")->check(CLI::Range(2, 1 << 30));
  detect->add_option("--tau", detect_cfg.tau_rho, "range threshold relative to 1/E")->check(CLI::PositiveNumber);
  detect->add_option("--consec", detect_cfg.consec, "consecutive quiet windows required")
      ->check(CLI::PositiveNumber);
  detect->add_flag("--lenient", detect_lenient, "accept rows whose sum differs from tokens_per_iteration");
  detect->add_option("-o,--output", detect_out, "timeline JSON path")->required();
  detect->callback([&] {
    action = [&] {
      const auto trace = read_trace(detect_trace, row_mode(detect_lenient));
      json result;
      result["window"] = detect_cfg.window;
      result["tau"] = detect_cfg.tau_rho;
      result["consec"] = detect_cfg.consec;
      result["first_iteration"] = trace.first_iteration();
      result["num_iterations"] = trace.num_iterations();
      result["layers"] = json::array();
      for (const int layer : trace.layer_ids()) {
        const auto timeline = detect_state(to_proportions(trace, layer), detect_cfg);
        json entry{{"layer", layer}};
        if (timeline.transition) {
          entry["transition"] = trace.first_iteration() + *timeline.transition;
          entry["transient_iterations"] = *timeline.transition;
          entry["stable_iterations"] = trace.num_iterations() - *timeline.transition;
        } else {
          entry["transition"] = nullptr;
          entry["transient_iterations"] = trace.num_iterations();
          entry["stable_iterations"] = 0;
        }
        result["layers"].push_back(std::move(entry));
      }
      write_json(detect_out, result);
      write_manifest(*detect, sibling(detect_out, ".manifest.json"), {detect_trace}, {detect_out},
                     std::nullopt);
    };
  });

  // forecast
  MethodOptions fc_method;
  std::string fc_trace;
  std::string fc_out;
  Index fc_horizon = 1000;
  Index fc_origin = 0;
  bool fc_lenient = false;
  auto* fc = app.add_subcommand("forecast", "predict future load proportions of every expert");
  fc->add_option("trace", fc_trace, "trace CSV/JSONL")->required();
  fc->add_option("--method", fc_method.method, "sw_avg | arima | lstm")
      ->check(CLI::IsMember({"sw_avg", "arima", "lstm"}));
  fc->add_option("--horizon", fc_horizon, "iterations to predict")->check(CLI::PositiveNumber);
  fc->add_option("--origin", fc_origin, "forecast from this many leading iterations (0 = all)")
      ->check(CLI::NonNegativeNumber);
  fc_method.add_to(fc);
  fc->add_flag("--lenient", fc_lenient, "accept rows whose sum differs from tokens_per_iteration");
  fc->add_option("-o,--output", fc_out, "forecast CSV path")->required();
  fc->callback([&] {
    action = [&] {
      const MethodConfig method = fc_method.resolve(false);
      if (method.method == Method::kLstm && fc_method.train_trace.empty()) {
        throw UsageError("--method lstm requires --train-trace");
      }
      const auto trace = read_trace(fc_trace, row_mode(fc_lenient));
      const Index origin = fc_origin == 0 ? trace.num_iterations() : fc_origin;
      if (origin > trace.num_iterations()) fail(ErrorCode::kRangeOutOfBounds, "--origin beyond the trace");
      std::vector<std::string> inputs{fc_trace};
      std::optional<LstmForecaster> lstm;
      if (method.method == Method::kLstm) {
        const auto train = read_trace(fc_method.train_trace, row_mode(fc_lenient));
        if (train.num_layers() != trace.num_layers() || train.experts_per_layer() != trace.experts_per_layer()) {
          fail(ErrorCode::kShapeMismatch, "training and forecast traces have different layer shapes");
        }
        lstm = lstm_train(flatten_all_experts(train), method.lstm);
        inputs.push_back(fc_method.train_trace);
      }
      ForecastRequest request{flatten_all_experts(trace, {0, origin}), fc_horizon, method,
                              uniform_slices(trace.num_layers(), trace.experts_per_layer()),
                              lstm ? &*lstm : nullptr};
      const auto result = forecast(request);

      Table table;
      table.columns.push_back("step");
      for (Index j = 0; j < result.predictions.cols(); ++j) table.columns.push_back("series_" + std::to_string(j));
      for (Index s = 0; s < result.predictions.rows(); ++s) {
        std::vector<double> row{static_cast<double>(s + 1)};
        row.insert(row.end(), result.predictions.row(s).data(),
                   result.predictions.row(s).data() + result.predictions.cols());
        table.rows.push_back(std::move(row));
      }
      write_table(table, fc_out);

      json diag;
      diag["method"] = method_json(method);
      diag["horizon"] = fc_horizon;
      diag["origin_iteration"] = trace.first_iteration() + origin;
      diag["moe_layer_ids"] = trace.layer_ids();
      diag["experts_per_layer"] = trace.experts_per_layer();
      if (!result.arima_models.empty()) {
        diag["arima"] = json::array();
        for (const auto& model : result.arima_models) diag["arima"].push_back(arima_json(model));
      }
      if (lstm) {
        diag["lstm_initial_loss"] = lstm->initial_loss;
        diag["lstm_final_loss"] = lstm->final_loss;
      }
      const auto diag_path = sibling(fc_out, ".diagnostics.json");
      write_json(diag_path, diag);
      write_manifest(*fc, sibling(fc_out, ".manifest.json"), inputs, {fc_out, diag_path.string()},
                     method.method == Method::kLstm ? std::optional<std::uint64_t>(method.lstm.seed)
                                                    : std::nullopt);
    };
  });

  // eval
  MethodOptions ev_method;
  std::string ev_trace;
  std::string ev_out;
  std::string ev_mode = "blocked";
  std::string ev_metric = "mean_relative";
  EvalConfig ev_cfg;
  bool ev_stepwise = false;
  bool ev_lenient = false;
  DetectorConfig ev_detect;
  auto* ev = app.add_subcommand("eval", "score a forecasting method against a test trace");
  ev->add_option("trace", ev_trace, "test trace CSV/JSONL")->required();
  ev->add_option("--method", ev_method.method, "sw_avg | arima | lstm");
  ev->add_option("--horizon", ev_cfg.horizon, "forecast horizon k")->check(CLI::PositiveNumber);
  ev->add_option("--mode", ev_mode, "sliding | blocked")->check(CLI::IsMember({"sliding", "blocked"}));
  ev->add_option("--stride", ev_cfg.stride, "sliding origin spacing")->check(CLI::PositiveNumber);
  ev->add_option("--warmup", ev_cfg.warmup, "first sliding origin (0 = horizon)")->check(CLI::NonNegativeNumber);
  ev->add_option("--metric", ev_metric, "headline metric")
      ->check(CLI::IsMember({"mean_relative", "total_variation"}));
  ev->add_option("--epsilon", ev_cfg.epsilon, "denominator floor for mean_relative")->check(CLI::PositiveNumber);
  ev->add_flag("--stepwise", ev_stepwise, "score each forecast step instead of block means");
  ev->add_option("--detect-window", ev_detect.window, "state detector window")->check(CLI::Range(2, 1 << 30));
  ev->add_option("--tau", ev_detect.tau_rho, "state detector threshold")->check(CLI::PositiveNumber);
  ev->add_option("--consec", ev_detect.consec, "state detector run length")->check(CLI::PositiveNumber);
  ev_method.add_to(ev);
  ev->add_flag("--lenient", ev_lenient, "accept rows whose sum differs from tokens_per_iteration");
  ev->add_option("-o,--output", ev_out, "output directory")->required();
  ev->callback([&] {
    action = [&] {
      MethodConfig method;
      try {
        method = ev_method.resolve(true);
      } catch (const Error& ex) {
        throw UsageError(ex.what());
      }
      if (method.method == Method::kLstm && ev_method.train_trace.empty()) {
        throw UsageError("--method lstm requires --train-trace");
      }
      ev_cfg.mode = ev_mode == "sliding" ? EvalMode::kSliding : EvalMode::kBlocked;
      ev_cfg.metric = ev_metric == "mean_relative" ? Metric::kMeanRelative : Metric::kTotalVariation;
      ev_cfg.scoring = ev_stepwise ? Scoring::kStepwise : Scoring::kBlockMean;
      const auto test = read_trace(ev_trace, row_mode(ev_lenient));
      std::vector<std::string> inputs{ev_trace};
      std::optional<LoadTrace> train;
      if (!ev_method.train_trace.empty() && method.method == Method::kLstm) {
        train = read_trace(ev_method.train_trace, row_mode(ev_lenient));
        inputs.push_back(ev_method.train_trace);
      }
      const auto report = evaluate(train ? &*train : nullptr, test, method, ev_cfg);

      fs::create_directories(ev_out);
      const bool sliding = ev_cfg.mode == EvalMode::kSliding;
      Table table{{sliding ? "origin_iteration" : "block_start", "layer", "error"}, {}};
      for (const auto& point : report.points) {
        table.rows.push_back({static_cast<double>(test.first_iteration() + point.origin),
                              static_cast<double>(report.layer_ids[static_cast<std::size_t>(point.layer)]),
                              point.error});
      }
      const auto table_path = fs::path(ev_out) / (sliding ? "sliding.csv" : "blocked.csv");
      write_table(table, table_path);

      json summary;
      summary["method"] = method_json(method);
      summary["mode"] = std::string(to_string(ev_cfg.mode));
      summary["metric"] = std::string(to_string(ev_cfg.metric));
      summary["scoring"] = ev_stepwise ? "stepwise" : "block_mean";
      summary["horizon"] = ev_cfg.horizon;
      summary["origins"] = report.points.size() / report.layer_ids.size();
      summary["overall_mean"] = report.overall_mean;
      summary["overall_mean_relative"] = report.overall_mean_relative;
      summary["overall_total_variation"] = report.overall_total_variation;
      summary["layer_means"] = json::object();
      for (std::size_t l = 0; l < report.layer_ids.size(); ++l) {
        summary["layer_means"][std::to_string(report.layer_ids[l])] = report.layer_means[l];
      }
      const double k_eff = method.method == Method::kSwAvg
                               ? sw_avg_effective_samples(method.sw_avg.window, ev_cfg.horizon)
                               : static_cast<double>(ev_cfg.horizon);
      summary["sampling_floor"] = {{"k_eff", k_eff},
                                   {"relative_std", sampling_floor(test.experts_per_layer(),
                                                                   test.tokens_per_iteration(), k_eff)}};
      if (report.lstm_final_loss) summary["lstm_final_loss"] = *report.lstm_final_loss;
      if (test.num_iterations() >= ev_detect.window * ev_detect.consec) {
        std::vector<StateTimeline> timelines;
        for (const int layer : test.layer_ids()) {
          timelines.push_back(detect_state(to_proportions(test, layer), ev_detect));
        }
        const auto states = state_conditioned_summary(report, timelines);
        const auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
        json by_state{{"transient_mean", opt(states.transient_mean)},
                      {"stable_mean", opt(states.stable_mean)},
                      {"layers", json::array()}};
        for (std::size_t l = 0; l < states.layers.size(); ++l) {
          const auto& s = states.layers[l];
          by_state["layers"].push_back({{"layer", s.layer_id},
                                        {"transition", timelines[l].transition
                                                           ? json(test.first_iteration() + *timelines[l].transition)
                                                           : json(nullptr)},
                                        {"transient_mean", opt(s.transient_mean)},
                                        {"stable_mean", opt(s.stable_mean)}});
        }
        summary["state_conditioned"] = by_state;
      }
      const auto summary_path = fs::path(ev_out) / "summary.json";
      write_json(summary_path, summary);
      write_manifest(*ev, fs::path(ev_out) / "manifest.json", inputs,
                     {table_path.string(), summary_path.string()},
                     method.method == Method::kLstm ? std::optional<std::uint64_t>(method.lstm.seed)
                                                    : std::nullopt);
    };
  });

  // advise
  std::string adv_forecast;
  std::string adv_out;
  std::string adv_mode = "proportional";
  std::string adv_ranges;
  std::int64_t adv_total = 0;
  std::int64_t adv_min = 0;
  auto* adv = app.add_subcommand("advise", "turn a forecast into per-expert resource units");
  adv->add_option("forecast", adv_forecast, "forecast CSV written by `forecast`")->required();
  adv->add_option("--total-units", adv_total, "units to distribute per layer")->required()
      ->check(CLI::NonNegativeNumber);
  adv->add_option("--min-units", adv_min, "units every expert receives")->check(CLI::NonNegativeNumber);
  adv->add_option("--mode", adv_mode, "proportional | headroom")
      ->check(CLI::IsMember({"proportional", "headroom"}));
  adv->add_option("--ranges", adv_ranges, "directory with range_layer<L>.csv files from `stats`");
  adv->add_option("-o,--output", adv_out, "plan JSON path (default: standard output)");
  adv->callback([&] {
    action = [&] {
      if (adv_mode == "headroom" && adv_ranges.empty()) throw UsageError("--mode headroom requires --ranges");
      const auto table = read_table(adv_forecast);
      const auto diag_path = sibling(adv_forecast, ".diagnostics.json");
      json diag;
      try {
        diag = json::parse(read_file(diag_path));
      } catch (const json::exception& ex) {
        fail(ErrorCode::kParseError, diag_path.string() + ": " + ex.what());
      }
      const auto layer_ids = diag.at("moe_layer_ids").get<std::vector<int>>();
      const auto e = diag.at("experts_per_layer").get<Index>();
      const auto series = static_cast<Index>(table.columns.size()) - 1;
      if (series != e * static_cast<Index>(layer_ids.size()) || table.rows.empty()) {
        fail(ErrorCode::kShapeMismatch, "forecast table does not match its diagnostics");
      }
      // Block-mean forecast over all predicted steps.
      VecX mean = VecX::Zero(series);
      for (const auto& row : table.rows) {
        for (Index j = 0; j < series; ++j) mean(j) += row[static_cast<std::size_t>(j + 1)];
      }
      mean /= static_cast<double>(table.rows.size());

      json plans = json::array();
      std::vector<std::string> inputs{adv_forecast, diag_path.string()};
      for (std::size_t l = 0; l < layer_ids.size(); ++l) {
        VecX p = mean.segment(static_cast<Index>(l) * e, e);
        p /= p.sum();
        AllocationPlan plan;
        if (adv_mode == "headroom") {
          const auto range_path = fs::path(adv_ranges) / ("range_layer" + std::to_string(layer_ids[l]) + ".csv");
          const auto ranges = read_table(range_path);
          if (ranges.rows.empty() || static_cast<Index>(ranges.columns.size()) != e + 1) {
            fail(ErrorCode::kShapeMismatch, range_path.string() + " does not match the forecast");
          }
          const auto& last = ranges.rows.back();
          VecX range(e);
          for (Index j = 0; j < e; ++j) range(j) = last[static_cast<std::size_t>(j + 1)];
          plan = headroom_allocate(p, range, adv_total, adv_min, layer_ids[l]);
          inputs.push_back(range_path.string());
        } else {
          plan = allocate(p, adv_total, adv_min, layer_ids[l]);
        }
        plans.push_back({{"layer", plan.layer_id},
                         {"mode", std::string(to_string(plan.mode))},
                         {"total_units", plan.total_units},
                         {"units", plan.units_per_expert}});
      }
      if (adv_out.empty()) {
        out << plans.dump(2) << "\n";
      } else {
        write_json(adv_out, plans);
        write_manifest(*adv, sibling(adv_out, ".manifest.json"), inputs, {adv_out}, std::nullopt);
      }
    };
  });

  // replay
  std::string replay_manifest;
  auto* replay = app.add_subcommand("replay", "re-run a command from its manifest");
  replay->add_option("manifest", replay_manifest, "manifest JSON written next to an output")->required();
  replay->callback([&] {
    action = [&] {
      json manifest;
      try {
        manifest = json::parse(read_file(replay_manifest));
      } catch (const json::exception& ex) {
        fail(ErrorCode::kParseError, replay_manifest + ": " + ex.what());
      }
      if (manifest.value("manifest_version", 0) != kManifestVersion) {
        fail(ErrorCode::kValidationError, "unsupported manifest version");
      }
      std::vector<std::string> replay_args{args.empty() ? "moeload" : args.front()};
      for (const auto& a : manifest.at("args")) replay_args.push_back(a.get<std::string>());
      if (replay_args.size() > 1 && replay_args[1] == "replay") {
        throw UsageError("a replay manifest cannot replay itself");
      }
      const int code = run(replay_args, out, err);
      if (code != kExitOk) throw std::runtime_error("replayed command exited with code " + std::to_string(code));
    };
  });

  std::vector<std::string> argv_rev(args.rbegin(), args.rend());
  if (!argv_rev.empty()) argv_rev.pop_back();
  try {
    app.parse(argv_rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    out << MOELOAD_VERSION << "\n";
    return kExitOk;
  } catch (const CLI::ParseError& ex) {
    err << "error: " << ex.what() << "\n";
    return kExitUsage;
  }

  try {
    if (action) action();
    return kExitOk;
  } catch (const UsageError& ex) {
    err << "error: " << ex.what() << "\n";
    return kExitUsage;
  } catch (const Error& ex) {
    err << "error: " << ex.what() << "\n";
    return ex.code() == ErrorCode::kConfigError || ex.code() == ErrorCode::kInvalidConfig ? kExitUsage
                                                                                         : kExitRuntime;
  } catch (const std::exception& ex) {
    err << "error: " << ex.what() << "\n";
    return kExitRuntime;
  }
}

}  // namespace moeload::cli
