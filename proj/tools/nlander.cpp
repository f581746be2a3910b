// nlander: collect, train, fly, evaluate and sweep from one declarative config.
//
// Exit codes: 0 success, 2 validation or certificate failure, 3 divergence,
// 4 I/O error.

#include "nlander/config.hpp"
#include "nlander/pipeline.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace fs = std::filesystem;
using namespace nlander;
using Json = nlohmann::ordered_json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 2;
constexpr int kExitDivergence = 3;
constexpr int kExitIo = 4;

struct Common {
  std::string config_path;
  std::string out_dir;
  std::vector<std::string> sets;  // dotted.key=value overrides
};

/// Applies "a.b.c=value" onto the JSON form of the config. The value is
/// parsed as JSON when possible and taken as a string otherwise.
void apply_override(Json& j, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("--set expects key=value, got '" + assignment + "'");
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  Json value;
  try {
    value = Json::parse(text);
  } catch (const nlohmann::json::exception&) {
    value = text;
  }
  Json* node = &j;
  std::size_t from = 0;
  while (true) {
    const auto dot = key.find('.', from);
    const std::string part = key.substr(from, dot == std::string::npos ? std::string::npos : dot - from);
    if (part.empty()) throw ConfigError("--set: empty key component in '" + key + "'");
    if (dot == std::string::npos) {
      (*node)[part] = value;
      break;
    }
    node = &(*node)[part];
    from = dot + 1;
  }
}

RunConfig resolve_config(const Common& c) {
  Json j = c.config_path.empty() ? to_json(RunConfig{}) : [&] {
    std::ifstream in(c.config_path);
    if (!in) throw IoError("cannot read config " + c.config_path);
    Json parsed;
    try {
      in >> parsed;
    } catch (const nlohmann::json::exception& e) {
      throw IoError("malformed config " + c.config_path + ": " + e.what());
    }
    return parsed;
  }();
  for (const auto& s : c.sets) apply_override(j, s);
  RunConfig cfg = run_config_from_json(j);
  if (!c.out_dir.empty()) cfg.output_dir = c.out_dir;
  return cfg;
}

std::string prepare_output(const RunConfig& cfg) {
  std::error_code ec;
  fs::create_directories(cfg.output_dir, ec);
  if (ec) throw IoError("cannot create output directory " + cfg.output_dir + ": " + ec.message());
  write_json(to_json(cfg), (fs::path(cfg.output_dir) / "config.json").string());
  return cfg.output_dir;
}

std::string out_path(const RunConfig& cfg, const std::string& name) { return (fs::path(cfg.output_dir) / name).string(); }

std::vector<FlightLog> load_logs(const std::vector<std::string>& paths) {
  std::vector<FlightLog> logs;
  for (const auto& p : paths) logs.push_back(load_flight_log(p));
  return logs;
}

void print_certificate(const RunConfig& cfg, const SpecNormNet& net) {
  SpecNormNet copy = net;
  refresh_spectral_norms(copy);
  const double lip = copy.lipschitz_u();
  std::printf("certified Lipschitz bound  prod sigma(W) = %.6g (gamma %.6g)\n", copy.certified_bound(), copy.gamma);
  std::printf("certified L_a in u         %.6g N/RPM^2\n", lip);
  std::printf("contraction ratio          sigma(B0^-1) L_a = %.6g (must be < 1)\n", cfg.contraction_gain() * lip);
  std::printf("gain condition             lambda_min(Kv) = %.6g > L_a rho = %.6g\n", lambda_min(cfg.gains.Kv),
              lip * cfg.gains.rho_assumed);
}

/// Runs `count` independent tasks on at most `workers` threads. The first
/// exception thrown by any task is rethrown after all threads finish.
void run_parallel(std::size_t count, int workers, const std::function<void(std::size_t)>& task) {
  const auto n_threads = static_cast<std::size_t>(std::max(1, workers));
  std::atomic<std::size_t> next{0};
  std::exception_ptr first;
  std::mutex mu;
  const auto loop = [&] {
    for (std::size_t i = next++; i < count; i = next++) {
      try {
        task(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(mu);
        if (!first) first = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < std::min(n_threads, count); ++t) pool.emplace_back(loop);
  loop();
  for (auto& th : pool) th.join();
  if (first) std::rethrow_exception(first);
}

void write_flight_outputs(const RunConfig& cfg, const FlightOutcome& f, const std::string& stem) {
  const std::string csv = out_path(cfg, stem + ".csv");
  save_flight_log(f.log, csv);
  write_json(flight_sidecar(cfg, f.log, f.metrics, f.inputs, csv), out_path(cfg, stem + ".json"));
}

// ---------------------------------------------------------------------------
// Commands

int cmd_collect(RunConfig cfg, const std::string& program, std::optional<double> duration,
                std::optional<std::uint64_t> seed) {
  if (duration) cfg.scenario.duration = *duration;
  if (seed) cfg.collection.seed = *seed;
  if (program != "standard" && program != "table") throw ConfigError("--program must be standard or table");
  cfg.validate();
  prepare_output(cfg);
  const bool table = program == "table";
  const FlightLog log = run_collection(cfg, table);
  const std::string csv = out_path(cfg, "collect.csv");
  save_flight_log(log, csv);
  Json side;
  side["schema_version"] = FlightLog::kSchemaVersion;
  side["program"] = program;
  side["meta"] = log.meta;
  side["records"] = log.size();
  side["duration"] = log.empty() ? 0.0 : log.records.back().t;
  side["csv"] = "collect.csv";
  side["csv_fnv1a"] = file_hash(csv);
  write_json(side, out_path(cfg, "collect.json"));
  std::printf("collected %zu records (%.1f s) -> %s\n", log.size(), log.empty() ? 0.0 : log.records.back().t,
              csv.c_str());
  return kExitOk;
}

int cmd_train(RunConfig cfg, const std::vector<std::string>& logs) {
  cfg.validate();
  prepare_output(cfg);
  const TrainingSet data = labels_from_logs(cfg, load_logs(logs));
  const TrainResult res = train_model(cfg, data);
  const std::string model = out_path(cfg, "model.json");
  save_trained_model(res, model);
  write_loss_curve_csv(res.stats, out_path(cfg, "loss.csv"));
  SpecNormNet net = res.net;
  refresh_spectral_norms(net);
  Json report = train_stats_json(res.stats);
  report["samples"] = data.size();
  report["gamma"] = net.gamma;
  report["certified_bound"] = net.certified_bound();
  report["lipschitz_u"] = net.lipschitz_u();
  report["contraction_ratio"] = cfg.contraction_gain() * net.lipschitz_u();
  report["model_fnv1a"] = file_hash(model);
  write_json(report, out_path(cfg, "train.json"));
  std::printf("trained %s on %zu samples: val RMSE %.4g N, epsilon_m %.4g N\n", to_string(net.arch).c_str(),
              data.size(), res.stats.val_rmse, res.stats.epsilon_m);
  if (net.spectral_normalization) print_certificate(cfg, net);
  return kExitOk;
}

int cmd_fly(RunConfig cfg) {
  cfg.validate();
  prepare_output(cfg);
  std::optional<LoadedModel> model;
  if (cfg.controller == ControllerKind::NeuralLander) model = load_trained_model(cfg.model_path);
  FlightOutcome f;
  try {
    f = fly(cfg, model ? &*model : nullptr);
  } catch (const DivergenceError& e) {
    save_flight_log(e.partial_log(), out_path(cfg, "flight_partial.csv"));
    throw;
  }
  write_flight_outputs(cfg, f, "flight");
  const Metrics& m = f.metrics;
  std::printf("%s / %s: terminal |z error| %.4g m, rms p~ (%.3g, %.3g, %.3g) m, max |s| %.3g\n",
              to_string(cfg.scenario.kind).c_str(), to_string(cfg.controller).c_str(), m.terminal_z_error,
              m.rms_p_tilde.x(), m.rms_p_tilde.y(), m.rms_p_tilde.z(), m.max_s);
  if (m.bounds_applicable) {
    std::printf("envelope violations %d of %d, steady |p~| %.3g vs bound %.3g\n", m.envelope_violations,
                m.envelope_checked, m.steady_p_tilde, m.p_ball);
  }
  return kExitOk;
}

int cmd_evaluate(RunConfig cfg, const std::string& log_path) {
  cfg.validate();
  prepare_output(cfg);
  const FlightLog log = load_flight_log(log_path);
  double lip = 0.0, eps = 0.0;
  if (cfg.controller == ControllerKind::NeuralLander) {
    const LoadedModel model = load_trained_model(cfg.model_path);
    lip = NetworkModel(model.net).lipschitz_u().value_or(0.0);
    eps = model.epsilon_m;
  }
  const EvaluationInputs in = evaluation_inputs(cfg, lip, eps);
  const Metrics m = evaluate(log, cfg.flight_gains(), in);
  Json j = metrics_to_json(m);
  write_json(j, out_path(cfg, "metrics.json"));
  std::printf("%s\n", j.dump(2).c_str());
  return kExitOk;
}

// Sweeps ---------------------------------------------------------------------

struct SweepRow {
  std::string label;
  std::string status = "ok";
  Json values = Json::object();
};

void write_sweep_csv(const std::vector<SweepRow>& rows, const std::vector<std::string>& columns,
                     const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << "label,status";
  for (const auto& c : columns) out << ',' << c;
  out << '\n';
  char buf[40];
  for (const auto& r : rows) {
    out << r.label << ',' << r.status;
    for (const auto& c : columns) {
      out << ',';
      if (!r.values.contains(c)) continue;
      const Json& v = r.values[c];
      if (v.is_number_float()) {
        std::snprintf(buf, sizeof buf, "%.17g", v.get<double>());
        out << buf;
      } else if (v.is_string()) {
        out << v.get<std::string>();
      } else {
        out << v.dump();
      }
    }
    out << '\n';
  }
}

/// Flies the configured scenario with a freshly trained network and fills a
/// sweep row with training and flight metrics.
void train_and_fly(const RunConfig& cfg, const TrainingSet& data, SweepRow& row, const std::string& stem,
                   const FlightLog* reference) {
  const TrainResult res = train_model(cfg, data);
  save_trained_model(res, out_path(cfg, stem + "_model.json"));
  LoadedModel model{res.net, res.stats.epsilon_m};
  RunConfig fc = cfg;
  fc.controller = ControllerKind::NeuralLander;
  try {
    const FlightOutcome f = fly(fc, &model);
    write_flight_outputs(fc, f, stem);
    row.values["val_rmse"] = res.stats.val_rmse;
    row.values["terminal_z_error"] = f.metrics.terminal_z_error;
    row.values["rms_z_error"] = f.metrics.rms_z_error;
    row.values["max_contraction_ratio"] = f.metrics.max_contraction_ratio;
    row.values["envelope_violations"] = f.metrics.envelope_violations;
    if (reference) row.values["takeoff_deviation"] = segment_z_difference(f.log, *reference, 1);
  } catch (const DivergenceError& e) {
    row.status = "diverged";
    row.values["val_rmse"] = res.stats.val_rmse;
  }
}

int cmd_sweep(RunConfig cfg, const std::string& axis, const std::vector<std::string>& logs,
              std::vector<double> values, int workers) {
  cfg.validate();
  prepare_output(cfg);
  std::vector<SweepRow> rows;
  std::vector<std::string> columns;

  if (axis == "arch" || axis == "gamma") {
    if (logs.empty()) throw ConfigError("sweep --axis " + axis + " needs --logs");
    const TrainingSet data = labels_from_logs(cfg, load_logs(logs));
    // Baseline and oracle flights anchor the comparison.
    RunConfig base = cfg;
    base.controller = ControllerKind::Baseline;
    const FlightOutcome b = fly(base, nullptr);
    write_flight_outputs(base, b, "baseline");
    const FieldOracleModel oracle(cfg.field);
    const FlightLog oracle_log =
        run_scenario(build_flight_scenario(cfg), cfg.vehicle, cfg.gains, &oracle, ControllerOptions{true, true});

    if (axis == "arch") {
      const std::vector<Arch> archs = {Arch::FourLayer, Arch::OneLayer, Arch::ZeroLayer};
      rows.resize(archs.size() + 1);
      rows[0].label = "baseline";
      rows[0].values["terminal_z_error"] = b.metrics.terminal_z_error;
      rows[0].values["rms_z_error"] = b.metrics.rms_z_error;
      rows[0].values["takeoff_deviation"] = segment_z_difference(b.log, oracle_log, 1);
      run_parallel(archs.size(), workers, [&](std::size_t i) {
        RunConfig c = cfg;
        c.network.train.arch = archs[i];
        rows[i + 1].label = to_string(archs[i]);
        train_and_fly(c, data, rows[i + 1], "arch_" + to_string(archs[i]), &oracle_log);
      });
      columns = {"val_rmse", "terminal_z_error", "rms_z_error", "takeoff_deviation", "max_contraction_ratio",
                 "envelope_violations"};
    } else {
      if (values.empty()) values = {100.0, 300.0, cfg.resolved_gamma(), 1000.0, 1500.0, 2000.0};
      rows.resize(values.size());
      run_parallel(values.size(), workers, [&](std::size_t i) {
        RunConfig c = cfg;
        c.network.gamma = values[i];
        SweepRow& row = rows[i];
        std::ostringstream label;
        label << "gamma=" << values[i];
        row.label = label.str();
        row.values["gamma"] = values[i];
        row.values["certified_ratio"] = planned_contraction_ratio(c.resolved_train());
        try {
          c.validate();
        } catch (const ContractionViolationError&) {
          row.status = "refused_certificate";
          return;
        } catch (const GainConditionError&) {
          row.status = "refused_gain_condition";
          return;
        }
        train_and_fly(c, data, row, "gamma_" + std::to_string(i), nullptr);
      });
      columns = {"gamma", "certified_ratio", "val_rmse", "terminal_z_error", "rms_z_error", "max_contraction_ratio",
                 "envelope_violations"};
    }
  } else if (axis == "gains") {
    if (values.empty()) values = {4.0, 8.0, 12.0};
    std::optional<LoadedModel> model;
    if (cfg.controller == ControllerKind::NeuralLander) model = load_trained_model(cfg.model_path);
    rows.resize(values.size());
    run_parallel(values.size(), workers, [&](std::size_t i) {
      RunConfig c = cfg;
      c.gains.Kv = values[i] * Mat3::Identity();
      SweepRow& row = rows[i];
      std::ostringstream label;
      label << "kv=" << values[i];
      row.label = label.str();
      row.values["kv"] = values[i];
      try {
        c.validate();
        const FlightOutcome f = fly(c, model ? &*model : nullptr);
        const std::string stem = "gains_" + std::to_string(i);
        write_flight_outputs(c, f, stem);
        row.values["log"] = stem + ".csv";
        row.values["terminal_z_error"] = f.metrics.terminal_z_error;
        row.values["rms_z_error"] = f.metrics.rms_z_error;
        row.values["max_s"] = f.metrics.max_s;
        row.values["envelope_violations"] = f.metrics.envelope_violations;
        row.values["steady_p_tilde"] = f.metrics.steady_p_tilde;
      } catch (const GainConditionError&) {
        row.status = "refused_gain_condition";
      } catch (const DivergenceError&) {
        row.status = "diverged";
      }
    });
    columns = {"kv", "log", "terminal_z_error", "rms_z_error", "max_s", "envelope_violations", "steady_p_tilde"};
  } else {
    throw ConfigError("--axis must be arch, gamma or gains");
  }
  write_sweep_csv(rows, columns, out_path(cfg, "sweep.csv"));
  for (const auto& r : rows) std::printf("%-14s %-22s %s\n", r.label.c_str(), r.status.c_str(), r.values.dump().c_str());
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"nlander: learned-disturbance landing controller pipeline"};
  app.require_subcommand(1);
  Common common;
  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("-c,--config", common.config_path, "JSON run config (defaults when omitted)");
    sub->add_option("-o,--out", common.out_dir, "output directory (overrides output_dir)");
    sub->add_option("--set", common.sets, "override a config value, e.g. network.train.epochs=50");
  };

  std::optional<double> duration;
  std::optional<std::uint64_t> seed;
  std::string program = "standard";
  auto* collect = app.add_subcommand("collect", "fly the scripted-pilot data collection program");
  add_common(collect);
  collect->add_option("--duration", duration, "truncate the program to this many seconds");
  collect->add_option("--seed", seed, "collection program seed");
  collect->add_option("--program", program, "standard (height sweep + excursions) or table");

  std::vector<std::string> logs;
  std::string arch, gamma;
  std::optional<int> epochs;
  std::optional<std::uint64_t> train_seed;
  bool no_sn = false, include_xy = false;
  auto* train_cmd = app.add_subcommand("train", "train the disturbance network from collection logs");
  add_common(train_cmd);
  train_cmd->add_option("--logs", logs, "flight log CSV files")->required();
  train_cmd->add_option("--arch", arch, "4layer, 1layer or 0layer");
  train_cmd->add_option("--gamma", gamma, "Lipschitz bound in normalized units, or auto");
  train_cmd->add_option("--epochs", epochs, "training epochs");
  train_cmd->add_option("--seed", train_seed, "training seed");
  train_cmd->add_flag("--no-sn", no_sn, "train without spectral normalization (the unconstrained twin)");
  train_cmd->add_flag("--include-xy", include_xy, "add x and y to the inputs (14-input model)");

  std::string scenario, model_path, controller;
  bool integral = false, noise = false;
  auto* fly_cmd = app.add_subcommand("fly", "fly a scenario and evaluate it");
  add_common(fly_cmd);
  fly_cmd->add_option("--scenario", scenario, "landing, hover or cross_table");
  fly_cmd->add_option("--model", model_path, "trained model file; selects the neural-lander controller");
  fly_cmd->add_option("--controller", controller, "baseline, integral or neural-lander");
  fly_cmd->add_flag("--integral", integral, "use the integral variant of the baseline");
  fly_cmd->add_flag("--noise", noise, "enable state-estimate noise");
  fly_cmd->add_option("--duration", duration, "scenario duration, s");
  fly_cmd->add_option("--seed", seed, "scenario seed");

  std::string log_path;
  auto* eval_cmd = app.add_subcommand("evaluate", "recompute metrics from a stored flight log");
  add_common(eval_cmd);
  eval_cmd->add_option("--log", log_path, "flight log CSV")->required();
  eval_cmd->add_option("--model", model_path, "model the log was flown with (for L_a and epsilon_m)");
  eval_cmd->add_option("--controller", controller, "baseline, integral or neural-lander");

  std::string axis;
  std::vector<double> values;
  int workers = 1;
  auto* sweep_cmd = app.add_subcommand("sweep", "compare architectures, gamma values or gains");
  add_common(sweep_cmd);
  sweep_cmd->add_option("--axis", axis, "arch, gamma or gains")->required();
  sweep_cmd->add_option("--logs", logs, "training logs (arch and gamma axes)");
  sweep_cmd->add_option("--values", values, "gamma values, or Kv values (N s/m) for the gains axis");
  sweep_cmd->add_option("--model", model_path, "model for the gains axis");
  sweep_cmd->add_option("--scenario", scenario, "scenario flown by every row");
  sweep_cmd->add_option("--workers", workers, "parallel scenario tasks")->check(CLI::PositiveNumber);
  sweep_cmd->add_option("--epochs", epochs, "training epochs");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitValidation;
  }

  try {
    RunConfig cfg = resolve_config(common);
    if (!scenario.empty()) cfg.scenario.kind = scenario_kind_from_string(scenario);
    if (!controller.empty()) cfg.controller = controller_kind_from_string(controller);
    if (!model_path.empty()) {
      cfg.model_path = model_path;
      if (controller.empty()) cfg.controller = ControllerKind::NeuralLander;
    }
    if (integral) cfg.controller = ControllerKind::Integral;
    if (noise) cfg.scenario.noise.enabled = true;
    if (!arch.empty()) cfg.network.train.arch = arch_from_string(arch);
    if (!gamma.empty()) {
      if (gamma == "auto") {
        cfg.network.gamma.reset();
      } else {
        try {
          cfg.network.gamma = std::stod(gamma);
        } catch (const std::exception&) {
          throw ConfigError("--gamma expects a number or auto");
        }
      }
    }
    if (epochs) cfg.network.train.epochs = *epochs;
    if (train_seed) cfg.network.train.seed = *train_seed;
    if (no_sn) cfg.network.train.spectral_normalization = false;
    if (include_xy) cfg.network.features.include_xy = true;

    if (*collect) return cmd_collect(cfg, program, duration, seed);
    if (*train_cmd) return cmd_train(cfg, logs);
    if (*fly_cmd) {
      if (duration) cfg.scenario.duration = *duration;
      if (seed) cfg.scenario.seed = *seed;
      return cmd_fly(cfg);
    }
    if (*eval_cmd) return cmd_evaluate(cfg, log_path);
    if (*sweep_cmd) return cmd_sweep(cfg, axis, logs, values, workers);
  } catch (const DivergenceError& e) {
    std::fprintf(stderr, "divergence: %s\n", e.what());
    return kExitDivergence;
  } catch (const IoError& e) {
    std::fprintf(stderr, "i/o error: %s\n", e.what());
    return kExitIo;
  } catch (const ContractionViolationError& e) {
    std::fprintf(stderr, "certificate failure: %s\n", e.what());
    return kExitValidation;
  } catch (const GainConditionError& e) {
    std::fprintf(stderr, "certificate failure: %s\n", e.what());
    return kExitValidation;
  } catch (const Error& e) {
    std::fprintf(stderr, "validation error: %s\n", e.what());
    return kExitValidation;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitValidation;
  }
  return kExitOk;
}
