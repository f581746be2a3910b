// Pipeline stages shared by the command-line tool and the acceptance suite:
// collection, labelling and training, flight with evaluation, and sidecars.
#pragma once

#include "nlander/config.hpp"
#include "nlander/labels.hpp"
#include "nlander/metrics.hpp"
#include "nlander/model_io.hpp"
#include "nlander/sim.hpp"
#include "nlander/train.hpp"

#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

namespace nlander {

namespace detail {
inline void apply_run_settings(Scenario& sc, const ScenarioConfig& s) {
  sc.seed = s.seed;
  sc.noise = s.noise;
  sc.sim = s.sim;
  if (s.duration > 0.0) sc.duration = std::min(sc.duration, s.duration);
}
}  // namespace detail

/// The flight scenario named by `cfg.scenario` (landing, hover or
/// cross_table).
inline Scenario build_flight_scenario(const RunConfig& cfg) {
  const ScenarioConfig& s = cfg.scenario;
  Scenario sc;
  switch (s.kind) {
    case ScenarioKind::Landing: {
      const double duration = s.duration > 0.0 ? s.duration : s.land_at + 12.0;
      sc = landing_scenario(cfg.field, s.takeoff_at, s.land_at, duration);
      break;
    }
    case ScenarioKind::Hover: sc = hover_scenario(cfg.field, s.height, s.duration > 0.0 ? s.duration : 30.0); break;
    case ScenarioKind::CrossTable: {
      const double duration = s.duration > 0.0 ? s.duration : 3.5 * s.period;
      sc = cross_table_scenario(cfg.field, s.height, s.semi_x, s.semi_y, s.period, duration);
      break;
    }
    default: throw ConfigError("scenario '" + to_string(s.kind) + "' is a collection program, not a flight");
  }
  detail::apply_run_settings(sc, s);
  return sc;
}

/// The scripted-pilot collection flight: the standard height sweep plus
/// excursions, or the table program when `table` is set.
inline Scenario build_collection_scenario(const RunConfig& cfg, bool table) {
  Scenario sc;
  if (table) {
    DisturbanceField field = cfg.field;
    field.table.enabled = true;
    sc.name = "table_collect";
    sc.reference = table_collection_trajectory(cfg.table_collection_duration, cfg.collection.seed,
                                               cfg.collection.excitation);
    sc.field = field;
    sc.duration = std::min(cfg.table_collection_duration, sc.reference.duration());
  } else {
    sc = collection_scenario(cfg.collection, cfg.field);
  }
  detail::apply_run_settings(sc, cfg.scenario);
  sc.seed = cfg.collection.seed;
  return sc;
}

inline FlightLog run_collection(const RunConfig& cfg, bool table) {
  const Scenario sc = build_collection_scenario(cfg, table);
  FlightLog log = run_scenario(sc, cfg.vehicle, scripted_pilot_gains(cfg.gains), nullptr);
  log.meta["program"] = table ? "table" : "part1+part2";
  return log;
}

/// Labels from every log, concatenated and split into train and validation
/// with the training seed.
inline TrainingSet labels_from_logs(const RunConfig& cfg, const std::vector<FlightLog>& logs) {
  if (logs.empty()) throw EmptyDataError("no flight logs to label");
  std::vector<TrainingSet> parts;
  for (const auto& log : logs) parts.push_back(extract_labels(log, cfg.vehicle, cfg.network.features, cfg.network.labels));
  TrainingSet set = parts.size() == 1 ? std::move(parts.front()) : TrainingSet::concat(parts);
  set.split(cfg.network.train.validation_fraction, cfg.network.train.seed);
  return set;
}

inline TrainResult train_model(const RunConfig& cfg, const TrainingSet& data) {
  TrainResult res = train(data, cfg.resolved_train());
  std::ostringstream os;
  os << to_string(res.net.arch) << " gamma=" << res.net.gamma << " sn=" << (res.net.spectral_normalization ? 1 : 0)
     << " seed=" << cfg.network.train.seed << " samples=" << data.size();
  res.net.provenance = os.str();
  return res;
}

inline nlohmann::ordered_json train_stats_json(const TrainStats& s) {
  return {{"train_rmse", s.train_rmse},     {"val_rmse", s.val_rmse},
          {"train_max_error", s.train_max_error}, {"val_max_error", s.val_max_error},
          {"train_mean_error", s.train_mean_error}, {"val_mean_error", s.val_mean_error},
          {"epsilon_m", s.epsilon_m}};
}

/// Model file: the network plus its training statistics, whose epsilon_m
/// feeds the bound checks at evaluation time.
inline void save_trained_model(const TrainResult& res, const std::string& path) {
  nlohmann::ordered_json j = model_to_json(res.net);
  j["training"] = train_stats_json(res.stats);
  std::ofstream out(path);
  if (!out) throw IoError("cannot write model file " + path);
  out << j.dump(2) << '\n';
}

struct LoadedModel {
  SpecNormNet net;
  double epsilon_m = 0.0;
};

inline LoadedModel load_trained_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read model file " + path);
  nlohmann::ordered_json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed model file " + path + ": " + e.what());
  }
  LoadedModel m;
  m.net = model_from_json(j);
  if (j.contains("training")) m.epsilon_m = j["training"].value("epsilon_m", 0.0);
  return m;
}

inline void write_loss_curve_csv(const TrainStats& s, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << "epoch,train_loss,val_loss\n";
  char buf[96];
  for (std::size_t e = 0; e < s.train_loss.size(); ++e) {
    const double v = e < s.val_loss.size() ? s.val_loss[e] : 0.0;
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g\n", e + 1, s.train_loss[e], v);
    out << buf;
  }
}

inline EvaluationInputs evaluation_inputs(const RunConfig& cfg, double lipschitz_u, double model_epsilon) {
  EvaluationInputs in;
  in.mass = cfg.vehicle.mass;
  in.lipschitz_u = lipschitz_u;
  in.model_epsilon = model_epsilon;
  in.terminal_window = cfg.evaluation.terminal_window;
  in.steady_window = cfg.evaluation.steady_window;
  in.edge_band = cfg.evaluation.edge_band;
  in.table = cfg.field.table;
  in.stats_from = cfg.stats_from();
  return in;
}

struct FlightOutcome {
  FlightLog log;
  Metrics metrics;
  EvaluationInputs inputs;
};

/// Flies the configured scenario with the configured controller. `model` is
/// required for neural-lander and ignored otherwise.
inline FlightOutcome fly(const RunConfig& cfg, const LoadedModel* model) {
  const Scenario sc = build_flight_scenario(cfg);
  const ControllerGains gains = cfg.flight_gains();
  std::unique_ptr<NetworkModel> nm;
  double lip = 0.0, eps = 0.0;
  if (cfg.controller == ControllerKind::NeuralLander) {
    if (!model) throw ConfigError("neural-lander flight needs a model");
    nm = std::make_unique<NetworkModel>(model->net);
    lip = nm->lipschitz_u().value_or(0.0);
    eps = model->epsilon_m;
  }
  FlightOutcome out;
  out.log = run_scenario(sc, cfg.vehicle, gains, nm.get());
  out.inputs = evaluation_inputs(cfg, lip, eps);
  out.metrics = evaluate(out.log, gains, out.inputs);
  return out;
}

/// Root-mean-square difference of z between two logs of the same scenario,
/// over the records of `segment`.
inline double segment_z_difference(const FlightLog& a, const FlightLog& b, int segment) {
  const std::size_t n = std::min(a.size(), b.size());
  double s = 0.0;
  int cnt = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (a.records[i].segment != segment) continue;
    const double d = a.records[i].x.p.z() - b.records[i].x.p.z();
    s += d * d;
    ++cnt;
  }
  return cnt ? std::sqrt(s / cnt) : 0.0;
}

inline std::string hex64(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline std::string read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

inline std::string file_hash(const std::string& path) { return hex64(fnv1a(read_file_bytes(path))); }

/// JSON sidecar of a flight log: run identity, certificates and metrics.
inline nlohmann::ordered_json flight_sidecar(const RunConfig& cfg, const FlightLog& log, const Metrics& m,
                                             const EvaluationInputs& in, const std::string& csv_path) {
  nlohmann::ordered_json j;
  j["schema_version"] = FlightLog::kSchemaVersion;
  j["scenario"] = to_json(cfg)["scenario"];
  j["controller"] = to_string(cfg.controller);
  j["meta"] = log.meta;
  j["certificates"] = {{"lipschitz_u", in.lipschitz_u},
                       {"contraction_gain", cfg.contraction_gain()},
                       {"certified_contraction_ratio", cfg.contraction_gain() * in.lipschitz_u},
                       {"lambda_min_Kv", lambda_min(cfg.gains.Kv)},
                       {"lambda_min_Lambda", lambda_min(cfg.gains.Lambda)},
                       {"model_epsilon", in.model_epsilon}};
  j["metrics"] = metrics_to_json(m);
  j["records"] = log.size();
  j["csv"] = std::filesystem::path(csv_path).filename().string();
  j["csv_fnv1a"] = file_hash(csv_path);
  return j;
}

inline void write_json(const nlohmann::ordered_json& j, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << j.dump(2) << '\n';
}

}  // namespace nlander
