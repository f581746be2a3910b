// Declarative run configuration: JSON form and pre-flight validation.
#pragma once

#include "nlander/aero.hpp"
#include "nlander/control.hpp"
#include "nlander/features.hpp"
#include "nlander/labels.hpp"
#include "nlander/network.hpp"
#include "nlander/sim.hpp"
#include "nlander/train.hpp"
#include "nlander/vehicle.hpp"

#include <json.hpp>

#include <fstream>
#include <optional>
#include <set>
#include <string>

namespace nlander {

enum class ControllerKind { Baseline, Integral, NeuralLander };

inline std::string to_string(ControllerKind k) {
  switch (k) {
    case ControllerKind::Baseline: return "baseline";
    case ControllerKind::Integral: return "integral";
    case ControllerKind::NeuralLander: return "neural-lander";
  }
  return "?";
}

inline ControllerKind controller_kind_from_string(const std::string& s) {
  if (s == "baseline") return ControllerKind::Baseline;
  if (s == "integral") return ControllerKind::Integral;
  if (s == "neural-lander") return ControllerKind::NeuralLander;
  throw ConfigError("unknown controller '" + s + "' (expected baseline, integral or neural-lander)");
}

enum class ScenarioKind { Landing, Hover, CrossTable, Collect, TableCollect };

inline std::string to_string(ScenarioKind k) {
  switch (k) {
    case ScenarioKind::Landing: return "landing";
    case ScenarioKind::Hover: return "hover";
    case ScenarioKind::CrossTable: return "cross_table";
    case ScenarioKind::Collect: return "collect";
    case ScenarioKind::TableCollect: return "table_collect";
  }
  return "?";
}

inline ScenarioKind scenario_kind_from_string(const std::string& s) {
  if (s == "landing") return ScenarioKind::Landing;
  if (s == "hover") return ScenarioKind::Hover;
  if (s == "cross_table") return ScenarioKind::CrossTable;
  if (s == "collect") return ScenarioKind::Collect;
  if (s == "table_collect") return ScenarioKind::TableCollect;
  throw ConfigError("unknown scenario '" + s + "' (expected landing, hover, cross_table, collect or table_collect)");
}

struct ScenarioConfig {
  ScenarioKind kind = ScenarioKind::Landing;
  double duration = -1.0;  // s; non-positive keeps the scenario's own length
  std::uint64_t seed = 1;
  double height = 0.7;     // m, hover and cross-table
  double takeoff_at = 3.0;
  double land_at = 13.0;
  double semi_x = 1.2;     // m
  double semi_y = 0.6;
  double period = 10.0;    // s
  NoiseSettings noise;
  SimSettings sim;
};

struct NetworkConfig {
  FeatureSpec features;
  TrainConfig train;
  std::optional<double> gamma;      // nullopt: largest gamma meeting target_contraction
  double target_contraction = 0.45; // certified sigma(B0^-1) L_a_u
  LabelOptions labels;
};

struct EvaluationConfig {
  double terminal_window = 2.0;  // s
  double steady_window = 10.0;   // s
  double edge_band = 0.15;       // m
  double stats_from = -1.0;      // s; negative: one period into a cross-table run, else 0
};

struct RunConfig {
  VehicleParams vehicle;
  DisturbanceField field;
  ScenarioConfig scenario;
  CollectionProgram collection;
  double table_collection_duration = 600.0;  // s
  ControllerKind controller = ControllerKind::Baseline;
  std::string model_path;
  ControllerGains gains;
  NetworkConfig network;
  EvaluationConfig evaluation;
  std::string output_dir = "out";

  double contraction_gain() const { return inverse_allocation_gain(build_allocation_matrix(vehicle)); }

  double resolved_gamma() const {
    if (network.gamma) return *network.gamma;
    const TrainConfig& t = network.train;
    return gamma_for_contraction(network.target_contraction, contraction_gain(), t.u_feature_scale, t.force_scale);
  }

  TrainConfig resolved_train() const {
    TrainConfig t = network.train;
    t.gamma = resolved_gamma();
    t.contraction_gain = contraction_gain();
    return t;
  }

  /// Gains the selected controller flies with.
  ControllerGains flight_gains() const {
    ControllerGains g = gains;
    if (controller == ControllerKind::Integral) g.integral = true;
    return g;
  }

  double stats_from() const {
    if (evaluation.stats_from >= 0.0) return evaluation.stats_from;
    return scenario.kind == ScenarioKind::CrossTable ? scenario.period : 0.0;
  }

  /// Rejects any configuration that breaks a precondition of the stability
  /// or contraction results before a run starts: gain positivity, the gain
  /// condition lambda_min(Kv) > L_a rho for the planned network, the
  /// contraction certificate, and clearance from the ground-effect
  /// singularity for every surface the scenario can reach.
  void validate() const {
    vehicle.validate();
    scenario.sim.validate();
    if (!(network.target_contraction > 0.0 && network.target_contraction < 1.0)) {
      throw ConfigError("network.target_contraction must lie in (0, 1)");
    }
    const TrainConfig t = resolved_train();
    if (t.epochs < 1) throw ConfigError("network.train.epochs must be at least 1");
    if (t.batch_size < 1) throw ConfigError("network.train.batch_size must be at least 1");
    if (!(t.learning_rate > 0.0)) throw ConfigError("network.train.learning_rate must be positive");
    if (!(t.validation_fraction >= 0.0 && t.validation_fraction < 1.0)) {
      throw ConfigError("network.train.validation_fraction must lie in [0, 1)");
    }
    if (!(t.u_feature_scale > 0.0)) throw ConfigError("network.train.u_feature_scale must be positive");
    if (!(t.force_scale > 0.0)) throw ConfigError("network.train.force_scale must be positive");
    if (!(t.gamma > 0.0)) throw ConfigError("network.gamma must be positive");

    std::optional<double> planned_lipschitz;
    if (t.spectral_normalization && t.arch != Arch::ZeroLayer) {
      const double ratio = planned_contraction_ratio(t);
      if (!(ratio < 1.0)) {
        throw ContractionViolationError("contraction certificate fails: sigma(B0^-1) * L_a_u = " +
                                        std::to_string(ratio) + " for gamma = " + std::to_string(t.gamma));
      }
      planned_lipschitz = t.gamma * t.force_scale / t.u_feature_scale;
    }
    flight_gains().validate(planned_lipschitz);

    const GroundEffectParams& ge = field.ground_effect;
    if (ge.enabled) {
      const double floor_clearance = ge.rotor_plane_height - ge.singularity_height();
      if (!(floor_clearance > 0.0)) {
        throw ConfigError("ground effect: the rotor plane at touch-down sits below the singularity height");
      }
      collection.validate(ge);
      if (field.table.enabled && scenario.kind == ScenarioKind::CrossTable) {
        if (!(scenario.height + ge.rotor_plane_height - field.table.height > ge.singularity_height())) {
          throw ConfigError("scenario height leaves no clearance above the table's ground-effect singularity");
        }
      }
    }
    if (scenario.kind == ScenarioKind::Hover && !(scenario.height >= 0.0)) {
      throw ConfigError("scenario.height must be non-negative");
    }
    if (scenario.kind == ScenarioKind::CrossTable && !(scenario.period > 0.0)) {
      throw ConfigError("scenario.period must be positive");
    }
    if (scenario.kind == ScenarioKind::Landing && !(scenario.takeoff_at >= 0.0 && scenario.land_at > scenario.takeoff_at)) {
      throw ConfigError("scenario: need 0 <= takeoff_at < land_at");
    }
    if (controller == ControllerKind::NeuralLander && model_path.empty()) {
      throw ConfigError("controller neural-lander needs a model path");
    }
  }
};

// ---------------------------------------------------------------------------
// JSON

namespace detail {

using Json = nlohmann::ordered_json;

inline Json diag_json(const Mat3& m) { return Json::array({m(0, 0), m(1, 1), m(2, 2)}); }

/// A scalar s gives s I, an array [a, b, c] gives diag(a, b, c).
inline Mat3 diag_from_json(const Json& j, const std::string& key) {
  if (j.is_number()) return j.get<double>() * Mat3::Identity();
  if (j.is_array() && j.size() == 3) return Vec3(j[0].get<double>(), j[1].get<double>(), j[2].get<double>()).asDiagonal();
  throw ConfigError(key + ": expected a number or a 3-element array");
}

inline Json vec3_json(const Vec3& v) { return Json::array({v.x(), v.y(), v.z()}); }

/// Reads keys of one JSON object and reports any key that was never read.
class ObjectReader {
 public:
  ObjectReader(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_ + ": expected an object");
  }

  template <class T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    const auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      out = it->template get<T>();
    } catch (const nlohmann::json::exception&) {
      throw ConfigError(path_ + "." + key + ": wrong type");
    }
  }

  void get_diag(const char* key, Mat3& out) {
    seen_.insert(key);
    const auto it = j_.find(key);
    if (it != j_.end()) out = diag_from_json(*it, path_ + "." + key);
  }

  /// Child object, or nullopt when absent.
  const Json* child(const char* key) {
    seen_.insert(key);
    const auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  std::string path(const char* key) const { return path_ + "." + key; }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) throw ConfigError("unknown config key " + path_ + "." + it.key());
    }
  }

 private:
  const Json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

}  // namespace detail

inline nlohmann::ordered_json to_json(const RunConfig& c) {
  using detail::Json;
  Json j;
  const VehicleParams& v = c.vehicle;
  j["vehicle"] = {{"mass", v.mass},
                  {"inertia", detail::diag_json(v.inertia)},
                  {"g", v.g},
                  {"c_T", v.c_T},
                  {"c_Q", v.c_Q},
                  {"arm_length", v.arm_length},
                  {"rotor_diameter", v.rotor_diameter},
                  {"u_max", v.u_max}};
  const DisturbanceField& f = c.field;
  j["field"] = {{"ground_effect",
                 {{"enabled", f.ground_effect.enabled},
                  {"mu", f.ground_effect.mu},
                  {"rotor_diameter", f.ground_effect.rotor_diameter},
                  {"n0", f.ground_effect.n0},
                  {"c_T_nominal", f.ground_effect.c_T_nominal},
                  {"ct_slope", f.ground_effect.ct_slope},
                  {"rotor_plane_height", f.ground_effect.rotor_plane_height}}},
                {"drag", {{"enabled", f.drag.enabled}, {"c_quadratic", f.drag.c_quadratic}, {"c_linear", f.drag.c_linear}}},
                {"table",
                 {{"enabled", f.table.enabled},
                  {"center_x", f.table.center_x},
                  {"center_y", f.table.center_y},
                  {"size_x", f.table.size_x},
                  {"size_y", f.table.size_y},
                  {"height", f.table.height},
                  {"edge_width", f.table.edge_width}}},
                {"torque",
                 {{"amplitude", f.torque.amplitude}, {"wavenumber", f.torque.wavenumber}, {"seed", f.torque.seed}}}};
  const ScenarioConfig& s = c.scenario;
  j["scenario"] = {{"kind", to_string(s.kind)},
                   {"duration", s.duration},
                   {"seed", s.seed},
                   {"height", s.height},
                   {"takeoff_at", s.takeoff_at},
                   {"land_at", s.land_at},
                   {"semi_x", s.semi_x},
                   {"semi_y", s.semi_y},
                   {"period", s.period},
                   {"noise",
                    {{"enabled", s.noise.enabled},
                     {"position_sigma", s.noise.position_sigma},
                     {"velocity_sigma", s.noise.velocity_sigma}}},
                   {"sim",
                    {{"dt", s.sim.dt},
                     {"position_every", s.sim.position_every},
                     {"attitude_every", s.sim.attitude_every},
                     {"allocation_every", s.sim.allocation_every},
                     {"log_every", s.sim.log_every},
                     {"domain_bound", s.sim.domain_bound},
                     {"ground_contact", s.sim.ground_contact}}}};
  const CollectionProgram& p = c.collection;
  j["collection"] = {{"part1_duration", p.part1_duration},
                     {"part2_duration", p.part2_duration},
                     {"heights", p.heights},
                     {"min_height", p.min_height},
                     {"max_height", p.max_height},
                     {"vz_peak_min", p.vz_peak_min},
                     {"vz_peak_max", p.vz_peak_max},
                     {"landing_every", p.landing_every},
                     {"landing_hold", p.landing_hold},
                     {"touchdown_depth", p.touchdown_depth},
                     {"approach_height", p.approach_height},
                     {"creep_speed", p.creep_speed},
                     {"xy_range", p.xy_range},
                     {"part2_z_min", p.part2_z_min},
                     {"part2_speed_max", p.part2_speed_max},
                     {"excitation",
                      {{"amplitude_xy", p.excitation.amplitude_xy},
                       {"amplitude_z", p.excitation.amplitude_z},
                       {"min_hz", p.excitation.min_hz},
                       {"max_hz", p.excitation.max_hz},
                       {"components", p.excitation.components},
                       {"fade_height", p.excitation.fade_height}}},
                     {"seed", p.seed},
                     {"table_duration", c.table_collection_duration}};
  const ControllerGains& g = c.gains;
  j["controller"] = {{"kind", to_string(c.controller)},
                     {"model", c.model_path},
                     {"gains",
                      {{"Lambda", detail::diag_json(g.Lambda)},
                       {"Kv", detail::diag_json(g.Kv)},
                       {"K_omega", detail::diag_json(g.K_omega)},
                       {"Lambda_R", detail::diag_json(g.Lambda_R)},
                       {"integral_limit", g.integral_limit},
                       {"fp_iters", g.fp_iters},
                       {"fp_tol", g.fp_tol},
                       {"max_tilt", g.max_tilt},
                       {"rho_assumed", g.rho_assumed}}}};
  const TrainConfig& t = c.network.train;
  Json scales = Json::object();
  for (const auto& [name, value] : t.fixed_feature_scales) scales[name] = value;
  j["network"] = {{"arch", to_string(t.arch)},
                  {"hidden_width", t.hidden_width},
                  {"gamma", c.network.gamma ? Json(*c.network.gamma) : Json("auto")},
                  {"resolved_gamma", c.resolved_gamma()},
                  {"target_contraction", c.network.target_contraction},
                  {"spectral_normalization", t.spectral_normalization},
                  {"attitude", to_string(c.network.features.attitude)},
                  {"include_xy", c.network.features.include_xy},
                  {"lowpass_cutoff_hz", c.network.labels.lowpass_cutoff_hz},
                  {"train",
                   {{"optimizer", t.optimizer == OptimizerKind::Adam ? "adam" : "sgd"},
                    {"learning_rate", t.learning_rate},
                    {"lr_decay", t.lr_decay},
                    {"momentum", t.momentum},
                    {"batch_size", t.batch_size},
                    {"epochs", t.epochs},
                    {"loss", to_string(t.loss)},
                    {"seed", t.seed},
                    {"validation_fraction", t.validation_fraction},
                    {"u_feature_scale", t.u_feature_scale},
                    {"min_feature_scale", t.min_feature_scale},
                    {"fixed_feature_scales", scales},
                    {"force_scale", t.force_scale},
                    {"sn_iters", t.sn_iters}}}};
  const EvaluationConfig& e = c.evaluation;
  j["evaluation"] = {{"terminal_window", e.terminal_window},
                     {"steady_window", e.steady_window},
                     {"edge_band", e.edge_band},
                     {"stats_from", e.stats_from}};
  j["output_dir"] = c.output_dir;
  return j;
}

/// Missing keys keep their defaults; unknown keys are rejected.
inline RunConfig run_config_from_json(const nlohmann::ordered_json& j) {
  using detail::ObjectReader;
  RunConfig c;
  ObjectReader root(j, "config");
  if (const auto* v = root.child("vehicle")) {
    ObjectReader r(*v, "vehicle");
    r.get("mass", c.vehicle.mass);
    r.get_diag("inertia", c.vehicle.inertia);
    r.get("g", c.vehicle.g);
    r.get("c_T", c.vehicle.c_T);
    r.get("c_Q", c.vehicle.c_Q);
    r.get("arm_length", c.vehicle.arm_length);
    r.get("rotor_diameter", c.vehicle.rotor_diameter);
    r.get("u_max", c.vehicle.u_max);
    r.finish();
  }
  if (const auto* f = root.child("field")) {
    ObjectReader r(*f, "field");
    if (const auto* ge = r.child("ground_effect")) {
      ObjectReader q(*ge, "field.ground_effect");
      auto& g = c.field.ground_effect;
      q.get("enabled", g.enabled);
      q.get("mu", g.mu);
      q.get("rotor_diameter", g.rotor_diameter);
      q.get("n0", g.n0);
      q.get("c_T_nominal", g.c_T_nominal);
      q.get("ct_slope", g.ct_slope);
      q.get("rotor_plane_height", g.rotor_plane_height);
      q.finish();
    }
    if (const auto* d = r.child("drag")) {
      ObjectReader q(*d, "field.drag");
      q.get("enabled", c.field.drag.enabled);
      q.get("c_quadratic", c.field.drag.c_quadratic);
      q.get("c_linear", c.field.drag.c_linear);
      q.finish();
    }
    if (const auto* t = r.child("table")) {
      ObjectReader q(*t, "field.table");
      auto& tb = c.field.table;
      q.get("enabled", tb.enabled);
      q.get("center_x", tb.center_x);
      q.get("center_y", tb.center_y);
      q.get("size_x", tb.size_x);
      q.get("size_y", tb.size_y);
      q.get("height", tb.height);
      q.get("edge_width", tb.edge_width);
      q.finish();
    }
    if (const auto* t = r.child("torque")) {
      ObjectReader q(*t, "field.torque");
      q.get("amplitude", c.field.torque.amplitude);
      q.get("wavenumber", c.field.torque.wavenumber);
      q.get("seed", c.field.torque.seed);
      q.finish();
    }
    r.finish();
  }
  if (const auto* s = root.child("scenario")) {
    ObjectReader r(*s, "scenario");
    std::string kind = to_string(c.scenario.kind);
    r.get("kind", kind);
    c.scenario.kind = scenario_kind_from_string(kind);
    r.get("duration", c.scenario.duration);
    r.get("seed", c.scenario.seed);
    r.get("height", c.scenario.height);
    r.get("takeoff_at", c.scenario.takeoff_at);
    r.get("land_at", c.scenario.land_at);
    r.get("semi_x", c.scenario.semi_x);
    r.get("semi_y", c.scenario.semi_y);
    r.get("period", c.scenario.period);
    if (const auto* n = r.child("noise")) {
      ObjectReader q(*n, "scenario.noise");
      q.get("enabled", c.scenario.noise.enabled);
      q.get("position_sigma", c.scenario.noise.position_sigma);
      q.get("velocity_sigma", c.scenario.noise.velocity_sigma);
      q.finish();
    }
    if (const auto* m = r.child("sim")) {
      ObjectReader q(*m, "scenario.sim");
      auto& sim = c.scenario.sim;
      q.get("dt", sim.dt);
      q.get("position_every", sim.position_every);
      q.get("attitude_every", sim.attitude_every);
      q.get("allocation_every", sim.allocation_every);
      q.get("log_every", sim.log_every);
      q.get("domain_bound", sim.domain_bound);
      q.get("ground_contact", sim.ground_contact);
      q.finish();
    }
    r.finish();
  }
  if (const auto* p = root.child("collection")) {
    ObjectReader r(*p, "collection");
    auto& prog = c.collection;
    r.get("part1_duration", prog.part1_duration);
    r.get("part2_duration", prog.part2_duration);
    r.get("heights", prog.heights);
    r.get("min_height", prog.min_height);
    r.get("max_height", prog.max_height);
    r.get("vz_peak_min", prog.vz_peak_min);
    r.get("vz_peak_max", prog.vz_peak_max);
    r.get("landing_every", prog.landing_every);
    r.get("landing_hold", prog.landing_hold);
    r.get("touchdown_depth", prog.touchdown_depth);
    r.get("approach_height", prog.approach_height);
    r.get("creep_speed", prog.creep_speed);
    r.get("xy_range", prog.xy_range);
    r.get("part2_z_min", prog.part2_z_min);
    r.get("part2_speed_max", prog.part2_speed_max);
    if (const auto* e = r.child("excitation")) {
      ObjectReader q(*e, "collection.excitation");
      auto& ex = prog.excitation;
      q.get("amplitude_xy", ex.amplitude_xy);
      q.get("amplitude_z", ex.amplitude_z);
      q.get("min_hz", ex.min_hz);
      q.get("max_hz", ex.max_hz);
      q.get("components", ex.components);
      q.get("fade_height", ex.fade_height);
      q.finish();
    }
    r.get("seed", prog.seed);
    r.get("table_duration", c.table_collection_duration);
    r.finish();
  }
  if (const auto* k = root.child("controller")) {
    ObjectReader r(*k, "controller");
    std::string kind = to_string(c.controller);
    r.get("kind", kind);
    c.controller = controller_kind_from_string(kind);
    r.get("model", c.model_path);
    if (const auto* g = r.child("gains")) {
      ObjectReader q(*g, "controller.gains");
      q.get_diag("Lambda", c.gains.Lambda);
      q.get_diag("Kv", c.gains.Kv);
      q.get_diag("K_omega", c.gains.K_omega);
      q.get_diag("Lambda_R", c.gains.Lambda_R);
      q.get("integral_limit", c.gains.integral_limit);
      q.get("fp_iters", c.gains.fp_iters);
      q.get("fp_tol", c.gains.fp_tol);
      q.get("max_tilt", c.gains.max_tilt);  // rad
      q.get("rho_assumed", c.gains.rho_assumed);
      q.finish();
    }
    r.finish();
  }
  if (const auto* n = root.child("network")) {
    ObjectReader r(*n, "network");
    auto& t = c.network.train;
    std::string arch = to_string(t.arch);
    r.get("arch", arch);
    t.arch = arch_from_string(arch);
    r.get("hidden_width", t.hidden_width);
    if (const auto* g = r.child("gamma")) {
      if (g->is_string() && g->get<std::string>() == "auto") {
        c.network.gamma.reset();
      } else if (g->is_number()) {
        c.network.gamma = g->get<double>();
      } else {
        throw ConfigError("network.gamma: expected a number or \"auto\"");
      }
    }
    r.child("resolved_gamma");  // informational, written by to_json
    r.get("target_contraction", c.network.target_contraction);
    r.get("spectral_normalization", t.spectral_normalization);
    std::string att = to_string(c.network.features.attitude);
    r.get("attitude", att);
    c.network.features.attitude = attitude_encoding_from_string(att);
    r.get("include_xy", c.network.features.include_xy);
    r.get("lowpass_cutoff_hz", c.network.labels.lowpass_cutoff_hz);
    if (const auto* tr = r.child("train")) {
      ObjectReader q(*tr, "network.train");
      std::string opt = t.optimizer == OptimizerKind::Adam ? "adam" : "sgd";
      q.get("optimizer", opt);
      if (opt == "adam") {
        t.optimizer = OptimizerKind::Adam;
      } else if (opt == "sgd") {
        t.optimizer = OptimizerKind::Sgd;
      } else {
        throw ConfigError("network.train.optimizer: expected adam or sgd");
      }
      q.get("learning_rate", t.learning_rate);
      q.get("lr_decay", t.lr_decay);
      q.get("momentum", t.momentum);
      q.get("batch_size", t.batch_size);
      q.get("epochs", t.epochs);
      std::string loss = to_string(t.loss);
      q.get("loss", loss);
      t.loss = loss_from_string(loss);
      q.get("seed", t.seed);
      q.get("validation_fraction", t.validation_fraction);
      q.get("u_feature_scale", t.u_feature_scale);
      q.get("min_feature_scale", t.min_feature_scale);
      q.get("fixed_feature_scales", t.fixed_feature_scales);
      q.get("force_scale", t.force_scale);
      q.get("sn_iters", t.sn_iters);
      q.finish();
    }
    r.finish();
  }
  if (const auto* e = root.child("evaluation")) {
    ObjectReader r(*e, "evaluation");
    r.get("terminal_window", c.evaluation.terminal_window);
    r.get("steady_window", c.evaluation.steady_window);
    r.get("edge_band", c.evaluation.edge_band);
    r.get("stats_from", c.evaluation.stats_from);
    r.finish();
  }
  root.get("output_dir", c.output_dir);
  root.finish();
  return c;
}

inline RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config " + path);
  nlohmann::ordered_json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed config " + path + ": " + e.what());
  }
  return run_config_from_json(j);
}

}  // namespace nlander
