// Closed-loop simulation: multi-rate controller around the rigid-body model,
// ground contact, logging, and the scenario library.
#pragma once

#include "nlander/aero.hpp"
#include "nlander/control.hpp"
#include "nlander/flight_log.hpp"
#include "nlander/vehicle.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <vector>

namespace nlander {

/// Thrown when the vehicle leaves the domain or the state stops being finite.
/// Carries everything logged up to that point.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, FlightLog partial) : Error(what), partial_(std::move(partial)) {}
  const FlightLog& partial_log() const { return partial_; }

 private:
  FlightLog partial_;
};

struct NoiseSettings {
  bool enabled = false;
  double position_sigma = 1e-3;  // m
  double velocity_sigma = 1e-2;  // m/s
};

struct SimSettings {
  double dt = 1e-3;          // physics step, s
  int position_every = 100;  // physics steps per position update
  int attitude_every = 10;
  int allocation_every = 2;
  int log_every = 10;
  double domain_bound = 50.0;  // m
  bool ground_contact = true;

  void validate() const {
    if (!(dt > 0.0)) throw ConfigError("sim: dt must be positive");
    if (position_every < 1 || attitude_every < 1 || allocation_every < 1 || log_every < 1) {
      throw ConfigError("sim: loop divisors must be at least 1");
    }
    if (!(domain_bound > 0.0)) throw ConfigError("sim: domain_bound must be positive");
  }
  double log_rate() const { return 1.0 / (dt * log_every); }
};

struct Scenario {
  std::string name;
  ReferenceTrajectory reference;
  DisturbanceField field;
  double duration = 0.0;  // s
  std::uint64_t seed = 1;
  NoiseSettings noise;
  SimSettings sim;
  VehicleState initial;

  void validate() const {
    if (!(duration > 0.0)) throw ConfigError("scenario '" + name + "': duration must be positive");
    sim.validate();
    const Vec3 b = reference.sampled_bounds();
    if (!b.allFinite()) throw ConfigError("scenario '" + name + "': reference is not bounded");
    if (!initial.finite()) throw ConfigError("scenario '" + name + "': initial state is not finite");
  }
};

/// Runs `scenario` with the controller built from `gains` and `model`
/// (nullptr for the baseline). The position loop runs every
/// `sim.position_every` physics steps, attitude every `sim.attitude_every`,
/// allocation every `sim.allocation_every`; one record is logged every
/// `sim.log_every` steps and describes the state at that instant together
/// with the maxima of allocation statistics over the preceding interval.
inline FlightLog run_scenario(const Scenario& scenario, const VehicleParams& params, const ControllerGains& gains,
                              const DisturbanceModel* model, ControllerOptions options = {}) {
  scenario.validate();
  const SimSettings& sim = scenario.sim;
  Controller controller(params, gains, model, options);
  const Mat4 b0 = build_allocation_matrix(params);

  FlightLog log;
  log.rate_hz = sim.log_rate();
  log.meta["scenario"] = scenario.name;
  log.meta["seed"] = scenario.seed;
  log.meta["controller"] = model ? model->name() : std::string("baseline");
  log.meta["integral"] = gains.integral;
  log.meta["f_u_averaged"] = true;
  if (model) {
    const auto lip = model->lipschitz_u();
    log.meta["lipschitz_u"] = lip ? nlohmann::ordered_json(*lip) : nlohmann::ordered_json(nullptr);
  }

  std::mt19937_64 rng(scenario.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const auto measure = [&](const VehicleState& x) {
    if (!scenario.noise.enabled) return x;
    VehicleState m = x;
    for (int i = 0; i < 3; ++i) m.p[i] += scenario.noise.position_sigma * normal(rng);
    for (int i = 0; i < 3; ++i) m.v[i] += scenario.noise.velocity_sigma * normal(rng);
    return m;
  };

  const auto steps = static_cast<long>(std::llround(scenario.duration / sim.dt));
  VehicleState x = scenario.initial;
  VehicleState meas = measure(x);
  RefSample ref = scenario.reference.at(0.0);
  Vec3 f_u_sum = Vec3::Zero();
  Vec4 u_sum = Vec4::Zero();
  Vec3 f_a_sum = Vec3::Zero();
  int f_u_count = 0;
  LogRecord pending;  // interval statistics since the previous record
  bool contact_interval = false;
  RotorCommand u_prev_alloc = controller.state().u_prev;

  struct {
    long physics = 0, position = 0, attitude = 0, allocation = 0;
  } schedule;
  const auto stamp_schedule = [&] {
    log.meta["schedule"] = {{"physics_steps", schedule.physics},
                            {"position_updates", schedule.position},
                            {"attitude_updates", schedule.attitude},
                            {"allocation_updates", schedule.allocation}};
  };

  for (long i = 0;; ++i) {
    const double t = static_cast<double>(i) * sim.dt;
    if (i % sim.log_every == 0) meas = measure(x);
    if (i % sim.position_every == 0) {
      ref = scenario.reference.at(t);
      controller.position_update(meas, ref, sim.dt * sim.position_every);
      ++schedule.position;
    }
    if (i % sim.attitude_every == 0) {
      controller.attitude_update(meas, sim.dt * sim.attitude_every);
      ++schedule.attitude;
    }
    if (i % sim.allocation_every == 0) {
      ++schedule.allocation;
      const AllocationResult& a = controller.allocation_update(meas);
      const double du = (a.u.u - u_prev_alloc.u).norm();
      u_prev_alloc = a.u;
      pending.fp_residual = std::max(pending.fp_residual, a.residual);
      pending.fp_ratio = std::max(pending.fp_ratio, a.contraction_ratio);
      pending.cert_ratio = a.certified_ratio;
      pending.fp_iters = std::max(pending.fp_iters, a.iterations);
      pending.delta_u = std::max(pending.delta_u, du);
      pending.saturated = pending.saturated || a.saturated;
      if (!a.saturated && i > 0) {
        const double s_now = composite_variable(meas, ref, gains, controller.state().integral).s.norm();
        if (s_now >= 1e-6) pending.rho = std::max(pending.rho, du / s_now);
      }
    }
    const ControllerState& cs = controller.state();
    pending.tilt_limited = pending.tilt_limited || cs.thrust_attitude.tilt_limited;

    if (i % sim.log_every == 0) {
      LogRecord r = pending;
      r.t = t;
      r.segment = ref.segment;
      r.x = meas;
      r.u = cs.u_prev.u;
      const Disturbance d = total_disturbance(x, cs.u_prev, scenario.field);
      r.f_a = d.force;
      r.tau_a = d.torque;
      r.f_hat = model ? model->predict(meas, cs.u_prev) : Vec3::Zero();
      const CompositeTerms c = composite_variable(meas, ref, gains, cs.integral);
      r.s = c.s;
      r.p_tilde = c.p_tilde;
      r.p_d = ref.p;
      if (f_u_count > 0) {
        r.f_u_avg = f_u_sum / f_u_count;
        r.u_avg = u_sum / f_u_count;
        r.f_a_avg = f_a_sum / f_u_count;
      } else {
        r.f_u_avg = x.R.col(2) * (params.c_T * cs.u_prev.u.sum());
        r.u_avg = cs.u_prev.u;
        r.f_a_avg = d.force;
      }
      r.contact = contact_interval || (sim.ground_contact && x.p.z() <= 0.0);
      log.records.push_back(r);
      pending = LogRecord{};
      f_u_sum.setZero();
      u_sum.setZero();
      f_a_sum.setZero();
      f_u_count = 0;
      contact_interval = false;
    }
    if (i >= steps) break;

    const RotorCommand u = cs.u_prev;
    const Wrench w = wrench_from_command(b0, u);
    const DisturbanceField& field = scenario.field;
    const Mat3 R_start = x.R;
    const Vec3 f_a_start = total_disturbance(x, u, field).force;
    try {
      x = integrate_step(
          x, w, [&](const VehicleState& s) { return total_disturbance(s, u, field); }, params, sim.dt);
    } catch (const NonFiniteStateError& e) {
      stamp_schedule();
      throw DivergenceError(std::string("state diverged: ") + e.what(), std::move(log));
    } catch (const SingularityError& e) {
      stamp_schedule();
      throw DivergenceError(std::string("vehicle reached the ground-effect singularity: ") + e.what(),
                            std::move(log));
    }
    ++schedule.physics;
    f_u_sum += 0.5 * (R_start.col(2) + x.R.col(2)) * w.thrust;
    u_sum += u.u;
    f_a_sum += 0.5 * (f_a_start + total_disturbance(x, u, field).force);
    ++f_u_count;
    if (sim.ground_contact && x.p.z() < 0.0) {
      x.p.z() = 0.0;
      x.v = Vec3(0.0, 0.0, std::max(0.0, x.v.z()));
      contact_interval = true;
    }
    if (x.p.norm() > sim.domain_bound) {
      stamp_schedule();
      throw DivergenceError("vehicle left the domain (|p| = " + std::to_string(x.p.norm()) + " m)", std::move(log));
    }
  }
  stamp_schedule();
  return log;
}

// ---------------------------------------------------------------------------
// Scripted programs

/// One leg of a scripted program: a cosine blend from the previous point to
/// `to` over `move` seconds, then a hold of `hold` seconds.
struct ProgramLeg {
  Vec3 to = Vec3::Zero();
  double move = 0.0;
  double hold = 0.0;
};

struct ExcitationSettings {
  double amplitude_xy = 0.03;  // m, sum over components
  double amplitude_z = 0.02;   // m
  double min_hz = 0.2;
  double max_hz = 1.0;
  int components = 3;
  double fade_height = 0.15;   // amplitude ramps to zero below this height
};

/// Legs joined by cosine blends, plus band-limited sinusoidal excitation
/// whose amplitude fades near the ground.
inline ReferenceTrajectory legs_trajectory(const Vec3& start, std::vector<ProgramLeg> legs,
                                           const ExcitationSettings& exc, std::uint64_t seed) {
  std::vector<double> t_start(legs.size());
  std::vector<Vec3> from(legs.size());
  double t = 0.0;
  Vec3 prev = start;
  for (std::size_t i = 0; i < legs.size(); ++i) {
    t_start[i] = t;
    from[i] = prev;
    t += legs[i].move + legs[i].hold;
    prev = legs[i].to;
  }
  const double total = t;
  struct Wave {
    double amp, w, phase;
  };
  std::array<std::vector<Wave>, 3> waves;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int a = 0; a < 3; ++a) {
    const double amp = (a == 2 ? exc.amplitude_z : exc.amplitude_xy) / std::max(1, exc.components);
    for (int k = 0; k < exc.components; ++k) {
      const double hz = exc.min_hz + (exc.max_hz - exc.min_hz) * unit(rng);
      waves[a].push_back({amp, 2.0 * kPi * hz, 2.0 * kPi * unit(rng)});
    }
  }
  return {[=](double time) {
            RefSample r;
            std::size_t i = 0;
            while (i + 1 < legs.size() && time >= t_start[i + 1]) ++i;
            const double tau = std::clamp(time - t_start[i], 0.0, legs[i].move + legs[i].hold);
            const Vec3 d = legs[i].to - from[i];
            if (legs[i].move > 0.0 && tau < legs[i].move) {
              const double w = kPi / legs[i].move;
              r.p = from[i] + 0.5 * d * (1.0 - std::cos(w * tau));
              r.v = 0.5 * d * w * std::sin(w * tau);
              r.a = 0.5 * d * w * w * std::cos(w * tau);
            } else {
              r.p = legs[i].to;
            }
            r.segment = static_cast<int>(i);
            const double fade = exc.fade_height > 0.0 ? std::clamp(r.p.z() / exc.fade_height, 0.0, 1.0) : 1.0;
            for (int a = 0; a < 3; ++a) {
              for (const Wave& wv : waves[a]) {
                const double arg = wv.w * time + wv.phase;
                r.p[a] += fade * wv.amp * std::sin(arg);
                r.v[a] += fade * wv.amp * wv.w * std::cos(arg);
                r.a[a] -= fade * wv.amp * wv.w * wv.w * std::sin(arg);
              }
            }
            return r;
          },
          total};
}

/// Move time for a cosine blend of length `dist` with peak speed `v_peak`.
inline double blend_time(double dist, double v_peak, double min_time = 0.3) {
  return std::max(min_time, kPi * dist / (2.0 * v_peak));
}

struct CollectionProgram {
  double part1_duration = 250.0;  // s, hover-height sweep
  double part2_duration = 100.0;  // s, random excursions
  int heights = 25;
  double min_height = 0.05;
  double max_height = 1.5;
  double vz_peak_min = 0.3;       // m/s
  double vz_peak_max = 1.0;
  double landing_every = 5;       // hover heights between touch-downs
  double landing_hold = 3.0;      // s
  /// Touch-downs aim this far below the floor so the pilot presses through
  /// the last few centimetres instead of hovering on the ground cushion.
  double touchdown_depth = 0.03;  // m
  double approach_height = 0.1;   // m, where the slow final descent starts
  double creep_speed = 0.05;      // m/s, peak speed of the final descent
  double xy_range = 1.0;          // m, part II
  double part2_z_min = 0.1;
  double part2_speed_max = 1.0;   // m/s per axis
  ExcitationSettings excitation;
  std::uint64_t seed = 11;

  void validate(const GroundEffectParams& ge) const {
    if (heights < 2) throw ConfigError("program: need at least two hover heights");
    if (!(min_height + ge.rotor_plane_height > ge.singularity_height())) {
      throw ConfigError("program: altitude floor is below the ground-effect singularity height");
    }
    if (!(part1_duration >= 0.0 && part2_duration >= 0.0)) throw ConfigError("program: negative duration");
    if (!(vz_peak_min > 0.0 && vz_peak_max >= vz_peak_min)) throw ConfigError("program: bad peak speeds");
  }

  std::vector<double> hover_heights() const {
    std::vector<double> h(static_cast<std::size_t>(heights));
    for (int i = 0; i < heights; ++i) h[i] = min_height + (max_height - min_height) * i / (heights - 1);
    return h;
  }
};

/// Part I: shuffled hover heights joined by vertical blends with periodic
/// touch-downs; Part II: random xyz waypoints. Total length is the sum of
/// both part durations.
inline ReferenceTrajectory collection_trajectory(const CollectionProgram& prog) {
  std::mt19937_64 rng(prog.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<double> h = prog.hover_heights();
  std::shuffle(h.begin(), h.end(), rng);
  const auto peak = [&] { return prog.vz_peak_min + (prog.vz_peak_max - prog.vz_peak_min) * unit(rng); };

  std::vector<ProgramLeg> legs;
  Vec3 at = Vec3::Zero();
  // Part I: the hold time is shared evenly after the moves are laid out.
  std::vector<ProgramLeg> part1;
  double move_time = 0.0;
  int landings = 0;
  for (std::size_t i = 0; i < h.size(); ++i) {
    const Vec3 to(0.0, 0.0, h[i]);
    ProgramLeg leg{to, blend_time(std::abs(to.z() - at.z()), peak()), 0.0};
    move_time += leg.move;
    part1.push_back(leg);
    at = to;
    if ((i + 1) % static_cast<std::size_t>(prog.landing_every) == 0 && i + 1 < h.size()) {
      // Fast descent to the approach height, then a slow creep through the
      // ground cushion so near-ground samples are taken close to hover thrust.
      ProgramLeg approach{Vec3(0.0, 0.0, prog.approach_height), blend_time(at.z() - prog.approach_height, peak()),
                          0.0};
      ProgramLeg land{Vec3(0.0, 0.0, -prog.touchdown_depth),
                      blend_time(prog.approach_height + prog.touchdown_depth, prog.creep_speed), prog.landing_hold};
      move_time += approach.move + land.move + land.hold;
      part1.push_back(approach);
      part1.push_back(land);
      at = land.to;
      ++landings;
    }
  }
  const double hold = std::max(0.5, (prog.part1_duration - move_time) / static_cast<double>(h.size()));
  for (auto& leg : part1) {
    if (leg.to.z() > 0.0 && leg.to.z() != prog.approach_height) leg.hold = hold;
    legs.push_back(leg);
  }
  double elapsed = 0.0;
  for (const auto& leg : legs) elapsed += leg.move + leg.hold;
  // Stretch or trim the final hold so part I ends exactly at part1_duration.
  if (!legs.empty()) legs.back().hold = std::max(0.0, legs.back().hold + prog.part1_duration - elapsed);

  const double part2_end = prog.part1_duration + prog.part2_duration;
  elapsed = prog.part1_duration;
  while (elapsed < part2_end - 1e-9) {
    const Vec3 to(prog.xy_range * (2.0 * unit(rng) - 1.0), prog.xy_range * (2.0 * unit(rng) - 1.0),
                  prog.part2_z_min + (prog.max_height - prog.part2_z_min) * unit(rng));
    const double dist = (to - at).cwiseAbs().maxCoeff();
    const double v_peak = prog.vz_peak_min + (prog.part2_speed_max - prog.vz_peak_min) * unit(rng);
    ProgramLeg leg{to, blend_time(dist, v_peak), 0.5 + 1.5 * unit(rng)};
    if (elapsed + leg.move + leg.hold > part2_end) {
      leg.hold = std::max(0.0, part2_end - elapsed - leg.move);
      if (elapsed + leg.move > part2_end) break;
    }
    elapsed += leg.move + leg.hold;
    legs.push_back(leg);
    at = to;
  }
  if (elapsed < part2_end && !legs.empty()) legs.back().hold += part2_end - elapsed;
  return legs_trajectory(Vec3::Zero(), std::move(legs), prog.excitation, prog.seed + 1);
}

/// Random waypoints over and around the table at cruise height, for training
/// a model that sees the table surface.
inline ReferenceTrajectory table_collection_trajectory(double duration, std::uint64_t seed,
                                                       const ExcitationSettings& exc = {}) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<ProgramLeg> legs;
  Vec3 at(0.0, 0.0, 0.0);
  ProgramLeg climb{Vec3(0.0, 0.0, 0.8), blend_time(0.8, 0.6), 1.0};
  legs.push_back(climb);
  at = climb.to;
  double elapsed = climb.move + climb.hold;
  while (elapsed < duration) {
    const Vec3 to(-1.4 + 2.8 * unit(rng), -0.9 + 1.8 * unit(rng), 0.6 + 0.4 * unit(rng));
    const double dist = (to - at).cwiseAbs().maxCoeff();
    ProgramLeg leg{to, blend_time(dist, 0.4 + 0.6 * unit(rng)), 0.3 + 1.0 * unit(rng)};
    elapsed += leg.move + leg.hold;
    legs.push_back(leg);
    at = to;
  }
  return legs_trajectory(Vec3::Zero(), std::move(legs), exc, seed + 1);
}

inline Scenario collection_scenario(const CollectionProgram& prog, const DisturbanceField& field,
                                    double duration = -1.0) {
  prog.validate(field.ground_effect);
  Scenario sc;
  sc.name = "collect";
  sc.reference = collection_trajectory(prog);
  sc.field = field;
  sc.duration = duration > 0.0 ? std::min(duration, sc.reference.duration()) : sc.reference.duration();
  sc.seed = prog.seed;
  return sc;
}

/// The scripted pilot: the integral-variant baseline controller. Lambda is
/// halved because the integral variant doubles the proportional action.
inline ControllerGains scripted_pilot_gains(ControllerGains gains = {}) {
  gains.integral = true;
  gains.Lambda *= 0.5;
  gains.integral_limit = 0.5;
  return gains;
}

/// Flies `prog` with the scripted pilot under `field`.
inline FlightLog collect_training_flight(const CollectionProgram& prog, const DisturbanceField& field,
                                         const VehicleParams& params, double duration = -1.0,
                                         const ControllerGains& gains = scripted_pilot_gains()) {
  Scenario sc = collection_scenario(prog, field, duration);
  FlightLog log = run_scenario(sc, params, gains, nullptr);
  log.meta["program"] = "part1+part2";
  log.meta["part1_duration"] = prog.part1_duration;
  log.meta["part2_duration"] = prog.part2_duration;
  return log;
}

// ---------------------------------------------------------------------------
// Scenario library

/// Take-off from the ground to 1 m and landing back at the origin.
inline Scenario landing_scenario(const DisturbanceField& field, double takeoff_at = 3.0, double land_at = 13.0,
                                 double duration = 25.0) {
  Scenario sc;
  sc.name = "landing";
  sc.reference = ReferenceTrajectory::setpoints({0.0, takeoff_at, land_at},
                                                {Vec3::Zero(), Vec3(0.0, 0.0, 1.0), Vec3::Zero()}, duration);
  sc.field = field;
  sc.duration = duration;
  return sc;
}

inline Scenario hover_scenario(const DisturbanceField& field, double height, double duration) {
  Scenario sc;
  sc.name = "hover";
  sc.reference = ReferenceTrajectory::hold(Vec3(0.0, 0.0, height), duration);
  sc.field = field;
  sc.duration = duration;
  sc.initial.p = Vec3(0.0, 0.0, height);
  return sc;
}

/// Horizontal ellipse centred at the origin whose right half crosses the table.
inline Scenario cross_table_scenario(const DisturbanceField& field, double height = 0.7, double semi_x = 1.2,
                                     double semi_y = 0.6, double period = 10.0, double duration = 35.0) {
  Scenario sc;
  sc.name = "cross_table";
  sc.reference = ReferenceTrajectory::ellipse(Vec3(0.0, 0.0, height), semi_x, semi_y, period, duration);
  sc.field = field;
  sc.duration = duration;
  const RefSample r0 = sc.reference.at(0.0);
  sc.initial.p = r0.p;
  sc.initial.v = r0.v;
  return sc;
}

}  // namespace nlander
