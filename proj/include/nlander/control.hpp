// Position tracking controller with learned-disturbance cancellation and
// fixed-point control allocation, plus its baseline and integral variants.
#pragma once

#include "nlander/aero.hpp"
#include "nlander/common.hpp"
#include "nlander/network.hpp"
#include "nlander/vehicle.hpp"

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace nlander {

struct ControllerGains {
  Mat3 Lambda = 2.0 * Mat3::Identity();     // 1/s
  Mat3 Kv = 8.0 * Mat3::Identity();         // N s/m
  Mat3 K_omega = 0.4 * Mat3::Identity();    // N m s/rad
  Mat3 Lambda_R = 10.0 * Mat3::Identity();  // 1/s
  bool integral = false;
  double integral_limit = 1.0;  // m s, per axis
  int fp_iters = 1;
  double fp_tol = 1.0;          // RPM^2
  double max_tilt = 45.0 * kPi / 180.0;
  /// Assumed bound on |u_k - u_{k-1}| / |s| (RPM^2 per m/s) for the
  /// pre-flight gain check.
  double rho_assumed = 1e7;

  /// Checks positive definiteness and, when a certified model constant
  /// `lipschitz_u` is given, lambda_min(Kv) > L_a rho_assumed.
  void validate(std::optional<double> lipschitz_u = std::nullopt) const {
    if (!is_symmetric_positive_definite(Lambda)) throw ConfigError("gains: Lambda must be positive definite");
    if (!is_symmetric_positive_definite(Kv)) throw ConfigError("gains: Kv must be positive definite");
    if (!is_symmetric_positive_definite(K_omega)) throw ConfigError("gains: K_omega must be positive definite");
    if (!is_symmetric_positive_definite(Lambda_R)) throw ConfigError("gains: Lambda_R must be positive definite");
    if (fp_iters < 1) throw ConfigError("gains: fp_iters must be at least 1");
    if (lipschitz_u && !(lambda_min(Kv) > *lipschitz_u * rho_assumed)) {
      throw GainConditionError("gain condition lambda_min(Kv) > L_a * rho fails: " + std::to_string(lambda_min(Kv)) +
                               " <= " + std::to_string(*lipschitz_u * rho_assumed));
    }
  }
};

struct RefSample {
  Vec3 p = Vec3::Zero();
  Vec3 v = Vec3::Zero();
  Vec3 a = Vec3::Zero();
  double yaw = 0.0;
  int segment = 0;
};

/// Desired position trajectory p_d(t) with its first two derivatives.
class ReferenceTrajectory {
 public:
  using Fn = std::function<RefSample(double)>;

  ReferenceTrajectory() = default;
  ReferenceTrajectory(Fn fn, double duration) : fn_(std::move(fn)), duration_(duration) {}

  RefSample at(double t) const { return fn_(t); }
  double duration() const { return duration_; }

  /// Largest |p_d|, |v_d| and |a_d| found by sampling every `dt` seconds.
  Vec3 sampled_bounds(double dt = 0.01) const {
    Vec3 b = Vec3::Zero();
    for (double t = 0.0; t <= duration_; t += dt) {
      const RefSample r = at(t);
      b = b.cwiseMax(Vec3(r.p.norm(), r.v.norm(), r.a.norm()));
    }
    return b;
  }

  /// Piecewise-constant setpoints; `starts[i]` is when `points[i]` becomes active.
  static ReferenceTrajectory setpoints(std::vector<double> starts, std::vector<Vec3> points, double duration) {
    if (starts.size() != points.size() || points.empty()) throw ConfigError("setpoints: size mismatch");
    return {[starts, points](double t) {
              RefSample r;
              std::size_t i = 0;
              while (i + 1 < starts.size() && t >= starts[i + 1]) ++i;
              r.p = points[i];
              r.segment = static_cast<int>(i);
              return r;
            },
            duration};
  }

  /// Ellipse in the horizontal plane at constant height.
  static ReferenceTrajectory ellipse(const Vec3& center, double semi_x, double semi_y, double period,
                                     double duration) {
    const double w = 2.0 * kPi / period;
    return {[=](double t) {
              RefSample r;
              r.p = center + Vec3(semi_x * std::cos(w * t), semi_y * std::sin(w * t), 0.0);
              r.v = Vec3(-semi_x * w * std::sin(w * t), semi_y * w * std::cos(w * t), 0.0);
              r.a = Vec3(-semi_x * w * w * std::cos(w * t), -semi_y * w * w * std::sin(w * t), 0.0);
              return r;
            },
            duration};
  }

  static ReferenceTrajectory hold(const Vec3& p, double duration) { return setpoints({0.0}, {p}, duration); }

 private:
  Fn fn_;
  double duration_ = 0.0;
};

/// Anything that predicts f_a for the controller.
class DisturbanceModel {
 public:
  virtual ~DisturbanceModel() = default;
  virtual Vec3 predict(const VehicleState& s, const RotorCommand& u) const = 0;
  /// Certified Lipschitz constant in u (N per RPM^2); nullopt when none exists.
  virtual std::optional<double> lipschitz_u() const = 0;
  virtual std::string name() const = 0;
};

class NetworkModel final : public DisturbanceModel {
 public:
  explicit NetworkModel(SpecNormNet net) : net_(std::move(net)) {}
  Vec3 predict(const VehicleState& s, const RotorCommand& u) const override { return net_.predict(s, u); }
  std::optional<double> lipschitz_u() const override {
    if (!net_.spectral_normalization && !net_.layers.empty()) return std::nullopt;
    return net_.lipschitz_u();
  }
  std::string name() const override { return "network-" + to_string(net_.arch); }
  const SpecNormNet& net() const { return net_; }

 private:
  SpecNormNet net_;
};

/// The true disturbance field used as a perfect model (learning error zero).
class FieldOracleModel final : public DisturbanceModel {
 public:
  explicit FieldOracleModel(DisturbanceField field) : field_(std::move(field)) {}
  Vec3 predict(const VehicleState& s, const RotorCommand& u) const override {
    return total_disturbance(s, u, field_).force;
  }
  std::optional<double> lipschitz_u() const override { return std::nullopt; }
  std::string name() const override { return "oracle"; }

 private:
  DisturbanceField field_;
};

class ZeroModel final : public DisturbanceModel {
 public:
  Vec3 predict(const VehicleState&, const RotorCommand&) const override { return Vec3::Zero(); }
  std::optional<double> lipschitz_u() const override { return 0.0; }
  std::string name() const override { return "zero"; }
};

struct CompositeTerms {
  Vec3 s;
  Vec3 v_r;
  Vec3 v_r_dot;
  Vec3 p_tilde;
};

/// s = v - v_r with v_r = pd_dot - Lambda p~, or for the integral variant
/// v_r = pd_dot - 2 Lambda p~ - Lambda^2 int(p~).
inline CompositeTerms composite_variable(const VehicleState& x, const RefSample& ref, const ControllerGains& gains,
                                         const Vec3& integral = Vec3::Zero()) {
  CompositeTerms c;
  c.p_tilde = x.p - ref.p;
  const Vec3 v_tilde = x.v - ref.v;
  if (gains.integral) {
    const Mat3 l2 = gains.Lambda * gains.Lambda;
    c.v_r = ref.v - 2.0 * gains.Lambda * c.p_tilde - l2 * integral;
    c.v_r_dot = ref.a - 2.0 * gains.Lambda * v_tilde - l2 * c.p_tilde;
  } else {
    c.v_r = ref.v - gains.Lambda * c.p_tilde;
    c.v_r_dot = ref.a - gains.Lambda * v_tilde;
  }
  c.s = x.v - c.v_r;
  return c;
}

struct DesiredForce {
  Vec3 f_bar;  // m v_r_dot - Kv s - m g
  Vec3 f_d;    // f_bar - f_hat
};

inline DesiredForce desired_force(const Vec3& s, const Vec3& v_r_dot, const Vec3& f_hat, const VehicleParams& params,
                                  const ControllerGains& gains) {
  DesiredForce d;
  d.f_bar = params.mass * v_r_dot - gains.Kv * s - params.mass * params.gravity();
  d.f_d = d.f_bar - f_hat;
  return d;
}

struct ThrustAttitude {
  double thrust = 0.0;  // T_d, N
  Mat3 R_d = Mat3::Identity();
  bool tilt_limited = false;
};

/// T_d = f_d . k with k the current thrust axis; R_d has its z axis along
/// f_d (limited to `max_tilt` from vertical) and heading `yaw`.
inline ThrustAttitude thrust_attitude_from_force(const Vec3& f_d, const Mat3& R, double yaw,
                                                 double max_tilt = kPi) {
  const double norm = f_d.norm();
  if (norm < 1e-6) throw DegenerateForceError("desired force is degenerate (|f_d| < 1e-6 N)");
  ThrustAttitude out;
  out.thrust = f_d.dot(R.col(2));
  Vec3 k_d = f_d / norm;
  if (k_d.z() < std::cos(max_tilt)) {
    Vec3 h(k_d.x(), k_d.y(), 0.0);
    if (h.norm() < 1e-12) {
      k_d = Vec3::UnitZ();
    } else {
      h.normalize();
      k_d = std::cos(max_tilt) * Vec3::UnitZ() + std::sin(max_tilt) * h;
    }
    out.tilt_limited = true;
  }
  const Vec3 x_c(std::cos(yaw), std::sin(yaw), 0.0);
  Vec3 y_d = k_d.cross(x_c);
  if (y_d.norm() < 1e-6) {
    // Thrust axis along the heading; fall back to the lateral heading axis.
    const Vec3 y_c(-std::sin(yaw), std::cos(yaw), 0.0);
    const Vec3 x_d = y_c.cross(k_d).normalized();
    y_d = k_d.cross(x_d);
  }
  y_d.normalize();
  const Vec3 x_d = y_d.cross(k_d);
  out.R_d.col(0) = x_d;
  out.R_d.col(1) = y_d;
  out.R_d.col(2) = k_d;
  return out;
}

struct AttitudeCommand {
  Vec3 tau_d;
  Vec3 omega_r;
  Vec3 e_R;
};

/// e_R = 1/2 (R_d^T R - R^T R_d)^v, omega_r = R^T R_d omega_d - Lambda_R e_R,
/// tau_d = J omega_r_dot - (J omega) x omega_r - K_omega (omega - omega_r).
inline AttitudeCommand attitude_torque(const VehicleState& x, const Mat3& R_d, const Vec3& omega_d,
                                       const Vec3& omega_r_dot, const VehicleParams& params,
                                       const ControllerGains& gains) {
  AttitudeCommand c;
  c.e_R = 0.5 * vee(R_d.transpose() * x.R - x.R.transpose() * R_d);
  c.omega_r = x.R.transpose() * R_d * omega_d - gains.Lambda_R * c.e_R;
  const Mat3& J = params.inertia;
  c.tau_d = J * omega_r_dot - (J * x.omega).cross(c.omega_r) - gains.K_omega * (x.omega - c.omega_r);
  return c;
}

struct AllocationResult {
  RotorCommand u;
  int iterations = 0;
  double residual = 0.0;             // |u_j - u_{j-1}| of the last iteration, RPM^2
  std::vector<double> residuals;     // per iteration
  double contraction_ratio = 0.0;    // measured |F(u) - F(u')| / |u - u'|, 0 when not measurable
  double certified_ratio = 0.0;      // sigma(B0^-1) L_a_u
  bool saturated = false;
};

struct AllocationContext {
  Mat4 B0_inv;
  double inverse_gain = 0.0;  // sigma(B0^-1)
  double u_max = 0.0;

  static AllocationContext from(const VehicleParams& params) {
    const Mat4 b0 = build_allocation_matrix(params);
    return {b0.inverse(), inverse_allocation_gain(b0), params.u_max};
  }
};

/// Solves B0 u = [(f_bar - f_hat(zeta, u)) . k; tau_d] by the iteration
/// u_j = B0^-1 eta_d(u_{j-1}) starting from `u_prev`, clamped to [0, u_max].
/// Refuses to run a model whose certified contraction ratio is not below one;
/// uncertified models run only when `allow_uncertified` is set.
inline AllocationResult allocate_fixed_point(const Vec3& f_bar, const Vec3& tau_d, const VehicleState& x,
                                             const DisturbanceModel* model, const RotorCommand& u_prev,
                                             const AllocationContext& ctx, const ControllerGains& gains,
                                             bool allow_uncertified = false, bool measure_contraction = true) {
  AllocationResult res;
  if (model) {
    const auto lip = model->lipschitz_u();
    if (lip) {
      res.certified_ratio = ctx.inverse_gain * *lip;
      if (!(res.certified_ratio < 1.0)) {
        throw ContractionViolationError("allocation is not a contraction: sigma(B0^-1) * L_a = " +
                                        std::to_string(res.certified_ratio));
      }
    } else if (!allow_uncertified) {
      throw ContractionViolationError("model '" + model->name() + "' has no Lipschitz certificate");
    }
  }
  const Vec3 k_hat = x.R.col(2);
  bool clamped = false;
  const auto map = [&](const RotorCommand& u) {
    const Vec3 f_hat = model ? model->predict(x, u) : Vec3::Zero();
    Vec4 eta;
    eta << (f_bar - f_hat).dot(k_hat), tau_d;
    const Vec4 raw = ctx.B0_inv * eta;
    const Vec4 c = raw.cwiseMax(0.0).cwiseMin(ctx.u_max);
    clamped = (c.array() != raw.array()).any();
    return RotorCommand{c};
  };
  RotorCommand prev = u_prev;
  RotorCommand cur = u_prev;
  const int max_iters = model ? gains.fp_iters : 1;
  // Ratios of residuals below this floor are dominated by rounding.
  const double floor = 1e-9 * std::max(1.0, u_prev.u.norm());
  for (int j = 0; j < max_iters; ++j) {
    prev = cur;
    cur = map(prev);
    res.saturated = clamped;
    res.residual = (cur.u - prev.u).norm();
    if (model && measure_contraction && j > 0 && res.residuals.back() > floor) {
      res.contraction_ratio = std::max(res.contraction_ratio, res.residual / res.residuals.back());
    }
    res.residuals.push_back(res.residual);
    res.iterations = j + 1;
    if (res.residual < gains.fp_tol) break;
  }
  res.u = cur;
  if (model && measure_contraction && res.iterations == 1 && res.residual > floor) {
    const bool sat = res.saturated;
    const RotorCommand probe = map(cur);
    res.contraction_ratio = (probe.u - cur.u).norm() / res.residual;
    res.saturated = sat;
  }
  return res;
}

struct ControllerOptions {
  bool allow_uncertified_model = false;
  bool measure_contraction = true;
};

/// Mutable controller memory carried between steps.
struct ControllerState {
  RotorCommand u_prev;
  Vec3 integral = Vec3::Zero();
  CompositeTerms composite{Vec3::Zero(), Vec3::Zero(), Vec3::Zero(), Vec3::Zero()};
  DesiredForce force{Vec3::Zero(), Vec3::Zero()};
  Vec3 f_hat = Vec3::Zero();
  ThrustAttitude thrust_attitude;
  Vec3 tau_d = Vec3::Zero();
  Vec3 omega_r_prev = Vec3::Zero();
  bool attitude_target_changed = true;
  AllocationResult last_allocation;
};

/// Multi-rate controller: position loop (f_bar_d, R_d), attitude loop (tau_d)
/// and allocation, each advanced by the caller at its own rate.
class Controller {
 public:
  Controller(VehicleParams params, ControllerGains gains, const DisturbanceModel* model,
             ControllerOptions options = {})
      : params_(std::move(params)),
        gains_(std::move(gains)),
        model_(model),
        options_(options),
        ctx_(AllocationContext::from(params_)) {
    params_.validate();
    std::optional<double> lip;
    if (model_) lip = model_->lipschitz_u();
    gains_.validate(lip);
    if (model_ && lip && !(ctx_.inverse_gain * *lip < 1.0)) {
      throw ContractionViolationError("contraction certificate fails: sigma(B0^-1) * L_a = " +
                                      std::to_string(ctx_.inverse_gain * *lip));
    }
    if (model_ && !lip && !options_.allow_uncertified_model) {
      throw ContractionViolationError("model '" + model_->name() + "' has no Lipschitz certificate");
    }
    state_.u_prev = RotorCommand::uniform(params_.mass * params_.g / (4.0 * params_.c_T));
  }

  void reset_command(const RotorCommand& u) { state_.u_prev = u; }

  void position_update(const VehicleState& x, const RefSample& ref, double dt) {
    auto& st = state_;
    st.composite = composite_variable(x, ref, gains_, st.integral);
    st.f_hat = model_ ? model_->predict(x, st.u_prev) : Vec3::Zero();
    st.force = desired_force(st.composite.s, st.composite.v_r_dot, st.f_hat, params_, gains_);
    st.thrust_attitude = thrust_attitude_from_force(st.force.f_d, x.R, ref.yaw, gains_.max_tilt);
    st.attitude_target_changed = true;
    if (gains_.integral) {
      st.integral += dt * st.composite.p_tilde;
      st.integral = st.integral.cwiseMax(-gains_.integral_limit).cwiseMin(gains_.integral_limit);
    }
  }

  void attitude_update(const VehicleState& x, double dt) {
    auto& st = state_;
    // omega_r_dot by backward difference; zero right after R_d moves.
    const AttitudeCommand probe = attitude_torque(x, st.thrust_attitude.R_d, Vec3::Zero(), Vec3::Zero(), params_, gains_);
    const Vec3 omega_r_dot = st.attitude_target_changed ? Vec3::Zero() : Vec3((probe.omega_r - st.omega_r_prev) / dt);
    const AttitudeCommand cmd = attitude_torque(x, st.thrust_attitude.R_d, Vec3::Zero(), omega_r_dot, params_, gains_);
    st.tau_d = cmd.tau_d;
    st.omega_r_prev = cmd.omega_r;
    st.attitude_target_changed = false;
  }

  const AllocationResult& allocation_update(const VehicleState& x) {
    auto& st = state_;
    st.last_allocation = allocate_fixed_point(st.force.f_bar, st.tau_d, x, model_, st.u_prev, ctx_, gains_,
                                              options_.allow_uncertified_model, options_.measure_contraction);
    st.u_prev = st.last_allocation.u;
    return st.last_allocation;
  }

  const ControllerState& state() const { return state_; }
  const ControllerGains& gains() const { return gains_; }
  const AllocationContext& allocation_context() const { return ctx_; }
  const DisturbanceModel* model() const { return model_; }

 private:
  VehicleParams params_;
  ControllerGains gains_;
  const DisturbanceModel* model_;
  ControllerOptions options_;
  AllocationContext ctx_;
  ControllerState state_;
};

/// Single-rate composition of the whole controller: composite variable,
/// desired force, thrust and attitude, torque, allocation.
inline RotorCommand position_control_step(const VehicleState& x, const ReferenceTrajectory& ref, double t,
                                          Controller& controller, double dt) {
  const RefSample r = ref.at(t);
  controller.position_update(x, r, dt);
  controller.attitude_update(x, dt);
  return controller.allocation_update(x).u;
}

}  // namespace nlander
