// Rigid-body quadrotor model: state, rotor allocation and RK4 integration.
#pragma once

#include "nlander/common.hpp"

#include <algorithm>
#include <functional>
#include <string>

namespace nlander {

/// Physical constants of the airframe. Rotor coefficients use RPM^2 as the
/// unit of the squared rotor speed, so c_T is in N/RPM^2 and c_Q in N*m/RPM^2.
struct VehicleParams {
  double mass = 1.47;                                    // kg
  Mat3 inertia = Vec3(0.01, 0.01, 0.02).asDiagonal();    // kg m^2
  double g = 9.81;                                       // m/s^2
  double c_T = 1.47 * 9.81 / (4.0 * 2000.0 * 2000.0);    // hover at 2000 RPM
  double c_Q = 0.016 * (1.47 * 9.81 / (4.0 * 2000.0 * 2000.0));
  double arm_length = 0.115;                             // m
  double rotor_diameter = 0.23;                          // m
  double air_density = 1.225;                            // kg/m^3
  double u_max = 6400.0 * 6400.0;                        // RPM^2

  Vec3 gravity() const { return Vec3(0.0, 0.0, -g); }

  /// Throws ConfigError when an invariant is broken.
  void validate() const {
    if (!(mass > 0.0)) throw ConfigError("vehicle: mass must be positive");
    if (!(arm_length > 0.0)) throw ConfigError("vehicle: arm_length must be positive");
    if (!(c_T > 0.0)) throw ConfigError("vehicle: c_T must be positive");
    if (!(u_max > 0.0)) throw ConfigError("vehicle: u_max must be positive");
    if (!(g > 0.0)) throw ConfigError("vehicle: g must be positive");
    if (!is_symmetric_positive_definite(inertia)) {
      throw ConfigError("vehicle: inertia must be symmetric positive definite");
    }
  }
};

struct VehicleState {
  Vec3 p = Vec3::Zero();
  Vec3 v = Vec3::Zero();
  Mat3 R = Mat3::Identity();
  Vec3 omega = Vec3::Zero();

  bool finite() const {
    return p.allFinite() && v.allFinite() && R.allFinite() && omega.allFinite();
  }
};

/// Squared motor speeds [n1^2 .. n4^2] in RPM^2.
struct RotorCommand {
  Vec4 u = Vec4::Zero();

  static RotorCommand uniform(double value) { return {Vec4::Constant(value)}; }
  Vec4 speeds_rpm() const { return u.cwiseMax(0.0).cwiseSqrt(); }
};

/// Collective thrust (N) along body z and body torques (N m).
struct Wrench {
  double thrust = 0.0;
  Vec3 torque = Vec3::Zero();

  Vec4 as_vector() const { return Vec4(thrust, torque.x(), torque.y(), torque.z()); }
  static Wrench from_vector(const Vec4& eta) { return {eta[0], eta.tail<3>()}; }
};

struct Disturbance {
  Vec3 force = Vec3::Zero();
  Vec3 torque = Vec3::Zero();
};

struct StateDerivative {
  Vec3 p_dot;
  Vec3 v_dot;
  Mat3 R_dot;
  Vec3 omega_dot;
};

/// Maps squared rotor speeds to [T, tau_x, tau_y, tau_z].
inline Mat4 build_allocation_matrix(const VehicleParams& params) {
  const double ct = params.c_T;
  const double cq = params.c_Q;
  const double cl = params.c_T * params.arm_length;
  if (ct == 0.0 || cq == 0.0 || params.arm_length == 0.0) {
    throw SingularMatrixError("allocation matrix is singular: c_T, c_Q and arm length must be non-zero");
  }
  Mat4 b;
  b << ct, ct, ct, ct,
       0.0, cl, 0.0, -cl,
       -cl, 0.0, cl, 0.0,
       -cq, cq, -cq, cq;
  return b;
}

/// Largest singular value of B0^-1, i.e. 1 / sigma_min(B0).
inline double inverse_allocation_gain(const Mat4& b0) {
  Eigen::JacobiSVD<Mat4> svd(b0);
  const double smin = svd.singularValues().minCoeff();
  if (smin <= 0.0) throw SingularMatrixError("allocation matrix is singular");
  return 1.0 / smin;
}

inline Wrench wrench_from_command(const Mat4& b0, const RotorCommand& cmd) {
  return Wrench::from_vector(b0 * cmd.u);
}

inline StateDerivative dynamics_derivative(const VehicleState& s, const Wrench& w,
                                           const Disturbance& d, const VehicleParams& params) {
  StateDerivative out;
  out.p_dot = s.v;
  const Vec3 f_u(0.0, 0.0, w.thrust);
  out.v_dot = params.gravity() + (s.R * f_u + d.force) / params.mass;
  out.R_dot = s.R * skew(s.omega);
  const Vec3 j_omega = params.inertia * s.omega;
  out.omega_dot = params.inertia.ldlt().solve(j_omega.cross(s.omega) + w.torque + d.torque);
  return out;
}

/// State-dependent disturbance evaluated at every RK4 stage.
using DisturbanceFn = std::function<Disturbance(const VehicleState&)>;

namespace detail {
inline VehicleState advance(const VehicleState& s, const StateDerivative& d, double h) {
  VehicleState out;
  out.p = s.p + h * d.p_dot;
  out.v = s.v + h * d.v_dot;
  out.R = s.R + h * d.R_dot;
  out.omega = s.omega + h * d.omega_dot;
  return out;
}
}  // namespace detail

/// One classical RK4 step followed by polar re-orthonormalization of R.
inline VehicleState integrate_step(const VehicleState& s, const Wrench& w, const DisturbanceFn& dist,
                                   const VehicleParams& params, double dt) {
  if (!(dt > 0.0)) throw Error("integrate_step: dt must be positive");
  const auto f = [&](const VehicleState& x) { return dynamics_derivative(x, w, dist(x), params); };
  const StateDerivative k1 = f(s);
  const StateDerivative k2 = f(detail::advance(s, k1, 0.5 * dt));
  const StateDerivative k3 = f(detail::advance(s, k2, 0.5 * dt));
  const StateDerivative k4 = f(detail::advance(s, k3, dt));
  VehicleState out;
  out.p = s.p + dt / 6.0 * (k1.p_dot + 2.0 * k2.p_dot + 2.0 * k3.p_dot + k4.p_dot);
  out.v = s.v + dt / 6.0 * (k1.v_dot + 2.0 * k2.v_dot + 2.0 * k3.v_dot + k4.v_dot);
  out.R = s.R + dt / 6.0 * (k1.R_dot + 2.0 * k2.R_dot + 2.0 * k3.R_dot + k4.R_dot);
  out.omega = s.omega + dt / 6.0 * (k1.omega_dot + 2.0 * k2.omega_dot + 2.0 * k3.omega_dot + k4.omega_dot);
  if (!out.finite()) throw NonFiniteStateError("integration produced a non-finite state");
  out.R = project_to_so3(out.R);
  return out;
}

inline VehicleState integrate_step(const VehicleState& s, const Wrench& w, const Disturbance& d,
                                   const VehicleParams& params, double dt) {
  return integrate_step(s, w, DisturbanceFn([&d](const VehicleState&) { return d; }), params, dt);
}

/// Kinetic plus potential energy.
inline double mechanical_energy(const VehicleState& s, const VehicleParams& params) {
  return 0.5 * params.mass * s.v.squaredNorm() + 0.5 * s.omega.dot(params.inertia * s.omega) +
         params.mass * params.g * s.p.z();
}

}  // namespace nlander
