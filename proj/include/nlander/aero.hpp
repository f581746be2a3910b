// Synthetic aerodynamic disturbance fields: steady ground effect, drag and a
// raised table surface. These are the ground truth the learner tries to fit.
#pragma once

#include "nlander/common.hpp"
#include "nlander/vehicle.hpp"

#include <array>
#include <random>

namespace nlander {

/// Steady 1-D ground effect on a single rotor. `n0` is the reference speed at
/// which the nominal thrust coefficient `c_T_nominal` was identified; the
/// nominal model therefore predicts n^2 c_T(n0).
struct GroundEffectParams {
  bool enabled = true;
  double mu = 2.0;
  double rotor_diameter = 0.23;                          // m
  double n0 = 2000.0;                                    // RPM
  double c_T_nominal = 1.47 * 9.81 / (4.0 * 2000.0 * 2000.0);
  /// c_T(n) = c_T_nominal * (1 + ct_slope * (n - n0) / n0); 0 gives constant c_T.
  double ct_slope = 0.05;
  /// Height of the rotor plane above the vehicle's ground-contact point, m.
  double rotor_plane_height = 0.08;

  double c_T(double n) const { return c_T_nominal * (1.0 + ct_slope * (n - n0) / n0); }

  /// Rotor height below which the model is singular.
  double singularity_height() const { return rotor_diameter / 8.0 * std::sqrt(mu); }
};

/// Thrust amplification 1 / (1 - mu (D / 8z)^2).
inline double ground_effect_gain(double z, const GroundEffectParams& ge) {
  if (!(z > 0.0)) throw SingularityError("ground effect evaluated at non-positive height");
  const double r = ge.rotor_diameter / (8.0 * z);
  const double denom = 1.0 - ge.mu * r * r;
  if (denom <= 0.0) {
    throw SingularityError("ground effect singular at z = " + std::to_string(z) + " m");
  }
  return 1.0 / denom;
}

/// Extra thrust (N) of one rotor spinning at n RPM with its plane z metres
/// above a surface, relative to the nominal n^2 c_T(n0) model.
inline double ground_effect_force(double n, double z, const GroundEffectParams& ge) {
  const double n2 = n * n;
  return n2 * ge.c_T(n) * ground_effect_gain(z, ge) - n2 * ge.c_T(ge.n0);
}

struct DragParams {
  bool enabled = true;
  double c_quadratic = 0.1;  // N s^2 / m^2
  double c_linear = 0.2;     // N s / m
};

inline Vec3 drag_force(const Vec3& v, const DragParams& d) {
  return -(d.c_quadratic * v.norm() + d.c_linear) * v;
}

struct TableParams {
  bool enabled = false;
  double center_x = 0.8;
  double center_y = 0.0;
  double size_x = 1.0;
  double size_y = 1.0;
  double height = 0.5;       // table top above the floor, m
  double edge_width = 0.05;  // 10%-90% width of the smoothed edge, m; 0 = sharp
};

namespace detail {
inline double edge_weight(double half_extent, double offset, double width) {
  const double inside = half_extent - std::abs(offset);
  if (width <= 0.0) return inside >= 0.0 ? 1.0 : 0.0;
  const double s = width / (2.0 * std::log(9.0));
  return 1.0 / (1.0 + std::exp(-inside / s));
}
}  // namespace detail

/// Fraction of the vehicle footprint that sees the table top, in [0, 1].
inline double table_weight(double x, double y, const TableParams& t) {
  if (!t.enabled) return 0.0;
  return detail::edge_weight(0.5 * t.size_x, x - t.center_x, t.edge_width) *
         detail::edge_weight(0.5 * t.size_y, y - t.center_y, t.edge_width);
}

/// Summed ground-effect force magnitude (N, along the rotor axis) of the four
/// rotors at position p, blending floor and table surfaces.
inline double surface_ground_effect(const Vec3& p, const Vec4& speeds_rpm, const GroundEffectParams& ge,
                                    const TableParams& table) {
  const double h_floor = p.z() + ge.rotor_plane_height;
  double w = table_weight(p.x(), p.y(), table);
  // Beside the table and below its top only the floor is underneath; inside
  // the footprint that would be a collision.
  if (w > 1e-12 && h_floor - table.height <= ge.singularity_height()) {
    if (w >= 0.5) throw SingularityError("vehicle is below the table top inside its footprint");
    w = 0.0;
  }
  double total = 0.0;
  for (int i = 0; i < 4; ++i) {
    const double n = speeds_rpm[i];
    double f = 0.0;
    if (w < 1.0 - 1e-12) f += (1.0 - w) * ground_effect_force(n, h_floor, ge);
    if (w > 1e-12) f += w * ground_effect_force(n, h_floor - table.height, ge);
    total += f;
  }
  return total;
}

/// Ground-effect force at p for a level vehicle, world frame.
inline Vec3 table_field(const Vec3& p, const Vec4& speeds_rpm, const GroundEffectParams& ge,
                        const TableParams& table) {
  return Vec3(0.0, 0.0, surface_ground_effect(p, speeds_rpm, ge, table));
}

/// Bounded, position-dependent torque disturbance; zero amplitude by default.
struct TorqueDisturbanceParams {
  double amplitude = 0.0;    // N m per axis
  double wavenumber = 2.0;   // rad / m
  std::uint64_t seed = 7;

  std::array<double, 3> phases() const {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> phase(0.0, 2.0 * kPi);
    return {phase(rng), phase(rng), phase(rng)};
  }
};

struct DisturbanceField {
  GroundEffectParams ground_effect;
  DragParams drag;
  TableParams table;
  TorqueDisturbanceParams torque;

  /// Upper bound on |f_a| for rotor commands in [0, u_max], speeds up to
  /// v_max and vehicle heights z >= z_min above the lowest surface.
  double force_bound(double u_max, double v_max, double z_min) const {
    double b = 0.0;
    if (ground_effect.enabled) {
      const double n = std::sqrt(u_max);
      const double h = z_min + ground_effect.rotor_plane_height;
      b += 4.0 * std::abs(n * n * ground_effect.c_T(n) * ground_effect_gain(h, ground_effect)) +
           4.0 * n * n * ground_effect.c_T(ground_effect.n0);
    }
    if (drag.enabled) b += (drag.c_quadratic * v_max + drag.c_linear) * v_max;
    return b;
  }

  double torque_bound() const { return std::sqrt(3.0) * std::abs(torque.amplitude); }

  static DisturbanceField none() {
    DisturbanceField f;
    f.ground_effect.enabled = false;
    f.drag.enabled = false;
    f.table.enabled = false;
    return f;
  }
};

/// f_a and tau_a acting on the vehicle in state s under rotor command u.
inline Disturbance total_disturbance(const VehicleState& s, const RotorCommand& u, const DisturbanceField& field) {
  Disturbance d;
  if (field.ground_effect.enabled) {
    const double mag = surface_ground_effect(s.p, u.speeds_rpm(), field.ground_effect, field.table);
    d.force += mag * s.R.col(2);
  }
  if (field.drag.enabled) d.force += drag_force(s.v, field.drag);
  if (field.torque.amplitude != 0.0) {
    const auto ph = field.torque.phases();
    const double k = field.torque.wavenumber;
    d.torque = field.torque.amplitude *
               Vec3(std::sin(k * s.p.x() + ph[0]), std::sin(k * s.p.y() + ph[1]), std::sin(k * s.p.z() + ph[2]));
  }
  return d;
}

}  // namespace nlander
