// Disturbance labels from flight logs: f_a = m dv/dt - m g - R f_u.
#pragma once

#include "nlander/flight_log.hpp"
#include "nlander/train.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace nlander {

struct LabelOptions {
  /// Zero-phase 2nd-order Butterworth low-pass applied to velocity before
  /// differencing; 0 disables it.
  double lowpass_cutoff_hz = 0.0;
};

namespace detail {
/// Forward-backward biquad low-pass (zero phase).
inline std::vector<double> filtfilt_lowpass(const std::vector<double>& x, double cutoff_hz, double rate_hz) {
  const double k = std::tan(kPi * cutoff_hz / rate_hz);
  const double q = std::sqrt(0.5);
  const double norm = 1.0 / (1.0 + k / q + k * k);
  const double b0 = k * k * norm, b1 = 2.0 * b0, b2 = b0;
  const double a1 = 2.0 * (k * k - 1.0) * norm, a2 = (1.0 - k / q + k * k) * norm;
  const auto pass = [&](const std::vector<double>& in) {
    std::vector<double> out(in.size());
    double x1 = in.front(), x2 = in.front(), y1 = in.front(), y2 = in.front();
    for (std::size_t i = 0; i < in.size(); ++i) {
      const double y = b0 * in[i] + b1 * x1 + b2 * x2 - a1 * y1 - a2 * y2;
      x2 = x1;
      x1 = in[i];
      y2 = y1;
      y1 = y;
      out[i] = y;
    }
    return out;
  };
  std::vector<double> fwd = pass(x);
  std::reverse(fwd.begin(), fwd.end());
  std::vector<double> back = pass(fwd);
  std::reverse(back.begin(), back.end());
  return back;
}
}  // namespace detail

/// Central-difference labels. Rows touching ground contact are dropped. When
/// the log carries interval averages they replace R f_u and the instantaneous
/// command, so the difference quotient, the rotor force and the u features all
/// refer to the same two-interval window around the record.
inline TrainingSet extract_labels(const FlightLog& log, const VehicleParams& params, const FeatureSpec& layout,
                                  const LabelOptions& opt = {}) {
  const std::size_t n = log.size();
  if (n < 3) throw TooShortLogError("flight log needs at least 3 records to difference velocities");
  const double dt = log.dt();

  std::vector<Vec3> vel(n);
  for (std::size_t i = 0; i < n; ++i) vel[i] = log.records[i].x.v;
  if (opt.lowpass_cutoff_hz > 0.0) {
    for (int a = 0; a < 3; ++a) {
      std::vector<double> ch(n);
      for (std::size_t i = 0; i < n; ++i) ch[i] = vel[i][a];
      ch = detail::filtfilt_lowpass(ch, opt.lowpass_cutoff_hz, log.rate_hz);
      for (std::size_t i = 0; i < n; ++i) vel[i][a] = ch[i];
    }
  }

  std::vector<std::size_t> keep;
  for (std::size_t k = 1; k + 1 < n; ++k) {
    const auto& r = log.records;
    if (r[k - 1].contact || r[k].contact || r[k + 1].contact) continue;
    keep.push_back(k);
  }
  TrainingSet set;
  set.spec = layout;
  set.spec.mean.resize(0);
  set.spec.scale.resize(0);
  set.features.resize(static_cast<Eigen::Index>(layout.dim()), static_cast<Eigen::Index>(keep.size()));
  set.targets.resize(3, static_cast<Eigen::Index>(keep.size()));
  const bool averaged = log.meta.value("f_u_averaged", false);
  for (std::size_t c = 0; c < keep.size(); ++c) {
    const std::size_t k = keep[c];
    const auto& r = log.records[k];
    const Vec3 v_dot = (vel[k + 1] - vel[k - 1]) / (2.0 * dt);
    Vec3 rotor_force;
    if (averaged) {
      rotor_force = 0.5 * (r.f_u_avg + log.records[k + 1].f_u_avg);
    } else {
      rotor_force = r.x.R.col(2) * (params.c_T * r.u.sum());
    }
    const auto col = static_cast<Eigen::Index>(c);
    set.targets.col(col) = params.mass * v_dot - params.mass * params.gravity() - rotor_force;
    const RotorCommand u{averaged ? Vec4(0.5 * (r.u_avg + log.records[k + 1].u_avg)) : r.u};
    set.features.col(col) = set.spec.raw(r.x, u);
  }
  set.is_validation.assign(keep.size(), false);
  return set;
}

}  // namespace nlander
