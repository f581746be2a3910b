// Flight metrics and tracking-bound checks computed from a stored log.
#pragma once

#include "nlander/aero.hpp"
#include "nlander/control.hpp"
#include "nlander/flight_log.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace nlander {

struct EvaluationInputs {
  double mass = 1.47;                // kg
  double lipschitz_u = 0.0;          // certified L_a in N per RPM^2
  double model_epsilon = 0.0;        // learning-error estimate from training, N
  double terminal_window = 2.0;      // s, averaged at the end of the last segment
  double steady_window = 10.0;       // s, tail used for the steady-state bound
  /// Rows whose horizontal distance to the table edge is below this are
  /// counted as edge rows (only when `table` is enabled).
  double edge_band = 0.15;
  TableParams table;
  /// Time from which tracking statistics (rms, edge variance) are taken.
  double stats_from = 0.0;
};

struct Metrics {
  double terminal_z_error = 0.0;     // |mean(z - z_d)| over the terminal window
  double terminal_z_signed = 0.0;
  Vec3 rms_p_tilde = Vec3::Zero();
  double rms_z_error = 0.0;
  double max_s = 0.0;
  double rho = 0.0;                  // max |u_k - u_{k-1}| / |s|
  double flown_epsilon = 0.0;        // max |f_a - f_hat| on flown rows
  double epsilon_m = 0.0;            // bound input: max(model, flown)
  double lipschitz_u = 0.0;
  double margin = 0.0;               // lambda_min(Kv) - L_a rho
  double s_ball = 0.0;               // epsilon_m / margin
  double p_ball = 0.0;               // epsilon_m / (lambda_min(Lambda) margin)
  bool bounds_applicable = false;
  int envelope_checked = 0;
  int envelope_violations = 0;
  double envelope_worst = 0.0;       // largest |s| - envelope, negative when inside
  /// The same check with the rate 2 (lambda_min(Kv) - L_a rho) / m that the
  /// Lyapunov derivative gives; reported, not required.
  int envelope_violations_fast = 0;
  double steady_p_tilde = 0.0;       // max |p~| over the steady window
  bool steady_bound_ok = false;
  double max_contraction_ratio = 0.0;
  double certified_ratio = 0.0;
  int contraction_violations = 0;
  double max_fp_residual = 0.0;
  double touchdown_speed = 0.0;      // |v_z| just before the last ground contact
  std::vector<double> segment_rms_z;
  double edge_z_variance = 0.0;
  int edge_rows = 0;
  int saturated_rows = 0;
  int tilt_limited_rows = 0;
  int contact_rows = 0;
};

/// epsilon / (lambda_min(Lambda) (lambda_min(Kv) - L_a rho)).
inline double steady_state_bound(double epsilon, double lambda_min_Lambda, double lambda_min_Kv, double la_rho) {
  const double margin = lambda_min_Kv - la_rho;
  if (!(margin > 0.0) || !(lambda_min_Lambda > 0.0)) return std::numeric_limits<double>::infinity();
  return epsilon / (lambda_min_Lambda * margin);
}

inline double distance_to_table_edge(double x, double y, const TableParams& t) {
  const double dx = std::abs(x - t.center_x) - 0.5 * t.size_x;
  const double dy = std::abs(y - t.center_y) - 0.5 * t.size_y;
  if (dx <= 0.0 && dy <= 0.0) return std::min(-dx, -dy);
  return std::hypot(std::max(dx, 0.0), std::max(dy, 0.0));
}

/// Pure function of the log. The exponential envelope restarts at the first
/// record of every reference segment; saturated and ground-contact rows are
/// excluded from the bound checks because the closed-loop model does not
/// describe them.
inline Metrics evaluate(const FlightLog& log, const ControllerGains& gains, const EvaluationInputs& in) {
  Metrics m;
  if (log.empty()) return m;
  const auto& rows = log.records;
  m.lipschitz_u = in.lipschitz_u;

  Vec3 sq = Vec3::Zero();
  int n_stats = 0;
  for (const auto& r : rows) {
    m.max_s = std::max(m.max_s, r.s.norm());
    m.max_fp_residual = std::max(m.max_fp_residual, r.fp_residual);
    m.max_contraction_ratio = std::max(m.max_contraction_ratio, r.fp_ratio);
    m.certified_ratio = std::max(m.certified_ratio, r.cert_ratio);
    if (r.cert_ratio > 0.0 && r.fp_ratio > r.cert_ratio + 1e-12) ++m.contraction_violations;
    if (r.saturated) ++m.saturated_rows;
    if (r.tilt_limited) ++m.tilt_limited_rows;
    if (r.contact) ++m.contact_rows;
    if (!r.saturated && !r.contact) {
      m.rho = std::max(m.rho, r.rho);
      m.flown_epsilon = std::max(m.flown_epsilon, (r.f_a - r.f_hat).norm());
    }
    if (r.t >= in.stats_from) {
      sq += r.p_tilde.cwiseAbs2();
      ++n_stats;
    }
  }
  if (n_stats > 0) {
    m.rms_p_tilde = (sq / n_stats).cwiseSqrt();
    m.rms_z_error = m.rms_p_tilde.z();
  }

  // Terminal error over the final window of the last segment.
  const double t_end = rows.back().t;
  const int last_segment = rows.back().segment;
  double acc = 0.0;
  int cnt = 0;
  for (const auto& r : rows) {
    if (r.segment == last_segment && r.t >= t_end - in.terminal_window) {
      acc += r.x.p.z() - r.p_d.z();
      ++cnt;
    }
  }
  m.terminal_z_signed = cnt ? acc / cnt : 0.0;
  m.terminal_z_error = std::abs(m.terminal_z_signed);

  // Per-segment RMS z error.
  int max_seg = 0;
  for (const auto& r : rows) max_seg = std::max(max_seg, r.segment);
  std::vector<double> seg_sq(static_cast<std::size_t>(max_seg + 1), 0.0);
  std::vector<int> seg_n(seg_sq.size(), 0);
  for (const auto& r : rows) {
    seg_sq[static_cast<std::size_t>(r.segment)] += r.p_tilde.z() * r.p_tilde.z();
    ++seg_n[static_cast<std::size_t>(r.segment)];
  }
  for (std::size_t k = 0; k < seg_sq.size(); ++k) {
    m.segment_rms_z.push_back(seg_n[k] ? std::sqrt(seg_sq[k] / seg_n[k]) : 0.0);
  }

  // Touch-down speed: vertical speed on the last airborne row before contact.
  for (std::size_t k = 1; k < rows.size(); ++k) {
    if (rows[k].contact && !rows[k - 1].contact) m.touchdown_speed = std::abs(rows[k - 1].x.v.z());
  }

  // Table-edge variance of the z error.
  if (in.table.enabled) {
    double sum = 0.0, sum2 = 0.0;
    for (const auto& r : rows) {
      if (r.t < in.stats_from) continue;
      if (distance_to_table_edge(r.x.p.x(), r.x.p.y(), in.table) > in.edge_band) continue;
      sum += r.p_tilde.z();
      sum2 += r.p_tilde.z() * r.p_tilde.z();
      ++m.edge_rows;
    }
    if (m.edge_rows > 0) {
      const double mean = sum / m.edge_rows;
      m.edge_z_variance = std::max(0.0, sum2 / m.edge_rows - mean * mean);
    }
  }

  // Bound instantiation.
  m.epsilon_m = std::max(in.model_epsilon, m.flown_epsilon);
  const double kv = lambda_min(gains.Kv);
  const double lam = lambda_min(gains.Lambda);
  m.margin = kv - in.lipschitz_u * m.rho;
  m.bounds_applicable = m.margin > 0.0 && !gains.integral;
  if (m.bounds_applicable) {
    m.s_ball = m.epsilon_m / m.margin;
    m.p_ball = steady_state_bound(m.epsilon_m, lam, kv, in.lipschitz_u * m.rho);
    const double rate = m.margin / in.mass;
    double t0 = rows.front().t;
    double s0 = rows.front().s.norm();
    int seg = rows.front().segment;
    m.envelope_worst = -std::numeric_limits<double>::infinity();
    for (const auto& r : rows) {
      if (r.segment != seg) {
        seg = r.segment;
        t0 = r.t;
        s0 = r.s.norm();
      }
      if (r.saturated || r.contact) continue;
      const double env = s0 * std::exp(-rate * (r.t - t0)) + m.s_ball;
      const double excess = r.s.norm() - env;
      m.envelope_worst = std::max(m.envelope_worst, excess);
      ++m.envelope_checked;
      if (excess > 1e-9) ++m.envelope_violations;
      if (r.s.norm() - (s0 * std::exp(-2.0 * rate * (r.t - t0)) + m.s_ball) > 1e-9) ++m.envelope_violations_fast;
    }
  }
  for (const auto& r : rows) {
    if (r.t >= t_end - in.steady_window && !r.contact) m.steady_p_tilde = std::max(m.steady_p_tilde, r.p_tilde.norm());
  }
  m.steady_bound_ok = m.bounds_applicable && m.steady_p_tilde <= m.p_ball;
  return m;
}

inline nlohmann::ordered_json metrics_to_json(const Metrics& m) {
  nlohmann::ordered_json j;
  j["terminal_z_error"] = m.terminal_z_error;
  j["terminal_z_signed"] = m.terminal_z_signed;
  j["rms_p_tilde"] = {m.rms_p_tilde.x(), m.rms_p_tilde.y(), m.rms_p_tilde.z()};
  j["rms_z_error"] = m.rms_z_error;
  j["max_s"] = m.max_s;
  j["rho"] = m.rho;
  j["flown_epsilon"] = m.flown_epsilon;
  j["epsilon_m"] = m.epsilon_m;
  j["lipschitz_u"] = m.lipschitz_u;
  j["margin"] = m.margin;
  j["s_ball"] = m.s_ball;
  j["p_ball"] = m.p_ball;
  j["bounds_applicable"] = m.bounds_applicable;
  j["envelope_checked"] = m.envelope_checked;
  j["envelope_violations"] = m.envelope_violations;
  j["envelope_worst"] = m.envelope_checked ? m.envelope_worst : 0.0;
  j["envelope_violations_fast"] = m.envelope_violations_fast;
  j["steady_p_tilde"] = m.steady_p_tilde;
  j["steady_bound_ok"] = m.steady_bound_ok;
  j["max_contraction_ratio"] = m.max_contraction_ratio;
  j["certified_ratio"] = m.certified_ratio;
  j["contraction_violations"] = m.contraction_violations;
  j["max_fp_residual"] = m.max_fp_residual;
  j["touchdown_speed"] = m.touchdown_speed;
  j["segment_rms_z"] = m.segment_rms_z;
  j["edge_z_variance"] = m.edge_z_variance;
  j["edge_rows"] = m.edge_rows;
  j["saturated_rows"] = m.saturated_rows;
  j["tilt_limited_rows"] = m.tilt_limited_rows;
  j["contact_rows"] = m.contact_rows;
  return j;
}

}  // namespace nlander
