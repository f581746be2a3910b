// Offline model analysis: the steady 1-D ground-effect model fitted to hover
// data, and dense two-feature slices of a learned model.
#pragma once

#include "nlander/aero.hpp"
#include "nlander/network.hpp"
#include "nlander/train.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

namespace nlander {

// ---------------------------------------------------------------------------
// Steady ground-effect model

/// Per-rotor extra thrust n^2 c_T(n) / (1 - mu (D / 8z)^2) - n^2 c_T(n0) with z
/// the vehicle height. Only mu is free; D, n0 and c_T(n) come from the
/// vehicle's bench data.
struct SteadyGroundEffectModel {
  GroundEffectParams bench;  // rotor_plane_height and mu are ignored
  double mu = 1.0;

  double rotor_force(double n, double z) const {
    const double r = bench.rotor_diameter / (8.0 * z);
    const double denom = 1.0 - mu * r * r;
    if (!(z > 0.0) || denom <= 0.0) throw SingularityError("steady ground-effect model singular at z = " + std::to_string(z));
    return n * n * bench.c_T(n) / denom - n * n * bench.c_T(bench.n0);
  }

  /// Force along the thrust axis, world frame.
  Vec3 predict(const VecX& raw, const FeatureSpec& spec) const {
    const double z = raw[static_cast<Eigen::Index>(spec.index_of("z"))];
    const Vec4 u = raw.tail<4>();
    double f = 0.0;
    for (int i = 0; i < 4; ++i) f += rotor_force(std::sqrt(std::max(u[i], 0.0)), z);
    Vec3 k = Vec3::UnitZ();
    if (spec.attitude == AttitudeEncoding::RotationMatrix) {
      const auto o = static_cast<Eigen::Index>(spec.index_of("R02"));
      k = Vec3(raw[o], raw[o + 3], raw[o + 6]);
    } else {
      const auto o = static_cast<Eigen::Index>(spec.index_of("qw"));
      const Eigen::Quaterniond q(raw[o], raw[o + 1], raw[o + 2], raw[o + 3]);
      k = q.normalized().toRotationMatrix().col(2);
    }
    return f * k;
  }
};

inline double rmse_of(const std::vector<Vec3>& residuals) {
  if (residuals.empty()) return 0.0;
  double s = 0.0;
  for (const auto& r : residuals) s += r.squaredNorm();
  return std::sqrt(s / static_cast<double>(residuals.size()));
}

/// RMSE (N, residual norm) of the steady model on the selected columns.
inline double steady_model_rmse(const SteadyGroundEffectModel& model, const TrainingSet& data,
                                const std::vector<std::size_t>& cols) {
  std::vector<Vec3> res;
  res.reserve(cols.size());
  for (std::size_t c : cols) {
    const auto j = static_cast<Eigen::Index>(c);
    res.push_back(model.predict(data.features.col(j), data.spec) - Vec3(data.targets.col(j)));
  }
  return rmse_of(res);
}

inline double network_rmse(const SpecNormNet& net, const TrainingSet& data, const std::vector<std::size_t>& cols) {
  std::vector<Vec3> res;
  res.reserve(cols.size());
  for (std::size_t c : cols) {
    const auto j = static_cast<Eigen::Index>(c);
    res.push_back(net.forward(data.features.col(j)) - Vec3(data.targets.col(j)));
  }
  return rmse_of(res);
}

struct SteadyFit {
  SteadyGroundEffectModel model;
  double rmse = 0.0;
};

/// Least-squares mu by a coarse grid followed by golden-section refinement,
/// restricted so the model stays finite at the lowest height in `cols`.
inline SteadyFit fit_steady_ground_effect(const TrainingSet& data, const std::vector<std::size_t>& cols,
                                          const GroundEffectParams& bench, int grid = 200) {
  if (cols.empty()) throw EmptyDataError("steady ground-effect fit needs data");
  const auto zi = static_cast<Eigen::Index>(data.spec.index_of("z"));
  double z_min = std::numeric_limits<double>::infinity();
  for (std::size_t c : cols) z_min = std::min(z_min, data.features(zi, static_cast<Eigen::Index>(c)));
  if (!(z_min > 0.0)) throw SingularityError("steady ground-effect fit needs heights above zero");
  const double mu_max = std::pow(8.0 * z_min / bench.rotor_diameter, 2) * (1.0 - 1e-6);
  SteadyGroundEffectModel m;
  m.bench = bench;
  const auto cost = [&](double mu) {
    m.mu = mu;
    return steady_model_rmse(m, data, cols);
  };
  double best_mu = 0.0, best = cost(0.0);
  for (int i = 1; i <= grid; ++i) {
    const double mu = mu_max * i / grid;
    const double c = cost(mu);
    if (c < best) {
      best = c;
      best_mu = mu;
    }
  }
  double lo = std::max(0.0, best_mu - mu_max / grid), hi = std::min(mu_max, best_mu + mu_max / grid);
  const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
  for (int it = 0; it < 60; ++it) {
    const double a = hi - phi * (hi - lo), b = lo + phi * (hi - lo);
    if (cost(a) < cost(b)) {
      hi = b;
    } else {
      lo = a;
    }
  }
  const double mid = 0.5 * (lo + hi);
  if (cost(mid) < best) best_mu = mid;
  SteadyFit fit;
  fit.model = m;
  fit.model.mu = best_mu;
  fit.rmse = steady_model_rmse(fit.model, data, cols);
  return fit;
}

/// Columns whose speed is at most `max_speed` and whose height is at least
/// `z_min` (hovering samples).
inline std::vector<std::size_t> hover_columns(const TrainingSet& data, double max_speed = 0.1, double z_min = 0.045) {
  const auto vi = static_cast<Eigen::Index>(data.spec.index_of("vx"));
  const auto zi = static_cast<Eigen::Index>(data.spec.index_of("z"));
  std::vector<std::size_t> out;
  for (Eigen::Index c = 0; c < data.features.cols(); ++c) {
    if (data.features.block<3, 1>(vi, c).norm() <= max_speed && data.features(zi, c) >= z_min)
      out.push_back(static_cast<std::size_t>(c));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Heatmaps

struct FeatureBox {
  VecX lo, hi;

  static FeatureBox of(const MatX& raw_cols) {
    return {raw_cols.rowwise().minCoeff(), raw_cols.rowwise().maxCoeff()};
  }
  bool contains(Eigen::Index i, double v) const { return v >= lo[i] && v <= hi[i]; }
};

struct Heatmap {
  std::string x_name, y_name;
  std::vector<double> xs, ys;
  MatX values;                    // f_hat_z, rows follow ys, columns follow xs
  Eigen::MatrixXi in_domain;      // 1 where both axes lie inside the training box
};

/// Evaluates f_hat_z of `net` on an nx-by-ny grid over two named features,
/// holding the remaining features at `base` (physical units).
inline Heatmap heatmap_slice(const SpecNormNet& net, const std::string& x_name, double x_lo, double x_hi, int nx,
                             const std::string& y_name, double y_lo, double y_hi, int ny, const VecX& base,
                             const FeatureBox* domain = nullptr) {
  if (nx < 2 || ny < 2) throw ConfigError("heatmap needs at least 2 points per axis");
  const auto xi = static_cast<Eigen::Index>(net.input_spec.index_of(x_name));
  const auto yi = static_cast<Eigen::Index>(net.input_spec.index_of(y_name));
  Heatmap h;
  h.x_name = x_name;
  h.y_name = y_name;
  for (int i = 0; i < nx; ++i) h.xs.push_back(x_lo + (x_hi - x_lo) * i / (nx - 1));
  for (int j = 0; j < ny; ++j) h.ys.push_back(y_lo + (y_hi - y_lo) * j / (ny - 1));
  h.values.resize(ny, nx);
  h.in_domain.resize(ny, nx);
  VecX x = base;
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      x[xi] = h.xs[static_cast<std::size_t>(i)];
      x[yi] = h.ys[static_cast<std::size_t>(j)];
      h.values(j, i) = net.forward(x).z();
      h.in_domain(j, i) = domain ? (domain->contains(xi, x[xi]) && domain->contains(yi, x[yi])) : 1;
    }
  }
  return h;
}

/// Largest norm of the forward-difference gradient over the grid, in output
/// units per physical unit of each axis.
inline double max_grid_gradient(const Heatmap& h) {
  double best = 0.0;
  const Eigen::Index ny = h.values.rows(), nx = h.values.cols();
  for (Eigen::Index j = 0; j + 1 < ny; ++j) {
    for (Eigen::Index i = 0; i + 1 < nx; ++i) {
      const double dx = (h.values(j, i + 1) - h.values(j, i)) / (h.xs[i + 1] - h.xs[i]);
      const double dy = (h.values(j + 1, i) - h.values(j, i)) / (h.ys[j + 1] - h.ys[j]);
      best = std::max(best, std::hypot(dx, dy));
    }
  }
  return best;
}

/// Upper bound on any forward-difference gradient a network with certified
/// bound `certified` can show on the slice: each one-axis difference is at
/// most certified * output_scale / scale_axis.
inline double slice_gradient_bound(const SpecNormNet& net, double certified, const std::string& x_name,
                                   const std::string& y_name) {
  const FeatureSpec& s = net.input_spec;
  const double sx = s.fitted() ? s.scale[static_cast<Eigen::Index>(s.index_of(x_name))] : 1.0;
  const double sy = s.fitted() ? s.scale[static_cast<Eigen::Index>(s.index_of(y_name))] : 1.0;
  return certified * net.output_scale * std::hypot(1.0 / sx, 1.0 / sy);
}

inline void write_heatmap_csv(const Heatmap& h, std::ostream& out) {
  out << "# nlander-heatmap v1 x=" << h.x_name << " y=" << h.y_name << '\n';
  out << h.x_name << ',' << h.y_name << ",fhat_z,in_domain\n";
  char buf[96];
  for (std::size_t j = 0; j < h.ys.size(); ++j) {
    for (std::size_t i = 0; i < h.xs.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%d\n", h.xs[i], h.ys[j],
                    h.values(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)),
                    h.in_domain(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)));
      out << buf;
    }
  }
}

}  // namespace nlander
