// Network input encoding: which state/command channels feed the disturbance
// model, and how they are normalized.
#pragma once

#include "nlander/common.hpp"
#include "nlander/vehicle.hpp"

#include <map>
#include <string>
#include <vector>

namespace nlander {

enum class AttitudeEncoding { Quaternion, RotationMatrix };

inline std::string to_string(AttitudeEncoding e) {
  return e == AttitudeEncoding::Quaternion ? "quaternion" : "rotation_matrix";
}

inline AttitudeEncoding attitude_encoding_from_string(const std::string& s) {
  if (s == "quaternion") return AttitudeEncoding::Quaternion;
  if (s == "rotation_matrix") return AttitudeEncoding::RotationMatrix;
  throw ConfigError("unknown attitude encoding '" + s + "'");
}

/// Ordered feature layout [x, y,] z, v, attitude, u with per-feature
/// (mean, scale). Quaternion attitude gives 12 inputs, rotation matrix 17,
/// and the x-y variant adds two more.
struct FeatureSpec {
  AttitudeEncoding attitude = AttitudeEncoding::Quaternion;
  bool include_xy = false;
  VecX mean;
  VecX scale;

  std::size_t attitude_dim() const { return attitude == AttitudeEncoding::Quaternion ? 4 : 9; }
  std::size_t dim() const { return (include_xy ? 2 : 0) + 1 + 3 + attitude_dim() + 4; }
  std::size_t u_offset() const { return dim() - 4; }

  std::vector<std::string> names() const {
    std::vector<std::string> n;
    if (include_xy) n.insert(n.end(), {"x", "y"});
    n.insert(n.end(), {"z", "vx", "vy", "vz"});
    if (attitude == AttitudeEncoding::Quaternion) {
      n.insert(n.end(), {"qw", "qx", "qy", "qz"});
    } else {
      for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) n.push_back("R" + std::to_string(r) + std::to_string(c));
    }
    n.insert(n.end(), {"u1", "u2", "u3", "u4"});
    return n;
  }

  std::size_t index_of(const std::string& name) const {
    const auto n = names();
    for (std::size_t i = 0; i < n.size(); ++i)
      if (n[i] == name) return i;
    throw ConfigError("unknown feature '" + name + "'");
  }

  /// Physical-unit feature vector.
  VecX raw(const VehicleState& s, const RotorCommand& u) const {
    VecX x(static_cast<Eigen::Index>(dim()));
    Eigen::Index i = 0;
    if (include_xy) {
      x[i++] = s.p.x();
      x[i++] = s.p.y();
    }
    x[i++] = s.p.z();
    x.segment<3>(i) = s.v;
    i += 3;
    if (attitude == AttitudeEncoding::Quaternion) {
      x.segment<4>(i) = rotation_to_quaternion(s.R);
      i += 4;
    } else {
      for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) x[i++] = s.R(r, c);
    }
    x.segment<4>(i) = u.u;
    return x;
  }

  bool fitted() const {
    return mean.size() == static_cast<Eigen::Index>(dim()) && scale.size() == static_cast<Eigen::Index>(dim());
  }

  VecX normalize(const VecX& raw_x) const {
    if (raw_x.size() != static_cast<Eigen::Index>(dim())) {
      throw DimensionMismatchError("feature vector has " + std::to_string(raw_x.size()) + " entries, expected " +
                                   std::to_string(dim()));
    }
    if (!fitted()) return raw_x;
    return (raw_x - mean).cwiseQuotient(scale);
  }

  /// Column-wise batch normalization; columns are samples.
  MatX normalize_batch(const MatX& raw_cols) const {
    if (!fitted()) return raw_cols;
    return (raw_cols.colwise() - mean).array().colwise() / scale.array();
  }

  /// Smallest scale among the u features (physical RPM^2 per normalized unit).
  double u_scale() const {
    if (!fitted()) return 1.0;
    return scale.tail<4>().minCoeff();
  }

  /// Fits mean and scale from raw samples (columns). u features use the fixed
  /// `u_feature_scale` when positive; every other scale is floored at
  /// `min_scale` so near-constant channels do not blow up.
  void fit(const MatX& raw_cols, double u_feature_scale, double min_scale,
           const std::map<std::string, double>& fixed_scales = {}) {
    if (raw_cols.rows() != static_cast<Eigen::Index>(dim())) throw DimensionMismatchError("fit: wrong feature rows");
    if (raw_cols.cols() == 0) throw EmptyDataError("fit: no samples");
    mean = raw_cols.rowwise().mean();
    scale.resize(mean.size());
    for (Eigen::Index r = 0; r < mean.size(); ++r) {
      const double var = (raw_cols.row(r).array() - mean[r]).square().mean();
      scale[r] = std::max(std::sqrt(var), min_scale);
    }
    if (u_feature_scale > 0.0) scale.tail<4>().setConstant(u_feature_scale);
    for (const auto& [name, value] : fixed_scales) {
      if (!(value > 0.0)) throw ConfigError("feature scale for '" + name + "' must be positive");
      scale[static_cast<Eigen::Index>(index_of(name))] = value;
    }
  }
};

}  // namespace nlander
