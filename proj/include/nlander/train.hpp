// Lipschitz-constrained training of the disturbance network.
#pragma once

#include "nlander/common.hpp"
#include "nlander/network.hpp"

#include <algorithm>
#include <numeric>
#include <random>
#include <sstream>
#include <map>
#include <vector>

namespace nlander {

/// Labelled samples. Columns of `features` are physical-unit feature vectors
/// laid out per `spec`; columns of `targets` are observed f_a in newtons.
struct TrainingSet {
  FeatureSpec spec;
  MatX features;
  MatX targets;
  std::vector<bool> is_validation;

  std::size_t size() const { return static_cast<std::size_t>(features.cols()); }

  /// Random train/validation split, deterministic in `seed`.
  void split(double validation_fraction, std::uint64_t seed) {
    is_validation.assign(size(), false);
    std::vector<std::size_t> idx(size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::mt19937_64 rng(seed);
    std::shuffle(idx.begin(), idx.end(), rng);
    const auto n_val = static_cast<std::size_t>(validation_fraction * static_cast<double>(size()));
    for (std::size_t i = 0; i < n_val; ++i) is_validation[idx[i]] = true;
  }

  std::vector<std::size_t> indices(bool validation) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < size(); ++i)
      if ((i < is_validation.size() && is_validation[i]) == validation) out.push_back(i);
    return out;
  }

  static TrainingSet concat(const std::vector<TrainingSet>& parts) {
    TrainingSet out;
    if (parts.empty()) return out;
    out.spec = parts.front().spec;
    Eigen::Index n = 0;
    for (const auto& p : parts) n += p.features.cols();
    out.features.resize(static_cast<Eigen::Index>(out.spec.dim()), n);
    out.targets.resize(3, n);
    Eigen::Index c = 0;
    for (const auto& p : parts) {
      if (p.spec.dim() != out.spec.dim()) throw DimensionMismatchError("concat: feature layouts differ");
      out.features.middleCols(c, p.features.cols()) = p.features;
      out.targets.middleCols(c, p.targets.cols()) = p.targets;
      out.is_validation.insert(out.is_validation.end(), p.is_validation.begin(), p.is_validation.end());
      out.is_validation.resize(static_cast<std::size_t>(c + p.features.cols()), false);
      c += p.features.cols();
    }
    return out;
  }
};

enum class OptimizerKind { Adam, Sgd };

struct TrainConfig {
  Arch arch = Arch::FourLayer;
  int hidden_width = 32;
  double gamma = 1.0;
  bool spectral_normalization = true;
  OptimizerKind optimizer = OptimizerKind::Adam;
  double learning_rate = 1e-3;
  double lr_decay = 0.99;  // multiplicative, per epoch
  double momentum = 0.9;   // sgd only
  int batch_size = 256;
  int epochs = 200;
  LossKind loss = LossKind::MeanSquared;
  std::uint64_t seed = 1;
  double validation_fraction = 0.2;
  double u_feature_scale = 5e10;  // RPM^2 per normalized unit
  double min_feature_scale = 1e-2;
  /// Per-feature scales that replace the fitted standard deviation. A small z
  /// scale gives the Lipschitz budget room for the steep near-ground gradient.
  std::map<std::string, double> fixed_feature_scales = {{"z", 0.05}};
  double force_scale = 1.0;      // N per normalized output unit
  int sn_iters = 20;             // power iterations per optimizer step (warm-started)
  /// sigma(B0^-1); when positive, training refuses a gamma whose certified
  /// contraction ratio sigma(B0^-1) * L_a_u is not below one.
  double contraction_gain = 0.0;
};

struct TrainStats {
  std::vector<double> train_loss;  // per epoch, normalized units
  std::vector<double> val_loss;
  double train_rmse = 0.0;         // N, root mean squared residual norm
  double val_rmse = 0.0;
  double train_max_error = 0.0;    // N
  double val_max_error = 0.0;
  double val_mean_error = 0.0;
  double train_mean_error = 0.0;
  /// Estimate of the sup learning error: largest validation error plus the
  /// train/validation RMSE gap.
  double epsilon_m = 0.0;
};

struct TrainResult {
  SpecNormNet net;
  TrainStats stats;
};

/// Certified contraction ratio sigma(B0^-1) * L_a_u a network trained with
/// this configuration will have.
inline double planned_contraction_ratio(const TrainConfig& cfg) {
  if (cfg.arch == Arch::ZeroLayer) return 0.0;
  return cfg.contraction_gain * cfg.gamma * cfg.force_scale / cfg.u_feature_scale;
}

/// Largest gamma for which the certified contraction ratio equals `target`.
inline double gamma_for_contraction(double target, double contraction_gain, double u_feature_scale,
                                    double force_scale) {
  return target * u_feature_scale / (contraction_gain * force_scale);
}

namespace detail {

struct AdamSlot {
  MatX m, v;
};

inline void adam_update(MatX& param, const MatX& g, AdamSlot& slot, double lr, int t) {
  constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  if (slot.m.size() == 0) {
    slot.m = MatX::Zero(g.rows(), g.cols());
    slot.v = MatX::Zero(g.rows(), g.cols());
  }
  slot.m = b1 * slot.m + (1.0 - b1) * g;
  slot.v = b2 * slot.v + (1.0 - b2) * g.cwiseAbs2();
  const double c1 = 1.0 - std::pow(b1, t);
  const double c2 = 1.0 - std::pow(b2, t);
  param.array() -= lr * (slot.m.array() / c1) / ((slot.v.array() / c2).sqrt() + eps);
}

inline void sgd_update(MatX& param, const MatX& g, AdamSlot& slot, double lr, double momentum) {
  if (slot.m.size() == 0) slot.m = MatX::Zero(g.rows(), g.cols());
  slot.m = momentum * slot.m + g;
  param -= lr * slot.m;
}

inline void residual_stats(const MatX& residual_n, double& rmse, double& max_err, double& mean_err) {
  if (residual_n.cols() == 0) {
    rmse = max_err = mean_err = 0.0;
    return;
  }
  const VecX norms = residual_n.colwise().norm();
  rmse = std::sqrt(norms.squaredNorm() / static_cast<double>(norms.size()));
  max_err = norms.maxCoeff();
  mean_err = norms.mean();
}

}  // namespace detail

/// Mini-batch training with the spectral normalization projection applied
/// after every optimizer step. Deterministic in `cfg.seed`.
inline TrainResult train(const TrainingSet& data, const TrainConfig& cfg) {
  if (data.size() == 0) throw EmptyDataError("training set is empty");
  if (data.targets.cols() != data.features.cols()) throw DimensionMismatchError("features/targets size mismatch");
  if (cfg.spectral_normalization && cfg.contraction_gain > 0.0) {
    const double ratio = planned_contraction_ratio(cfg);
    if (ratio >= 1.0) {
      std::ostringstream os;
      os << "gamma = " << cfg.gamma << " gives certified contraction ratio sigma(B0^-1)*L_a_u = " << ratio
         << " >= 1; lower gamma below "
         << gamma_for_contraction(1.0, cfg.contraction_gain, cfg.u_feature_scale, cfg.force_scale);
      throw ContractionViolationError(os.str());
    }
  }

  std::vector<std::size_t> train_idx = data.indices(false);
  const std::vector<std::size_t> val_idx = data.indices(true);
  if (train_idx.empty()) throw EmptyDataError("no training samples after the validation split");

  FeatureSpec spec = data.spec;
  {
    MatX train_raw(data.features.rows(), static_cast<Eigen::Index>(train_idx.size()));
    for (std::size_t i = 0; i < train_idx.size(); ++i)
      train_raw.col(static_cast<Eigen::Index>(i)) = data.features.col(static_cast<Eigen::Index>(train_idx[i]));
    spec.fit(train_raw, cfg.u_feature_scale, cfg.min_feature_scale, cfg.fixed_feature_scales);
  }
  const MatX x_all = spec.normalize_batch(data.features);
  const MatX y_all = data.targets / cfg.force_scale;

  TrainResult result;
  SpecNormNet& net = result.net;
  net = make_network(cfg.arch, spec, cfg.hidden_width, cfg.gamma, cfg.spectral_normalization, cfg.seed);
  net.output_scale = cfg.force_scale;
  if (cfg.spectral_normalization) normalize_layers(net, 1000, 1e-12);

  const std::size_t L = net.layers.size();
  std::vector<detail::AdamSlot> w_slots(L), b_slots(L);
  detail::AdamSlot c_slot;
  std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  const auto gather = [&](const std::vector<std::size_t>& idx, std::size_t from, std::size_t to, MatX& x, MatX& y) {
    const auto n = static_cast<Eigen::Index>(to - from);
    x.resize(x_all.rows(), n);
    y.resize(3, n);
    for (Eigen::Index c = 0; c < n; ++c) {
      const auto j = static_cast<Eigen::Index>(idx[from + static_cast<std::size_t>(c)]);
      x.col(c) = x_all.col(j);
      y.col(c) = y_all.col(j);
    }
  };
  MatX x_val, y_val;
  gather(val_idx, 0, val_idx.size(), x_val, y_val);

  NetGradient grad;
  int step = 0;
  double lr = cfg.learning_rate;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(train_idx.begin(), train_idx.end(), rng);
    double epoch_loss = 0.0;
    std::size_t seen = 0;
    for (std::size_t from = 0; from < train_idx.size(); from += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t to = std::min(train_idx.size(), from + static_cast<std::size_t>(cfg.batch_size));
      MatX xb, yb;
      gather(train_idx, from, to, xb, yb);
      const double loss = loss_and_gradient(net, xb, yb, cfg.loss, grad);
      if (!std::isfinite(loss)) {
        std::ostringstream os;
        os << "non-finite training loss at epoch " << epoch << ", step " << step << " (lr = " << lr << ")";
        throw NonFiniteLossError(os.str());
      }
      epoch_loss += loss * static_cast<double>(to - from);
      seen += to - from;
      ++step;
      // Spectrally normalized weights have entries of order layer_target(); the
      // weight step is scaled to match.
      const double w_lr = cfg.spectral_normalization ? lr * net.layer_target() : lr;
      for (std::size_t l = 0; l < L; ++l) {
        MatX bcol = net.layers[l].b;
        if (cfg.optimizer == OptimizerKind::Adam) {
          detail::adam_update(net.layers[l].W, grad.dW[l], w_slots[l], w_lr, step);
          detail::adam_update(bcol, grad.db[l], b_slots[l], lr, step);
        } else {
          detail::sgd_update(net.layers[l].W, grad.dW[l], w_slots[l], w_lr, cfg.momentum);
          detail::sgd_update(bcol, grad.db[l], b_slots[l], lr, cfg.momentum);
        }
        net.layers[l].b = bcol;
      }
      if (L == 0) {
        MatX c = net.constant;
        if (cfg.optimizer == OptimizerKind::Adam) {
          detail::adam_update(c, grad.dconstant, c_slot, lr, step);
        } else {
          detail::sgd_update(c, grad.dconstant, c_slot, lr, cfg.momentum);
        }
        net.constant = c;
      }
      if (cfg.spectral_normalization) normalize_layers(net, cfg.sn_iters, 1e-9);
    }
    result.stats.train_loss.push_back(epoch_loss / static_cast<double>(seen));
    result.stats.val_loss.push_back(x_val.cols() > 0 ? batch_loss(net, x_val, y_val, cfg.loss) : 0.0);
    lr *= cfg.lr_decay;
  }

  if (cfg.spectral_normalization) {
    normalize_layers(net, 5000, 1e-15);
  }
  refresh_spectral_norms(net);

  // Residual statistics in newtons.
  MatX x_tr, y_tr;
  gather(train_idx, 0, train_idx.size(), x_tr, y_tr);
  auto& st = result.stats;
  detail::residual_stats((net.forward_normalized(x_tr) - y_tr) * cfg.force_scale, st.train_rmse, st.train_max_error,
                         st.train_mean_error);
  if (x_val.cols() > 0) {
    detail::residual_stats((net.forward_normalized(x_val) - y_val) * cfg.force_scale, st.val_rmse, st.val_max_error,
                           st.val_mean_error);
  }
  st.epsilon_m = std::max(st.val_max_error, st.train_max_error) + std::abs(st.val_rmse - st.train_rmse);
  return result;
}

}  // namespace nlander
