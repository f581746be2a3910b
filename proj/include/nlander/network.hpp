// Fully-connected ReLU network with layer-wise spectral normalization.
#pragma once

#include "nlander/common.hpp"
#include "nlander/features.hpp"

#include <random>
#include <string>
#include <vector>

namespace nlander {

enum class Arch {
  FourLayer,  // four ReLU hidden layers
  OneLayer,   // affine map A x + b
  ZeroLayer,  // constant b
};

inline std::string to_string(Arch a) {
  switch (a) {
    case Arch::FourLayer: return "4layer";
    case Arch::OneLayer: return "1layer";
    case Arch::ZeroLayer: return "0layer";
  }
  return "?";
}

inline Arch arch_from_string(const std::string& s) {
  if (s == "4layer") return Arch::FourLayer;
  if (s == "1layer") return Arch::OneLayer;
  if (s == "0layer") return Arch::ZeroLayer;
  throw ConfigError("unknown architecture '" + s + "' (expected 4layer, 1layer or 0layer)");
}

struct SpectralNormResult {
  double sigma = 0.0;
  bool converged = false;
  int iterations = 0;
};

/// Largest singular value of w by power iteration on w^T w. `right` is the
/// warm-start right singular vector and is updated in place; pass an empty
/// vector for a cold start. The estimate is non-decreasing across iterations.
inline SpectralNormResult spectral_norm(const MatX& w, VecX& right, int max_iters = 100, double tol = 1e-6) {
  SpectralNormResult res;
  if (w.size() == 0) return res;
  if (right.size() != w.cols() || !(right.norm() > 0.0)) {
    right = VecX::Ones(w.cols()) / std::sqrt(static_cast<double>(w.cols()));
    // A deterministic perturbation avoids starting orthogonal to structured inputs.
    for (Eigen::Index i = 0; i < right.size(); ++i) right[i] += 1e-3 * static_cast<double>(i % 7);
    right.normalize();
  }
  double prev = (w * right).norm();
  if (prev == 0.0) {
    // Start vector in the null space; pick the column with the largest norm.
    Eigen::Index best = 0;
    w.colwise().norm().maxCoeff(&best);
    right = VecX::Unit(w.cols(), best);
    prev = (w * right).norm();
    if (prev == 0.0) {
      res.converged = true;
      return res;
    }
  }
  for (int k = 0; k < max_iters; ++k) {
    VecX next = w.transpose() * (w * right);
    const double n = next.norm();
    if (n == 0.0) break;
    right = next / n;
    const double sigma = (w * right).norm();
    res.iterations = k + 1;
    const bool done = std::abs(sigma - prev) <= tol * sigma;
    prev = sigma;
    if (done) {
      res.converged = true;
      break;
    }
  }
  res.sigma = prev;
  return res;
}

inline SpectralNormResult spectral_norm(const MatX& w, int max_iters = 100, double tol = 1e-6) {
  VecX right;
  return spectral_norm(w, right, max_iters, tol);
}

struct DenseLayer {
  MatX W;
  VecX b;
  VecX right;          // power-iteration state
  double sigma = 0.0;  // cached spectral norm of W
};

/// The disturbance model f(x; theta) = W^{L+1} phi(W^L ... phi(W^1 x)) (with
/// biases), evaluated on normalized inputs and scaled to newtons.
struct SpecNormNet {
  Arch arch = Arch::FourLayer;
  std::vector<DenseLayer> layers;  // empty for Arch::ZeroLayer
  VecX constant = VecX::Zero(3);   // output of Arch::ZeroLayer, normalized units
  double gamma = 1.0;
  bool spectral_normalization = true;
  FeatureSpec input_spec;
  double output_scale = 1.0;  // N per normalized output unit
  std::string provenance;

  std::size_t input_dim() const { return input_spec.dim(); }
  std::size_t weight_layers() const { return layers.size(); }

  /// Per-layer spectral norm target gamma^(1/(L+1)).
  double layer_target() const {
    return layers.empty() ? 1.0 : std::pow(gamma, 1.0 / static_cast<double>(layers.size()));
  }

  /// Product of cached per-layer spectral norms: the certified Lipschitz bound
  /// in normalized units. Zero for the constant model.
  double certified_bound() const {
    if (layers.empty()) return 0.0;
    double p = 1.0;
    for (const auto& l : layers) p *= l.sigma;
    return p;
  }

  /// Certified Lipschitz constant with respect to the u features only, in N per RPM^2.
  double lipschitz_u() const { return certified_bound() * output_scale / input_spec.u_scale(); }

  /// Forward pass on already-normalized inputs (columns are samples); output
  /// in normalized units.
  MatX forward_normalized(const MatX& x) const {
    if (layers.empty()) return constant.replicate(1, x.cols());
    if (x.rows() != layers.front().W.cols()) {
      throw DimensionMismatchError("network expects " + std::to_string(layers.front().W.cols()) + " inputs, got " +
                                   std::to_string(x.rows()));
    }
    MatX a = x;
    for (std::size_t l = 0; l < layers.size(); ++l) {
      MatX z = (layers[l].W * a).colwise() + layers[l].b;
      if (l + 1 < layers.size()) z = z.cwiseMax(0.0);
      a = std::move(z);
    }
    return a;
  }

  /// Prediction in newtons from a physical-unit feature vector.
  Vec3 forward(const VecX& raw_features) const {
    const VecX x = input_spec.normalize(raw_features);
    return output_scale * forward_normalized(x).col(0).head<3>();
  }

  Vec3 predict(const VehicleState& s, const RotorCommand& u) const { return forward(input_spec.raw(s, u)); }
};

/// Recomputes every layer's spectral norm and rescales W <- W / sigma(W) *
/// gamma^(1/(L+1)).
inline void normalize_layers(SpecNormNet& net, int max_iters = 100, double tol = 1e-6) {
  const double target = net.layer_target();
  for (auto& l : net.layers) {
    const auto r = spectral_norm(l.W, l.right, max_iters, tol);
    if (!(r.sigma > 0.0)) throw ZeroLayerError("cannot spectrally normalize an all-zero weight matrix");
    l.W *= target / r.sigma;
    l.sigma = target;
  }
}

/// Refreshes the cached per-layer spectral norms without rescaling.
inline void refresh_spectral_norms(SpecNormNet& net, int max_iters = 1000, double tol = 1e-13) {
  for (auto& l : net.layers) l.sigma = spectral_norm(l.W, l.right, max_iters, tol).sigma;
}

/// Builds an untrained network with He-uniform weights and zero biases.
inline SpecNormNet make_network(Arch arch, const FeatureSpec& spec, int hidden_width, double gamma,
                                bool spectral_normalization, std::uint64_t seed) {
  SpecNormNet net;
  net.arch = arch;
  net.input_spec = spec;
  net.gamma = gamma;
  net.spectral_normalization = spectral_normalization;
  std::vector<int> dims;
  const int in = static_cast<int>(spec.dim());
  switch (arch) {
    case Arch::FourLayer: dims = {in, hidden_width, hidden_width, hidden_width, hidden_width, 3}; break;
    case Arch::OneLayer: dims = {in, 3}; break;
    case Arch::ZeroLayer: break;
  }
  std::mt19937_64 rng(seed);
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    DenseLayer layer;
    const double bound = std::sqrt(6.0 / dims[l]);
    std::uniform_real_distribution<double> dist(-bound, bound);
    layer.W.resize(dims[l + 1], dims[l]);
    for (Eigen::Index i = 0; i < layer.W.size(); ++i) layer.W.data()[i] = dist(rng);
    layer.b = VecX::Zero(dims[l + 1]);
    layer.sigma = spectral_norm(layer.W, layer.right, 1000, 1e-12).sigma;
    net.layers.push_back(std::move(layer));
  }
  return net;
}

enum class LossKind {
  MeanSquared,  // mean of squared residual norms
  MeanNorm,     // mean of residual 2-norms
};

inline LossKind loss_from_string(const std::string& s) {
  if (s == "mse") return LossKind::MeanSquared;
  if (s == "l2norm") return LossKind::MeanNorm;
  throw ConfigError("unknown loss '" + s + "' (expected mse or l2norm)");
}

inline std::string to_string(LossKind k) { return k == LossKind::MeanSquared ? "mse" : "l2norm"; }

/// Parameter gradients, laid out like the network.
struct NetGradient {
  std::vector<MatX> dW;
  std::vector<VecX> db;
  VecX dconstant;
};

/// Loss over a batch in normalized units (x: inputs x batch, y: 3 x batch).
inline double batch_loss(const SpecNormNet& net, const MatX& x, const MatX& y, LossKind kind) {
  const MatX r = net.forward_normalized(x) - y;
  const VecX norms = r.colwise().norm();
  const double n = static_cast<double>(x.cols());
  return kind == LossKind::MeanSquared ? norms.squaredNorm() / n : norms.sum() / n;
}

/// Loss and its gradient by backpropagation.
inline double loss_and_gradient(const SpecNormNet& net, const MatX& x, const MatX& y, LossKind kind,
                                NetGradient& grad) {
  const double n = static_cast<double>(x.cols());
  if (net.layers.empty()) {
    const MatX r = net.constant.replicate(1, x.cols()) - y;
    const VecX norms = r.colwise().norm();
    MatX d(r.rows(), r.cols());
    if (kind == LossKind::MeanSquared) {
      d = 2.0 * r / n;
    } else {
      for (Eigen::Index c = 0; c < r.cols(); ++c) d.col(c) = norms[c] > 0.0 ? VecX(r.col(c) / (n * norms[c])) : VecX::Zero(r.rows());
    }
    grad.dW.clear();
    grad.db.clear();
    grad.dconstant = d.rowwise().sum();
    return kind == LossKind::MeanSquared ? norms.squaredNorm() / n : norms.sum() / n;
  }

  const std::size_t L = net.layers.size();
  std::vector<MatX> acts(L + 1);  // acts[l] is the input of layer l
  std::vector<MatX> pre(L);
  acts[0] = x;
  for (std::size_t l = 0; l < L; ++l) {
    pre[l] = (net.layers[l].W * acts[l]).colwise() + net.layers[l].b;
    acts[l + 1] = l + 1 < L ? MatX(pre[l].cwiseMax(0.0)) : pre[l];
  }
  const MatX r = acts[L] - y;
  const VecX norms = r.colwise().norm();
  MatX delta(r.rows(), r.cols());
  double loss = 0.0;
  if (kind == LossKind::MeanSquared) {
    delta = 2.0 * r / n;
    loss = norms.squaredNorm() / n;
  } else {
    for (Eigen::Index c = 0; c < r.cols(); ++c)
      delta.col(c) = norms[c] > 0.0 ? VecX(r.col(c) / (n * norms[c])) : VecX::Zero(r.rows());
    loss = norms.sum() / n;
  }
  grad.dW.assign(L, MatX());
  grad.db.assign(L, VecX());
  grad.dconstant = VecX::Zero(3);
  for (std::size_t l = L; l-- > 0;) {
    grad.dW[l] = delta * acts[l].transpose();
    grad.db[l] = delta.rowwise().sum();
    if (l > 0) {
      delta = (net.layers[l].W.transpose() * delta).cwiseProduct((pre[l - 1].array() > 0.0).cast<double>().matrix());
    }
  }
  return loss;
}

}  // namespace nlander
