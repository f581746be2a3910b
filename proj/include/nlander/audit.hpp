// Empirical and certified Lipschitz checks for trained networks.
#pragma once

#include "nlander/network.hpp"

#include <random>

namespace nlander {

struct LipschitzAudit {
  double certified_bound = 0.0;     // prod sigma(W^l), normalized units
  double empirical_estimate = 0.0;  // max sampled difference quotient / Jacobian norm
  double pair_estimate = 0.0;       // random-pair part of the estimate
  double gradient_estimate = 0.0;   // Jacobian part of the estimate
  double lipschitz_u = 0.0;         // certified, N per RPM^2
};

/// Jacobian of the normalized network at normalized input x (3 x input_dim).
inline MatX network_jacobian(const SpecNormNet& net, const VecX& x) {
  if (net.layers.empty()) return MatX::Zero(3, x.size());
  MatX jac = MatX::Identity(x.size(), x.size());
  VecX a = x;
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    VecX z = net.layers[l].W * a + net.layers[l].b;
    jac = net.layers[l].W * jac;
    if (l + 1 < net.layers.size()) {
      for (Eigen::Index i = 0; i < z.size(); ++i) {
        if (z[i] <= 0.0) {
          jac.row(i).setZero();
          z[i] = 0.0;
        }
      }
    }
    a = z;
  }
  return jac;
}

/// Box in normalized input space from which audit samples are drawn.
struct SampleDomain {
  VecX lo;
  VecX hi;

  static SampleDomain cube(std::size_t dim, double half_width) {
    return {VecX::Constant(static_cast<Eigen::Index>(dim), -half_width),
            VecX::Constant(static_cast<Eigen::Index>(dim), half_width)};
  }
};

inline LipschitzAudit audit_lipschitz(SpecNormNet net, const SampleDomain& domain, int n_pairs, std::uint64_t seed) {
  refresh_spectral_norms(net);
  LipschitzAudit audit;
  audit.certified_bound = net.certified_bound();
  audit.lipschitz_u = net.lipschitz_u();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const auto dim = static_cast<Eigen::Index>(net.input_dim());
  const auto draw = [&] {
    VecX x(dim);
    for (Eigen::Index i = 0; i < dim; ++i) x[i] = domain.lo[i] + (domain.hi[i] - domain.lo[i]) * unit(rng);
    return x;
  };
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int k = 0; k < n_pairs; ++k) {
    const VecX x = draw();
    // Half of the pairs are close neighbours, which probe local slopes.
    VecX x2;
    if (k % 2 == 0) {
      x2 = draw();
    } else {
      VecX d(dim);
      for (Eigen::Index i = 0; i < dim; ++i) d[i] = gauss(rng);
      x2 = x + 1e-3 * d;
    }
    const double dx = (x - x2).norm();
    if (dx == 0.0) continue;
    const double df = (net.forward_normalized(x) - net.forward_normalized(x2)).norm();
    audit.pair_estimate = std::max(audit.pair_estimate, df / dx);
    if (k % 10 == 0) {
      const MatX j = network_jacobian(net, x);
      Eigen::JacobiSVD<MatX> svd(j);
      audit.gradient_estimate = std::max(audit.gradient_estimate, svd.singularValues()(0));
    }
  }
  audit.empirical_estimate = std::max(audit.pair_estimate, audit.gradient_estimate);
  return audit;
}

}  // namespace nlander
