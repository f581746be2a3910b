#include "nlander/audit.hpp"
#include "nlander/network.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace nlander;

namespace {

MatX random_matrix(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols) {
  std::normal_distribution<double> n(0.0, 1.0);
  MatX m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

FeatureSpec unit_spec() {
  FeatureSpec s;
  return s;
}

}  // namespace

TEST(SpectralNorm, MatchesDenseSvdOnRandomMatrices) {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> dim(1, 64);
  for (int k = 0; k < 50; ++k) {
    const MatX w = random_matrix(rng, dim(rng), dim(rng));
    const double oracle = Eigen::JacobiSVD<MatX>(w).singularValues()(0);
    const double est = spectral_norm(w, 20000, 1e-14).sigma;
    EXPECT_NEAR(est, oracle, 1e-5 * oracle) << "case " << k;
  }
}

TEST(SpectralNorm, DiagonalMatrixGivesLargestEntry) {
  MatX w = MatX::Zero(3, 3);
  w.diagonal() << 0.5, -3.0, 2.0;
  EXPECT_NEAR(spectral_norm(w, 1000, 1e-14).sigma, 3.0, 1e-9);
}

TEST(SpectralNorm, ZeroMatrixIsZeroAndCannotBeNormalized) {
  EXPECT_EQ(spectral_norm(MatX::Zero(4, 3)).sigma, 0.0);
  SpecNormNet net = make_network(Arch::OneLayer, unit_spec(), 8, 2.0, true, 1);
  net.layers[0].W.setZero();
  EXPECT_THROW(normalize_layers(net), ZeroLayerError);
}

TEST(SpectralNorm, EstimateNeverDecreasesWithMoreIterations) {
  std::mt19937_64 rng(9);
  const MatX w = random_matrix(rng, 20, 30);
  double prev = 0.0;
  for (int it = 1; it < 40; ++it) {
    const double s = spectral_norm(w, it, 0.0).sigma;
    EXPECT_GE(s, prev - 1e-12);
    prev = s;
  }
}

TEST(SpecNormNet, ProductOfLayerNormsEqualsGammaAfterNormalization) {
  for (double gamma : {0.5, 4.0, 649.0}) {
    SpecNormNet net = make_network(Arch::FourLayer, unit_spec(), 32, gamma, true, 3);
    normalize_layers(net, 5000, 1e-15);
    refresh_spectral_norms(net);
    EXPECT_LE(net.certified_bound(), gamma + 1e-6);
    EXPECT_NEAR(net.certified_bound(), gamma, 1e-6 * gamma);
  }
}

TEST(SpecNormNet, SampledDifferenceQuotientsStayBelowCertifiedBound) {
  SpecNormNet net = make_network(Arch::FourLayer, unit_spec(), 32, 3.0, true, 4);
  for (auto& l : net.layers) l.b.setConstant(0.1);
  normalize_layers(net, 5000, 1e-15);
  const LipschitzAudit a = audit_lipschitz(net, SampleDomain::cube(net.input_dim(), 3.0), 4000, 8);
  EXPECT_LE(a.empirical_estimate, 3.0 * (1.0 + 1e-4));
  EXPECT_GT(a.empirical_estimate, 0.0);
}

TEST(SpecNormNet, ZeroLayerNetIsConstant) {
  SpecNormNet net = make_network(Arch::ZeroLayer, unit_spec(), 32, 1.0, true, 1);
  net.constant = Vec3(1.0, -2.0, 3.0);
  const MatX out = net.forward_normalized(MatX::Random(12, 5));
  for (Eigen::Index c = 0; c < out.cols(); ++c) EXPECT_TRUE(out.col(c).isApprox(net.constant));
  EXPECT_EQ(net.certified_bound(), 0.0);
}

TEST(SpecNormNet, WrongInputWidthThrows) {
  SpecNormNet net = make_network(Arch::OneLayer, unit_spec(), 8, 1.0, true, 1);
  EXPECT_THROW(net.forward_normalized(MatX::Zero(5, 1)), DimensionMismatchError);
  EXPECT_THROW(net.forward(VecX::Zero(3)), DimensionMismatchError);
}

TEST(SpecNormNet, ArchitectureShapes) {
  const FeatureSpec s = unit_spec();
  EXPECT_EQ(make_network(Arch::FourLayer, s, 32, 1.0, true, 1).layers.size(), 5u);
  EXPECT_EQ(make_network(Arch::OneLayer, s, 32, 1.0, true, 1).layers.size(), 1u);
  EXPECT_EQ(make_network(Arch::ZeroLayer, s, 32, 1.0, true, 1).layers.size(), 0u);
  EXPECT_THROW(arch_from_string("2layer"), ConfigError);
  EXPECT_EQ(arch_from_string(to_string(Arch::OneLayer)), Arch::OneLayer);
}

/// Central finite differences over every parameter of a small network.
TEST(Backprop, MatchesCentralDifferences) {
  std::mt19937_64 rng(17);
  std::uniform_int_distribution<int> arch_pick(0, 2);
  std::uniform_int_distribution<int> batch(1, 6);
  int checked = 0;
  for (int k = 0; k < 100; ++k) {
    const Arch arch = static_cast<Arch>(arch_pick(rng));
    const LossKind loss = k % 2 ? LossKind::MeanNorm : LossKind::MeanSquared;
    SpecNormNet net = make_network(arch, unit_spec(), 6, 1.0, false, 100 + k);
    for (auto& l : net.layers) l.b = 0.3 * random_matrix(rng, l.b.size(), 1);
    net.constant = random_matrix(rng, 3, 1);
    const int n = batch(rng);
    const MatX x = random_matrix(rng, 12, n);
    const MatX y = random_matrix(rng, 3, n);
    NetGradient g;
    loss_and_gradient(net, x, y, loss, g);
    const double h = 1e-6;
    const auto check = [&](double& param, double analytic) {
      const double keep = param;
      param = keep + h;
      const double up = batch_loss(net, x, y, loss);
      param = keep - h;
      const double down = batch_loss(net, x, y, loss);
      param = keep;
      const double fd = (up - down) / (2.0 * h);
      EXPECT_LE(std::abs(fd - analytic), 1e-4 * std::max(1.0, std::abs(fd))) << "case " << k;
      ++checked;
    };
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
      for (Eigen::Index i = 0; i < net.layers[l].W.size(); i += 3) check(net.layers[l].W.data()[i], g.dW[l].data()[i]);
      for (Eigen::Index i = 0; i < net.layers[l].b.size(); ++i) check(net.layers[l].b[i], g.db[l][i]);
    }
    if (net.layers.empty())
      for (Eigen::Index i = 0; i < 3; ++i) check(net.constant[i], g.dconstant[i]);
  }
  EXPECT_GT(checked, 1000);
}

TEST(Jacobian, MatchesFiniteDifferencesAwayFromKinks) {
  SpecNormNet net = make_network(Arch::FourLayer, unit_spec(), 16, 2.0, true, 21);
  normalize_layers(net);
  const VecX x = VecX::LinSpaced(12, -1.0, 1.0);
  const MatX j = network_jacobian(net, x);
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    VecX a = x, b = x;
    a[i] += 1e-7;
    b[i] -= 1e-7;
    const VecX fd = (net.forward_normalized(a) - net.forward_normalized(b)) / 2e-7;
    EXPECT_LE((fd - j.col(i)).norm(), 1e-5);
  }
}
