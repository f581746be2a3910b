#include "nlander/train.hpp"

#include <gtest/gtest.h>

#include <functional>
#include <random>

using namespace nlander;

namespace {

TrainingSet synthetic_set(int n, std::uint64_t seed, const std::function<Vec3(const VecX&)>& f) {
  TrainingSet set;
  set.features.resize(static_cast<Eigen::Index>(set.spec.dim()), n);
  set.targets.resize(3, n);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  for (int c = 0; c < n; ++c) {
    VecX x(set.features.rows());
    for (Eigen::Index i = 0; i < x.size(); ++i) x[i] = unit(rng);
    x.tail<4>() = (4e6 + 1e6 * x.tail<4>().array()).matrix();
    set.features.col(c) = x;
    set.targets.col(c) = f(x);
  }
  set.split(0.2, seed);
  return set;
}

}  // namespace

TEST(Train, ZeroLayerBiasConvergesToTargetMean) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> noise(0.0, 0.5);
  TrainingSet set = synthetic_set(2000, 4, [&](const VecX&) { return Vec3(1.0 + noise(rng), -2.0 + noise(rng), 3.0 + noise(rng)); });
  set.split(0.0, 1);
  const Vec3 mean = set.targets.rowwise().mean();
  TrainConfig cfg;
  cfg.arch = Arch::ZeroLayer;
  cfg.validation_fraction = 0.0;
  cfg.epochs = 300;
  cfg.learning_rate = 0.05;
  cfg.lr_decay = 0.98;
  const TrainResult res = train(set, cfg);
  EXPECT_LE((res.net.constant * cfg.force_scale - mean).norm(), 1e-3);
}

TEST(Train, SpectralNormalizationHoldsTheCertifiedBound) {
  TrainingSet set = synthetic_set(1500, 5, [](const VecX& x) { return Vec3(0.0, 0.0, 3.0 * std::sin(2.0 * x[0])); });
  TrainConfig cfg;
  cfg.epochs = 20;
  cfg.gamma = 5.0;
  const TrainResult res = train(set, cfg);
  SpecNormNet net = res.net;
  refresh_spectral_norms(net);
  EXPECT_LE(net.certified_bound(), cfg.gamma + 1e-6);
}

TEST(Train, FitsASmoothFunction) {
  TrainingSet set = synthetic_set(3000, 6, [](const VecX& x) { return Vec3(0.5 * x[1], 0.0, 2.0 * x[0] * x[0]); });
  TrainConfig cfg;
  cfg.epochs = 400;
  cfg.gamma = 50.0;
  cfg.fixed_feature_scales.clear();
  cfg.u_feature_scale = 5e5;
  const TrainResult res = train(set, cfg);
  EXPECT_LT(res.stats.val_rmse, 0.1);
  EXPECT_GT(res.stats.epsilon_m, res.stats.val_rmse);
}

TEST(Train, SameSeedGivesIdenticalWeights) {
  TrainingSet set = synthetic_set(600, 7, [](const VecX& x) { return Vec3(x[0], x[1], x[2]); });
  TrainConfig cfg;
  cfg.epochs = 5;
  cfg.gamma = 3.0;
  const TrainResult a = train(set, cfg);
  const TrainResult b = train(set, cfg);
  ASSERT_EQ(a.net.layers.size(), b.net.layers.size());
  for (std::size_t l = 0; l < a.net.layers.size(); ++l) EXPECT_TRUE(a.net.layers[l].W == b.net.layers[l].W);
}

TEST(Train, RefusesGammaThatBreaksTheContractionCertificate) {
  TrainingSet set = synthetic_set(100, 8, [](const VecX&) { return Vec3::Zero(); });
  TrainConfig cfg;
  cfg.contraction_gain = 3.467e7;
  cfg.gamma = gamma_for_contraction(1.01, cfg.contraction_gain, cfg.u_feature_scale, cfg.force_scale);
  EXPECT_THROW(train(set, cfg), ContractionViolationError);
  cfg.gamma = gamma_for_contraction(0.9, cfg.contraction_gain, cfg.u_feature_scale, cfg.force_scale);
  EXPECT_NEAR(planned_contraction_ratio(cfg), 0.9, 1e-12);
}

TEST(Train, EmptyAndMismatchedData) {
  TrainingSet empty;
  empty.features.resize(12, 0);
  empty.targets.resize(3, 0);
  EXPECT_THROW(train(empty, TrainConfig{}), EmptyDataError);
  TrainingSet bad = synthetic_set(10, 9, [](const VecX&) { return Vec3::Zero(); });
  bad.targets.resize(3, 5);
  EXPECT_THROW(train(bad, TrainConfig{}), DimensionMismatchError);
}

TEST(Train, DivergingLearningRateReportsNonFiniteLoss) {
  TrainingSet set = synthetic_set(200, 10, [](const VecX& x) { return Vec3(1e3 * x[0], 0.0, 0.0); });
  TrainConfig cfg;
  cfg.spectral_normalization = false;
  cfg.optimizer = OptimizerKind::Sgd;
  cfg.learning_rate = 1e6;
  cfg.epochs = 50;
  EXPECT_THROW(train(set, cfg), NonFiniteLossError);
}

TEST(TrainingSet, SplitIsDeterministicAndSized) {
  TrainingSet set = synthetic_set(1000, 11, [](const VecX&) { return Vec3::Zero(); });
  set.split(0.25, 42);
  const auto v1 = set.is_validation;
  set.split(0.25, 42);
  EXPECT_EQ(v1, set.is_validation);
  EXPECT_EQ(set.indices(true).size(), 250u);
}
