#include "nlander/control.hpp"
#include "nlander/features.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace nlander;

namespace {

/// f_hat = a * sum(u) along world z; Lipschitz constant 2a in the 2-norm.
class LinearModel final : public DisturbanceModel {
 public:
  explicit LinearModel(double a) : a_(a) {}
  Vec3 predict(const VehicleState&, const RotorCommand& u) const override { return Vec3(0.0, 0.0, a_ * u.u.sum()); }
  std::optional<double> lipschitz_u() const override { return 2.0 * a_; }
  std::string name() const override { return "linear"; }

 private:
  double a_;
};

}  // namespace

TEST(Features, DimensionsPerEncoding) {
  FeatureSpec s;
  EXPECT_EQ(s.dim(), 12u);
  s.attitude = AttitudeEncoding::RotationMatrix;
  EXPECT_EQ(s.dim(), 17u);
  s.attitude = AttitudeEncoding::Quaternion;
  s.include_xy = true;
  EXPECT_EQ(s.dim(), 14u);
  EXPECT_EQ(s.names().size(), s.dim());
  EXPECT_EQ(s.index_of("z"), 2u);
  EXPECT_THROW(s.index_of("nope"), ConfigError);
}

TEST(Features, RawVectorLayout) {
  FeatureSpec s;
  s.attitude = AttitudeEncoding::RotationMatrix;
  VehicleState x;
  x.p = Vec3(1.0, 2.0, 3.0);
  x.v = Vec3(4.0, 5.0, 6.0);
  x.R = rotation_about(Vec3(0.3, -0.2, 1.0), 0.7);
  const RotorCommand u{Vec4(1.0, 2.0, 3.0, 4.0)};
  const VecX r = s.raw(x, u);
  EXPECT_EQ(r[0], 3.0);
  EXPECT_EQ(r.segment<3>(1), x.v);
  EXPECT_EQ(r[static_cast<Eigen::Index>(s.index_of("R12"))], x.R(1, 2));
  EXPECT_EQ(r.tail<4>(), u.u);
}

TEST(Features, QuaternionHasNonNegativeScalarPart) {
  FeatureSpec s;
  VehicleState x;
  x.R = rotation_about(Vec3(1.0, 0.0, 0.0), 3.0);
  const VecX r = s.raw(x, RotorCommand{});
  EXPECT_GE(r[4], 0.0);
  EXPECT_NEAR(r.segment<4>(4).norm(), 1.0, 1e-12);
}

TEST(Features, FitNormalizesToZeroMeanUnitScale) {
  FeatureSpec s;
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0.0, 1.0);
  MatX raw(12, 500);
  for (Eigen::Index i = 0; i < raw.size(); ++i) raw.data()[i] = 5.0 + 2.0 * n(rng);
  s.fit(raw, 0.0, 1e-2, {});
  const MatX z = s.normalize_batch(raw);
  for (Eigen::Index r = 0; r < 12; ++r) {
    EXPECT_NEAR(z.row(r).mean(), 0.0, 1e-12);
    EXPECT_NEAR(std::sqrt(z.row(r).array().square().mean()), 1.0, 1e-12);
  }
  EXPECT_NEAR((s.normalize(raw.col(7)) - z.col(7)).norm(), 0.0, 1e-12);
}

TEST(Features, FixedAndFlooredScales) {
  FeatureSpec s;
  MatX raw = MatX::Ones(12, 10);
  s.fit(raw, 5e10, 1e-2, {{"z", 0.05}});
  EXPECT_EQ(s.scale[0], 0.05);
  EXPECT_EQ(s.scale[1], 1e-2);
  EXPECT_EQ(s.u_scale(), 5e10);
  EXPECT_THROW(s.fit(raw, 0.0, 1e-2, {{"z", -1.0}}), ConfigError);
  EXPECT_THROW(s.normalize(VecX::Zero(3)), DimensionMismatchError);
}

TEST(Composite, NonIntegralIsVelocityErrorPlusLambdaPositionError) {
  ControllerGains g;
  g.Lambda = Vec3(1.0, 2.0, 3.0).asDiagonal();
  VehicleState x;
  x.p = Vec3(0.1, -0.2, 0.3);
  x.v = Vec3(1.0, 0.5, -0.5);
  RefSample r;
  r.p = Vec3(0.0, 0.1, 0.2);
  r.v = Vec3(0.5, 0.5, 0.5);
  const CompositeTerms c = composite_variable(x, r, g);
  EXPECT_LE((c.s - ((x.v - r.v) + g.Lambda * (x.p - r.p))).norm(), 1e-15);
}

TEST(Composite, IntegralVariantAddsDoubleLambdaAndIntegral) {
  ControllerGains g;
  g.integral = true;
  VehicleState x;
  x.p = Vec3(0.1, 0.0, 0.0);
  RefSample r;
  const Vec3 integral(0.0, 0.0, 0.5);
  const CompositeTerms c = composite_variable(x, r, g, integral);
  const Vec3 expect = 2.0 * g.Lambda * x.p + g.Lambda * g.Lambda * integral;
  EXPECT_LE((c.s - expect).norm(), 1e-15);
}

TEST(Controller, HoverAtReferenceCommandsWeightSupport) {
  const VehicleParams p;
  const ZeroModel zero;
  Controller ctl(p, ControllerGains{}, &zero);
  VehicleState x;
  x.p = Vec3(0.0, 0.0, 1.0);
  const RotorCommand u = position_control_step(x, ReferenceTrajectory::hold(x.p, 1.0), 0.0, ctl, 0.01);
  const double hover = p.mass * p.g / (4.0 * p.c_T);
  EXPECT_LE((u.u - Vec4::Constant(hover)).norm(), 1e-6 * hover);
}

TEST(Controller, RefusesUncertifiedModels) {
  const VehicleParams p;
  const FieldOracleModel oracle{DisturbanceField{}};
  EXPECT_THROW(Controller(p, ControllerGains{}, &oracle), ContractionViolationError);
  ControllerOptions opt;
  opt.allow_uncertified_model = true;
  EXPECT_NO_THROW(Controller(p, ControllerGains{}, &oracle, opt));

  const NetworkModel no_sn(make_network(Arch::FourLayer, FeatureSpec{}, 8, 1.0, false, 1));
  EXPECT_FALSE(no_sn.lipschitz_u().has_value());
  EXPECT_THROW(Controller(p, ControllerGains{}, &no_sn), ContractionViolationError);
}

TEST(Controller, GainConditionIsChecked) {
  ControllerGains g;
  g.Kv = 0.5 * Mat3::Identity();
  EXPECT_THROW(g.validate(1e-7), GainConditionError);
  g.Kv = 8.0 * Mat3::Identity();
  EXPECT_NO_THROW(g.validate(1e-7));
  g.Kv(0, 0) = -1.0;
  EXPECT_THROW(g.validate(), ConfigError);
}

TEST(Allocation, RefusesNonContractingModel) {
  const VehicleParams p;
  const AllocationContext ctx = AllocationContext::from(p);
  const LinearModel big(1.0 / ctx.inverse_gain);  // certified ratio 2
  EXPECT_THROW(allocate_fixed_point(Vec3(0.0, 0.0, 14.4), Vec3::Zero(), VehicleState{}, &big, RotorCommand{}, ctx,
                                    ControllerGains{}),
               ContractionViolationError);
}

TEST(Allocation, ZeroModelIsOneInverseSolve) {
  const VehicleParams p;
  const AllocationContext ctx = AllocationContext::from(p);
  const Vec3 tau(1e-3, -2e-3, 5e-4);
  const Vec3 f_bar(0.0, 0.0, 15.0);
  const AllocationResult r = allocate_fixed_point(f_bar, tau, VehicleState{}, nullptr, RotorCommand{}, ctx, ControllerGains{});
  EXPECT_EQ(r.iterations, 1);
  const Wrench w = wrench_from_command(build_allocation_matrix(p), r.u);
  EXPECT_NEAR(w.thrust, 15.0, 1e-9);
  EXPECT_LE((w.torque - tau).norm(), 1e-12);
}

TEST(Allocation, FixedPointResidualsShrinkAtTheCertifiedRate) {
  const VehicleParams p;
  const AllocationContext ctx = AllocationContext::from(p);
  const LinearModel m(0.25 / ctx.inverse_gain);  // certified ratio 0.5
  ControllerGains g;
  g.fp_iters = 30;
  g.fp_tol = 1e-9;
  const AllocationResult r =
      allocate_fixed_point(Vec3(0.0, 0.0, 15.0), Vec3::Zero(), VehicleState{}, &m, RotorCommand{}, ctx, g);
  EXPECT_NEAR(r.certified_ratio, 0.5, 1e-12);
  ASSERT_GE(r.residuals.size(), 3u);
  for (std::size_t j = 1; j < r.residuals.size(); ++j) {
    EXPECT_LE(r.residuals[j], r.certified_ratio * r.residuals[j - 1] * (1.0 + 1e-9) + 1e-9);
  }
  EXPECT_LE(r.contraction_ratio, r.certified_ratio + 1e-9);
  // Fixed point: B0 u = [(f_bar - f_hat(u)) . k; 0].
  const Wrench w = wrench_from_command(build_allocation_matrix(p), r.u);
  EXPECT_NEAR(w.thrust, 15.0 - m.predict(VehicleState{}, r.u).z(), 1e-6);
}

TEST(ThrustAttitude, AxisFollowsForceAndStaysARotation) {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int k = 0; k < 100; ++k) {
    const Vec3 f(n(rng), n(rng), 5.0 + std::abs(n(rng)));
    const ThrustAttitude ta = thrust_attitude_from_force(f, Mat3::Identity(), n(rng));
    EXPECT_LE(orthonormality_error(ta.R_d), 1e-12);
    EXPECT_NEAR(ta.R_d.determinant(), 1.0, 1e-12);
    EXPECT_LE((ta.R_d.col(2) - f.normalized()).norm(), 1e-12);
    EXPECT_NEAR(ta.thrust, f.z(), 1e-12);
  }
}

TEST(ThrustAttitude, TiltIsLimited) {
  const ThrustAttitude ta = thrust_attitude_from_force(Vec3(10.0, 0.0, 1.0), Mat3::Identity(), 0.0, 0.5);
  EXPECT_TRUE(ta.tilt_limited);
  EXPECT_NEAR(std::acos(ta.R_d(2, 2)), 0.5, 1e-12);
  EXPECT_THROW(thrust_attitude_from_force(Vec3::Zero(), Mat3::Identity(), 0.0), DegenerateForceError);
}

TEST(Controller, BaselineIsTheZeroModelSpecialCaseBitwise) {
  const VehicleParams p;
  const ZeroModel zero;
  Controller with_zero(p, ControllerGains{}, &zero);
  Controller baseline(p, ControllerGains{}, nullptr);
  std::mt19937_64 rng(21);
  std::normal_distribution<double> n(0.0, 1.0);
  const ReferenceTrajectory ref = ReferenceTrajectory::ellipse(Vec3(0.0, 0.0, 1.0), 1.0, 0.5, 6.0, 10.0);
  for (int k = 0; k < 200; ++k) {
    VehicleState x;
    x.p = Vec3(n(rng), n(rng), 1.0 + 0.2 * n(rng));
    x.v = Vec3(n(rng), n(rng), n(rng));
    x.R = rotation_about(Vec3(n(rng), n(rng), n(rng)), 0.3 * n(rng));
    x.omega = Vec3(n(rng), n(rng), n(rng));
    const RotorCommand a = position_control_step(x, ref, 0.01 * k, with_zero, 0.01);
    const RotorCommand b = position_control_step(x, ref, 0.01 * k, baseline, 0.01);
    ASSERT_EQ(a.u, b.u) << "step " << k;
  }
}
