#include "nlander/aero.hpp"
#include "nlander/vehicle.hpp"

#include <gtest/gtest.h>

#include <limits>

using namespace nlander;

TEST(Allocation, InverseGainMatchesDenseSvdOfTheInverse) {
  const VehicleParams p;
  const Mat4 b0 = build_allocation_matrix(p);
  const double oracle = Eigen::JacobiSVD<Mat4>(Mat4(b0.inverse())).singularValues()(0);
  EXPECT_NEAR(inverse_allocation_gain(b0), oracle, 1e-9 * oracle);
}

TEST(Allocation, HoverCommandProducesWeight) {
  const VehicleParams p;
  const Wrench w = wrench_from_command(build_allocation_matrix(p), RotorCommand::uniform(p.mass * p.g / (4.0 * p.c_T)));
  EXPECT_NEAR(w.thrust, p.mass * p.g, 1e-9);
  EXPECT_LE(w.torque.norm(), 1e-12);
}

TEST(Allocation, ZeroCoefficientIsSingular) {
  VehicleParams p;
  p.c_Q = 0.0;
  EXPECT_THROW(build_allocation_matrix(p), SingularMatrixError);
}

TEST(Dynamics, FreeFallMatchesClosedForm) {
  const VehicleParams p;
  VehicleState s;
  s.v = Vec3(1.0, 0.0, 2.0);
  const double dt = 1e-3;
  for (int i = 0; i < 1000; ++i) s = integrate_step(s, Wrench{}, Disturbance{}, p, dt);
  const Vec3 expect(1.0, 0.0, 2.0 - 0.5 * p.g);
  EXPECT_LE((s.p - expect).norm(), 1e-10);
}

TEST(Dynamics, TorqueFreeSpinKeepsRotationalEnergyAndOrthonormality) {
  const VehicleParams p;
  VehicleState s;
  s.omega = Vec3(3.0, -2.0, 5.0);
  for (int i = 0; i < 5000; ++i) s = integrate_step(s, Wrench{}, Disturbance{}, p, 1e-3);
  EXPECT_LE(orthonormality_error(s.R), 1e-12);
  const double rot0 = 0.5 * Vec3(3.0, -2.0, 5.0).dot(p.inertia * Vec3(3.0, -2.0, 5.0));
  const double rot = 0.5 * s.omega.dot(p.inertia * s.omega);
  EXPECT_NEAR(rot, rot0, 1e-9 * rot0);
}

TEST(Dynamics, NonFiniteStateIsReported) {
  const VehicleParams p;
  VehicleState s;
  Wrench w;
  w.thrust = std::numeric_limits<double>::infinity();
  EXPECT_THROW(integrate_step(s, w, Disturbance{}, p, 1e-3), NonFiniteStateError);
}

TEST(Params, ValidationRejectsNonPhysicalValues) {
  VehicleParams p;
  p.mass = 0.0;
  EXPECT_THROW(p.validate(), ConfigError);
  p = VehicleParams{};
  p.inertia(0, 1) = 1.0;
  EXPECT_THROW(p.validate(), ConfigError);
}

TEST(GroundEffect, SteadyFormulaAtHoverSpeed) {
  GroundEffectParams ge;
  const double z = 0.1;
  const double r = ge.rotor_diameter / (8.0 * z);
  const double expect = ge.n0 * ge.n0 * ge.c_T(ge.n0) * (1.0 / (1.0 - ge.mu * r * r) - 1.0);
  EXPECT_NEAR(ground_effect_force(ge.n0, z, ge), expect, 1e-12);
}

TEST(GroundEffect, VanishesFarFromTheGroundAtTheReferenceSpeed) {
  GroundEffectParams ge;
  EXPECT_LT(std::abs(ground_effect_force(ge.n0, 100.0, ge)), 1e-5);
  // Away from n0 the bench-identified c_T(n) differs from the nominal one.
  EXPECT_GT(ground_effect_force(6000.0, 100.0, ge), 0.1);
}

TEST(GroundEffect, SingularHeightsThrow) {
  GroundEffectParams ge;
  EXPECT_THROW(ground_effect_gain(0.0, ge), SingularityError);
  EXPECT_THROW(ground_effect_gain(0.99 * ge.singularity_height(), ge), SingularityError);
  EXPECT_GT(ground_effect_gain(1.01 * ge.singularity_height(), ge), 1.0);
}

TEST(GroundEffect, IncreasesTowardsTheGround) {
  GroundEffectParams ge;
  double prev = 0.0;
  for (double z = 1.0; z > 0.06; z -= 0.05) {
    const double f = ground_effect_force(ge.n0, z, ge);
    EXPECT_GT(f, prev);
    prev = f;
  }
}

TEST(Table, WeightIsOneInsideZeroOutsideAndSmoothAtTheEdge) {
  TableParams t;
  t.enabled = true;
  EXPECT_NEAR(table_weight(t.center_x, t.center_y, t), 1.0, 1e-9);
  EXPECT_NEAR(table_weight(t.center_x + 2.0, t.center_y, t), 0.0, 1e-9);
  EXPECT_NEAR(table_weight(t.center_x + 0.5 * t.size_x, t.center_y, t), 0.5, 1e-9);
  t.enabled = false;
  EXPECT_EQ(table_weight(t.center_x, t.center_y, t), 0.0);
}

TEST(Table, SurfaceAboveTheTableAddsLift) {
  DisturbanceField f;
  f.drag.enabled = false;
  f.table.enabled = true;
  VehicleState s;
  s.p = Vec3(f.table.center_x, 0.0, 0.6);
  const RotorCommand u = RotorCommand::uniform(f.ground_effect.n0 * f.ground_effect.n0);
  const double over = total_disturbance(s, u, f).force.z();
  s.p.x() = -1.5;
  const double away = total_disturbance(s, u, f).force.z();
  EXPECT_GT(over, 10.0 * std::abs(away));
}

TEST(Table, BelowTheTopInsideTheFootprintIsACollision) {
  GroundEffectParams ge;
  TableParams t;
  t.enabled = true;
  EXPECT_THROW(surface_ground_effect(Vec3(t.center_x, 0.0, 0.2), Vec4::Constant(2000.0), ge, t), SingularityError);
  EXPECT_NO_THROW(surface_ground_effect(Vec3(-1.0, 0.0, 0.2), Vec4::Constant(2000.0), ge, t));
}

TEST(Drag, OpposesVelocity) {
  const DragParams d;
  const Vec3 v(1.0, -2.0, 0.5);
  const Vec3 f = drag_force(v, d);
  EXPECT_LT(f.dot(v), 0.0);
  EXPECT_LE(f.cross(v).norm(), 1e-12);
}

TEST(DisturbanceField, NoneIsZero) {
  VehicleState s;
  s.v = Vec3(1.0, 1.0, 1.0);
  const Disturbance d = total_disturbance(s, RotorCommand::uniform(4e6), DisturbanceField::none());
  EXPECT_EQ(d.force.norm(), 0.0);
}
