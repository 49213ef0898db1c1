#include <gtest/gtest.h>

#include <Eigen/Dense>

#include <random>

#include "microtele/master_dynamics.hpp"
#include "test_support.hpp"

namespace microtele {
namespace {

using testing::rel_err;

VecX vec2(double a, double b) {
  VecX v(2);
  v << a, b;
  return v;
}

/// Ḋ along q̇ by central differences of D.
MatX d_dot(const MasterModel& m, const VecX& q, const VecX& qd) {
  const double h = 1e-6;
  return (inertia_matrix(m, q + h * qd) - inertia_matrix(m, q - h * qd)) / (2.0 * h);
}

TEST(MasterDynamics, SkewSymmetryOnRandomStates) {
  const MasterModel arm = TwoLink{};
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> ang(-std::numbers::pi, std::numbers::pi);
  std::uniform_real_distribution<double> vel(-5.0, 5.0);
  for (int s = 0; s < 1000; ++s) {
    const VecX q = vec2(ang(rng), ang(rng));
    const VecX qd = vec2(vel(rng), vel(rng));
    const MatX dd = d_dot(arm, q, qd);
    // ‖Ḋ‖ vanishes near sin q2 = 0 where only rounding is left; floor it at 1e-3 of its peak at this speed.
    const TwoLink a;
    const double scale = std::max(dd.norm(), 1e-3 * a.m2 * a.l1 * a.lc2 * qd.norm());
    const MatX n = dd - 2.0 * master_terms(arm, q, qd).C;
    EXPECT_LE((n + n.transpose()).norm(), 1e-6 * scale) << "state " << s;
    const VecX x = vec2(vel(rng), vel(rng));
    EXPECT_LE(std::abs(x.dot(n * x)), 1e-6 * scale * x.squaredNorm());
  }
}

TEST(MasterDynamics, ChristoffelTrivialCases) {
  const auto constant = [](const VecX&) { return MatX(Eigen::Matrix2d{{2.0, 0.3}, {0.3, 1.0}}); };
  EXPECT_EQ(christoffel_matrix(constant, vec2(0.4, -1.0), vec2(3.0, 2.0)), MatX::Zero(2, 2));
  const MasterModel arm = TwoLink{};
  EXPECT_LE(master_terms(arm, vec2(0.4, -1.0), VecX::Zero(2)).C.norm(), 1e-15);
}

TEST(MasterDynamics, ChristoffelMatchesClosedForm) {
  const TwoLink arm;
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (int s = 0; s < 200; ++s) {
    const VecX q = vec2(u(rng), u(rng)), qd = vec2(u(rng), u(rng));
    const MatX numeric = christoffel_matrix([&](const VecX& x) { return inertia_matrix(arm, x); }, q, qd);
    const MatX exact = christoffel_analytic(arm, q, qd);
    EXPECT_LE((numeric - exact).norm(), 1e-7 * std::max(exact.norm(), 1e-3));
  }
}

TEST(MasterDynamics, TwoLinkInertiaAtZero) {
  const TwoLink a;
  const double d11 = a.m1 * a.lc1 * a.lc1 + a.inertia1 + a.inertia2 +
                     a.m2 * (a.l1 * a.l1 + a.lc2 * a.lc2 + 2.0 * a.l1 * a.lc2);
  const MatX d = inertia_matrix(MasterModel{a}, VecX::Zero(2));
  EXPECT_LE(rel_err(d(0, 0), d11), 1e-15);
  EXPECT_LE(rel_err(d(1, 1), a.m2 * a.lc2 * a.lc2 + a.inertia2), 1e-15);
}

TEST(MasterDynamics, PointMassTerms) {
  PointMass p;
  p.inertia = Vec3(0.1, 0.2, 0.3);
  const MasterTerms t = master_terms(MasterModel{p}, Vec3(1, 2, 3), Vec3(4, 5, 6));
  EXPECT_EQ(t.D, MatX(p.inertia.asDiagonal()));
  EXPECT_EQ(t.C, MatX::Zero(3, 3));
  EXPECT_EQ(t.g, VecX::Zero(3));
  EXPECT_EQ(t.J, MatX::Identity(3, 3));
}

TEST(MasterDynamics, GravityOffVanishes) {
  TwoLink a;
  a.gravity = false;
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (int s = 0; s < 50; ++s) EXPECT_EQ(gravity_vector(MasterModel{a}, vec2(u(rng), u(rng))), VecX::Zero(2));
}

TEST(MasterDynamics, InertiaPositiveDefinite) {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(-std::numbers::pi, std::numbers::pi);
  for (int s = 0; s < 500; ++s) {
    const MatX d = inertia_matrix(MasterModel{TwoLink{}}, vec2(u(rng), u(rng)));
    Eigen::SelfAdjointEigenSolver<MatX> es(d);
    EXPECT_GT(es.eigenvalues().minCoeff(), 0.0);
  }
}

TEST(MasterDynamics, EquilibriumUnchanged) {
  TwoLink a;
  a.gravity = false;
  const MasterModel m = a;
  MasterState s = initial_master_state(m);
  s.q = vec2(0.3, -0.7);
  const MasterState n = step_master(m, s, VecX::Zero(2), Vec3::Zero(), ScalingMatrices{}, 1e-3);
  EXPECT_EQ(n.q, s.q);
  EXPECT_EQ(n.qd, s.qd);
}

TEST(MasterDynamics, PointMassSteadyVelocity) {
  PointMass p;
  p.friction = Vec3(2.0, 1.0, 0.5);
  p.transducer = Vec3(1.0, 1.0, 0.5);
  const MasterModel m = p;
  const Vec3 f(1e-7, -2e-7, 3e-8);
  MasterState s = initial_master_state(m);
  for (int k = 0; k < 5000; ++k) s = step_master(m, s, VecX::Zero(3), f, ScalingMatrices{}, 1e-3);
  for (int i = 0; i < 3; ++i) {
    const double want = 1e6 * f[i] / (p.friction[i] + p.transducer[i]);
    EXPECT_LE(rel_err(s.qd[i], want), 1e-9) << "axis " << i;
  }
}

TEST(MasterDynamics, GravityCompensationHolds) {
  const MasterModel m = TwoLink{};
  MasterState s = initial_master_state(m);
  s.q = vec2(0.6, 0.9);
  for (int k = 0; k < 1000; ++k) s = step_master(m, s, gravity_vector(m, s.q), Vec3::Zero(), ScalingMatrices{}, 1e-3);
  EXPECT_EQ(s.qd, VecX::Zero(2));
  EXPECT_EQ(s.q, vec2(0.6, 0.9));
}

void check_passive(const MasterModel& m, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int trial = 0; trial < 20; ++trial) {
    MasterState s = initial_master_state(m);
    for (Eigen::Index i = 0; i < s.q.size(); ++i) {
      s.q[i] = u(rng);
      s.qd[i] = u(rng);
    }
    double e = mechanical_energy(m, s);
    for (int k = 0; k < 2000; ++k) {
      s = step_master(m, s, VecX::Zero(s.q.size()), Vec3::Zero(), ScalingMatrices{}, 1e-3);
      const double next = mechanical_energy(m, s);
      ASSERT_LE(next - e, 1e-12) << "trial " << trial << " step " << k;
      e = next;
    }
  }
}

TEST(MasterDynamics, UnforcedEnergyNonIncreasing) {
  TwoLink flat;
  flat.gravity = false;
  check_passive(flat, 7);
  check_passive(PointMass{}, 8);
}

TEST(MasterDynamics, EnergyBookkeeping) {
  PointMass p;
  const MasterModel m = p;
  MasterState s = initial_master_state(m);
  const double e0 = mechanical_energy(m, s);
  for (int k = 0; k < 1000; ++k) {
    s = step_master(m, s, Vec3(0.1 * std::sin(0.01 * k), 0.0, 0.05), Vec3::Zero(), ScalingMatrices{}, 1e-3);
  }
  // Implicit damping: kinetic gain never exceeds net input.
  EXPECT_LE(mechanical_energy(m, s) - e0, s.energy.input_work - s.energy.dissipated + 1e-12);
  EXPECT_GT(s.energy.dissipated, 0.0);
}

TEST(MasterDynamics, JacobianMatchesKinematics) {
  const MasterModel m = TwoLink{};
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (int s = 0; s < 200; ++s) {
    const VecX q = vec2(u(rng), u(rng)), qd = vec2(u(rng), u(rng));
    const double h = 1e-6;
    const Vec3 fd = (forward_kinematics(m, q + h * qd) - forward_kinematics(m, q - h * qd)) / (2.0 * h);
    const Vec3 jq = task_jacobian(m, q) * qd;
    EXPECT_LE((fd - jq).norm(), 1e-6 * std::max(jq.norm(), 1e-9));
  }
}

TEST(MasterDynamics, AnglesWrap) {
  const MasterModel m = TwoLink{};
  MasterState s = initial_master_state(m);
  s.qd = vec2(50.0, -50.0);
  for (int k = 0; k < 500; ++k) {
    s = step_master(m, s, VecX::Zero(2), Vec3::Zero(), ScalingMatrices{}, 1e-3);
    EXPECT_GT(s.q.minCoeff(), -std::numbers::pi);
    EXPECT_LE(s.q.maxCoeff(), std::numbers::pi);
  }
}

TEST(MasterDynamics, Validation) {
  PointMass p;
  p.inertia.x() = 0.0;
  EXPECT_THROW(validate_master(p), ConfigurationError);
  TwoLink a;
  a.friction = -1.0;
  EXPECT_THROW(validate_master(a), ConfigurationError);
  const MasterModel m = PointMass{};
  EXPECT_THROW(step_master(m, initial_master_state(m), VecX::Zero(3), Vec3::Zero(), ScalingMatrices{}, 0.0),
               ConfigurationError);
  EXPECT_THROW(step_master(m, initial_master_state(m), VecX::Zero(2), Vec3::Zero(), ScalingMatrices{}, 1e-3),
               ConfigurationError);
  EXPECT_THROW(step_master(m, initial_master_state(m), Vec3(1e308, 0, 0) * 1e10, Vec3::Zero(), ScalingMatrices{},
                           1e-3),
               SimulationFault);
  ScalingMatrices bad;
  bad.s2.z() = 0.0;
  EXPECT_THROW(bad.validate(), ConfigurationError);
}

}  // namespace
}  // namespace microtele
