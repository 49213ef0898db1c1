#include <gtest/gtest.h>

#include <Eigen/Dense>

#include <random>

#include "microtele/magnetics.hpp"
#include "test_support.hpp"

namespace microtele {
namespace {

CoilArray single_z_coil(double gain_times_current) {
  CoilArray a;
  a.coils.push_back(Coil{Vec3::Zero(), Vec3::UnitZ(), gain_times_current, 100.0});
  return a;
}

/// Random array of 2-6 coils on a 40-80 mm shell, random currents, and a
/// workspace point within 10 mm of the centre.
struct RandomSetup {
  CoilArray array;
  VecX currents;
  Vec3 p;
};

RandomSetup random_setup(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> count(2, 6);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::uniform_real_distribution<double> dist(0.04, 0.08);
  RandomSetup s;
  const int n = count(rng);
  for (int k = 0; k < n; ++k) {
    Vec3 dir(u(rng), u(rng), u(rng));
    dir.normalize();
    Vec3 axis(u(rng), u(rng), u(rng));
    axis.normalize();
    s.array.coils.push_back(Coil{dist(rng) * dir, axis, 5.0 + 10.0 * std::abs(u(rng)), 10.0});
  }
  s.currents = VecX(n);
  for (int k = 0; k < n; ++k) s.currents[k] = 10.0 * u(rng);
  s.p = 0.01 * Vec3(u(rng), u(rng), u(rng));
  return s;
}

TEST(Magnetics, ZeroCurrentsGiveZeroField) {
  const CoilArray a = CoilArray::orthogonal_four();
  const VecX i = VecX::Zero(4);
  EXPECT_EQ(field_at(a, i, Vec3(1e-3, 2e-3, 0.0)), Vec3::Zero());
  EXPECT_EQ(field_gradient_at(a, i, Vec3(1e-3, 2e-3, 0.0)), Mat3::Zero());
}

TEST(Magnetics, OnAxisDipoleField) {
  // B = mu0 * 2m / (4 pi z^3)
  const double m = 10.0, z = 0.1;
  const double expected = 4e-7 * std::numbers::pi * 2.0 * m / (4.0 * std::numbers::pi * z * z * z);
  const Vec3 b = field_at(single_z_coil(m), VecX::Ones(1), Vec3(0.0, 0.0, z));
  EXPECT_NEAR(b.z(), 2.0e-3, 1e-15);
  EXPECT_NEAR(b.z(), expected, 1e-18);
  EXPECT_EQ(b.x(), 0.0);
  EXPECT_EQ(b.y(), 0.0);
}

TEST(Magnetics, DoublingCurrentsDoublesField) {
  const CoilArray a = CoilArray::orthogonal_four();
  VecX i(4);
  i << 1.0, -2.0, 0.5, 3.0;
  const Vec3 p(2e-3, -1e-3, 5e-4);
  const Vec3 b1 = field_at(a, i, p);
  const Vec3 b2 = field_at(a, 2.0 * i, p);
  EXPECT_LE((b2 - 2.0 * b1).norm(), 1e-15 * b1.norm());
}

TEST(Magnetics, SingularPointRejected) {
  const CoilArray a = CoilArray::orthogonal_four();
  EXPECT_THROW(field_at(a, VecX::Ones(4), Vec3(0.05, 0.0, 5e-7)), SingularPointError);
  EXPECT_THROW(field_gradient_at(a, VecX::Ones(4), Vec3(0.05, 0.0, 0.0)), SingularPointError);
  EXPECT_NO_THROW(field_at(a, VecX::Ones(4), Vec3(0.05, 0.0, 2e-6)));
}

TEST(Magnetics, SuperpositionOnGrid) {
  const CoilArray a = CoilArray::orthogonal_four();
  VecX i1(4), i2(4);
  i1 << 1.0, -3.0, 2.5, 0.25;
  i2 << -4.0, 1.5, 0.5, 7.0;
  for (double x = -0.01; x <= 0.01; x += 0.005) {
    for (double y = -0.01; y <= 0.01; y += 0.005) {
      for (double z = -0.01; z <= 0.01; z += 0.005) {
        const Vec3 p(x, y, z);
        const Vec3 sum = field_at(a, i1 + i2, p);
        const Vec3 parts = field_at(a, i1, p) + field_at(a, i2, p);
        EXPECT_LE((sum - parts).norm(), 1e-12 * parts.norm());
      }
    }
  }
}

TEST(Magnetics, GradientSolenoidalAndSymmetric) {
  std::mt19937_64 rng(7);
  for (int s = 0; s < 100; ++s) {
    const RandomSetup r = random_setup(rng);
    const Mat3 g = field_gradient_at(r.array, r.currents, r.p);
    const double scale = g.norm();
    EXPECT_LE(std::abs(g.trace()), 1e-10 * scale);
    EXPECT_LE((g - g.transpose()).norm(), 1e-10 * scale);
  }
}

TEST(Magnetics, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(11);
  const double h = 1e-6;
  for (int s = 0; s < 100; ++s) {
    const RandomSetup r = random_setup(rng);
    const Mat3 g = field_gradient_at(r.array, r.currents, r.p);
    Mat3 fd;
    for (int j = 0; j < 3; ++j) {
      const Vec3 e = h * Vec3::Unit(j);
      fd.col(j) = (field_at(r.array, r.currents, r.p + e) - field_at(r.array, r.currents, r.p - e)) / (2.0 * h);
    }
    EXPECT_LE((g - fd).norm(), 1e-6 * g.norm()) << "sample " << s;
  }
}

TEST(Magnetics, ClusterMomentLaws) {
  const MagneticCluster sat{Sphere{1e-6}, 2e-15, SaturatedMagnetization{4e7}};  // 8e-8 A m^2
  EXPECT_EQ(cluster_moment(sat, Vec3::Zero()), Vec3::Zero());
  const Vec3 m = cluster_moment(sat, Vec3(0.0, 0.0, 1e-3));
  EXPECT_NEAR(m.z(), 0.4e-6 / 5.0, 1e-22);
  EXPECT_EQ(m.x(), 0.0);

  const MagneticCluster lin{Sphere{1e-6}, 2.0 * kMu0, LinearMagnetization{1.0}};  // chi V / mu0 = 2
  const Vec3 ml = cluster_moment(lin, Vec3(1e-3, 0.0, 0.0));
  EXPECT_NEAR(ml.x(), 2e-3, 1e-18);
  EXPECT_EQ(ml.y(), 0.0);
}

TEST(Magnetics, WrenchAnchors) {
  const Vec3 m(0.0, 0.0, 8e-8);
  const Mat3 grad = Vec3(-2.5, -2.5, 5.0).asDiagonal();
  const MagneticWrench w = magnetic_wrench(m, Vec3(0.0, 0.0, 1e-3), grad);
  EXPECT_NEAR(w.force.z(), 4.0e-7, 4.0e-7 * 1e-12);
  EXPECT_EQ(w.force.x(), 0.0);
  EXPECT_EQ(w.torque, Vec3::Zero());  // m parallel to B

  const Vec3 b(1e-3, 2e-3, 0.0);
  const MagneticWrench uniform = magnetic_wrench(m, b, Mat3::Zero());
  EXPECT_EQ(uniform.force, Vec3::Zero());
  EXPECT_EQ(uniform.torque, m.cross(b));
}

TEST(Magnetics, ForceProportionalToVolume) {
  const Vec3 b(2e-3, -1e-3, 4e-3);
  const Mat3 grad = (Mat3() << 1.0, 2.0, 0.5, 2.0, -3.0, 1.5, 0.5, 1.5, 2.0).finished();
  const double base_volume = 1e-16;
  const MagneticCluster ref{Sphere{1e-6}, base_volume, SaturatedMagnetization{4e5}};
  const double f0 = magnetic_wrench(cluster_moment(ref, b), b, grad).force.norm();
  for (double k : {0.5, 2.0, 3.0, 7.5, 100.0}) {
    MagneticCluster c = ref;
    c.volume = k * base_volume;
    const double f = magnetic_wrench(cluster_moment(c, b), b, grad).force.norm();
    EXPECT_NEAR(f / (f0 * k), 1.0, 1e-12);
  }
}

TEST(Magnetics, SolveZeroForce) {
  const MagneticCluster c{Sphere{50e-6}, shape_volume(Sphere{50e-6}), SaturatedMagnetization{4e4}};
  const CurrentSolution s = solve_currents(CoilArray::orthogonal_four(), Vec3(1e-4, 0, 0), Vec3::Zero(), c,
                                           Vec3(5e-3, 0, 0));
  EXPECT_EQ(s.currents, VecX::Zero(4));
  EXPECT_FALSE(s.saturated);
  EXPECT_FALSE(s.degenerate);
}

/// Dense pseudoinverse oracle for the same weighted field-hold plus force rows.
VecX pseudoinverse_oracle(const CoilArray& a, const Vec3& p, const Vec3& f, const MagneticCluster& c,
                          const Vec3& hold) {
  const int n = static_cast<int>(a.size());
  VecX target(6);
  target << hold / hold.norm(), f / f.norm();
  Vec3 moment = cluster_moment(c, hold);
  VecX currents;
  for (int pass = 0; pass < 2; ++pass) {
    MatX m(6, n);
    for (int k = 0; k < n; ++k) {
      const VecX unit = VecX::Unit(n, k);
      m.block<3, 1>(0, k) = field_at(a, unit, p) / hold.norm();
      m.block<3, 1>(3, k) = field_gradient_at(a, unit, p).transpose() * moment / f.norm();
    }
    Eigen::JacobiSVD<MatX> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const VecX sv = svd.singularValues();
    MatX sigma_plus = MatX::Zero(n, 6);
    for (int k = 0; k < sv.size(); ++k) {
      if (sv[k] > 1e-10 * sv[0]) sigma_plus(k, k) = 1.0 / sv[k];
    }
    currents = svd.matrixV() * sigma_plus * svd.matrixU().transpose() * target;
    if (pass == 0) moment = cluster_moment(c, field_at(a, currents, p));
  }
  return currents;
}

TEST(Magnetics, SolveMatchesPseudoinverseOracle) {
  const CoilArray a = CoilArray::orthogonal_four();
  const MagneticCluster c{Sphere{50e-6}, shape_volume(Sphere{50e-6}), SaturatedMagnetization{4e4}};
  const Vec3 p(0.0, 0.0, 0.0);
  const Vec3 hold(5e-3, 0.0, 0.0);
  const Vec3 f(2e-9, 0.0, 0.0);  // axial
  const CurrentSolution s = solve_currents(a, p, f, c, hold);
  const VecX oracle = pseudoinverse_oracle(a, p, f, c, hold);
  ASSERT_FALSE(s.saturated);
  EXPECT_LE((s.currents - oracle).norm(), 1e-9 * oracle.norm());
}

TEST(Magnetics, SolveRoundTripInPlane) {
  const CoilArray a = CoilArray::orthogonal_four();
  const MagneticCluster c{Sphere{50e-6}, shape_volume(Sphere{50e-6}), SaturatedMagnetization{4e4}};
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int s = 0; s < 50; ++s) {
    const Vec3 p = 5e-3 * Vec3(u(rng), u(rng), 0.0);
    const Vec3 f = 1e-9 * Vec3(u(rng), u(rng), 0.0);
    const Vec3 hold = 5e-3 * Vec3(u(rng), u(rng), 0.0).normalized();
    const CurrentSolution sol = solve_currents(a, p, f, c, hold);
    ASSERT_FALSE(sol.saturated);
    const Vec3 b = field_at(a, sol.currents, p);
    const Vec3 got = magnetic_wrench(cluster_moment(c, b), b, field_gradient_at(a, sol.currents, p)).force;
    EXPECT_LE((got - f).norm(), 1e-6 * f.norm()) << "sample " << s;
  }
}

TEST(Magnetics, SolveSaturatesUniformly) {
  const CoilArray a = CoilArray::orthogonal_four();
  const MagneticCluster c{Sphere{50e-6}, shape_volume(Sphere{50e-6}), SaturatedMagnetization{4e4}};
  const Vec3 p(1e-3, 0.0, 0.0);
  const Vec3 hold(5e-3, 0.0, 0.0);
  const Vec3 small(1e-9, 5e-10, 0.0);
  const CurrentSolution ref = solve_currents(a, p, small, c, hold);
  ASSERT_FALSE(ref.saturated);
  const double peak = ref.currents.cwiseAbs().maxCoeff();
  // Demand a force whose unclamped solution needs about 10x the current limit.
  const CurrentSolution big = solve_currents(a, p, small * (100.0 / peak), c, Vec3(5e-3, 0.0, 0.0) * (100.0 / peak));
  EXPECT_TRUE(big.saturated);
  EXPECT_LE(big.currents.cwiseAbs().maxCoeff(), 10.0 * (1.0 + 1e-12));
  EXPECT_NEAR(big.currents.cwiseAbs().maxCoeff(), 10.0, 1e-9);
  EXPECT_NEAR(big.currents.normalized().dot(ref.currents.normalized()), 1.0, 1e-12);
}

TEST(Magnetics, SolveFlagsDegenerateMap) {
  CoilArray a;
  a.coils.push_back(Coil{Vec3(0.05, 0, 0), -Vec3::UnitX(), 10.0, 10.0});
  a.coils.push_back(Coil{Vec3(0.05, 0, 0), -Vec3::UnitX(), 10.0, 10.0});  // duplicate column
  const MagneticCluster c{Sphere{50e-6}, shape_volume(Sphere{50e-6}), SaturatedMagnetization{4e4}};
  const CurrentSolution s = solve_currents(a, Vec3::Zero(), Vec3(0.0, 1e-9, 0.0), c, Vec3(5e-3, 0, 0));
  EXPECT_TRUE(s.degenerate);
  EXPECT_TRUE(s.currents.allFinite());
}

TEST(Magnetics, ValidationRejectsBadCoils) {
  EXPECT_THROW((Coil{Vec3::Zero(), Vec3(1.0, 1.0, 0.0), 1.0, 1.0}.validate()), ConfigurationError);
  EXPECT_THROW((Coil{Vec3::Zero(), Vec3::UnitX(), 0.0, 1.0}.validate()), ConfigurationError);
  EXPECT_THROW((Coil{Vec3::Zero(), Vec3::UnitX(), 1.0, -1.0}.validate()), ConfigurationError);
  EXPECT_THROW(CoilArray{}.validate(), ConfigurationError);
  EXPECT_NO_THROW(CoilArray::orthogonal_four().validate());
  EXPECT_EQ(CoilArray::orthogonal_four().size(), 4u);
}

}  // namespace
}  // namespace microtele
