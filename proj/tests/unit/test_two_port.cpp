#include <gtest/gtest.h>

#include <unsupported/Eigen/MatrixFunctions>

#include "microtele/scenarios.hpp"
#include "microtele/two_port.hpp"
#include "test_support.hpp"

namespace microtele {
namespace {

using testing::rel_err;

LoopModel lossless() {
  LoopModel m;
  m.master_mass = 0.0;
  m.master_damping = 0.0;
  m.kdamp = 0.0;
  m.s1 = 1.0;
  m.s2 = 1.0;
  m.rigid_coupling = true;
  m.ideal_observer = true;
  return m;
}

const std::vector<double>& grid() {
  static const std::vector<double> g = log_grid(0.1, 1e4, 200);
  return g;
}

TEST(TwoPort, LosslessTransparentLoopIsIdealTransformer) {
  const HybridTwoPort tp = linearize_two_port(lossless(), LoopPoint{}, grid());
  for (const Eigen::Matrix2cd& h : tp.h) {
    EXPECT_LE(std::abs(h(0, 0)), 1e-9);
    EXPECT_LE(std::abs(h(1, 1)), 1e-9);
    EXPECT_LE(std::abs(h(0, 1) * h(1, 0) + 1.0), 1e-9);
  }
  const LlewellynResult r = llewellyn_margin(tp);
  EXPECT_NEAR(r.margin, 0.0, 1e-9);
  EXPECT_TRUE(r.ports_passive);
}

TEST(TwoPort, PureMasterDamping) {
  for (const double b : {0.5, 3.0, 40.0}) {
    LoopModel m = lossless();
    m.master_mass = 0.1;
    m.master_damping = b;
    const HybridTwoPort tp = linearize_two_port(m, LoopPoint{}, grid());
    for (std::size_t i = 0; i < tp.omega.size(); ++i) {
      EXPECT_LE(rel_err(tp.h[i](0, 0).real(), b), 1e-7);
      EXPECT_LE(rel_err(tp.h[i](0, 0).imag(), 0.1 * tp.omega[i]), 1e-7);
    }
    const LlewellynResult r = llewellyn_margin(tp);
    EXPECT_TRUE(r.stable);
    EXPECT_NEAR(r.margin, 0.0, 1e-9);  // h22 stays zero, so the slack is only the h12·h21 term
  }
}

/// Step response of ẋ = A x + B w, y = C x + D w from rest, by the augmented exponential.
Eigen::Vector2d linear_step(const LinearLoop& lin, const Eigen::Vector2d& w, double t) {
  Eigen::Matrix<double, kLoopStates + 1, kLoopStates + 1> aug =
      Eigen::Matrix<double, kLoopStates + 1, kLoopStates + 1>::Zero();
  aug.topLeftCorner<kLoopStates, kLoopStates>() = lin.A;
  aug.topRightCorner<kLoopStates, 1>() = lin.B * w;
  const Eigen::Matrix<double, kLoopStates + 1, kLoopStates + 1> phi = (aug * t).exp();
  const Eigen::Matrix<double, kLoopStates, 1> x = phi.topRightCorner<kLoopStates, 1>();
  return lin.C * x + lin.D * w;
}

TEST(TwoPort, LinearizationPredictsStepResponse) {
  const ScenarioConfig sc = default_scenario(ScenarioKind::BeadPush);
  const LoopModel m = LoopModel::from_config(sc.teleop, 0);
  const LinearLoop lin = linearize_loop(m, LoopPoint{});
  for (const Eigen::Vector2d& w : {Eigen::Vector2d(0.0, 1e-9), Eigen::Vector2d(1e-9, 0.0)}) {
    // Classical RK4 on the loop equations themselves.
    LoopPoint p;
    p.input = w;
    const double dt = 1e-5;
    const auto rate = [&](const Eigen::Matrix<double, kLoopStates, 1>& x) {
      LoopPoint q = p;
      q.state = x;
      return evaluate_loop(m, q).state_rate;
    };
    double worst = 0.0, peak = 0.0;
    for (int k = 1; k <= 20000; ++k) {
      const auto k1 = rate(p.state);
      const auto k2 = rate(p.state + 0.5 * dt * k1);
      const auto k3 = rate(p.state + 0.5 * dt * k2);
      const auto k4 = rate(p.state + dt * k3);
      p.state += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      if (k % 500 == 0) {
        const Eigen::Vector2d got = evaluate_loop(m, p).output;
        const Eigen::Vector2d want = linear_step(lin, w, k * dt);
        worst = std::max(worst, (got - want).cwiseAbs().maxCoeff() / std::max(want.cwiseAbs().maxCoeff(), 1e-300));
        peak = std::max(peak, want.cwiseAbs().maxCoeff());
      }
    }
    EXPECT_GT(peak, 0.0);
    EXPECT_LE(worst, 0.01);
  }
}

TEST(TwoPort, RejectsNonEquilibrium) {
  LoopPoint p;
  p.state[2] = 1e-6;  // force estimate away from the residual
  EXPECT_THROW(linearize_two_port(LoopModel{}, p, grid()), ConfigurationError);
  EXPECT_THROW(linearize_two_port(LoopModel{}, LoopPoint{}, {}), ConfigurationError);
  EXPECT_THROW(linearize_two_port(LoopModel{}, LoopPoint{}, {10.0, 1.0}), ConfigurationError);
  EXPECT_THROW(log_grid(0.0, 1.0, 10), ConfigurationError);
}

TEST(TwoPort, DampedDefaultsAreStable) {
  for (const ScenarioKind kind : {ScenarioKind::BeadPush, ScenarioKind::CellPenetration}) {
    const LlewellynResult r = analyze_stability(default_scenario(kind).teleop, grid());
    EXPECT_TRUE(r.stable) << scenario_name(kind);
    EXPECT_GT(r.margin, 0.0) << scenario_name(kind);
  }
  const StabilityProbe probe = stability_probe(1e6, true);
  const LlewellynResult r = analyze_stability(probe.config, grid());
  EXPECT_TRUE(r.stable);
  EXPECT_NEAR(r.margin, 235.776, 0.01);  // regression baseline
  EXPECT_LT(energy_growth(probe, 10.0), 10.0);
}

TEST(TwoPort, UndampedHighScaleIsUnstableAndDiverges) {
  const StabilityProbe probe = stability_probe(1e9, false);
  const LlewellynResult r = analyze_stability(probe.config, grid());
  EXPECT_FALSE(r.stable);
  EXPECT_GE(energy_growth(probe, 10.0), 10.0);
}

TEST(TwoPort, StabilityMapSweep) {
  const StabilityProbe probe = stability_probe(1e6, true);
  const auto rows = stability_map(probe.config, "s1", 1e6, 1e9, 4, grid());
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_LE(rel_err(rows[1].value, 1e7), 1e-12);
  EXPECT_LE(rel_err(rows[3].value, 1e9), 1e-12);
  EXPECT_TRUE(rows[0].result.stable);
  for (std::size_t i = 1; i < rows.size(); ++i) EXPECT_GT(rows[i].value, rows[i - 1].value);
  TeleopConfig c = probe.config;
  EXPECT_THROW(set_sweep_parameter(c, "warp", 1.0), ConfigurationError);
  set_sweep_parameter(c, "kd", 7.0);
  EXPECT_EQ(c.position_gains.kd, 7.0 * Mat3::Identity());
}

TEST(TwoPort, NeedsPointMassMaster) {
  TeleopConfig c;
  c.master = TwoLink{};
  EXPECT_THROW(LoopModel::from_config(c, 0), ConfigurationError);
  EXPECT_THROW(LoopModel::from_config(TeleopConfig{}, 3), ConfigurationError);
}

}  // namespace
}  // namespace microtele
