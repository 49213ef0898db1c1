#pragma once

#include <complex>
#include <string>
#include <vector>

#include "microtele/teleop.hpp"

namespace microtele {

/// Single-axis continuous-time small-signal model of the bilateral loop.
///
/// States: master position, slave position, force estimate, position-error
/// integral, force-error integral. Inputs: master velocity v_m (imposed by the
/// operator) and the force F_e the slave exerts on its environment. Outputs:
/// the operator force F_m and −v_s.
struct LoopModel {
  double master_mass = 0.1;
  double master_damping = 3.0;  // P + T
  double master_stiffness = 0.0;
  double s1 = 1e6;
  double s2 = 1e-3;
  double kdamp = 1e-6;
  double force_kp = 0.0;
  double force_ki = 0.0;
  double slave_mass = 1e-9;
  double slave_resistance = 1e-6;
  double kp = 0.0;
  double ki = 0.0;
  double kd = 0.0;
  double observer_bandwidth = 50.0;
  bool rigid_coupling = false;  // v_s = S2 v_m exactly
  bool ideal_observer = false;  // estimate equals the force-balance residual

  /// Axis `axis` of a PointMass-master teleop configuration.
  static LoopModel from_config(const TeleopConfig& config, int axis);
};

inline constexpr int kLoopStates = 5;

struct LoopPoint {
  Eigen::Matrix<double, kLoopStates, 1> state = Eigen::Matrix<double, kLoopStates, 1>::Zero();
  Eigen::Vector2d input = Eigen::Vector2d::Zero();
  Eigen::Vector2d input_rate = Eigen::Vector2d::Zero();
};

struct LoopEvaluation {
  Eigen::Matrix<double, kLoopStates, 1> state_rate;
  Eigen::Vector2d output;  // (F_m, −v_s)
};

LoopEvaluation evaluate_loop(const LoopModel& model, const LoopPoint& point);

/// ẋ = A x + B w + B₁ ẇ,  y = C x + D w + E ẇ.
struct LinearLoop {
  Eigen::Matrix<double, kLoopStates, kLoopStates> A;
  Eigen::Matrix<double, kLoopStates, 2> B, B1;
  Eigen::Matrix<double, 2, kLoopStates> C;
  Eigen::Matrix2d D, E;
};

/// Central differences of evaluate_loop about `point` with relative step `step`.
LinearLoop linearize_loop(const LoopModel& model, const LoopPoint& point, double step = 1e-8);

struct HybridTwoPort {
  std::vector<double> omega;                // rad/s, strictly increasing
  std::vector<Eigen::Matrix2cd> h;          // [F_m; −v_s] = h [v_m; F_e]
};

/// Throws ConfigurationError if `point` is not an equilibrium (state rate above 1e-12).
HybridTwoPort linearize_two_port(const LoopModel& model, const LoopPoint& point,
                                 const std::vector<double>& omega);

struct LlewellynResult {
  bool stable = false;
  bool ports_passive = false;  // Re h11 ≥ 0 and Re h22 ≥ 0 on the whole grid
  double margin = 0.0;         // min over ω of 2Re h11 Re h22 − |h12 h21| − Re(h12 h21)
  double margin_omega = 0.0;
  double min_re_h11 = 0.0;
  double min_re_h22 = 0.0;
};

/// `tolerance` absorbs rounding when deciding the sign conditions.
LlewellynResult llewellyn_margin(const HybridTwoPort& two_port, double tolerance = 1e-12);

std::vector<double> log_grid(double lo, double hi, int points);

/// Llewellyn verdict of the axis-0 loop for the given configuration.
LlewellynResult analyze_stability(const TeleopConfig& config, const std::vector<double>& omega);

/// Sets a sweepable parameter on all axes: s1, s2, kdamp, force_kp, force_ki,
/// kp, ki, kd, observer_bandwidth, inertia, friction. Throws ConfigurationError
/// for any other key.
void set_sweep_parameter(TeleopConfig& config, const std::string& key, double value);

struct StabilityMapRow {
  double value = 0.0;
  LlewellynResult result;
};

/// `points` values of `key` from lo to hi, geometric when both are positive.
std::vector<StabilityMapRow> stability_map(const TeleopConfig& base, const std::string& key, double lo, double hi,
                                           int points, const std::vector<double>& omega);

}  // namespace microtele
