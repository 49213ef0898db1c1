#include "microtele/two_port.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <limits>

namespace microtele {

namespace {

using StateVec = Eigen::Matrix<double, kLoopStates, 1>;

enum Slot { kMasterPos = 0, kSlavePos, kEstimate, kPosIntegral, kForceIntegral };

double step_for(double value, double step) { return step * std::max(1.0, std::abs(value)); }

}  // namespace

LoopModel LoopModel::from_config(const TeleopConfig& config, int axis) {
  const auto* pm = std::get_if<PointMass>(&config.master);
  if (!pm) throw ConfigurationError("two-port analysis needs a point-mass master");
  if (axis < 0 || axis > 2) throw ConfigurationError("axis must be 0, 1 or 2");
  LoopModel m;
  m.master_mass = pm->inertia[axis];
  m.master_damping = pm->friction[axis] + pm->transducer[axis];
  m.master_stiffness = pm->stiffness[axis];
  m.s1 = config.scaling.s1[axis];
  m.s2 = config.scaling.s2[axis];
  m.kdamp = config.force_gains.kdamp(axis, axis);
  m.force_kp = config.force_gains.kp(axis, axis);
  m.force_ki = config.force_gains.ki(axis, axis);
  m.slave_mass = config.slave.mass()(axis, axis);
  m.slave_resistance = resistance_tensor(config.slave.shape, config.fluid)
                           .rotated(config.slave_initial.orientation)
                           .translational(axis, axis);
  m.kp = config.position_gains.kp(axis, axis);
  m.ki = config.position_gains.ki(axis, axis);
  m.kd = config.position_gains.kd(axis, axis);
  m.observer_bandwidth = config.observer_bandwidth;
  return m;
}

LoopEvaluation evaluate_loop(const LoopModel& m, const LoopPoint& p) {
  const StateVec& x = p.state;
  const double vm = p.input[0];
  const double fe = p.input[1];
  const double am = p.input_rate[0];

  const double d_des = m.s2 * x[kMasterPos];
  const double v_des = m.s2 * vm;
  const double a_des = m.s2 * am;

  double vs = 0.0;
  double e = 0.0;
  if (m.rigid_coupling) {
    vs = v_des;
  } else {
    e = d_des - x[kSlavePos];
    const double drive = m.slave_mass * (a_des + m.kp * e + m.ki * x[kPosIntegral] + m.kd * v_des) +
                         m.slave_resistance * v_des - fe;
    vs = drive / (m.slave_resistance + m.slave_mass * m.kd);
  }
  // Force balance residual −(drag + actuation) equals the environment reaction −F_e.
  const double residual = -fe;
  const double estimate = m.ideal_observer ? residual : x[kEstimate];

  LoopEvaluation out;
  out.state_rate[kMasterPos] = vm;
  out.state_rate[kSlavePos] = vs;
  out.state_rate[kEstimate] = m.ideal_observer ? 0.0 : m.observer_bandwidth * (residual - estimate);
  out.state_rate[kPosIntegral] = m.rigid_coupling ? 0.0 : e;
  out.state_rate[kForceIntegral] = -estimate;

  const double master_force = m.master_mass * am + (m.master_damping + m.s1 * m.kdamp) * vm +
                              m.master_stiffness * x[kMasterPos] + m.s1 * m.force_kp * estimate -
                              m.s1 * m.force_ki * x[kForceIntegral] - m.s1 * estimate;
  out.output << master_force, -vs;
  return out;
}

LinearLoop linearize_loop(const LoopModel& model, const LoopPoint& point, double step) {
  LinearLoop lin;
  for (int i = 0; i < kLoopStates; ++i) {
    const double h = step_for(point.state[i], step);
    LoopPoint plus = point, minus = point;
    plus.state[i] += h;
    minus.state[i] -= h;
    const LoopEvaluation a = evaluate_loop(model, plus);
    const LoopEvaluation b = evaluate_loop(model, minus);
    lin.A.col(i) = (a.state_rate - b.state_rate) / (2.0 * h);
    lin.C.col(i) = (a.output - b.output) / (2.0 * h);
  }
  for (int j = 0; j < 2; ++j) {
    const double h = step_for(point.input[j], step);
    LoopPoint plus = point, minus = point;
    plus.input[j] += h;
    minus.input[j] -= h;
    const LoopEvaluation a = evaluate_loop(model, plus);
    const LoopEvaluation b = evaluate_loop(model, minus);
    lin.B.col(j) = (a.state_rate - b.state_rate) / (2.0 * h);
    lin.D.col(j) = (a.output - b.output) / (2.0 * h);

    const double hr = step_for(point.input_rate[j], step);
    LoopPoint rplus = point, rminus = point;
    rplus.input_rate[j] += hr;
    rminus.input_rate[j] -= hr;
    const LoopEvaluation c = evaluate_loop(model, rplus);
    const LoopEvaluation d = evaluate_loop(model, rminus);
    lin.B1.col(j) = (c.state_rate - d.state_rate) / (2.0 * hr);
    lin.E.col(j) = (c.output - d.output) / (2.0 * hr);
  }
  return lin;
}

HybridTwoPort linearize_two_port(const LoopModel& model, const LoopPoint& point,
                                 const std::vector<double>& omega) {
  if (omega.empty()) throw ConfigurationError("frequency grid must not be empty");
  for (std::size_t i = 0; i < omega.size(); ++i) {
    if (!(omega[i] > 0.0) || (i > 0 && !(omega[i] > omega[i - 1]))) {
      throw ConfigurationError("frequency grid must be positive and strictly increasing");
    }
  }
  const LoopEvaluation at = evaluate_loop(model, point);
  if (at.state_rate.cwiseAbs().maxCoeff() > 1e-12) {
    throw ConfigurationError("operating point is not an equilibrium");
  }

  const LinearLoop lin = linearize_loop(model, point);
  using CMat = Eigen::Matrix<std::complex<double>, kLoopStates, kLoopStates>;
  HybridTwoPort out;
  out.omega = omega;
  out.h.reserve(omega.size());
  for (const double w : omega) {
    const std::complex<double> s(0.0, w);
    const CMat sys = s * CMat::Identity() - lin.A.cast<std::complex<double>>();
    const Eigen::Matrix<std::complex<double>, kLoopStates, 2> input =
        lin.B.cast<std::complex<double>>() + s * lin.B1.cast<std::complex<double>>();
    const Eigen::Matrix<std::complex<double>, kLoopStates, 2> x = sys.partialPivLu().solve(input);
    Eigen::Matrix2cd h = lin.C.cast<std::complex<double>>() * x + lin.D.cast<std::complex<double>>() +
                         s * lin.E.cast<std::complex<double>>();
    if (!h.allFinite()) throw SimulationFault("non-finite two-port parameters");
    out.h.push_back(h);
  }
  return out;
}

LlewellynResult llewellyn_margin(const HybridTwoPort& two_port, double tolerance) {
  LlewellynResult r;
  r.margin = std::numeric_limits<double>::infinity();
  r.min_re_h11 = std::numeric_limits<double>::infinity();
  r.min_re_h22 = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < two_port.h.size(); ++i) {
    const Eigen::Matrix2cd& h = two_port.h[i];
    const std::complex<double> p = h(0, 1) * h(1, 0);
    const double re11 = h(0, 0).real();
    const double re22 = h(1, 1).real();
    const double margin = 2.0 * re11 * re22 - std::abs(p) - p.real();
    r.min_re_h11 = std::min(r.min_re_h11, re11);
    r.min_re_h22 = std::min(r.min_re_h22, re22);
    if (margin < r.margin) {
      r.margin = margin;
      r.margin_omega = two_port.omega[i];
    }
  }
  r.ports_passive = r.min_re_h11 >= -tolerance && r.min_re_h22 >= -tolerance;
  r.stable = r.ports_passive && r.margin >= -tolerance;
  return r;
}

std::vector<double> log_grid(double lo, double hi, int points) {
  if (!(lo > 0.0) || !(hi > lo) || points < 2) throw ConfigurationError("invalid frequency grid");
  std::vector<double> g(static_cast<std::size_t>(points));
  const double a = std::log10(lo);
  const double b = std::log10(hi);
  for (int i = 0; i < points; ++i) {
    g[static_cast<std::size_t>(i)] = std::pow(10.0, a + (b - a) * i / (points - 1));
  }
  return g;
}

LlewellynResult analyze_stability(const TeleopConfig& config, const std::vector<double>& omega) {
  return llewellyn_margin(linearize_two_port(LoopModel::from_config(config, 0), LoopPoint{}, omega));
}

void set_sweep_parameter(TeleopConfig& c, const std::string& key, double value) {
  if (!std::isfinite(value)) throw ConfigurationError("sweep value for '" + key + "' must be finite");
  const Mat3 diag = value * Mat3::Identity();
  if (key == "s1") {
    c.scaling.s1 = Vec3::Constant(value);
  } else if (key == "s2") {
    c.scaling.s2 = Vec3::Constant(value);
  } else if (key == "kdamp") {
    c.force_gains.kdamp = diag;
  } else if (key == "force_kp") {
    c.force_gains.kp = diag;
  } else if (key == "force_ki") {
    c.force_gains.ki = diag;
  } else if (key == "kp") {
    c.position_gains.kp = diag;
  } else if (key == "ki") {
    c.position_gains.ki = diag;
  } else if (key == "kd") {
    c.position_gains.kd = diag;
  } else if (key == "observer_bandwidth") {
    c.observer_bandwidth = value;
  } else if (key == "inertia" || key == "friction") {
    auto* pm = std::get_if<PointMass>(&c.master);
    if (!pm) throw ConfigurationError("sweep of '" + key + "' needs a point-mass master");
    (key == "inertia" ? pm->inertia : pm->friction) = Vec3::Constant(value);
  } else {
    throw ConfigurationError("unknown sweep key '" + key + "'");
  }
}

std::vector<StabilityMapRow> stability_map(const TeleopConfig& base, const std::string& key, double lo, double hi,
                                           int points, const std::vector<double>& omega) {
  if (points < 1 || !std::isfinite(lo) || !std::isfinite(hi) || hi < lo) {
    throw ConfigurationError("sweep needs lo <= hi and at least one point");
  }
  std::vector<StabilityMapRow> rows;
  for (int i = 0; i < points; ++i) {
    double v = lo;
    if (points > 1) {
      const double s = static_cast<double>(i) / (points - 1);
      v = lo > 0.0 ? lo * std::pow(hi / lo, s) : lo + (hi - lo) * s;
    }
    TeleopConfig c = base;
    set_sweep_parameter(c, key, v);
    c.validate();
    rows.push_back({v, analyze_stability(c, omega)});
  }
  return rows;
}

}  // namespace microtele
