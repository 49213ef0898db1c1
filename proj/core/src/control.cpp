#include "microtele/control.hpp"

namespace microtele {

namespace {

bool nonnegative(const Mat3& m) { return m.allFinite() && (m.array() >= 0.0).all(); }

}  // namespace

void ForceGains::validate() const {
  if (!nonnegative(kp) || !nonnegative(ki) || !nonnegative(kdamp)) {
    throw ConfigurationError("force gains must be entrywise non-negative");
  }
  if (!(f_max > 0.0)) throw ConfigurationError("f_max must be positive");
  if (!f_desired.allFinite()) throw ConfigurationError("desired force must be finite");
}

void PositionGains::validate() const {
  if (!nonnegative(kp) || !nonnegative(ki) || !nonnegative(kd)) {
    throw ConfigurationError("position gains must be entrywise non-negative");
  }
}

void ErrorIntegral::update(const Vec3& error, double dt, bool freeze) {
  if (!primed) {
    last_error = error;
    primed = true;
  }
  if (!freeze) value += 0.5 * dt * (last_error + error);
  last_error = error;
}

VecX force_control_law(const MasterTerms& terms, const ForceGains& gains, ErrorIntegral& integral,
                       const Vec3& f_predicted, const VecX& qd, const ScalingMatrices& scaling, double dt,
                       bool freeze) {
  const Vec3 f_e = gains.f_desired - f_predicted;
  integral.update(f_e, dt, freeze);
  const Vec3 task_velocity = terms.J * qd;
  const Vec3 task = gains.f_desired + gains.kp * f_e + gains.ki * integral.value - gains.kdamp * task_velocity;
  return terms.g + terms.J.transpose() * (scaling.force() * task);
}

Vec3 position_control_law(const Mat3& inertia, const Vec3& h, const Vec3& d_desired, const Vec3& v_desired,
                          const Vec3& a_desired, const Vec3& d_predicted, const Vec3& v_predicted,
                          const PositionGains& gains, ErrorIntegral& integral, double dt) {
  const Vec3 e = d_desired - d_predicted;
  const Vec3 e_dot = v_desired - v_predicted;
  integral.update(e, dt);
  return inertia * (a_desired + gains.kp * e + gains.ki * integral.value + gains.kd * e_dot) + h;
}

ScaledSignals apply_scaling(const ScalingMatrices& scaling, const Vec3& slave_force,
                            const Vec3& master_position, const Vec3& master_velocity) {
  return {scaling.s1.cwiseProduct(slave_force), scaling.s2.cwiseProduct(master_position),
          scaling.s2.cwiseProduct(master_velocity)};
}

SaturatedForce saturate_force(const Vec3& force, double f_max) {
  if (!(f_max > 0.0)) throw ConfigurationError("f_max must be positive");
  const double n = force.norm();
  if (n > f_max) return {force * (f_max / n), true};
  return {force, false};
}

void ForceObserver::reset() {
  estimate.setZero();
  momentum_origin.setZero();
  momentum_integral.setZero();
  primed = false;
}

Vec3 observe_force(ForceObserver& observer, const BodyProperties& body, const RigidBodyState& state,
                   const KnownForces& known, double dt, IntegrationMode mode) {
  if (!(dt > 0.0)) throw ConfigurationError("time step must be positive");
  if (!(observer.bandwidth > 0.0)) throw ConfigurationError("observer bandwidth must be positive");
  const double alpha = observer.bandwidth * dt;
  if (alpha >= 1.0) throw ConfigurationError("observer bandwidth * dt must be below 1");

  if (mode == IntegrationMode::QuasiStatic) {
    const Vec3 residual = -known.sum();
    observer.estimate += alpha * (residual - observer.estimate);
    return observer.estimate;
  }

  // r = K (p − p0 − ∫(F_known + r) dt), advanced with the previous estimate.
  const Vec3 momentum = body.mass() * state.velocity;
  if (!observer.primed) {
    observer.momentum_origin = momentum - dt * known.sum();
    observer.momentum_integral.setZero();
    observer.primed = true;
  }
  observer.momentum_integral += dt * (known.sum() + observer.estimate);
  observer.estimate =
      observer.bandwidth * (momentum - observer.momentum_origin - observer.momentum_integral);
  return observer.estimate;
}

}  // namespace microtele
