#pragma once

#include "microtele/master_dynamics.hpp"
#include "microtele/slave_dynamics.hpp"
#include "microtele/types.hpp"

namespace microtele {

struct ForceGains {
  Mat3 kp = Mat3::Zero();
  Mat3 ki = Mat3::Zero();
  Mat3 kdamp = 1e-6 * Mat3::Identity();  // acts on task velocity J·q̇, before S1
  Vec3 f_desired = Vec3::Zero();         // N
  double f_max = 1e-5;                   // N

  void validate() const;
  bool operator==(const ForceGains&) const = default;
};

struct PositionGains {
  Mat3 kp = 1.8e4 * Mat3::Identity();
  Mat3 ki = Mat3::Zero();
  Mat3 kd = 100.0 * Mat3::Identity();

  void validate() const;
  bool operator==(const PositionGains&) const = default;
};

/// Trapezoidal running integral of a 3-vector error signal.
struct ErrorIntegral {
  Vec3 value = Vec3::Zero();
  Vec3 last_error = Vec3::Zero();
  bool primed = false;

  void update(const Vec3& error, double dt, bool freeze = false);
};

/// u = g + Jᵀ S1 (f_d + kp f_e + ki ∫f_e − kdamp J q̇), f_e = f_d − f_predicted.
/// The integral is advanced (trapezoidal) before use unless `freeze` is set.
VecX force_control_law(const MasterTerms& terms, const ForceGains& gains, ErrorIntegral& integral,
                       const Vec3& f_predicted, const VecX& qd, const ScalingMatrices& scaling, double dt,
                       bool freeze = false);

/// u = M (d̈_des + kp e + ki ∫e + kd ė) + h, e = d_des − d_pred.
Vec3 position_control_law(const Mat3& inertia, const Vec3& h, const Vec3& d_desired, const Vec3& v_desired,
                          const Vec3& a_desired, const Vec3& d_predicted, const Vec3& v_predicted,
                          const PositionGains& gains, ErrorIntegral& integral, double dt);

struct ScaledSignals {
  Vec3 master_force;
  Vec3 slave_position;
  Vec3 slave_velocity;
};

/// master_force = S1·slave_force; slave reference = S2·(position, velocity).
ScaledSignals apply_scaling(const ScalingMatrices& scaling, const Vec3& slave_force,
                            const Vec3& master_position, const Vec3& master_velocity);

struct SaturatedForce {
  Vec3 force;
  bool clamped = false;
};

/// Direction-preserving clamp to ‖f‖ ≤ f_max.
SaturatedForce saturate_force(const Vec3& force, double f_max);

struct KnownForces {
  Vec3 drag = Vec3::Zero();
  Vec3 actuation = Vec3::Zero();
  Vec3 gravity = Vec3::Zero();

  Vec3 sum() const { return drag + actuation + gravity; }
};

/// Interaction-force estimator. QuasiStatic: first-order low-pass of the force
/// balance residual. SecondOrder: generalized-momentum observer with gain equal
/// to the bandwidth.
struct ForceObserver {
  double bandwidth = 50.0;  // rad/s
  Vec3 estimate = Vec3::Zero();
  Vec3 momentum_origin = Vec3::Zero();
  Vec3 momentum_integral = Vec3::Zero();
  bool primed = false;

  void reset();
};

Vec3 observe_force(ForceObserver& observer, const BodyProperties& body, const RigidBodyState& state,
                   const KnownForces& known, double dt, IntegrationMode mode);

}  // namespace microtele
