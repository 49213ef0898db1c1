#pragma once

#include <cstdint>
#include <deque>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "microtele/control.hpp"
#include "microtele/magnetics.hpp"
#include "microtele/master_dynamics.hpp"
#include "microtele/slave_dynamics.hpp"

namespace microtele {

/// How the slave-side force command is formed.
enum class ActuationMode {
  ForceControl,  // position law on the S2-scaled reference
  GradientPull,  // joystick: gradient strength from the master deflection length
};

enum class MeasurementKind { Perfect, Noisy, Delayed };

struct MeasurementChannel {
  MeasurementKind kind = MeasurementKind::Perfect;
  double noise_sigma = 0.0;  // m, Noisy
  int delay_steps = 0;       // Delayed

  bool operator==(const MeasurementChannel&) const = default;
};

/// Operator hand coupled to the master through a spring-damper.
struct HandModel {
  Vec3 stiffness = Vec3::Constant(200.0);  // N/m
  Vec3 damping = Vec3::Constant(20.0);     // N·s/m

  bool operator==(const HandModel&) const = default;
};

/// Sustained compressive contact above `threshold` for `hold_time` re-parents the
/// slave into the object of `pair`.
struct EngulfmentRule {
  bool enabled = false;
  std::size_t pair = 0;
  double threshold = 4e-7;  // N
  double hold_time = 45.0;  // s

  bool operator==(const EngulfmentRule&) const = default;
};

struct TeleopConfig {
  MasterModel master = PointMass{};
  HandModel hand;
  ScalingMatrices scaling;
  ForceGains force_gains;
  PositionGains position_gains;
  double observer_bandwidth = 50.0;

  CoilArray coils = CoilArray::orthogonal_four();
  double hold_field = 5e-3;  // T
  ActuationMode actuation = ActuationMode::ForceControl;
  double pull_gradient = 5.0;  // T/m at full deflection
  double pull_travel = 0.02;   // master deflection for the full gradient, m
  /// When set, the pull aims at this point and the deflection only sets its strength.
  std::optional<Vec3> pull_focus;

  FluidMedium fluid;
  IntegrationMode mode = IntegrationMode::QuasiStatic;
  bool planar = true;
  bool hydrodynamic_coupling = true;

  BodyProperties slave = BodyProperties::homogeneous(Sphere{50e-6}, 2000.0);
  RigidBodyState slave_initial;
  std::vector<WorldBody> objects;   // world indices 1..n
  std::vector<ContactPair> pairs;   // indices into [slave, objects...]
  EngulfmentRule engulfment;

  MeasurementChannel measurement;
  int feedback_delay_steps = 0;
  std::uint64_t seed = 1;
  double dt = 1e-3;

  /// Task error is ‖object(task_object) − task_target‖ when set, else ‖d_des − d‖.
  std::optional<std::size_t> task_object;
  Vec3 task_target = Vec3::Zero();

  Vec3 master_initial = Vec3::Zero();  // initial task-space pose of the master

  void validate() const;
  bool operator==(const TeleopConfig&) const = default;
};

struct OperatorCommand {
  Vec3 pose = Vec3::Zero();      // master task space, m
  Vec3 velocity = Vec3::Zero();  // m/s
  Vec3 force = Vec3::Zero();     // direct hand force, N
  bool engage = true;
};

namespace flags {
inline constexpr std::uint32_t kSaturation = 1u << 0;
inline constexpr std::uint32_t kContact = 1u << 1;
inline constexpr std::uint32_t kEngulfed = 1u << 2;
inline constexpr std::uint32_t kAdhesion = 1u << 3;
inline constexpr std::uint32_t kAdhesionRelease = 1u << 4;
inline constexpr std::uint32_t kCurrentSaturation = 1u << 5;
inline constexpr std::uint32_t kPenetration = 1u << 6;
inline constexpr std::uint32_t kFaulted = 1u << 7;
}  // namespace flags

struct TelemetryFrame {
  double t = 0.0;
  VecX q;                                  // master generalized coordinates
  VecX qd;
  Vec3 master_position = Vec3::Zero();     // task space
  Vec3 master_velocity = Vec3::Zero();
  Vec3 d = Vec3::Zero();                   // slave
  Vec3 d_dot = Vec3::Zero();
  Vec3 reference = Vec3::Zero();           // d_desired
  Vec3 f_predicted = Vec3::Zero();
  Vec3 rendered_force = Vec3::Zero();      // F_u = S1 · f_predicted (delayed channel)
  Vec3 desired_force = Vec3::Zero();       // before saturation
  Vec3 commanded_force = Vec3::Zero();     // after saturation
  VecX currents;
  ForceBreakdown slave_forces;
  Vec3 contact_force = Vec3::Zero();       // net contact force on the slave
  std::vector<Vec3> object_positions;
  Vec3 force_integral = Vec3::Zero();
  Vec3 position_integral = Vec3::Zero();
  double task_error = 0.0;
  double master_energy = 0.0;
  std::uint32_t flags = 0;

  bool has(std::uint32_t flag) const { return (flags & flag) != 0; }
};

struct TeleopEvent {
  double t = 0.0;
  std::string kind;  // contact, adhesion_release, saturation, penetration, engulfment, fault
  std::string detail;
};

class TeleopSession {
 public:
  explicit TeleopSession(TeleopConfig config);

  /// One loop iteration. Throws SimulationFault (and marks the session faulted)
  /// on a non-finite state.
  TelemetryFrame step(const OperatorCommand& cmd);

  const TeleopConfig& config() const { return config_; }
  double time() const { return t_; }
  std::uint64_t steps() const { return steps_; }
  bool faulted() const { return faulted_; }
  bool engulfed() const { return engulfed_; }
  const MasterState& master() const { return master_; }
  const World& world() const { return world_; }
  const RigidBodyState& slave_state() const { return world_.bodies.front().state; }
  const std::vector<TeleopEvent>& events() const { return events_; }
  const TelemetryFrame& last_frame() const { return last_; }
  Vec3 master_position() const;
  Vec3 master_velocity() const;
  /// Master mechanical energy plus the hand-spring potential for `cmd`.
  double master_energy(const OperatorCommand& cmd) const;

 private:
  void record(std::string kind, std::string detail);
  Vec3 measure_position();
  Vec3 compute_slave_command(const Vec3& d_des, const Vec3& v_des, const Vec3& a_des, const Vec3& d_meas,
                             const Vec3& v_meas, const Vec3& deflection, bool engaged);
  Mat3 focus_stiffness(const Vec3& force, const Vec3& d_meas) const;

  TeleopConfig config_;
  MasterState master_;
  World world_;
  ForceObserver observer_;
  ErrorIntegral force_integral_;
  ErrorIntegral position_integral_;
  std::deque<Vec3> feedback_queue_;
  std::deque<Vec3> measurement_queue_;
  std::mt19937_64 rng_;
  std::normal_distribution<double> noise_{0.0, 1.0};

  Vec3 anchor_ = Vec3::Zero();        // master pose mapped to slave_origin_
  Vec3 slave_origin_ = Vec3::Zero();
  Vec3 held_reference_ = Vec3::Zero();
  Vec3 last_reference_velocity_ = Vec3::Zero();
  Vec3 last_measurement_ = Vec3::Zero();
  bool measurement_primed_ = false;
  bool engaged_ = true;
  Vec3 hold_direction_ = Vec3::UnitX();
  Vec3 f_predicted_ = Vec3::Zero();
  double t_ = 0.0;
  std::uint64_t steps_ = 0;
  bool faulted_ = false;
  bool engulfed_ = false;
  double engulf_timer_ = 0.0;
  bool penetrated_ = false;
  std::uint32_t previous_flags_ = 0;
  std::vector<TeleopEvent> events_;
  TelemetryFrame last_;
};

/// Free-function form of TeleopSession::step.
TelemetryFrame step_teleop(TeleopSession& session, const OperatorCommand& cmd);

}  // namespace microtele
