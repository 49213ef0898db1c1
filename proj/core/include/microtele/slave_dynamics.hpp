#pragma once

#include <optional>
#include <vector>

#include "microtele/hydrodynamics.hpp"
#include "microtele/magnetics.hpp"
#include "microtele/types.hpp"

namespace microtele {

struct RigidBodyState {
  Vec3 position = Vec3::Zero();
  Quat orientation = Quat::Identity();
  Vec3 velocity = Vec3::Zero();
  Vec3 angular_velocity = Vec3::Zero();

  bool finite() const;
  void validate() const;
  bool operator==(const RigidBodyState& o) const {
    return position == o.position && orientation.coeffs() == o.orientation.coeffs() &&
           velocity == o.velocity && angular_velocity == o.angular_velocity;
  }
};

struct BodyProperties {
  ParticleShape shape = Sphere{1e-6};
  Mat6 mass_matrix = Mat6::Identity();
  double density = 1000.0;
  std::optional<MagneticCluster> magnetic;

  /// Homogeneous body: mass and principal inertia derived from the shape.
  static BodyProperties homogeneous(const ParticleShape& shape, double density,
                                    std::optional<MagneticCluster> magnetic = std::nullopt);

  double volume() const { return shape_volume(shape); }
  Mat3 mass() const { return mass_matrix.topLeftCorner<3, 3>(); }
  Mat3 inertia() const { return mass_matrix.bottomRightCorner<3, 3>(); }
  void validate() const;
  bool operator==(const BodyProperties&) const = default;
};

/// Exponential repulsion with short-range adhesion that lets go above a
/// separation speed.
struct ContactParams {
  double stiffness = 1e-8;         // k_r, N
  double decay_length = 2e-6;      // λ, m
  double adhesion_force = 2e-10;   // N
  double adhesion_range = 5e-6;    // m
  double breakaway_speed = 5e-5;   // m/s

  void validate() const;
  bool operator==(const ContactParams&) const = default;
};

struct ContactEvaluation {
  double force = 0.0;       // net normal force, positive pushes the bodies apart
  double repulsion = 0.0;
  double adhesion = 0.0;    // magnitude of the applied adhesion term
  double stiffness = 0.0;   // −∂force/∂gap
  bool adhesion_active = false;
  bool release_triggered = false;  // speed gate opened this evaluation
  bool released = false;           // latch state after this evaluation
};

/// Stateless normal contact law: k_r·exp(−δ/λ) − F_adh·[0 < δ < range], the
/// adhesion term dropped when the separation speed exceeds the breakaway speed.
double contact_force(double gap, double separation_speed, const ContactParams& params);

/// Same law with release hysteresis: once the speed gate opens, adhesion stays
/// off until the gap leaves the adhesion range.
ContactEvaluation evaluate_contact(double gap, double separation_speed, const ContactParams& params,
                                   bool released);

/// (ρ_body − ρ_fluid)·V·g.
Vec3 gravity_buoyancy(const BodyProperties& body, const FluidMedium& fluid);

enum class IntegrationMode { QuasiStatic, SecondOrder };

/// Per-term generalized forces (force, torque) on one body.
struct ForceBreakdown {
  Vec6 drag = Vec6::Zero();
  Vec6 actuation = Vec6::Zero();
  Vec6 contact = Vec6::Zero();
  Vec6 gravity = Vec6::Zero();
  Vec6 external = Vec6::Zero();

  Vec6 total() const { return drag + actuation + contact + gravity + external; }
  Vec6 non_drag() const { return actuation + contact + gravity + external; }
};

/// Another body seen from the slave, frozen for the duration of one step.
struct Neighbor {
  RigidBodyState state;
  BodyProperties body;
  ContactParams contact;
  bool released = false;
  Vec3 fluid_force = Vec3::Zero();  // force the neighbour exerts on the fluid (Stokeslet source)
};

struct SlaveEnvironment {
  FluidMedium fluid;
  Vec3 field = Vec3::Zero();
  Mat3 gradient = Mat3::Zero();
  std::vector<Neighbor> neighbors;
  Vec3 external_force = Vec3::Zero();
  bool planar = false;
};

/// Sum of drag, actuation, contact and gravity on `state`, each term kept.
ForceBreakdown total_force(const RigidBodyState& state, const BodyProperties& body,
                           const SlaveEnvironment& env);

// --- multi-body stepping -------------------------------------------------

struct WorldBody {
  BodyProperties body;
  RigidBodyState state;
  bool fixed = false;
  Vec3 actuation_force = Vec3::Zero();
  Vec3 actuation_torque = Vec3::Zero();
  Vec3 external_force = Vec3::Zero();
  /// −∂F_actuation/∂position, treated implicitly like the contact stiffness.
  Mat3 actuation_stiffness = Mat3::Zero();
  std::optional<Vec3> prescribed_fluid_force;  // Stokeslet source for fixed bodies

  bool operator==(const WorldBody&) const = default;
};

struct ContactPair {
  std::size_t first = 0;
  std::size_t second = 0;
  ContactParams params;
  bool released = false;

  bool operator==(const ContactPair&) const = default;
};

struct PairReport {
  double gap = 0.0;
  ContactEvaluation contact;
  Vec3 normal = Vec3::Zero();  // from second towards first
};

struct World {
  FluidMedium fluid;
  std::vector<WorldBody> bodies;
  std::vector<ContactPair> pairs;
  bool planar = false;
  bool hydrodynamic_coupling = true;  // Stokeslet flow between bodies
};

struct WorldStepReport {
  std::vector<ForceBreakdown> forces;  // effective forces over the step, per body
  std::vector<PairReport> pairs;
};

/// Surface gap between two bodies along the line of centres.
double surface_gap(const WorldBody& a, const WorldBody& b, Vec3* normal = nullptr);

/// Advances every non-fixed body by `dt`. QuasiStatic solves the coupled force
/// balance (R + dt·K)·v = R·u + F with the contact stiffness K taken implicitly;
/// SecondOrder integrates m·v̇ = ΣF with implicit drag and contact stiffness.
/// The step is split when a pair would close by more than a fraction of its
/// decay length; reported forces are time averages over the substeps.
WorldStepReport step_world(World& world, double dt, IntegrationMode mode);

struct SlaveStep {
  RigidBodyState state;
  ForceBreakdown forces;
  std::vector<PairReport> contacts;
};

/// Single-body step of the slave among frozen neighbours.
SlaveStep step_slave(const RigidBodyState& state, const BodyProperties& body,
                     const SlaveEnvironment& env, double dt, IntegrationMode mode);

}  // namespace microtele
