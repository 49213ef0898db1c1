#pragma once

#include <functional>
#include <variant>

#include "microtele/types.hpp"

namespace microtele {

/// Impedance-type device moving directly in task space (q ∈ R³, J = I).
struct PointMass {
  Vec3 inertia = Vec3::Constant(0.1);     // kg
  Vec3 friction = Vec3::Constant(2.0);    // P, N·s/m
  Vec3 transducer = Vec3::Constant(1.0);  // T, N·s/m
  Vec3 stiffness = Vec3::Zero();          // K, N/m

  bool operator==(const PointMass&) const = default;
};

/// Planar two-link arm; joint angles q = (q1, q2), task point at the tip.
struct TwoLink {
  double l1 = 0.3, l2 = 0.25;      // link lengths, m
  double m1 = 1.0, m2 = 0.8;       // kg
  double inertia1 = 0.01, inertia2 = 0.005;  // about the link centres, kg·m²
  double lc1 = 0.15, lc2 = 0.125;  // centre-of-mass distances, m
  double friction = 0.05;          // P, N·m·s
  double transducer = 0.02;        // T, N·m·s
  double stiffness = 0.0;          // K, N·m
  bool gravity = true;

  bool operator==(const TwoLink&) const = default;
};

using MasterModel = std::variant<PointMass, TwoLink>;

struct MasterEnergy {
  double input_work = 0.0;   // ∫ q̇ᵀ(u + Jᵀ S1 F) dt
  double dissipated = 0.0;   // ∫ q̇ᵀ(P + T) q̇ dt
};

struct MasterState {
  VecX q;
  VecX qd;
  MasterEnergy energy;
};

struct MasterTerms {
  MatX D;
  MatX C;
  VecX g;
  MatX J;  // 3×n, planar variants have a zero z row
};

/// Diagonal force (S1, master ← slave) and motion (S2, slave ← master) scales.
struct ScalingMatrices {
  Vec3 s1 = Vec3::Constant(1e6);
  Vec3 s2 = Vec3::Constant(1e-3);

  Mat3 force() const { return s1.asDiagonal(); }
  Mat3 motion() const { return s2.asDiagonal(); }
  void validate() const;
  bool operator==(const ScalingMatrices&) const = default;
};

int master_dof(const MasterModel& model);
MasterState initial_master_state(const MasterModel& model);
void validate_master(const MasterModel& model);

MatX inertia_matrix(const MasterModel& model, const VecX& q);
VecX gravity_vector(const MasterModel& model, const VecX& q);
MatX task_jacobian(const MasterModel& model, const VecX& q);
Vec3 forward_kinematics(const MasterModel& model, const VecX& q);
/// P + T as an n×n matrix.
MatX damping_matrix(const MasterModel& model);
MatX stiffness_matrix(const MasterModel& model);

/// C_ij = Σ_k ½(∂D_ij/∂q_k + ∂D_ik/∂q_j − ∂D_jk/∂q_i)·q̇_k, central differences with step 1e-6.
MatX christoffel_matrix(const std::function<MatX(const VecX&)>& inertia, const VecX& q, const VecX& qd);
/// Closed-form Coriolis matrix of the two-link arm.
MatX christoffel_analytic(const TwoLink& arm, const VecX& q, const VecX& qd);

MasterTerms master_terms(const MasterModel& model, const VecX& q, const VecX& qd);

/// Kinetic + spring + gravitational potential energy.
double mechanical_energy(const MasterModel& model, const MasterState& state);

/// One step of D q̈ = u + Jᵀ S1 F − (C + P + T) q̇ − K q − g. Velocity-linear
/// terms are taken at the new velocity, then q advances with it. `task_damping`
/// is an extra task-space damping −B J q̇ applied by the controller, also
/// evaluated at the new velocity and counted as input work.
MasterState step_master(const MasterModel& model, const MasterState& state, const VecX& u,
                        const Vec3& task_force, const ScalingMatrices& scaling, double dt,
                        const Mat3& task_damping = Mat3::Zero());

}  // namespace microtele
