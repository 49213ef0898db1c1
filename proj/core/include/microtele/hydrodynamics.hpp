#pragma once

#include <functional>
#include <utility>
#include <variant>

#include "microtele/types.hpp"

namespace microtele {

/// Newtonian fluid. `ambient_flow` is an optional background velocity field;
/// an empty function means quiescent fluid.
struct FluidMedium {
  double viscosity = 1.0e-3;  // Pa·s
  double density = 1000.0;    // kg/m^3
  std::function<Vec3(const Vec3&)> ambient_flow;

  Vec3 flow_at(const Vec3& p) const { return ambient_flow ? ambient_flow(p) : Vec3::Zero(); }
  void validate() const;
  /// Flow functions compare by presence only.
  bool operator==(const FluidMedium& o) const {
    return viscosity == o.viscosity && density == o.density && bool(ambient_flow) == bool(o.ambient_flow);
  }
};

struct Sphere {
  double radius = 0.0;
  bool operator==(const Sphere&) const = default;
};

/// Prolate spheroid with its symmetry axis along the body x-axis.
struct ProlateSpheroid {
  double semi_major = 0.0;
  double semi_minor = 0.0;
  bool operator==(const ProlateSpheroid&) const = default;
};

using ParticleShape = std::variant<Sphere, ProlateSpheroid>;

void validate_shape(const ParticleShape& shape);
double shape_volume(const ParticleShape& shape);

/// Distance from the centre to the surface along the body-frame unit direction `n`.
double support_radius(const ParticleShape& shape, const Vec3& n_body);

/// Body-frame resistance blocks (symmetric positive definite).
struct ResistanceTensor {
  Mat3 translational = Mat3::Zero();  // N·s/m
  Mat3 rotational = Mat3::Zero();     // N·m·s

  /// Both blocks rotated into the world frame.
  ResistanceTensor rotated(const Quat& orientation) const;
};

/// Axial and transverse friction factors of a prolate spheroid from the closed-form
/// Perrin expressions. Degenerates smoothly to the sphere values.
struct SpheroidFriction {
  double axial_translation;
  double transverse_translation;
  double axial_rotation;
  double transverse_rotation;
};
SpheroidFriction perrin_friction(double semi_major, double semi_minor, double viscosity);

ResistanceTensor resistance_tensor(const ParticleShape& shape, const FluidMedium& fluid);

struct DragWrench {
  Vec3 force = Vec3::Zero();
  Vec3 torque = Vec3::Zero();
};

/// Viscous drag −R_world·(v_rel, ω_rel); opposes the relative motion.
DragWrench drag_force(const ParticleShape& shape, const FluidMedium& fluid, const Vec3& v_rel,
                      const Vec3& omega_rel, const Quat& orientation);

/// Free-space Oseen tensor velocity at `p` induced by point force `force` at `source`.
Vec3 stokeslet_velocity(const Vec3& p, const Vec3& source, const Vec3& force,
                        const FluidMedium& fluid);

}  // namespace microtele
