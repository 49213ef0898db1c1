#pragma once

#include <variant>
#include <vector>

#include "microtele/hydrodynamics.hpp"
#include "microtele/types.hpp"

namespace microtele {

/// Electromagnet modelled as a point dipole whose moment is
/// dipole_gain · current · axis.
struct Coil {
  Vec3 position = Vec3::Zero();
  Vec3 axis = Vec3::UnitZ();
  double dipole_gain = 1.0;  // A·m² per A
  double max_current = 1.0;  // A

  void validate() const;
  bool operator==(const Coil&) const = default;
};

struct CoilArray {
  std::vector<Coil> coils;

  /// Four coils on ±x, ±y at `distance` from the workspace centre, axes pointing inward.
  static CoilArray orthogonal_four(double distance = 0.05, double dipole_gain = 10.0,
                                   double max_current = 10.0);

  std::size_t size() const { return coils.size(); }
  void validate() const;
  bool operator==(const CoilArray&) const = default;
};

using CurrentVector = VecX;

struct SaturatedMagnetization {
  double moment_density = 0.0;  // A/m
  bool operator==(const SaturatedMagnetization&) const = default;
};
struct LinearMagnetization {
  double susceptibility = 0.0;
  bool operator==(const LinearMagnetization&) const = default;
};
using Magnetization = std::variant<SaturatedMagnetization, LinearMagnetization>;

/// Magnetizable cluster. `volume` is the magnetic material volume; it may differ
/// from the hydrodynamic shape volume.
struct MagneticCluster {
  ParticleShape shape = Sphere{1e-6};
  double volume = 0.0;  // m^3
  Magnetization magnetization = SaturatedMagnetization{};

  void validate() const;
  bool operator==(const MagneticCluster&) const = default;
};

struct MagneticWrench {
  Vec3 force = Vec3::Zero();   // N
  Vec3 torque = Vec3::Zero();  // N·m
};

/// Field of a single dipole `moment` located at `source`, evaluated at `p`.
Vec3 dipole_field(const Vec3& moment, const Vec3& source, const Vec3& p);
/// Jacobian ∂B/∂p of the same dipole.
Mat3 dipole_gradient(const Vec3& moment, const Vec3& source, const Vec3& p);

Vec3 field_at(const CoilArray& array, const CurrentVector& currents, const Vec3& p);
Mat3 field_gradient_at(const CoilArray& array, const CurrentVector& currents, const Vec3& p);

Vec3 cluster_moment(const MagneticCluster& cluster, const Vec3& field);

/// force = ∇Bᵀ·m, torque = m × B.
MagneticWrench magnetic_wrench(const Vec3& moment, const Vec3& field, const Mat3& gradient);

struct CurrentSolution {
  CurrentVector currents;
  bool saturated = false;   // some coil hit max_current; the vector was scaled down
  bool degenerate = false;  // the actuation map is not full rank
  int rank = 0;
  double residual = 0.0;    // ‖A·i − target‖ before saturation
};

/// Minimum-norm currents that hold `hold_field` at `p` while producing
/// `desired_force` on `cluster`. The moment is evaluated at the field estimate,
/// the force rows are rebuilt once from the resulting field (fixed-point
/// refinement), and the vector is scaled into the current limits.
CurrentSolution solve_currents(const CoilArray& array, const Vec3& p, const Vec3& desired_force,
                               const MagneticCluster& cluster, const Vec3& hold_field);

}  // namespace microtele
