#include "microtele/hydrodynamics.hpp"

#include <cmath>

namespace microtele {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kSeriesEccentricity = 0.3;

struct ShapeChecker {
  void operator()(const Sphere& s) const {
    if (!(s.radius > 0.0) || !std::isfinite(s.radius)) {
      throw ConfigurationError("sphere radius must be positive");
    }
  }
  void operator()(const ProlateSpheroid& s) const {
    if (!(s.semi_minor > 0.0) || !(s.semi_major >= s.semi_minor) || !std::isfinite(s.semi_major)) {
      throw ConfigurationError("prolate spheroid requires semi_major >= semi_minor > 0");
    }
  }
};

// The four Perrin denominators share the atanh expansion; summing the series
// directly avoids the e^3 cancellation of the closed forms at low eccentricity.
// Each returns Σ_{k>=1} e^{2k-2} c_k for the coefficient sequence c_k.
template <class Coeff>
double eccentricity_series(double e, Coeff coeff) {
  const double e2 = e * e;
  double power = 1.0;
  double sum = 0.0;
  for (int k = 1; k < 200; ++k) {
    const double term = power * coeff(static_cast<double>(k));
    sum += term;
    if (std::abs(term) < 1e-18 * std::abs(sum)) break;
    power *= e2;
  }
  return sum;
}

}  // namespace

void FluidMedium::validate() const {
  if (!(viscosity > 0.0)) throw ConfigurationError("fluid viscosity must be positive");
  if (!(density > 0.0)) throw ConfigurationError("fluid density must be positive");
}

void validate_shape(const ParticleShape& shape) { std::visit(ShapeChecker{}, shape); }

double shape_volume(const ParticleShape& shape) {
  if (const auto* s = std::get_if<Sphere>(&shape)) {
    return 4.0 / 3.0 * kPi * s->radius * s->radius * s->radius;
  }
  const auto& p = std::get<ProlateSpheroid>(shape);
  return 4.0 / 3.0 * kPi * p.semi_major * p.semi_minor * p.semi_minor;
}

double support_radius(const ParticleShape& shape, const Vec3& n_body) {
  if (const auto* s = std::get_if<Sphere>(&shape)) return s->radius;
  const auto& p = std::get<ProlateSpheroid>(shape);
  const Vec3 n = n_body.normalized();
  const double along = n.x() / p.semi_major;
  const double across2 = (n.y() * n.y() + n.z() * n.z()) / (p.semi_minor * p.semi_minor);
  return 1.0 / std::sqrt(along * along + across2);
}

ResistanceTensor ResistanceTensor::rotated(const Quat& orientation) const {
  const Mat3 r = orientation.toRotationMatrix();
  return {r * translational * r.transpose(), r * rotational * r.transpose()};
}

SpheroidFriction perrin_friction(double a, double b, double mu) {
  const double e = std::sqrt(std::max(0.0, 1.0 - (b * b) / (a * a)));
  const double a3 = a * a * a;
  SpheroidFriction f{};
  if (e < kSeriesEccentricity) {
    const double s_par = eccentricity_series(e, [](double k) { return 1.0 / (2 * k + 1) + 1.0 / (2 * k - 1); });
    const double s_perp = eccentricity_series(e, [](double k) { return 3.0 / (2 * k - 1) - 1.0 / (2 * k + 1); });
    const double s_rot = eccentricity_series(e, [](double k) { return 1.0 / (2 * k - 1) - 1.0 / (2 * k + 1); });
    f.axial_translation = 8.0 * kPi * mu * a / s_par;
    f.transverse_translation = 16.0 * kPi * mu * a / s_perp;
    f.axial_rotation = 16.0 / 3.0 * kPi * mu * a3 * (1.0 - e * e) / s_rot;
    f.transverse_rotation = 16.0 / 3.0 * kPi * mu * a3 * (2.0 - e * e) / s_par;
    return f;
  }
  const double log_term = std::log((1.0 + e) / (1.0 - e));
  const double e2 = e * e;
  const double e3 = e2 * e;
  const double d_par = (1.0 + e2) * log_term - 2.0 * e;
  f.axial_translation = 16.0 * kPi * mu * a * e3 / d_par;
  f.transverse_translation = 32.0 * kPi * mu * a * e3 / (2.0 * e + (3.0 * e2 - 1.0) * log_term);
  f.axial_rotation = 32.0 / 3.0 * kPi * mu * a3 * e3 * (1.0 - e2) / (2.0 * e - (1.0 - e2) * log_term);
  f.transverse_rotation = 32.0 / 3.0 * kPi * mu * a3 * e3 * (2.0 - e2) / d_par;
  return f;
}

ResistanceTensor resistance_tensor(const ParticleShape& shape, const FluidMedium& fluid) {
  validate_shape(shape);
  const double mu = fluid.viscosity;
  ResistanceTensor r;
  if (const auto* s = std::get_if<Sphere>(&shape)) {
    r.translational = 6.0 * kPi * mu * s->radius * Mat3::Identity();
    r.rotational = 8.0 * kPi * mu * std::pow(s->radius, 3) * Mat3::Identity();
    return r;
  }
  const auto& p = std::get<ProlateSpheroid>(shape);
  const SpheroidFriction f = perrin_friction(p.semi_major, p.semi_minor, mu);
  r.translational = Vec3(f.axial_translation, f.transverse_translation, f.transverse_translation).asDiagonal();
  r.rotational = Vec3(f.axial_rotation, f.transverse_rotation, f.transverse_rotation).asDiagonal();
  return r;
}

DragWrench drag_force(const ParticleShape& shape, const FluidMedium& fluid, const Vec3& v_rel,
                      const Vec3& omega_rel, const Quat& orientation) {
  const ResistanceTensor world = resistance_tensor(shape, fluid).rotated(orientation);
  return {-(world.translational * v_rel), -(world.rotational * omega_rel)};
}

Vec3 stokeslet_velocity(const Vec3& p, const Vec3& source, const Vec3& force,
                        const FluidMedium& fluid) {
  const Vec3 r = p - source;
  const double dist = r.norm();
  if (dist <= 1e-9) {
    throw SingularPointError("stokeslet evaluated within 1e-9 m of its source");
  }
  const Vec3 rhat = r / dist;
  return (force + force.dot(rhat) * rhat) / (8.0 * kPi * fluid.viscosity * dist);
}

}  // namespace microtele
