#include "microtele/magnetics.hpp"

#include <Eigen/Dense>

#include <cmath>

namespace microtele {

namespace {

constexpr double kDipolePrefactor = kMu0 / (4.0 * std::numbers::pi);
constexpr double kSingularRadius = 1e-6;
constexpr double kDefaultHoldField = 5e-3;  // T

void check_point(const CoilArray& array, const Vec3& p) {
  for (const Coil& c : array.coils) {
    if ((p - c.position).norm() <= kSingularRadius) {
      throw SingularPointError("field evaluated within 1e-6 m of a coil centre");
    }
  }
}

void check_currents(const CoilArray& array, const CurrentVector& currents) {
  if (static_cast<std::size_t>(currents.size()) != array.size()) {
    throw ConfigurationError("current vector length does not match the coil count");
  }
}

// Per-unit-current field columns and gradient blocks.
struct UnitResponse {
  Eigen::Matrix<double, 3, Eigen::Dynamic> field;
  std::vector<Mat3> gradient;
};

UnitResponse unit_response(const CoilArray& array, const Vec3& p) {
  UnitResponse r;
  r.field.resize(3, static_cast<Eigen::Index>(array.size()));
  r.gradient.reserve(array.size());
  for (std::size_t k = 0; k < array.size(); ++k) {
    const Coil& c = array.coils[k];
    const Vec3 m = c.dipole_gain * c.axis;
    r.field.col(static_cast<Eigen::Index>(k)) = dipole_field(m, c.position, p);
    r.gradient.push_back(dipole_gradient(m, c.position, p));
  }
  return r;
}

// Rows 0-2 hold the field, rows 3-5 the force; each group is scaled to unit
// target magnitude so the rank threshold does not depend on units.
MatX actuation_map(const UnitResponse& unit, const Vec3& moment, double field_scale, double force_scale) {
  const auto n = unit.field.cols();
  MatX a(6, n);
  a.topRows<3>() = unit.field / field_scale;
  for (Eigen::Index k = 0; k < n; ++k) {
    a.block<3, 1>(3, k) = unit.gradient[static_cast<std::size_t>(k)].transpose() * moment / force_scale;
  }
  return a;
}

}  // namespace

void Coil::validate() const {
  if (std::abs(axis.norm() - 1.0) > 1e-12) throw ConfigurationError("coil axis must be a unit vector");
  if (!(dipole_gain > 0.0)) throw ConfigurationError("coil dipole_gain must be positive");
  if (!(max_current > 0.0)) throw ConfigurationError("coil max_current must be positive");
}

CoilArray CoilArray::orthogonal_four(double distance, double dipole_gain, double max_current) {
  CoilArray a;
  const Vec3 dirs[] = {Vec3::UnitX(), -Vec3::UnitX(), Vec3::UnitY(), -Vec3::UnitY()};
  for (const Vec3& d : dirs) {
    a.coils.push_back(Coil{distance * d, -d, dipole_gain, max_current});
  }
  return a;
}

void CoilArray::validate() const {
  if (coils.empty()) throw ConfigurationError("coil array must contain at least one coil");
  for (const Coil& c : coils) c.validate();
}

void MagneticCluster::validate() const {
  validate_shape(shape);
  if (!(volume > 0.0)) throw ConfigurationError("cluster volume must be positive");
  if (const auto* s = std::get_if<SaturatedMagnetization>(&magnetization)) {
    if (s->moment_density < 0.0) throw ConfigurationError("moment density must be non-negative");
  } else if (std::get<LinearMagnetization>(magnetization).susceptibility < 0.0) {
    throw ConfigurationError("susceptibility must be non-negative");
  }
}

Vec3 dipole_field(const Vec3& moment, const Vec3& source, const Vec3& p) {
  const Vec3 r = p - source;
  const double d = r.norm();
  const Vec3 rhat = r / d;
  return kDipolePrefactor * (3.0 * rhat * rhat.dot(moment) - moment) / (d * d * d);
}

Mat3 dipole_gradient(const Vec3& moment, const Vec3& source, const Vec3& p) {
  // ∂B_i/∂p_j = 3k/r^5 [m_i r_j + m_j r_i + (m·r) δ_ij − 5 (m·r) r_i r_j / r²]
  const Vec3 r = p - source;
  const double d2 = r.squaredNorm();
  const double d5 = d2 * d2 * std::sqrt(d2);
  const double mr = moment.dot(r);
  Mat3 g = moment * r.transpose() + r * moment.transpose() + mr * Mat3::Identity() -
           (5.0 * mr / d2) * (r * r.transpose());
  return (3.0 * kDipolePrefactor / d5) * g;
}

Vec3 field_at(const CoilArray& array, const CurrentVector& currents, const Vec3& p) {
  check_currents(array, currents);
  check_point(array, p);
  Vec3 b = Vec3::Zero();
  for (std::size_t k = 0; k < array.size(); ++k) {
    const Coil& c = array.coils[k];
    const double i = currents[static_cast<Eigen::Index>(k)];
    if (i == 0.0) continue;
    b += dipole_field(c.dipole_gain * i * c.axis, c.position, p);
  }
  return b;
}

Mat3 field_gradient_at(const CoilArray& array, const CurrentVector& currents, const Vec3& p) {
  check_currents(array, currents);
  check_point(array, p);
  Mat3 g = Mat3::Zero();
  for (std::size_t k = 0; k < array.size(); ++k) {
    const Coil& c = array.coils[k];
    const double i = currents[static_cast<Eigen::Index>(k)];
    if (i == 0.0) continue;
    g += dipole_gradient(c.dipole_gain * i * c.axis, c.position, p);
  }
  return g;
}

Vec3 cluster_moment(const MagneticCluster& cluster, const Vec3& field) {
  if (const auto* s = std::get_if<SaturatedMagnetization>(&cluster.magnetization)) {
    const double b = field.norm();
    if (b < 1e-12) return Vec3::Zero();
    return s->moment_density * cluster.volume * field / b;
  }
  const double chi = std::get<LinearMagnetization>(cluster.magnetization).susceptibility;
  return (chi * cluster.volume / kMu0) * field;
}

MagneticWrench magnetic_wrench(const Vec3& moment, const Vec3& field, const Mat3& gradient) {
  return {gradient.transpose() * moment, moment.cross(field)};
}

CurrentSolution solve_currents(const CoilArray& array, const Vec3& p, const Vec3& desired_force,
                               const MagneticCluster& cluster, const Vec3& hold_field) {
  check_point(array, p);
  if (!desired_force.allFinite()) throw ConfigurationError("desired force must be finite");
  const auto n = static_cast<Eigen::Index>(array.size());
  CurrentSolution sol;
  sol.currents = CurrentVector::Zero(n);
  const double force_norm = desired_force.norm();
  if (force_norm == 0.0) {
    sol.rank = 0;
    return sol;
  }

  Vec3 hold = hold_field;
  if (hold.norm() == 0.0) hold = kDefaultHoldField * desired_force / force_norm;
  const double field_scale = hold.norm();

  const UnitResponse unit = unit_response(array, p);
  VecX target(6);
  target << hold / field_scale, desired_force / force_norm;

  Vec3 moment = cluster_moment(cluster, hold);
  for (int pass = 0; pass < 2; ++pass) {
    const MatX a = actuation_map(unit, moment, field_scale, force_norm);
    Eigen::JacobiSVD<MatX> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
    svd.setThreshold(1e-10);
    sol.currents = svd.solve(target);
    sol.rank = static_cast<int>(svd.rank());
    sol.residual = (a * sol.currents - target).norm();
    if (pass == 0) {
      const Vec3 refined = cluster_moment(cluster, unit.field * sol.currents);
      if (refined.norm() > 0.0) moment = refined;
    }
  }
  sol.degenerate = sol.rank < std::min<Eigen::Index>(6, n);

  double worst = 0.0;
  for (Eigen::Index k = 0; k < n; ++k) {
    worst = std::max(worst, std::abs(sol.currents[k]) / array.coils[static_cast<std::size_t>(k)].max_current);
  }
  if (worst > 1.0) {
    sol.currents /= worst;
    sol.saturated = true;
  }
  return sol;
}

}  // namespace microtele
