#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <numbers>
#include <stdexcept>
#include <string>

namespace microtele {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat6 = Eigen::Matrix<double, 6, 6>;
using VecX = Eigen::VectorXd;
using MatX = Eigen::MatrixXd;
using Quat = Eigen::Quaterniond;

// Vacuum permeability, classical SI value (T·m/A).
inline constexpr double kMu0 = 4.0e-7 * std::numbers::pi;
inline constexpr double kStandardGravity = 9.81;

inline Vec3 gravity_vector() { return {0.0, 0.0, -kStandardGravity}; }

/// Base for all recoverable library errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Evaluation point coincides with a field or flow singularity.
class SingularPointError : public Error {
 public:
  using Error::Error;
};

/// A configuration or precondition violation detected before stepping.
class ConfigurationError : public Error {
 public:
  using Error::Error;
};

/// Integration produced a non-finite state.
class SimulationFault : public Error {
 public:
  using Error::Error;
};

inline bool all_finite(const Eigen::Ref<const MatX>& m) { return m.allFinite(); }

inline Vec6 stack(const Vec3& lin, const Vec3& ang) {
  Vec6 out;
  out << lin, ang;
  return out;
}

}  // namespace microtele
