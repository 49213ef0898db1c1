#include "microtele/master_dynamics.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <numbers>

namespace microtele {

namespace {

constexpr double kFdStep = 1e-6;

double wrap_angle(double a) {
  if (a > -std::numbers::pi && a <= std::numbers::pi) return a;
  const double two_pi = 2.0 * std::numbers::pi;
  double w = std::fmod(a + std::numbers::pi, two_pi);
  if (w <= 0.0) w += two_pi;
  return w - std::numbers::pi;
}

void check_state(const MasterModel& model, const VecX& q, const VecX& qd) {
  const auto n = master_dof(model);
  if (q.size() != n || qd.size() != n) throw ConfigurationError("master state has the wrong dimension");
}

MatX two_link_inertia(const TwoLink& a, double q2) {
  const double c2 = std::cos(q2);
  MatX d(2, 2);
  d(0, 0) = a.m1 * a.lc1 * a.lc1 + a.m2 * (a.l1 * a.l1 + a.lc2 * a.lc2 + 2.0 * a.l1 * a.lc2 * c2) +
            a.inertia1 + a.inertia2;
  d(0, 1) = a.m2 * (a.lc2 * a.lc2 + a.l1 * a.lc2 * c2) + a.inertia2;
  d(1, 0) = d(0, 1);
  d(1, 1) = a.m2 * a.lc2 * a.lc2 + a.inertia2;
  return d;
}

}  // namespace

void ScalingMatrices::validate() const {
  if (!(s1.array() > 0.0).all() || !(s2.array() > 0.0).all() || !s1.allFinite() || !s2.allFinite()) {
    throw ConfigurationError("scaling diagonals must be positive");
  }
}

int master_dof(const MasterModel& model) { return std::holds_alternative<PointMass>(model) ? 3 : 2; }

MasterState initial_master_state(const MasterModel& model) {
  const int n = master_dof(model);
  return {VecX::Zero(n), VecX::Zero(n), {}};
}

void validate_master(const MasterModel& model) {
  if (const auto* p = std::get_if<PointMass>(&model)) {
    if (!(p->inertia.array() > 0.0).all()) throw ConfigurationError("master inertia must be positive");
    if ((p->friction.array() < 0.0).any() || (p->transducer.array() < 0.0).any() ||
        (p->stiffness.array() < 0.0).any()) {
      throw ConfigurationError("master P, T, K must be non-negative");
    }
    return;
  }
  const auto& a = std::get<TwoLink>(model);
  if (!(a.l1 > 0.0 && a.l2 > 0.0 && a.m1 > 0.0 && a.m2 > 0.0 && a.inertia1 > 0.0 && a.inertia2 > 0.0)) {
    throw ConfigurationError("two-link lengths, masses and inertias must be positive");
  }
  if (a.friction < 0.0 || a.transducer < 0.0 || a.stiffness < 0.0 || a.lc1 < 0.0 || a.lc2 < 0.0) {
    throw ConfigurationError("two-link P, T, K and centre distances must be non-negative");
  }
}

MatX inertia_matrix(const MasterModel& model, const VecX& q) {
  if (const auto* p = std::get_if<PointMass>(&model)) return p->inertia.asDiagonal();
  return two_link_inertia(std::get<TwoLink>(model), q[1]);
}

VecX gravity_vector(const MasterModel& model, const VecX& q) {
  if (std::holds_alternative<PointMass>(model)) return VecX::Zero(3);
  const auto& a = std::get<TwoLink>(model);
  VecX g = VecX::Zero(2);
  if (!a.gravity) return g;
  const double g0 = kStandardGravity;
  const double c12 = std::cos(q[0] + q[1]);
  g[0] = (a.m1 * a.lc1 + a.m2 * a.l1) * g0 * std::cos(q[0]) + a.m2 * a.lc2 * g0 * c12;
  g[1] = a.m2 * a.lc2 * g0 * c12;
  return g;
}

MatX task_jacobian(const MasterModel& model, const VecX& q) {
  if (std::holds_alternative<PointMass>(model)) return MatX::Identity(3, 3);
  const auto& a = std::get<TwoLink>(model);
  const double s1 = std::sin(q[0]), c1 = std::cos(q[0]);
  const double s12 = std::sin(q[0] + q[1]), c12 = std::cos(q[0] + q[1]);
  MatX j = MatX::Zero(3, 2);
  j(0, 0) = -a.l1 * s1 - a.l2 * s12;
  j(0, 1) = -a.l2 * s12;
  j(1, 0) = a.l1 * c1 + a.l2 * c12;
  j(1, 1) = a.l2 * c12;
  return j;
}

Vec3 forward_kinematics(const MasterModel& model, const VecX& q) {
  if (std::holds_alternative<PointMass>(model)) return q.head<3>();
  const auto& a = std::get<TwoLink>(model);
  return {a.l1 * std::cos(q[0]) + a.l2 * std::cos(q[0] + q[1]),
          a.l1 * std::sin(q[0]) + a.l2 * std::sin(q[0] + q[1]), 0.0};
}

MatX damping_matrix(const MasterModel& model) {
  if (const auto* p = std::get_if<PointMass>(&model)) return (p->friction + p->transducer).asDiagonal();
  const auto& a = std::get<TwoLink>(model);
  return (a.friction + a.transducer) * MatX::Identity(2, 2);
}

MatX stiffness_matrix(const MasterModel& model) {
  if (const auto* p = std::get_if<PointMass>(&model)) return p->stiffness.asDiagonal();
  return std::get<TwoLink>(model).stiffness * MatX::Identity(2, 2);
}

MatX christoffel_matrix(const std::function<MatX(const VecX&)>& inertia, const VecX& q, const VecX& qd) {
  const auto n = q.size();
  std::vector<MatX> dd(static_cast<std::size_t>(n));  // dd[k] = ∂D/∂q_k
  for (Eigen::Index k = 0; k < n; ++k) {
    VecX qp = q, qm = q;
    qp[k] += kFdStep;
    qm[k] -= kFdStep;
    dd[static_cast<std::size_t>(k)] = (inertia(qp) - inertia(qm)) / (2.0 * kFdStep);
  }
  MatX c = MatX::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      double s = 0.0;
      for (Eigen::Index k = 0; k < n; ++k) {
        const auto ks = static_cast<std::size_t>(k);
        const auto js = static_cast<std::size_t>(j);
        const auto is = static_cast<std::size_t>(i);
        s += 0.5 * (dd[ks](i, j) + dd[js](i, k) - dd[is](j, k)) * qd[k];
      }
      c(i, j) = s;
    }
  }
  return c;
}

MatX christoffel_analytic(const TwoLink& arm, const VecX& q, const VecX& qd) {
  const double h = -arm.m2 * arm.l1 * arm.lc2 * std::sin(q[1]);
  MatX c(2, 2);
  c << h * qd[1], h * (qd[0] + qd[1]), -h * qd[0], 0.0;
  return c;
}

MasterTerms master_terms(const MasterModel& model, const VecX& q, const VecX& qd) {
  check_state(model, q, qd);
  MasterTerms t;
  t.D = inertia_matrix(model, q);
  if (std::holds_alternative<PointMass>(model)) {
    t.C = MatX::Zero(3, 3);
  } else {
    t.C = christoffel_matrix([&model](const VecX& x) { return inertia_matrix(model, x); }, q, qd);
  }
  t.g = gravity_vector(model, q);
  t.J = task_jacobian(model, q);
  return t;
}

double mechanical_energy(const MasterModel& model, const MasterState& state) {
  const MatX d = inertia_matrix(model, state.q);
  double e = 0.5 * state.qd.dot(d * state.qd) + 0.5 * state.q.dot(stiffness_matrix(model) * state.q);
  if (const auto* a = std::get_if<TwoLink>(&model); a && a->gravity) {
    e += kStandardGravity * ((a->m1 * a->lc1 + a->m2 * a->l1) * std::sin(state.q[0]) +
                             a->m2 * a->lc2 * std::sin(state.q[0] + state.q[1]));
  }
  return e;
}

MasterState step_master(const MasterModel& model, const MasterState& state, const VecX& u,
                        const Vec3& task_force, const ScalingMatrices& scaling, double dt,
                        const Mat3& task_damping) {
  if (!(dt > 0.0)) throw ConfigurationError("time step must be positive");
  check_state(model, state.q, state.qd);
  if (u.size() != state.q.size()) throw ConfigurationError("master input has the wrong dimension");

  const MasterTerms t = master_terms(model, state.q, state.qd);
  const MatX damping = damping_matrix(model);
  const VecX drive = u + t.J.transpose() * (scaling.force() * task_force);
  const VecX rhs = t.D * state.qd + dt * (drive - stiffness_matrix(model) * state.q - t.g);
  const MatX controller_damping = t.J.transpose() * task_damping * t.J;
  const MatX lhs = t.D + dt * (t.C + damping + controller_damping);

  MasterState next = state;
  next.qd = lhs.partialPivLu().solve(rhs);
  next.q = state.q + dt * next.qd;
  if (std::holds_alternative<TwoLink>(model)) {
    for (Eigen::Index i = 0; i < next.q.size(); ++i) next.q[i] = wrap_angle(next.q[i]);
  }
  next.energy.input_work += dt * next.qd.dot(drive - controller_damping * next.qd);
  next.energy.dissipated += dt * next.qd.dot(damping * next.qd);
  if (!next.q.allFinite() || !next.qd.allFinite()) {
    throw SimulationFault("non-finite master state");
  }
  return next;
}

}  // namespace microtele
