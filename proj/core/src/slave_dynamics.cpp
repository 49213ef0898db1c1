#include "microtele/slave_dynamics.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <sstream>

namespace microtele {

namespace {

// Caps exp(−δ/λ) for deep overlaps; e^50 is far beyond any physical contact.
constexpr double kMaxContactExponent = 50.0;
constexpr double kStokesletCutoff = 1e-9;

Vec3 body_flow(const World& world, std::size_t i, const std::vector<Vec3>& fluid_forces) {
  const Vec3& p = world.bodies[i].state.position;
  Vec3 u = world.fluid.flow_at(p);
  for (std::size_t j = 0; j < world.bodies.size(); ++j) {
    if (j == i || fluid_forces[j].isZero(0.0)) continue;
    const Vec3& src = world.bodies[j].state.position;
    if ((p - src).norm() <= kStokesletCutoff) continue;
    u += stokeslet_velocity(p, src, fluid_forces[j], world.fluid);
  }
  return u;
}

Mat6 resistance6(const WorldBody& b, const FluidMedium& fluid) {
  const ResistanceTensor r = resistance_tensor(b.body.shape, fluid).rotated(b.state.orientation);
  Mat6 out = Mat6::Zero();
  out.topLeftCorner<3, 3>() = r.translational;
  out.bottomRightCorner<3, 3>() = r.rotational;
  return out;
}

Quat integrate_orientation(const Quat& q, const Vec3& omega, double dt) {
  const double angle = omega.norm() * dt;
  if (angle == 0.0) return q;
  Quat next = Quat(Eigen::AngleAxisd(angle, omega.normalized())) * q;
  next.normalize();
  return next;
}

std::string describe_fault(std::size_t index, const RigidBodyState& s) {
  std::ostringstream os;
  os.precision(17);
  os << "non-finite state for body " << index << ": position (" << s.position.transpose()
     << ") velocity (" << s.velocity.transpose() << ")";
  return os.str();
}

}  // namespace

bool RigidBodyState::finite() const {
  return position.allFinite() && orientation.coeffs().allFinite() && velocity.allFinite() &&
         angular_velocity.allFinite();
}

void RigidBodyState::validate() const {
  if (!finite()) throw ConfigurationError("rigid body state must be finite");
  if (std::abs(orientation.norm() - 1.0) > 1e-9) {
    throw ConfigurationError("orientation quaternion must have unit norm");
  }
}

BodyProperties BodyProperties::homogeneous(const ParticleShape& shape, double density,
                                           std::optional<MagneticCluster> magnetic) {
  validate_shape(shape);
  BodyProperties b;
  b.shape = shape;
  b.density = density;
  b.magnetic = std::move(magnetic);
  const double m = density * shape_volume(shape);
  Vec3 inertia;
  if (const auto* s = std::get_if<Sphere>(&shape)) {
    inertia.setConstant(0.4 * m * s->radius * s->radius);
  } else {
    const auto& p = std::get<ProlateSpheroid>(shape);
    const double a2 = p.semi_major * p.semi_major;
    const double b2 = p.semi_minor * p.semi_minor;
    inertia = Vec3(0.4 * m * b2, 0.2 * m * (a2 + b2), 0.2 * m * (a2 + b2));
  }
  b.mass_matrix.setZero();
  b.mass_matrix.topLeftCorner<3, 3>() = m * Mat3::Identity();
  b.mass_matrix.bottomRightCorner<3, 3>() = inertia.asDiagonal();
  return b;
}

void BodyProperties::validate() const {
  validate_shape(shape);
  if (!(density > 0.0)) throw ConfigurationError("body density must be positive");
  if (!mass_matrix.allFinite() || !mass_matrix.isApprox(mass_matrix.transpose())) {
    throw ConfigurationError("mass matrix must be finite and symmetric");
  }
  Eigen::LLT<Mat6> llt(mass_matrix);
  if (llt.info() != Eigen::Success) throw ConfigurationError("mass matrix must be positive definite");
  if (magnetic) magnetic->validate();
}

void ContactParams::validate() const {
  if (!(stiffness > 0.0) || !(decay_length > 0.0) || !(adhesion_force > 0.0) ||
      !(adhesion_range > 0.0) || !(breakaway_speed > 0.0)) {
    throw ConfigurationError("contact parameters must all be positive");
  }
}

ContactEvaluation evaluate_contact(double gap, double separation_speed, const ContactParams& params,
                                   bool released) {
  ContactEvaluation ev;
  const double exponent = std::min(-gap / params.decay_length, kMaxContactExponent);
  ev.repulsion = params.stiffness * std::exp(exponent);
  ev.stiffness = ev.repulsion / params.decay_length;

  const bool in_range = gap > 0.0 && gap < params.adhesion_range;
  bool latch = released && gap < params.adhesion_range;
  if (in_range && !latch && separation_speed > params.breakaway_speed) {
    latch = true;
    ev.release_triggered = true;
  }
  ev.released = latch;
  ev.adhesion_active = in_range && !latch;
  ev.adhesion = ev.adhesion_active ? params.adhesion_force : 0.0;
  ev.force = ev.repulsion - ev.adhesion;
  return ev;
}

double contact_force(double gap, double separation_speed, const ContactParams& params) {
  return evaluate_contact(gap, separation_speed, params, false).force;
}

Vec3 gravity_buoyancy(const BodyProperties& body, const FluidMedium& fluid) {
  return (body.density - fluid.density) * body.volume() * gravity_vector();
}

double surface_gap(const WorldBody& a, const WorldBody& b, Vec3* normal) {
  const Vec3 r = a.state.position - b.state.position;
  const double dist = r.norm();
  const Vec3 n = dist > 0.0 ? Vec3(r / dist) : Vec3::UnitX();
  const double ra = support_radius(a.body.shape, a.state.orientation.conjugate() * (-n));
  const double rb = support_radius(b.body.shape, b.state.orientation.conjugate() * n);
  if (normal) *normal = n;
  return dist - ra - rb;
}

ForceBreakdown total_force(const RigidBodyState& state, const BodyProperties& body,
                           const SlaveEnvironment& env) {
  ForceBreakdown f;
  Vec3 flow = env.fluid.flow_at(state.position);
  for (const Neighbor& nb : env.neighbors) {
    if (nb.fluid_force.isZero(0.0)) continue;
    flow += stokeslet_velocity(state.position, nb.state.position, nb.fluid_force, env.fluid);
  }
  const DragWrench drag = drag_force(body.shape, env.fluid, state.velocity - flow,
                                     state.angular_velocity, state.orientation);
  f.drag = stack(drag.force, drag.torque);

  if (body.magnetic) {
    const Vec3 m = cluster_moment(*body.magnetic, env.field);
    const MagneticWrench w = magnetic_wrench(m, env.field, env.gradient);
    f.actuation = stack(w.force, w.torque);
  }

  WorldBody self;
  self.body = body;
  self.state = state;
  for (const Neighbor& nb : env.neighbors) {
    WorldBody other;
    other.body = nb.body;
    other.state = nb.state;
    Vec3 n;
    const double gap = surface_gap(self, other, &n);
    const double sep = (state.velocity - nb.state.velocity).dot(n);
    const ContactEvaluation c = evaluate_contact(gap, sep, nb.contact, nb.released);
    f.contact.head<3>() += c.force * n;
  }

  f.gravity.head<3>() = gravity_buoyancy(body, env.fluid);
  f.external.head<3>() = env.external_force;
  return f;
}

namespace {

// Limits how far two bodies may approach within one substep, relative to the
// contact decay length, so that fast approaches cannot tunnel through contact.
constexpr double kApproachFraction = 0.25;
constexpr int kMaxSubsteps = 100000;

struct StepSolution {
  WorldStepReport report;
  VecX velocity;
  std::vector<Eigen::Index> slot;
};

Vec6 body_velocity(const StepSolution& s, std::size_t i) {
  if (s.slot[i] < 0) return Vec6::Zero();
  return s.velocity.segment<6>(6 * s.slot[i]);
}

StepSolution solve_step(const World& world, double dt, IntegrationMode mode) {
  const std::size_t nb = world.bodies.size();
  StepSolution sol;
  WorldStepReport& report = sol.report;
  report.forces.assign(nb, ForceBreakdown{});
  report.pairs.assign(world.pairs.size(), PairReport{});

  // Non-drag forces at the start of the step.
  for (std::size_t i = 0; i < nb; ++i) {
    const WorldBody& b = world.bodies[i];
    report.forces[i].actuation = stack(b.actuation_force, b.actuation_torque);
    report.forces[i].gravity.head<3>() = gravity_buoyancy(b.body, world.fluid);
    report.forces[i].external.head<3>() = b.external_force;
  }
  std::vector<Mat3> pair_stiffness(world.pairs.size(), Mat3::Zero());
  for (std::size_t p = 0; p < world.pairs.size(); ++p) {
    const ContactPair& pair = world.pairs[p];
    const WorldBody& a = world.bodies[pair.first];
    const WorldBody& b = world.bodies[pair.second];
    PairReport& pr = report.pairs[p];
    pr.gap = surface_gap(a, b, &pr.normal);
    const double sep = (a.state.velocity - b.state.velocity).dot(pr.normal);
    pr.contact = evaluate_contact(pr.gap, sep, pair.params, pair.released);
    report.forces[pair.first].contact.head<3>() += pr.contact.force * pr.normal;
    report.forces[pair.second].contact.head<3>() -= pr.contact.force * pr.normal;
    // Normal stiffness plus the rotation of the normal as the bodies move sideways.
    const Mat3 nn = pr.normal * pr.normal.transpose();
    const double dist = (a.state.position - b.state.position).norm();
    pair_stiffness[p] = pr.contact.stiffness * nn;
    if (dist > 0.0) pair_stiffness[p] -= (pr.contact.force / dist) * (Mat3::Identity() - nn);
  }

  // Stokeslet sources: the force each body passes to the fluid.
  std::vector<Vec3> fluid_forces(nb, Vec3::Zero());
  if (world.hydrodynamic_coupling) {
    for (std::size_t i = 0; i < nb; ++i) {
      const WorldBody& b = world.bodies[i];
      if (b.fixed) {
        if (b.prescribed_fluid_force) fluid_forces[i] = *b.prescribed_fluid_force;
      } else {
        fluid_forces[i] = report.forces[i].non_drag().head<3>();
      }
    }
  }

  sol.slot.assign(nb, -1);
  Eigen::Index n_mobile = 0;
  for (std::size_t i = 0; i < nb; ++i) {
    if (!world.bodies[i].fixed) sol.slot[i] = n_mobile++;
  }

  std::vector<Vec6> flow(nb);
  std::vector<Mat6> resistance(nb);
  for (std::size_t i = 0; i < nb; ++i) {
    flow[i] = stack(body_flow(world, i, fluid_forces), Vec3::Zero());
    resistance[i] = resistance6(world.bodies[i], world.fluid);
  }

  const Eigen::Index dim = 6 * n_mobile;
  MatX a = MatX::Zero(dim, dim);
  MatX stiffness = MatX::Zero(dim, dim);
  MatX actuation_stiffness = MatX::Zero(dim, dim);
  VecX rhs = VecX::Zero(dim);
  const bool inertial = mode == IntegrationMode::SecondOrder;
  for (std::size_t i = 0; i < nb; ++i) {
    if (sol.slot[i] < 0) continue;
    const WorldBody& b = world.bodies[i];
    const Eigen::Index o = 6 * sol.slot[i];
    a.block<6, 6>(o, o) += resistance[i];
    actuation_stiffness.block<3, 3>(o, o) = b.actuation_stiffness;
    rhs.segment<6>(o) += resistance[i] * flow[i] + report.forces[i].non_drag();
    if (inertial) {
      a.block<6, 6>(o, o) += b.body.mass_matrix / dt;
      rhs.segment<6>(o) += b.body.mass_matrix * stack(b.state.velocity, b.state.angular_velocity) / dt;
    }
  }
  for (std::size_t p = 0; p < world.pairs.size(); ++p) {
    const Mat3& knn = pair_stiffness[p];
    const Eigen::Index s1 = sol.slot[world.pairs[p].first];
    const Eigen::Index s2 = sol.slot[world.pairs[p].second];
    if (s1 >= 0) stiffness.block<3, 3>(6 * s1, 6 * s1) += knn;
    if (s2 >= 0) stiffness.block<3, 3>(6 * s2, 6 * s2) += knn;
    if (s1 >= 0 && s2 >= 0) {
      stiffness.block<3, 3>(6 * s1, 6 * s2) -= knn;
      stiffness.block<3, 3>(6 * s2, 6 * s1) -= knn;
    }
  }
  a += dt * (stiffness + actuation_stiffness);

  if (world.planar) {
    for (Eigen::Index s = 0; s < n_mobile; ++s) {
      for (const int local : {2, 3, 4}) {
        const Eigen::Index r = 6 * s + local;
        a.row(r).setZero();
        a.col(r).setZero();
        a(r, r) = 1.0;
        rhs[r] = 0.0;
      }
    }
  }

  sol.velocity = dim > 0 ? VecX(a.partialPivLu().solve(rhs)) : VecX();
  const VecX stiff_v = dt * (stiffness * sol.velocity);
  const VecX actuation_v = dt * (actuation_stiffness * sol.velocity);
  for (std::size_t i = 0; i < nb; ++i) {
    ForceBreakdown& f = report.forces[i];
    if (sol.slot[i] < 0) {
      f.drag = resistance[i] * flow[i];
      continue;
    }
    const Eigen::Index o = 6 * sol.slot[i];
    f.drag = -resistance[i] * (sol.velocity.segment<6>(o) - flow[i]);
    f.contact -= stiff_v.segment<6>(o);
    f.actuation -= actuation_v.segment<6>(o);
  }
  return sol;
}

// Largest ratio of relative approach distance to its allowance over all pairs.
double approach_ratio(const World& world, const StepSolution& sol, double dt) {
  double worst = 0.0;
  for (std::size_t p = 0; p < world.pairs.size(); ++p) {
    const ContactPair& pair = world.pairs[p];
    const Vec3 rel = (body_velocity(sol, pair.first) - body_velocity(sol, pair.second)).head<3>();
    const double travel = dt * rel.norm();
    if (travel == 0.0) continue;
    const double lambda = pair.params.decay_length;
    const double gap = sol.report.pairs[p].gap;
    const double allowance = kApproachFraction * lambda + 0.5 * std::max(0.0, gap - lambda);
    worst = std::max(worst, travel / allowance);
  }
  return worst;
}

}  // namespace

WorldStepReport step_world(World& world, double dt, IntegrationMode mode) {
  if (!(dt > 0.0) || dt > 1e-2) throw ConfigurationError("time step must lie in (0, 1e-2] s");
  const std::size_t nb = world.bodies.size();

  WorldStepReport total;
  total.forces.assign(nb, ForceBreakdown{});
  std::vector<bool> triggered(world.pairs.size(), false);

  double remaining = dt;
  int substeps = 0;
  while (remaining > 0.0) {
    if (++substeps > kMaxSubsteps) throw SimulationFault("contact substep limit exceeded");
    double h = remaining;
    StepSolution sol = solve_step(world, h, mode);
    for (int attempt = 0; attempt < 60; ++attempt) {
      const double ratio = approach_ratio(world, sol, h);
      if (ratio <= 1.0) break;
      h *= 0.9 / ratio;
      sol = solve_step(world, h, mode);
    }
    if (remaining - h < 1e-12 * dt) h = remaining;

    for (std::size_t p = 0; p < world.pairs.size(); ++p) {
      world.pairs[p].released = sol.report.pairs[p].contact.released;
      if (sol.report.pairs[p].contact.release_triggered) triggered[p] = true;
    }
    const double weight = h / dt;
    for (std::size_t i = 0; i < nb; ++i) {
      ForceBreakdown& acc = total.forces[i];
      const ForceBreakdown& f = sol.report.forces[i];
      acc.drag += weight * f.drag;
      acc.actuation += weight * f.actuation;
      acc.contact += weight * f.contact;
      acc.gravity += weight * f.gravity;
      acc.external += weight * f.external;

      if (sol.slot[i] < 0) continue;
      WorldBody& b = world.bodies[i];
      const Vec6 v = body_velocity(sol, i);
      RigidBodyState next = b.state;
      next.velocity = v.head<3>();
      next.angular_velocity = v.tail<3>();
      next.position += h * next.velocity;
      next.orientation = integrate_orientation(next.orientation, next.angular_velocity, h);
      if (!next.finite()) throw SimulationFault(describe_fault(i, next));
      b.state = next;
    }
    total.pairs = std::move(sol.report.pairs);
    remaining -= h;
  }
  for (std::size_t p = 0; p < total.pairs.size(); ++p) {
    if (triggered[p]) total.pairs[p].contact.release_triggered = true;
  }
  return total;
}

SlaveStep step_slave(const RigidBodyState& state, const BodyProperties& body,
                     const SlaveEnvironment& env, double dt, IntegrationMode mode) {
  World world;
  world.fluid = env.fluid;
  world.planar = env.planar;
  WorldBody self;
  self.body = body;
  self.state = state;
  self.external_force = env.external_force;
  if (body.magnetic) {
    const Vec3 m = cluster_moment(*body.magnetic, env.field);
    const MagneticWrench w = magnetic_wrench(m, env.field, env.gradient);
    self.actuation_force = w.force;
    self.actuation_torque = w.torque;
  }
  world.bodies.push_back(self);
  for (const Neighbor& nb : env.neighbors) {
    WorldBody other;
    other.body = nb.body;
    other.state = nb.state;
    other.fixed = true;
    other.prescribed_fluid_force = nb.fluid_force;
    world.bodies.push_back(other);
    world.pairs.push_back(ContactPair{0, world.bodies.size() - 1, nb.contact, nb.released});
  }
  WorldStepReport r = step_world(world, dt, mode);
  return {world.bodies[0].state, r.forces[0], std::move(r.pairs)};
}

}  // namespace microtele
