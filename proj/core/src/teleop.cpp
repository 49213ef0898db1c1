#include "microtele/teleop.hpp"

#include <cmath>
#include <sstream>
#include <utility>

namespace microtele {

namespace {

std::string format_vec(const Vec3& v) {
  std::ostringstream os;
  os.precision(6);
  os << "(" << v.x() << ", " << v.y() << ", " << v.z() << ")";
  return os.str();
}

bool involves_slave(const ContactPair& p) { return p.first == 0 || p.second == 0; }

}  // namespace

void TeleopConfig::validate() const {
  validate_master(master);
  scaling.validate();
  force_gains.validate();
  position_gains.validate();
  coils.validate();
  fluid.validate();
  slave.validate();
  slave_initial.validate();
  if (!(observer_bandwidth > 0.0)) throw ConfigurationError("observer bandwidth must be positive");
  if (!(dt > 0.0) || dt > 1e-2) throw ConfigurationError("dt must lie in (0, 1e-2] s");
  if (observer_bandwidth * dt >= 1.0) throw ConfigurationError("observer bandwidth * dt must be below 1");
  if (!(hold_field > 0.0)) throw ConfigurationError("hold_field must be positive");
  if (!(pull_gradient >= 0.0)) throw ConfigurationError("pull_gradient must be non-negative");
  if (!(pull_travel > 0.0)) throw ConfigurationError("pull_travel must be positive");
  if ((hand.stiffness.array() < 0.0).any() || (hand.damping.array() < 0.0).any()) {
    throw ConfigurationError("hand stiffness and damping must be non-negative");
  }
  if (feedback_delay_steps < 0 || measurement.delay_steps < 0) {
    throw ConfigurationError("delays must be non-negative");
  }
  if (measurement.noise_sigma < 0.0) throw ConfigurationError("noise sigma must be non-negative");
  if (!slave.magnetic) throw ConfigurationError("the slave must carry a magnetic cluster");
  const std::size_t n_bodies = objects.size() + 1;
  for (const WorldBody& o : objects) {
    o.body.validate();
    o.state.validate();
  }
  for (const ContactPair& p : pairs) {
    if (p.first >= n_bodies || p.second >= n_bodies || p.first == p.second) {
      throw ConfigurationError("contact pair references an unknown body");
    }
    p.params.validate();
  }
  if (engulfment.enabled) {
    if (engulfment.pair >= pairs.size() || !involves_slave(pairs[engulfment.pair])) {
      throw ConfigurationError("engulfment pair must be a slave contact pair");
    }
    if (!(engulfment.threshold > 0.0) || !(engulfment.hold_time >= 0.0)) {
      throw ConfigurationError("engulfment threshold must be positive and hold_time non-negative");
    }
  }
  if (task_object && (*task_object == 0 || *task_object >= n_bodies)) {
    throw ConfigurationError("task_object must name one of the objects");
  }
}

TeleopSession::TeleopSession(TeleopConfig config) : config_(std::move(config)), rng_(config_.seed) {
  config_.validate();
  master_ = initial_master_state(config_.master);
  if (std::holds_alternative<PointMass>(config_.master)) {
    master_.q = config_.master_initial;
  } else {
    master_.q << 0.6, 1.2;
  }
  anchor_ = forward_kinematics(config_.master, master_.q);
  slave_origin_ = config_.slave_initial.position;
  held_reference_ = slave_origin_;

  world_.fluid = config_.fluid;
  world_.planar = config_.planar;
  world_.hydrodynamic_coupling = config_.hydrodynamic_coupling;
  WorldBody slave;
  slave.body = config_.slave;
  slave.state = config_.slave_initial;
  world_.bodies.push_back(slave);
  for (const WorldBody& o : config_.objects) world_.bodies.push_back(o);
  world_.pairs = config_.pairs;

  observer_.bandwidth = config_.observer_bandwidth;
  feedback_queue_.assign(static_cast<std::size_t>(config_.feedback_delay_steps), Vec3::Zero());
  measurement_queue_.assign(static_cast<std::size_t>(config_.measurement.delay_steps),
                            config_.slave_initial.position);
}

Vec3 TeleopSession::master_position() const { return forward_kinematics(config_.master, master_.q); }

Vec3 TeleopSession::master_velocity() const {
  return task_jacobian(config_.master, master_.q) * master_.qd;
}

double TeleopSession::master_energy(const OperatorCommand& cmd) const {
  const Vec3 stretch = cmd.pose - master_position();
  return mechanical_energy(config_.master, master_) +
         0.5 * stretch.dot(config_.hand.stiffness.cwiseProduct(stretch));
}

void TeleopSession::record(std::string kind, std::string detail) {
  events_.push_back({t_, std::move(kind), std::move(detail)});
}

Vec3 TeleopSession::measure_position() {
  const Vec3 truth = slave_state().position;
  switch (config_.measurement.kind) {
    case MeasurementKind::Perfect:
      return truth;
    case MeasurementKind::Noisy: {
      Vec3 n(noise_(rng_), noise_(rng_), noise_(rng_));
      if (config_.planar) n.z() = 0.0;
      return truth + config_.measurement.noise_sigma * n;
    }
    case MeasurementKind::Delayed: {
      if (measurement_queue_.empty()) return truth;
      measurement_queue_.push_back(truth);
      const Vec3 out = measurement_queue_.front();
      measurement_queue_.pop_front();
      return out;
    }
  }
  return truth;
}

Vec3 TeleopSession::compute_slave_command(const Vec3& d_des, const Vec3& v_des, const Vec3& a_des,
                                          const Vec3& d_meas, const Vec3& v_meas, const Vec3& deflection,
                                          bool engaged) {
  const WorldBody& slave = world_.bodies.front();
  if (config_.actuation == ActuationMode::GradientPull) {
    Vec3 dir = deflection;
    if (config_.planar) dir.z() = 0.0;
    const double length = dir.norm();
    if (!engaged || length == 0.0) return Vec3::Zero();
    const double fraction = std::min(1.0, length / config_.pull_travel);
    if (config_.pull_focus) {
      dir = *config_.pull_focus - d_meas;
      if (config_.planar) dir.z() = 0.0;
      if (dir.norm() == 0.0) return Vec3::Zero();
    }
    const double moment = cluster_moment(*slave.body.magnetic, config_.hold_field * Vec3::UnitX()).norm();
    return moment * config_.pull_gradient * fraction * dir.normalized();
  }
  const Mat3 resistance =
      resistance_tensor(slave.body.shape, world_.fluid).rotated(slave.state.orientation).translational;
  const Vec3 h = resistance * v_des - gravity_buoyancy(slave.body, world_.fluid);
  return position_control_law(slave.body.mass(), h, d_des, v_des, a_des, d_meas, v_meas,
                              config_.position_gains, position_integral_, config_.dt);
}

Mat3 TeleopSession::focus_stiffness(const Vec3& force, const Vec3& d_meas) const {
  if (config_.actuation != ActuationMode::GradientPull || !config_.pull_focus) return Mat3::Zero();
  Vec3 to_focus = *config_.pull_focus - d_meas;
  if (config_.planar) to_focus.z() = 0.0;
  const double distance = to_focus.norm();
  if (distance == 0.0) return Mat3::Zero();
  // The pull turns to keep aiming at the focus as the slave moves across the line of sight.
  const Vec3 u = to_focus / distance;
  Mat3 k = (force.norm() / distance) * (Mat3::Identity() - u * u.transpose());
  if (config_.planar) {
    k.row(2).setZero();
    k.col(2).setZero();
  }
  return k;
}

TelemetryFrame TeleopSession::step(const OperatorCommand& cmd) {
  if (faulted_) throw SimulationFault("session is faulted");
  if (!cmd.pose.allFinite() || !cmd.velocity.allFinite() || !cmd.force.allFinite()) {
    throw ConfigurationError("operator command must be finite");
  }
  const double dt = config_.dt;
  TelemetryFrame frame;
  try {
    // (1) master side: force law plus the operator hand, reflected force through S1.
    Vec3 f_feedback = f_predicted_;
    if (!feedback_queue_.empty()) {
      f_feedback = feedback_queue_.front();
      feedback_queue_.pop_front();
    }
    const MasterTerms terms = master_terms(config_.master, master_.q, master_.qd);
    const Vec3 x = master_position();
    const Vec3 xd = terms.J * master_.qd;
    const Vec3 hand = config_.hand.stiffness.cwiseProduct(cmd.pose - x) +
                      config_.hand.damping.cwiseProduct(cmd.velocity - xd) + cmd.force;
    // The kdamp term of the force law is applied at the end-of-step velocity.
    const ErrorIntegral force_snapshot = force_integral_;
    ForceGains explicit_gains = config_.force_gains;
    explicit_gains.kdamp.setZero();
    VecX u = force_control_law(terms, explicit_gains, force_integral_, f_feedback, master_.qd,
                               config_.scaling, dt);
    u += terms.J.transpose() * hand;
    const Mat3 task_damping = config_.scaling.force() * config_.force_gains.kdamp;
    master_ = step_master(config_.master, master_, u, f_feedback, config_.scaling, dt, task_damping);

    // (2) slave reference through S2, with clutch.
    const Vec3 x_new = master_position();
    const Vec3 xd_new = master_velocity();
    Vec3 d_des = held_reference_;
    Vec3 v_des = Vec3::Zero();
    if (cmd.engage) {
      if (!engaged_) anchor_ = x_new - (held_reference_ - slave_origin_).cwiseQuotient(config_.scaling.s2);
      const ScaledSignals s = apply_scaling(config_.scaling, Vec3::Zero(), x_new - anchor_, xd_new);
      d_des = slave_origin_ + s.slave_position;
      v_des = s.slave_velocity;
    }
    engaged_ = cmd.engage;
    if (config_.planar) {
      d_des.z() = slave_origin_.z();
      v_des.z() = 0.0;
    }
    const Vec3 a_des = steps_ == 0 ? Vec3::Zero() : Vec3((v_des - last_reference_velocity_) / dt);
    last_reference_velocity_ = v_des;
    held_reference_ = d_des;

    // (3) measurement and the slave-side law.
    const Vec3 d_meas = measure_position();
    const Vec3 v_meas = measurement_primed_ ? Vec3((d_meas - last_measurement_) / dt) : Vec3::Zero();
    last_measurement_ = d_meas;
    measurement_primed_ = true;

    const ErrorIntegral position_snapshot = position_integral_;
    Vec3 desired = Vec3::Zero();
    if (!engulfed_) desired = compute_slave_command(d_des, v_des, a_des, d_meas, v_meas, x_new - anchor_, cmd.engage);
    if (config_.planar) desired.z() = 0.0;

    // (4) fail-safe clamp; integrators hold while clamped.
    const SaturatedForce sat = saturate_force(desired, config_.force_gains.f_max);
    if (sat.clamped) {
      force_integral_ = force_snapshot;
      position_integral_ = position_snapshot;
    }

    // (5) currents and the resulting wrench at the true slave pose.
    WorldBody& slave = world_.bodies.front();
    CurrentSolution currents;
    currents.currents = CurrentVector::Zero(static_cast<Eigen::Index>(config_.coils.size()));
    Vec3 field = Vec3::Zero();
    Mat3 gradient = Mat3::Zero();
    if (sat.force.norm() > 0.0) {
      hold_direction_ = sat.force.normalized();
      currents = solve_currents(config_.coils, d_meas, sat.force, *slave.body.magnetic,
                                config_.hold_field * hold_direction_);
      field = field_at(config_.coils, currents.currents, slave.state.position);
      gradient = field_gradient_at(config_.coils, currents.currents, slave.state.position);
    }
    const MagneticWrench wrench =
        magnetic_wrench(cluster_moment(*slave.body.magnetic, field), field, gradient);
    slave.actuation_force = wrench.force;
    slave.actuation_torque = wrench.torque;
    slave.actuation_stiffness = focus_stiffness(sat.force, d_meas);

    // (6) world step.
    const WorldStepReport report = step_world(world_, dt, config_.mode);
    t_ = static_cast<double>(steps_ + 1) * dt;
    ++steps_;

    std::uint32_t fl = 0;
    if (sat.clamped) fl |= flags::kSaturation;
    if (currents.saturated) fl |= flags::kCurrentSaturation;
    for (std::size_t p = 0; p < world_.pairs.size(); ++p) {
      if (!involves_slave(world_.pairs[p])) continue;
      const PairReport& pr = report.pairs[p];
      if (pr.gap < world_.pairs[p].params.adhesion_range) fl |= flags::kContact;
      if (pr.contact.adhesion_active) fl |= flags::kAdhesion;
      if (pr.contact.release_triggered) fl |= flags::kAdhesionRelease;
    }
    if (config_.engulfment.enabled && !engulfed_) {
      const PairReport& pr = report.pairs[config_.engulfment.pair];
      if (pr.contact.repulsion >= config_.engulfment.threshold) {
        if (!penetrated_) {
          penetrated_ = true;
          record("penetration", "compressive contact force reached threshold");
        }
        engulf_timer_ += dt;
        fl |= flags::kPenetration;
        if (engulf_timer_ >= config_.engulfment.hold_time - 0.5 * dt) {
          engulfed_ = true;
          slave.fixed = true;
          slave.state.velocity.setZero();
          slave.state.angular_velocity.setZero();
          const ContactPair& host = world_.pairs[config_.engulfment.pair];
          record("engulfment", "slave taken up by body " + std::to_string(host.first == 0 ? host.second : host.first));
        }
      } else {
        engulf_timer_ = 0.0;
      }
    }
    if (engulfed_) fl |= flags::kEngulfed;

    // (7) observer.
    const ForceBreakdown& sf = report.forces.front();
    if (engulfed_) {
      observer_.estimate *= 1.0 - observer_.bandwidth * dt;
      f_predicted_ = observer_.estimate;
    } else {
      const KnownForces known{sf.drag.head<3>(), sf.actuation.head<3>(), sf.gravity.head<3>()};
      f_predicted_ = observe_force(observer_, slave.body, slave.state, known, dt, config_.mode);
      if (config_.planar) {
        observer_.estimate.z() = 0.0;
        f_predicted_.z() = 0.0;
      }
    }
    if (config_.feedback_delay_steps > 0) feedback_queue_.push_back(f_predicted_);

    if (!slave.state.finite() || !f_predicted_.allFinite()) {
      throw SimulationFault("non-finite slave state or force estimate");
    }

    const std::uint32_t rising = fl & ~previous_flags_;
    if (rising & flags::kContact) record("contact", "slave contact at " + format_vec(slave.state.position));
    if (rising & flags::kSaturation) record("saturation", "commanded force clamped to f_max");
    if (fl & flags::kAdhesionRelease) record("adhesion_release", "adhesion released by fast separation");
    previous_flags_ = fl;

    frame.t = t_;
    frame.q = master_.q;
    frame.qd = master_.qd;
    frame.master_position = x_new;
    frame.master_velocity = xd_new;
    frame.d = slave.state.position;
    frame.d_dot = slave.state.velocity;
    frame.reference = d_des;
    frame.f_predicted = f_predicted_;
    frame.rendered_force = config_.scaling.s1.cwiseProduct(f_feedback);
    frame.desired_force = desired;
    frame.commanded_force = sat.force;
    frame.currents = currents.currents;
    frame.slave_forces = sf;
    frame.contact_force = sf.contact.head<3>();
    for (std::size_t i = 1; i < world_.bodies.size(); ++i) {
      frame.object_positions.push_back(world_.bodies[i].state.position);
    }
    frame.force_integral = force_integral_.value;
    frame.position_integral = position_integral_.value;
    if (config_.task_object) {
      frame.task_error = (world_.bodies[*config_.task_object].state.position - config_.task_target).norm();
    } else {
      frame.task_error = (d_des - slave.state.position).norm();
    }
    frame.master_energy = master_energy(cmd);
    frame.flags = fl;
  } catch (const SimulationFault& e) {
    faulted_ = true;
    record("fault", e.what());
    last_.flags |= flags::kFaulted;
    throw;
  }
  last_ = frame;
  return frame;
}

TelemetryFrame step_teleop(TeleopSession& session, const OperatorCommand& cmd) { return session.step(cmd); }

}  // namespace microtele
