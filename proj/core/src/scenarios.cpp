#include "microtele/scenarios.hpp"

#include <cmath>
#include <limits>

namespace microtele {

namespace {

WorldBody make_object(const ParticleShape& shape, double density, const Vec3& position, bool fixed) {
  WorldBody b;
  b.body = BodyProperties::homogeneous(shape, density);
  b.state.position = position;
  b.fixed = fixed;
  return b;
}

BodyProperties paramagnetic_sphere(double radius, double density, double moment_density) {
  const Sphere shape{radius};
  MagneticCluster cluster{shape, shape_volume(shape), SaturatedMagnetization{moment_density}};
  return BodyProperties::homogeneous(shape, density, cluster);
}

Waypoint wp(double t, double x_mm, WaypointMode mode = WaypointMode::Approach, bool engage = true) {
  return {t, Vec3(x_mm * 1e-3, 0.0, 0.0), mode, engage};
}

ScenarioConfig bead_push() {
  ScenarioConfig c;
  c.kind = ScenarioKind::BeadPush;
  c.duration = 25.0;
  TeleopConfig& t = c.teleop;
  t.slave = paramagnetic_sphere(50e-6, 2000.0, 4e4);
  t.objects.push_back(make_object(Sphere{50e-6}, 1050.0, Vec3(112e-6, 0.0, 0.0), false));
  ContactParams contact;
  contact.stiffness = 1e-10;
  contact.decay_length = 0.2e-6;
  contact.adhesion_force = 2e-12;
  contact.adhesion_range = 1e-6;
  contact.breakaway_speed = 2e-5;
  t.pairs.push_back({0, 1, contact, false});
  t.task_object = 1;
  t.task_target = Vec3(230e-6, 0.0, 0.0);
  c.script.waypoints = {
      wp(0.0, 0.0),
      wp(7.0, 38.0),
      wp(16.0, 150.0),
      wp(16.1, 135.0, WaypointMode::FastRetract),
      wp(17.0, 135.0, WaypointMode::Hold),
      wp(20.0, 139.0),
      wp(20.1, 120.0, WaypointMode::FastRetract),
      wp(25.0, 120.0, WaypointMode::Hold),
  };
  return c;
}

ScenarioConfig cell_penetration() {
  ScenarioConfig c;
  c.kind = ScenarioKind::CellPenetration;
  c.duration = 70.0;
  TeleopConfig& t = c.teleop;
  const ProlateSpheroid shape{5e-6, 2e-6};
  const double volume = shape_volume(shape);
  // Moment 8e-8 A·m² so that a 5 T/m gradient pulls with 0.4 µN.
  MagneticCluster cluster{shape, volume, SaturatedMagnetization{8e-8 / volume}};
  t.slave = BodyProperties::homogeneous(shape, 5000.0, cluster);
  t.actuation = ActuationMode::GradientPull;
  t.pull_gradient = 5.0;
  t.pull_travel = 0.02;
  t.pull_focus = Vec3(95e-6, 0.0, 0.0);
  t.objects.push_back(make_object(Sphere{10e-6}, 1050.0, Vec3(100e-6, 0.0, 0.0), true));
  ContactParams membrane;
  membrane.stiffness = 2e-6;
  membrane.decay_length = 5e-6;
  membrane.adhesion_force = 5e-8;
  membrane.adhesion_range = 10e-6;
  membrane.breakaway_speed = 1e-3;
  t.pairs.push_back({0, 1, membrane, false});
  t.engulfment.enabled = true;
  t.engulfment.pair = 0;
  t.engulfment.threshold = 4e-7;
  t.engulfment.hold_time = 45.0;
  c.script.waypoints = {wp(0.0, 0.0), wp(26.0, 24.0), wp(70.0, 24.0, WaypointMode::Hold)};
  c.settle_band = 1e-3;
  return c;
}

ScenarioConfig bubble_manipulation() {
  ScenarioConfig c;
  c.kind = ScenarioKind::BubbleManipulation;
  c.duration = 15.0;
  TeleopConfig& t = c.teleop;
  t.slave = paramagnetic_sphere(50e-6, 2000.0, 4e4);
  t.objects.push_back(make_object(Sphere{40e-6}, 1.2, Vec3(100e-6, 0.0, 0.0), false));
  ContactParams contact;
  contact.stiffness = 1e-10;
  contact.decay_length = 0.2e-6;
  contact.adhesion_force = 1e-12;
  contact.adhesion_range = 1e-6;
  contact.breakaway_speed = 2e-5;
  t.pairs.push_back({0, 1, contact, false});
  t.task_object = 1;
  t.task_target = Vec3(168e-6, 0.0, 0.0);
  c.script.waypoints = {
      wp(0.0, 0.0),
      wp(5.0, 34.0),
      wp(10.0, 90.0),
      wp(10.05, 75.0, WaypointMode::FastRetract),
      wp(15.0, 75.0, WaypointMode::Hold),
  };
  return c;
}

}  // namespace

std::string_view scenario_name(ScenarioKind kind) {
  switch (kind) {
    case ScenarioKind::BeadPush:
      return "bead_push";
    case ScenarioKind::CellPenetration:
      return "cell_penetration";
    case ScenarioKind::BubbleManipulation:
      return "bubble_manipulation";
  }
  return "bead_push";
}

ScenarioKind scenario_from_name(std::string_view name) {
  for (const ScenarioKind k :
       {ScenarioKind::BeadPush, ScenarioKind::CellPenetration, ScenarioKind::BubbleManipulation}) {
    if (scenario_name(k) == name) return k;
  }
  throw ConfigurationError("unknown scenario '" + std::string(name) + "'");
}

void OperatorScript::validate() const {
  if (waypoints.empty()) throw ConfigurationError("operator script needs at least one waypoint");
  if (waypoints.front().t != 0.0) throw ConfigurationError("first waypoint must be at t = 0");
  for (std::size_t i = 0; i < waypoints.size(); ++i) {
    if (!waypoints[i].pose.allFinite()) throw ConfigurationError("waypoint pose must be finite");
    if (i > 0 && !(waypoints[i].t > waypoints[i - 1].t)) {
      throw ConfigurationError("waypoint times must be strictly increasing");
    }
  }
}

OperatorCommand scripted_operator(const OperatorScript& script, double t) {
  const auto& w = script.waypoints;
  if (w.empty()) throw ConfigurationError("operator script is empty");
  OperatorCommand cmd;
  if (t <= w.front().t) {
    cmd.pose = w.front().pose;
    cmd.engage = w.front().engage;
    return cmd;
  }
  for (std::size_t i = 1; i < w.size(); ++i) {
    if (t <= w[i].t) {
      const double span = w[i].t - w[i - 1].t;
      const double s = (t - w[i - 1].t) / span;
      cmd.pose = w[i - 1].pose + s * (w[i].pose - w[i - 1].pose);
      cmd.velocity = (w[i].pose - w[i - 1].pose) / span;
      cmd.engage = w[i].engage;
      return cmd;
    }
  }
  cmd.pose = w.back().pose;
  cmd.engage = w.back().engage;
  return cmd;
}

std::vector<std::pair<double, double>> fast_retract_segments(const OperatorScript& script) {
  std::vector<std::pair<double, double>> out;
  for (std::size_t i = 1; i < script.waypoints.size(); ++i) {
    if (script.waypoints[i].mode == WaypointMode::FastRetract) {
      out.emplace_back(script.waypoints[i - 1].t, script.waypoints[i].t);
    }
  }
  return out;
}

void ScenarioConfig::validate() const {
  if (!(duration > 0.0)) throw ConfigurationError("duration must be positive");
  if (!(settle_band > 0.0)) throw ConfigurationError("settle_band must be positive");
  teleop.validate();
  script.validate();
  // Fast-retract segments must separate faster than every slave contact breaks away.
  for (std::size_t i = 1; i < script.waypoints.size(); ++i) {
    const Waypoint& a = script.waypoints[i - 1];
    const Waypoint& b = script.waypoints[i];
    if (b.mode != WaypointMode::FastRetract) continue;
    const Vec3 slave_speed = teleop.scaling.s2.cwiseProduct(b.pose - a.pose) / (b.t - a.t);
    for (const ContactPair& p : teleop.pairs) {
      if (p.first != 0 && p.second != 0) continue;
      if (slave_speed.norm() < p.params.breakaway_speed) {
        throw ConfigurationError("fast-retract segment ending at t = " + std::to_string(b.t) +
                                 " is slower than the breakaway speed");
      }
    }
  }
}

ScenarioConfig default_scenario(ScenarioKind kind) {
  switch (kind) {
    case ScenarioKind::BeadPush:
      return bead_push();
    case ScenarioKind::CellPenetration:
      return cell_penetration();
    case ScenarioKind::BubbleManipulation:
      return bubble_manipulation();
  }
  return bead_push();
}

Metrics compute_metrics(const std::vector<TelemetryFrame>& frames, double settle_band) {
  if (frames.empty()) throw ConfigurationError("metrics need at least one frame");
  Metrics m;
  m.frames = frames.size();
  const double t_end = frames.back().t;
  const double t_start = frames.front().t;
  const double window_start = t_end - 0.1 * (t_end - t_start);

  std::optional<std::size_t> last_outside;
  bool released = false;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const TelemetryFrame& f = frames[i];
    if (f.t >= window_start) m.max_steady_error = std::max(m.max_steady_error, f.task_error);
    if (f.task_error > settle_band) last_outside = i;
    m.peak_contact_force = std::max(m.peak_contact_force, f.contact_force.norm());
    m.peak_magnetic_force = std::max(m.peak_magnetic_force, f.slave_forces.actuation.head<3>().norm());
    m.peak_commanded_force = std::max(m.peak_commanded_force, f.commanded_force.norm());
    if (f.has(flags::kContact) && !m.first_contact_time) m.first_contact_time = f.t;
    if (f.has(flags::kPenetration) && !m.penetration_time) m.penetration_time = f.t;
    if (f.has(flags::kEngulfed) && !m.engulfment_time) m.engulfment_time = f.t;
    if (f.has(flags::kSaturation)) ++m.saturated_frames;
    if (f.has(flags::kAdhesionRelease)) released = true;
  }
  if (last_outside) {
    const std::size_t next = std::min(*last_outside + 1, frames.size() - 1);
    m.settling_time = frames[next].t;
  }
  m.release_success = released && !frames.back().has(flags::kAdhesion);
  return m;
}

ScenarioRun run_scenario(const ScenarioConfig& config, const FrameCallback& on_frame) {
  config.validate();
  ScenarioRun run;
  TeleopSession session(config.teleop);
  const auto steps = static_cast<std::uint64_t>(std::llround(config.duration / config.teleop.dt));
  run.frames.reserve(steps);
  try {
    for (std::uint64_t k = 0; k < steps; ++k) {
      const double t = static_cast<double>(k) * config.teleop.dt;
      run.frames.push_back(session.step(scripted_operator(config.script, t)));
      if (on_frame) on_frame(run.frames.back());
    }
  } catch (const SimulationFault& e) {
    run.faulted = true;
    run.diagnostic = e.what();
  }
  run.events = session.events();
  if (!run.frames.empty()) run.metrics = compute_metrics(run.frames, config.settle_band);
  return run;
}

StabilityProbe stability_probe(double force_scale, bool damped) {
  StabilityProbe p;
  TeleopConfig& c = p.config;
  PointMass master;
  if (!damped) {
    master.friction.setZero();
    master.transducer.setZero();
    c.force_gains.kdamp.setZero();
    c.hand.damping.setZero();
  }
  c.master = master;
  c.hand.stiffness = Vec3::Constant(640.0);  // firm grip
  c.scaling.s1 = Vec3::Constant(force_scale);
  c.slave = paramagnetic_sphere(50e-6, 2000.0, 4e4);
  c.objects.push_back(make_object(Sphere{200e-6}, 1050.0, Vec3(250.5e-6, 0.0, 0.0), true));
  ContactParams wall;
  wall.stiffness = 1e-8;
  wall.decay_length = 0.5e-6;
  wall.adhesion_force = 1e-12;
  wall.adhesion_range = 1e-6;
  wall.breakaway_speed = 1e-3;
  c.pairs.push_back({0, 1, wall, false});
  p.hold.pose = Vec3(2e-3, 0.0, 0.0);
  return p;
}

double energy_growth(const StabilityProbe& probe, double seconds) {
  TeleopSession session(probe.config);
  const double initial = session.master_energy(probe.hold);
  double peak = initial;
  const auto steps = static_cast<std::uint64_t>(std::llround(seconds / probe.config.dt));
  try {
    for (std::uint64_t k = 0; k < steps; ++k) {
      const TelemetryFrame f = session.step(probe.hold);
      peak = std::max(peak, f.master_energy);
    }
  } catch (const SimulationFault&) {
    return std::numeric_limits<double>::infinity();
  }
  return peak / initial;
}

}  // namespace microtele
