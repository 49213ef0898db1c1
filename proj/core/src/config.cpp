#include "microtele/config.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

namespace microtele {

namespace {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

std::string join(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

std::string indexed(const std::string& path, std::size_t i) { return path + "[" + std::to_string(i) + "]"; }

[[noreturn]] void fail(const std::string& path, const std::string& what) {
  throw ConfigurationError(path + ": " + what);
}

double number(const json& j, const std::string& path) {
  if (!j.is_number()) fail(path, "expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) fail(path, "must be finite");
  return v;
}

double positive(const json& j, const std::string& path) {
  const double v = number(j, path);
  if (!(v > 0.0)) fail(path, "must be positive");
  return v;
}

double non_negative(const json& j, const std::string& path) {
  const double v = number(j, path);
  if (!(v >= 0.0)) fail(path, "must be non-negative");
  return v;
}

bool boolean(const json& j, const std::string& path) {
  if (!j.is_boolean()) fail(path, "expected true or false");
  return j.get<bool>();
}

std::string text(const json& j, const std::string& path) {
  if (!j.is_string()) fail(path, "expected a string");
  return j.get<std::string>();
}

std::uint64_t unsigned_integer(const json& j, const std::string& path) {
  if (!j.is_number_integer() || (j.is_number_integer() && !j.is_number_unsigned() && j.get<std::int64_t>() < 0)) {
    fail(path, "expected a non-negative integer");
  }
  return j.get<std::uint64_t>();
}

Vec3 vec3(const json& j, const std::string& path) {
  if (!j.is_array() || j.size() != 3) fail(path, "expected an array of 3 numbers");
  return {number(j[0], indexed(path, 0)), number(j[1], indexed(path, 1)), number(j[2], indexed(path, 2))};
}

/// Scalar s → s·I, [a, b, c] → diag, [[..], [..], [..]] → full matrix.
Mat3 mat3(const json& j, const std::string& path) {
  if (j.is_number()) return number(j, path) * Mat3::Identity();
  if (j.is_array() && j.size() == 3 && j[0].is_number()) return vec3(j, path).asDiagonal();
  if (j.is_array() && j.size() == 3) {
    Mat3 m;
    for (int r = 0; r < 3; ++r) m.row(r) = vec3(j[static_cast<std::size_t>(r)], indexed(path, static_cast<std::size_t>(r))).transpose();
    return m;
  }
  fail(path, "expected a number, 3 diagonal entries or a 3x3 array");
}

/// Scalar s → (s, s, s), else 3 entries.
Vec3 diagonal(const json& j, const std::string& path) {
  if (j.is_number()) return Vec3::Constant(number(j, path));
  return vec3(j, path);
}

/// Object reader that tracks consumed keys and records defaults.
class Reader {
 public:
  Reader(const json& j, std::string path, std::vector<std::string>& defaults)
      : j_(j), path_(std::move(path)), defaults_(defaults) {
    if (!j.is_object()) fail(path_.empty() ? "document" : path_, "expected an object");
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  template <class T, class Parse>
  void read(const std::string& key, T& out, Parse parse) {
    used_.insert(key);
    const std::string p = join(path_, key);
    if (j_.contains(key)) {
      out = parse(j_.at(key), p);
    } else {
      defaults_.push_back(p);
    }
  }

  const json& required(const std::string& key) {
    used_.insert(key);
    if (!j_.contains(key)) fail(join(path_, key), "missing required key");
    return j_.at(key);
  }

  /// Marks `key` as consumed and returns it if present.
  const json* optional(const std::string& key) {
    used_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

  std::string path(const std::string& key) const { return join(path_, key); }
  void note_default(const std::string& key) { defaults_.push_back(join(path_, key)); }

  void finish() const {
    for (const auto& item : j_.items()) {
      if (!used_.count(item.key())) fail(join(path_, item.key()), "unknown key");
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::vector<std::string>& defaults_;
  std::set<std::string> used_;
};

/// An absent section reads as an empty object, so each of its keys is reported as defaulted.
const json& section(Reader& r, const std::string& key) {
  static const json empty = json::object();
  const json* s = r.optional(key);
  return s ? *s : empty;
}

template <class F>
void wrap(const std::string& path, F check) {
  try {
    check();
  } catch (const ConfigurationError& e) {
    fail(path, e.what());
  }
}

ParticleShape parse_shape(const json& j, const std::string& path, std::vector<std::string>& defaults) {
  Reader r(j, path, defaults);
  const std::string kind = text(r.required("kind"), r.path("kind"));
  ParticleShape out;
  if (kind == "sphere") {
    out = Sphere{positive(r.required("radius"), r.path("radius"))};
  } else if (kind == "prolate_spheroid") {
    out = ProlateSpheroid{positive(r.required("semi_major"), r.path("semi_major")),
                          positive(r.required("semi_minor"), r.path("semi_minor"))};
  } else {
    fail(r.path("kind"), "unknown shape '" + kind + "'");
  }
  r.finish();
  wrap(path, [&] { validate_shape(out); });
  return out;
}

Magnetization parse_magnetization(const json& j, const std::string& path, std::vector<std::string>& defaults) {
  Reader r(j, path, defaults);
  const std::string kind = text(r.required("kind"), r.path("kind"));
  Magnetization out;
  if (kind == "saturated") {
    out = SaturatedMagnetization{non_negative(r.required("moment_density"), r.path("moment_density"))};
  } else if (kind == "linear") {
    out = LinearMagnetization{non_negative(r.required("susceptibility"), r.path("susceptibility"))};
  } else {
    fail(r.path("kind"), "unknown magnetization '" + kind + "'");
  }
  r.finish();
  return out;
}

MagneticCluster parse_cluster(const json& j, const std::string& path, const MagneticCluster& base,
                              std::vector<std::string>& defaults) {
  MagneticCluster c = base;
  Reader r(j, path, defaults);
  r.read("shape", c.shape, [&](const json& v, const std::string& p) { return parse_shape(v, p, defaults); });
  r.read("volume", c.volume, positive);
  r.read("magnetization", c.magnetization,
         [&](const json& v, const std::string& p) { return parse_magnetization(v, p, defaults); });
  r.finish();
  wrap(path, [&] { c.validate(); });
  return c;
}

BodyProperties parse_body(const json& j, const std::string& path, const BodyProperties& base,
                          std::vector<std::string>& defaults) {
  Reader r(j, path, defaults);
  ParticleShape shape = base.shape;
  double density = base.density;
  r.read("shape", shape, [&](const json& v, const std::string& p) { return parse_shape(v, p, defaults); });
  r.read("density", density, positive);
  std::optional<MagneticCluster> magnetic = base.magnetic;
  if (const json* m = r.optional("magnetic")) {
    if (m->is_null()) {
      magnetic.reset();
    } else {
      const MagneticCluster seed = base.magnetic ? *base.magnetic : MagneticCluster{shape, shape_volume(shape), {}};
      magnetic = parse_cluster(*m, r.path("magnetic"), seed, defaults);
    }
  } else {
    r.note_default("magnetic");
  }
  BodyProperties b = BodyProperties::homogeneous(shape, density, magnetic);
  if (const json* mm = r.optional("mass_matrix")) {
    if (!mm->is_array() || mm->size() != 6) fail(r.path("mass_matrix"), "expected a 6x6 array");
    for (std::size_t row = 0; row < 6; ++row) {
      const json& line = (*mm)[row];
      const std::string rp = indexed(r.path("mass_matrix"), row);
      if (!line.is_array() || line.size() != 6) fail(rp, "expected 6 numbers");
      for (std::size_t col = 0; col < 6; ++col) {
        b.mass_matrix(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(col)) = number(line[col], indexed(rp, col));
      }
    }
  } else if (shape == base.shape && density == base.density) {
    b.mass_matrix = base.mass_matrix;
    r.note_default("mass_matrix");
  } else {
    r.note_default("mass_matrix");
  }
  r.finish();
  wrap(path, [&] { b.validate(); });
  return b;
}

RigidBodyState parse_state(const json& j, const std::string& path, const RigidBodyState& base,
                           std::vector<std::string>& defaults) {
  RigidBodyState s = base;
  Reader r(j, path, defaults);
  r.read("position", s.position, vec3);
  r.read("orientation", s.orientation, [](const json& v, const std::string& p) {
    if (!v.is_array() || v.size() != 4) fail(p, "expected a quaternion [w, x, y, z]");
    return Quat(number(v[0], indexed(p, 0)), number(v[1], indexed(p, 1)), number(v[2], indexed(p, 2)),
                number(v[3], indexed(p, 3)));
  });
  r.read("velocity", s.velocity, vec3);
  r.read("angular_velocity", s.angular_velocity, vec3);
  r.finish();
  wrap(path, [&] { s.validate(); });
  return s;
}

ContactParams parse_contact(const json& j, const std::string& path, std::vector<std::string>& defaults) {
  ContactParams c;
  Reader r(j, path, defaults);
  r.read("stiffness", c.stiffness, non_negative);
  r.read("decay_length", c.decay_length, positive);
  r.read("adhesion_force", c.adhesion_force, non_negative);
  r.read("adhesion_range", c.adhesion_range, non_negative);
  r.read("breakaway_speed", c.breakaway_speed, non_negative);
  r.finish();
  wrap(path, [&] { c.validate(); });
  return c;
}

WorldBody parse_object(const json& j, const std::string& path, std::vector<std::string>& defaults) {
  WorldBody o;
  Reader r(j, path, defaults);
  o.body = parse_body(r.required("body"), r.path("body"), BodyProperties{}, defaults);
  r.read("state", o.state,
         [&](const json& v, const std::string& p) { return parse_state(v, p, RigidBodyState{}, defaults); });
  r.read("fixed", o.fixed, boolean);
  r.read("external_force", o.external_force, vec3);
  r.finish();
  return o;
}

ContactPair parse_pair(const json& j, const std::string& path, std::vector<std::string>& defaults) {
  ContactPair p;
  Reader r(j, path, defaults);
  const json& bodies = r.required("bodies");
  if (!bodies.is_array() || bodies.size() != 2) fail(r.path("bodies"), "expected two body indices");
  p.first = unsigned_integer(bodies[0], indexed(r.path("bodies"), 0));
  p.second = unsigned_integer(bodies[1], indexed(r.path("bodies"), 1));
  r.read("contact", p.params, [&](const json& v, const std::string& q) { return parse_contact(v, q, defaults); });
  r.read("released", p.released, boolean);
  r.finish();
  return p;
}

Coil parse_coil(const json& j, const std::string& path, std::vector<std::string>& defaults) {
  Coil c;
  Reader r(j, path, defaults);
  c.position = vec3(r.required("position"), r.path("position"));
  c.axis = vec3(r.required("axis"), r.path("axis"));
  r.read("dipole_gain", c.dipole_gain, positive);
  r.read("max_current", c.max_current, positive);
  r.finish();
  wrap(path, [&] { c.validate(); });
  return c;
}

WaypointMode parse_mode(const json& j, const std::string& path) {
  const std::string m = text(j, path);
  if (m == "approach") return WaypointMode::Approach;
  if (m == "fast_retract") return WaypointMode::FastRetract;
  if (m == "hold") return WaypointMode::Hold;
  fail(path, "unknown waypoint mode '" + m + "'");
}

Waypoint parse_waypoint(const json& j, const std::string& path, std::vector<std::string>& defaults) {
  Waypoint w;
  Reader r(j, path, defaults);
  w.t = non_negative(r.required("t"), r.path("t"));
  w.pose = vec3(r.required("pose"), r.path("pose"));
  r.read("mode", w.mode, parse_mode);
  r.read("engage", w.engage, boolean);
  r.finish();
  return w;
}

template <class T, class F>
std::vector<T> parse_list(const json& j, const std::string& path, F parse) {
  if (!j.is_array()) fail(path, "expected an array");
  std::vector<T> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(parse(j[i], indexed(path, i)));
  return out;
}

MasterModel parse_master(const json& j, const std::string& path, const MasterModel& base,
                         std::vector<std::string>& defaults) {
  Reader r(j, path, defaults);
  std::string model = std::holds_alternative<PointMass>(base) ? "point_mass" : "two_link";
  r.read("model", model, text);
  if (model == "point_mass") {
    PointMass m = std::holds_alternative<PointMass>(base) ? std::get<PointMass>(base) : PointMass{};
    r.read("inertia", m.inertia, diagonal);
    r.read("friction", m.friction, diagonal);
    r.read("transducer", m.transducer, diagonal);
    r.read("stiffness", m.stiffness, diagonal);
    r.finish();
    wrap(path, [&] { validate_master(m); });
    return m;
  }
  if (model == "two_link") {
    TwoLink m = std::holds_alternative<TwoLink>(base) ? std::get<TwoLink>(base) : TwoLink{};
    r.read("l1", m.l1, positive);
    r.read("l2", m.l2, positive);
    r.read("m1", m.m1, positive);
    r.read("m2", m.m2, positive);
    r.read("inertia1", m.inertia1, non_negative);
    r.read("inertia2", m.inertia2, non_negative);
    r.read("lc1", m.lc1, non_negative);
    r.read("lc2", m.lc2, non_negative);
    r.read("friction", m.friction, non_negative);
    r.read("transducer", m.transducer, non_negative);
    r.read("stiffness", m.stiffness, non_negative);
    r.read("gravity", m.gravity, boolean);
    r.finish();
    wrap(path, [&] { validate_master(m); });
    return m;
  }
  fail(r.path("model"), "unknown master model '" + model + "'");
}

std::string syntax_message(std::string_view doc, const json::parse_error& e) {
  const std::size_t byte = std::min<std::size_t>(e.byte == 0 ? 0 : e.byte - 1, doc.size());
  std::size_t line = 1, column = 1;
  for (std::size_t i = 0; i < byte; ++i) {
    if (doc[i] == '\n') {
      ++line;
      column = 1;
    } else {
      ++column;
    }
  }
  std::string what = e.what();
  if (const auto pos = what.find("syntax error"); pos != std::string::npos) what = what.substr(pos);
  return "line " + std::to_string(line) + ", column " + std::to_string(column) + ": " + what;
}

}  // namespace

ParsedConfig parse_config(std::string_view doc) {
  json root;
  try {
    root = json::parse(doc.begin(), doc.end());
  } catch (const json::parse_error& e) {
    throw ConfigurationError(syntax_message(doc, e));
  }

  ParsedConfig out;
  std::vector<std::string>& d = out.defaults;
  Reader r(root, "", d);
  const json& schema = r.required("schema");
  if (!schema.is_number_integer() || schema.get<std::int64_t>() != kConfigSchema) {
    fail("schema", "unsupported schema version (expected " + std::to_string(kConfigSchema) + ")");
  }
  const ScenarioKind kind = [&] {
    const std::string name = text(r.required("scenario"), "scenario");
    try {
      return scenario_from_name(name);
    } catch (const ConfigurationError& e) {
      fail("scenario", e.what());
    }
  }();

  ScenarioConfig c = default_scenario(kind);
  TeleopConfig& t = c.teleop;
  r.read("duration", c.duration, positive);
  r.read("settle_band", c.settle_band, positive);
  r.read("dt", t.dt, [](const json& v, const std::string& p) {
    const double dt = number(v, p);
    if (!(dt > 0.0) || dt > 1e-2) fail(p, "must lie in (0, 0.01] s");
    return dt;
  });
  r.read("seed", t.seed, unsigned_integer);
  r.read("integration", t.mode, [](const json& v, const std::string& p) {
    const std::string m = text(v, p);
    if (m == "quasi_static") return IntegrationMode::QuasiStatic;
    if (m == "second_order") return IntegrationMode::SecondOrder;
    fail(p, "unknown integration mode '" + m + "'");
  });
  r.read("planar", t.planar, boolean);
  r.read("hydrodynamic_coupling", t.hydrodynamic_coupling, boolean);
  {
    Reader fr(section(r, "fluid"), "fluid", d);
    fr.read("viscosity", t.fluid.viscosity, positive);
    fr.read("density", t.fluid.density, positive);
    fr.finish();
  }
  r.read("coils", t.coils, [&](const json& v, const std::string& p) {
    CoilArray a;
    a.coils = parse_list<Coil>(v, p, [&](const json& e, const std::string& q) { return parse_coil(e, q, d); });
    wrap(p, [&] { a.validate(); });
    return a;
  });
  r.read("hold_field", t.hold_field, positive);
  r.read("actuation", t.actuation, [](const json& v, const std::string& p) {
    const std::string m = text(v, p);
    if (m == "force_control") return ActuationMode::ForceControl;
    if (m == "gradient_pull") return ActuationMode::GradientPull;
    fail(p, "unknown actuation mode '" + m + "'");
  });
  r.read("pull_gradient", t.pull_gradient, non_negative);
  r.read("pull_travel", t.pull_travel, positive);
  r.read("pull_focus", t.pull_focus, [](const json& v, const std::string& p) -> std::optional<Vec3> {
    if (v.is_null()) return std::nullopt;
    return vec3(v, p);
  });
  r.read("master", t.master,
         [&](const json& v, const std::string& p) { return parse_master(v, p, t.master, d); });
  r.read("master_initial", t.master_initial, vec3);
  {
    Reader hr(section(r, "hand"), "hand", d);
    hr.read("stiffness", t.hand.stiffness, diagonal);
    hr.read("damping", t.hand.damping, diagonal);
    hr.finish();
  }
  {
    Reader sr(section(r, "scaling"), "scaling", d);
    sr.read("s1", t.scaling.s1, diagonal);
    sr.read("s2", t.scaling.s2, diagonal);
    sr.finish();
    wrap("scaling", [&] { t.scaling.validate(); });
  }
  {
    Reader gr(section(r, "force_gains"), "force_gains", d);
    gr.read("kp", t.force_gains.kp, mat3);
    gr.read("ki", t.force_gains.ki, mat3);
    gr.read("kdamp", t.force_gains.kdamp, mat3);
    gr.read("f_desired", t.force_gains.f_desired, vec3);
    gr.read("f_max", t.force_gains.f_max, positive);
    gr.finish();
    wrap("force_gains", [&] { t.force_gains.validate(); });
  }
  {
    Reader gr(section(r, "position_gains"), "position_gains", d);
    gr.read("kp", t.position_gains.kp, mat3);
    gr.read("ki", t.position_gains.ki, mat3);
    gr.read("kd", t.position_gains.kd, mat3);
    gr.finish();
    wrap("position_gains", [&] { t.position_gains.validate(); });
  }
  r.read("observer_bandwidth", t.observer_bandwidth, positive);
  r.read("slave", t.slave, [&](const json& v, const std::string& p) { return parse_body(v, p, t.slave, d); });
  r.read("slave_initial", t.slave_initial,
         [&](const json& v, const std::string& p) { return parse_state(v, p, t.slave_initial, d); });
  r.read("objects", t.objects, [&](const json& v, const std::string& p) {
    return parse_list<WorldBody>(v, p, [&](const json& e, const std::string& q) { return parse_object(e, q, d); });
  });
  r.read("pairs", t.pairs, [&](const json& v, const std::string& p) {
    return parse_list<ContactPair>(v, p, [&](const json& e, const std::string& q) { return parse_pair(e, q, d); });
  });
  {
    Reader er(section(r, "engulfment"), "engulfment", d);
    er.read("enabled", t.engulfment.enabled, boolean);
    er.read("pair", t.engulfment.pair, [](const json& v, const std::string& p) {
      return static_cast<std::size_t>(unsigned_integer(v, p));
    });
    er.read("threshold", t.engulfment.threshold, positive);
    er.read("hold_time", t.engulfment.hold_time, non_negative);
    er.finish();
  }
  {
    Reader mr(section(r, "measurement"), "measurement", d);
    mr.read("kind", t.measurement.kind, [](const json& v, const std::string& p) {
      const std::string k = text(v, p);
      if (k == "perfect") return MeasurementKind::Perfect;
      if (k == "noisy") return MeasurementKind::Noisy;
      if (k == "delayed") return MeasurementKind::Delayed;
      fail(p, "unknown measurement kind '" + k + "'");
    });
    mr.read("noise_sigma", t.measurement.noise_sigma, non_negative);
    mr.read("delay_steps", t.measurement.delay_steps,
            [](const json& v, const std::string& p) { return static_cast<int>(unsigned_integer(v, p)); });
    mr.finish();
  }
  r.read("feedback_delay_steps", t.feedback_delay_steps,
         [](const json& v, const std::string& p) { return static_cast<int>(unsigned_integer(v, p)); });
  r.read("task_object", t.task_object, [](const json& v, const std::string& p) -> std::optional<std::size_t> {
    if (v.is_null()) return std::nullopt;
    return static_cast<std::size_t>(unsigned_integer(v, p));
  });
  r.read("task_target", t.task_target, vec3);
  r.read("script", c.script.waypoints, [&](const json& v, const std::string& p) {
    return parse_list<Waypoint>(v, p, [&](const json& e, const std::string& q) { return parse_waypoint(e, q, d); });
  });
  r.finish();

  if (t.observer_bandwidth * t.dt >= 1.0) fail("observer_bandwidth", "observer_bandwidth * dt must be below 1");
  wrap("configuration", [&] { c.validate(); });
  out.config = std::move(c);
  return out;
}

namespace {

ojson emit_vec(const Vec3& v) { return ojson::array({v.x(), v.y(), v.z()}); }

ojson emit_mat(const Mat3& m) {
  if (m.isDiagonal(0.0)) return emit_vec(m.diagonal());
  ojson rows = ojson::array();
  for (int r = 0; r < 3; ++r) rows.push_back(emit_vec(m.row(r).transpose()));
  return rows;
}

ojson emit_shape(const ParticleShape& s) {
  ojson o;
  if (const auto* sp = std::get_if<Sphere>(&s)) {
    o["kind"] = "sphere";
    o["radius"] = sp->radius;
  } else {
    const auto& ps = std::get<ProlateSpheroid>(s);
    o["kind"] = "prolate_spheroid";
    o["semi_major"] = ps.semi_major;
    o["semi_minor"] = ps.semi_minor;
  }
  return o;
}

ojson emit_body(const BodyProperties& b) {
  ojson o;
  o["shape"] = emit_shape(b.shape);
  o["density"] = b.density;
  if (b.magnetic) {
    ojson m;
    m["shape"] = emit_shape(b.magnetic->shape);
    m["volume"] = b.magnetic->volume;
    ojson mag;
    if (const auto* s = std::get_if<SaturatedMagnetization>(&b.magnetic->magnetization)) {
      mag["kind"] = "saturated";
      mag["moment_density"] = s->moment_density;
    } else {
      mag["kind"] = "linear";
      mag["susceptibility"] = std::get<LinearMagnetization>(b.magnetic->magnetization).susceptibility;
    }
    m["magnetization"] = mag;
    o["magnetic"] = m;
  } else {
    o["magnetic"] = nullptr;
  }
  ojson rows = ojson::array();
  for (int r = 0; r < 6; ++r) {
    ojson row = ojson::array();
    for (int c = 0; c < 6; ++c) row.push_back(b.mass_matrix(r, c));
    rows.push_back(row);
  }
  o["mass_matrix"] = rows;
  return o;
}

ojson emit_state(const RigidBodyState& s) {
  ojson o;
  o["position"] = emit_vec(s.position);
  o["orientation"] = ojson::array({s.orientation.w(), s.orientation.x(), s.orientation.y(), s.orientation.z()});
  o["velocity"] = emit_vec(s.velocity);
  o["angular_velocity"] = emit_vec(s.angular_velocity);
  return o;
}

const char* mode_name(WaypointMode m) {
  switch (m) {
    case WaypointMode::Approach:
      return "approach";
    case WaypointMode::FastRetract:
      return "fast_retract";
    case WaypointMode::Hold:
      return "hold";
  }
  return "approach";
}

const char* measurement_name(MeasurementKind k) {
  switch (k) {
    case MeasurementKind::Perfect:
      return "perfect";
    case MeasurementKind::Noisy:
      return "noisy";
    case MeasurementKind::Delayed:
      return "delayed";
  }
  return "perfect";
}

}  // namespace

std::string emit_config(const ScenarioConfig& c) {
  const TeleopConfig& t = c.teleop;
  ojson o;
  o["schema"] = kConfigSchema;
  o["scenario"] = std::string(scenario_name(c.kind));
  o["duration"] = c.duration;
  o["settle_band"] = c.settle_band;
  o["dt"] = t.dt;
  o["seed"] = t.seed;
  o["integration"] = t.mode == IntegrationMode::QuasiStatic ? "quasi_static" : "second_order";
  o["planar"] = t.planar;
  o["hydrodynamic_coupling"] = t.hydrodynamic_coupling;
  o["fluid"] = {{"viscosity", t.fluid.viscosity}, {"density", t.fluid.density}};
  ojson coils = ojson::array();
  for (const Coil& k : t.coils.coils) {
    coils.push_back({{"position", emit_vec(k.position)},
                     {"axis", emit_vec(k.axis)},
                     {"dipole_gain", k.dipole_gain},
                     {"max_current", k.max_current}});
  }
  o["coils"] = coils;
  o["hold_field"] = t.hold_field;
  o["actuation"] = t.actuation == ActuationMode::ForceControl ? "force_control" : "gradient_pull";
  o["pull_gradient"] = t.pull_gradient;
  o["pull_travel"] = t.pull_travel;
  o["pull_focus"] = t.pull_focus ? emit_vec(*t.pull_focus) : ojson(nullptr);
  if (const auto* pm = std::get_if<PointMass>(&t.master)) {
    o["master"] = {{"model", "point_mass"},
                   {"inertia", emit_vec(pm->inertia)},
                   {"friction", emit_vec(pm->friction)},
                   {"transducer", emit_vec(pm->transducer)},
                   {"stiffness", emit_vec(pm->stiffness)}};
  } else {
    const auto& tl = std::get<TwoLink>(t.master);
    o["master"] = {{"model", "two_link"}, {"l1", tl.l1},           {"l2", tl.l2},
                   {"m1", tl.m1},         {"m2", tl.m2},           {"inertia1", tl.inertia1},
                   {"inertia2", tl.inertia2}, {"lc1", tl.lc1},     {"lc2", tl.lc2},
                   {"friction", tl.friction}, {"transducer", tl.transducer}, {"stiffness", tl.stiffness},
                   {"gravity", tl.gravity}};
  }
  o["master_initial"] = emit_vec(t.master_initial);
  o["hand"] = {{"stiffness", emit_vec(t.hand.stiffness)}, {"damping", emit_vec(t.hand.damping)}};
  o["scaling"] = {{"s1", emit_vec(t.scaling.s1)}, {"s2", emit_vec(t.scaling.s2)}};
  o["force_gains"] = {{"kp", emit_mat(t.force_gains.kp)},
                      {"ki", emit_mat(t.force_gains.ki)},
                      {"kdamp", emit_mat(t.force_gains.kdamp)},
                      {"f_desired", emit_vec(t.force_gains.f_desired)},
                      {"f_max", t.force_gains.f_max}};
  o["position_gains"] = {{"kp", emit_mat(t.position_gains.kp)},
                         {"ki", emit_mat(t.position_gains.ki)},
                         {"kd", emit_mat(t.position_gains.kd)}};
  o["observer_bandwidth"] = t.observer_bandwidth;
  o["slave"] = emit_body(t.slave);
  o["slave_initial"] = emit_state(t.slave_initial);
  ojson objects = ojson::array();
  for (const WorldBody& b : t.objects) {
    objects.push_back({{"body", emit_body(b.body)},
                       {"state", emit_state(b.state)},
                       {"fixed", b.fixed},
                       {"external_force", emit_vec(b.external_force)}});
  }
  o["objects"] = objects;
  ojson pairs = ojson::array();
  for (const ContactPair& p : t.pairs) {
    pairs.push_back({{"bodies", ojson::array({p.first, p.second})},
                     {"contact",
                      {{"stiffness", p.params.stiffness},
                       {"decay_length", p.params.decay_length},
                       {"adhesion_force", p.params.adhesion_force},
                       {"adhesion_range", p.params.adhesion_range},
                       {"breakaway_speed", p.params.breakaway_speed}}},
                     {"released", p.released}});
  }
  o["pairs"] = pairs;
  o["engulfment"] = {{"enabled", t.engulfment.enabled},
                     {"pair", t.engulfment.pair},
                     {"threshold", t.engulfment.threshold},
                     {"hold_time", t.engulfment.hold_time}};
  o["measurement"] = {{"kind", measurement_name(t.measurement.kind)},
                      {"noise_sigma", t.measurement.noise_sigma},
                      {"delay_steps", t.measurement.delay_steps}};
  o["feedback_delay_steps"] = t.feedback_delay_steps;
  o["task_object"] = t.task_object ? ojson(*t.task_object) : ojson(nullptr);
  o["task_target"] = emit_vec(t.task_target);
  ojson script = ojson::array();
  for (const Waypoint& w : c.script.waypoints) {
    script.push_back({{"t", w.t}, {"pose", emit_vec(w.pose)}, {"mode", mode_name(w.mode)}, {"engage", w.engage}});
  }
  o["script"] = script;
  return o.dump(2) + "\n";
}

ParsedConfig load_config_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigurationError("cannot open config file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

}  // namespace microtele
