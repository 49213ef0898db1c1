#include <gtest/gtest.h>

#include <algorithm>
#include <fstream>
#include <random>

#include "microtele/config.hpp"

namespace microtele {
namespace {

std::string error_of(std::string_view text) {
  try {
    parse_config(text);
  } catch (const ConfigurationError& e) {
    return e.what();
  }
  return "";
}

bool listed(const std::vector<std::string>& v, const std::string& key) {
  return std::find(v.begin(), v.end(), key) != v.end();
}

TEST(Config, MinimalDocumentUsesDefaults) {
  for (const ScenarioKind kind :
       {ScenarioKind::BeadPush, ScenarioKind::CellPenetration, ScenarioKind::BubbleManipulation}) {
    const std::string doc = R"({"schema": 1, "scenario": ")" + std::string(scenario_name(kind)) + "\"}";
    const ParsedConfig p = parse_config(doc);
    EXPECT_EQ(p.config, default_scenario(kind));
    for (const char* key : {"dt", "duration", "scaling.s1", "scaling.s2", "force_gains.f_max", "fluid.viscosity",
                            "coils", "script", "objects", "observer_bandwidth", "seed"}) {
      EXPECT_TRUE(listed(p.defaults, key)) << key;
    }
    EXPECT_FALSE(listed(p.defaults, "scenario"));
  }
}

TEST(Config, ExplicitKeysAreNotReportedAsDefaults) {
  const ParsedConfig p = parse_config(R"({"schema": 1, "scenario": "bead_push", "dt": 5e-4,
                                          "scaling": {"s1": 1e6}})");
  EXPECT_FALSE(listed(p.defaults, "dt"));
  EXPECT_FALSE(listed(p.defaults, "scaling.s1"));
  EXPECT_TRUE(listed(p.defaults, "scaling.s2"));
  EXPECT_EQ(p.config.teleop.dt, 5e-4);
  EXPECT_EQ(p.config.teleop.scaling.s1, Vec3::Constant(1e6));
}

TEST(Config, ForceScaleOverride) {
  const ParsedConfig p = parse_config(R"({"schema": 1, "scenario": "cell_penetration", "scaling": {"s1": [1e6, 1e6, 1e6]}})");
  EXPECT_EQ(p.config.teleop.scaling.force(), Mat3(1e6 * Mat3::Identity()));
  const ParsedConfig q = parse_config(R"({"schema": 1, "scenario": "bead_push", "scaling": {"s1": 2e5}})");
  EXPECT_EQ(q.config.teleop.scaling.s1, Vec3::Constant(2e5));
}

TEST(Config, RangeErrorsNameTheKey) {
  const std::string dt = error_of(R"({"schema": 1, "scenario": "bead_push", "dt": 0})");
  EXPECT_NE(dt.find("dt"), std::string::npos) << dt;
  const std::string visc = error_of(R"({"schema": 1, "scenario": "bead_push", "fluid": {"viscosity": -1}})");
  EXPECT_NE(visc.find("fluid.viscosity"), std::string::npos) << visc;
  const std::string fmax = error_of(R"({"schema": 1, "scenario": "bead_push", "force_gains": {"f_max": 0}})");
  EXPECT_NE(fmax.find("force_gains.f_max"), std::string::npos) << fmax;
  const std::string type = error_of(R"({"schema": 1, "scenario": "bead_push", "duration": "long"})");
  EXPECT_NE(type.find("duration"), std::string::npos) << type;
}

TEST(Config, UnknownAndMissingKeys) {
  const std::string unknown = error_of(R"({"schema": 1, "scenario": "bead_push", "viscosity": 1e-3})");
  EXPECT_NE(unknown.find("viscosity"), std::string::npos) << unknown;
  const std::string nested = error_of(R"({"schema": 1, "scenario": "bead_push", "hand": {"grip": 3}})");
  EXPECT_NE(nested.find("hand.grip"), std::string::npos) << nested;
  const std::string missing = error_of(R"({"schema": 1})");
  EXPECT_NE(missing.find("scenario"), std::string::npos) << missing;
  const std::string schema = error_of(R"({"schema": 2, "scenario": "bead_push"})");
  EXPECT_NE(schema.find("schema"), std::string::npos) << schema;
  const std::string kind = error_of(R"({"schema": 1, "scenario": "bead_pull"})");
  EXPECT_NE(kind.find("scenario"), std::string::npos) << kind;
}

TEST(Config, SyntaxErrorReportsLineAndColumn) {
  const std::string msg = error_of("{\n  \"schema\": 1,\n  \"dt\" 0.001\n}");
  EXPECT_NE(msg.find("line 3"), std::string::npos) << msg;
  EXPECT_NE(msg.find("column"), std::string::npos) << msg;
}

TEST(Config, DefaultsRoundTrip) {
  for (const ScenarioKind kind :
       {ScenarioKind::BeadPush, ScenarioKind::CellPenetration, ScenarioKind::BubbleManipulation}) {
    const ScenarioConfig c = default_scenario(kind);
    const std::string text = emit_config(c);
    const ParsedConfig p = parse_config(text);
    EXPECT_EQ(p.config, c) << scenario_name(kind);
    EXPECT_TRUE(p.defaults.empty());
    EXPECT_EQ(emit_config(p.config), text);
  }
}

Vec3 random_vec(std::mt19937_64& rng, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  return {u(rng), u(rng), u(rng)};
}

ScenarioConfig random_config(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> pick(0, 2);
  ScenarioConfig c = default_scenario(static_cast<ScenarioKind>(pick(rng)));
  TeleopConfig& t = c.teleop;
  t.dt = 1e-4 + 9e-4 * u(rng);
  t.observer_bandwidth = (0.1 + 0.8 * u(rng)) / t.dt;
  t.seed = rng();
  t.scaling.s1 = random_vec(rng, 1e5, 1e7);
  t.scaling.s2 = random_vec(rng, 1e-4, 1e-2);
  t.hand.stiffness = random_vec(rng, 10.0, 1000.0);
  t.hand.damping = random_vec(rng, 0.0, 50.0);
  t.force_gains.kp = random_vec(rng, 0.0, 2.0).asDiagonal();
  t.force_gains.ki(0, 1) = u(rng);  // off-diagonal survives as a full matrix
  t.force_gains.f_max = 1e-6 + 1e-4 * u(rng);
  t.position_gains.kd = random_vec(rng, 10.0, 200.0).asDiagonal();
  t.fluid.viscosity = 1e-4 + 1e-2 * u(rng);
  t.fluid.density = 900.0 + 200.0 * u(rng);
  t.hold_field = 1e-3 + 1e-2 * u(rng);
  t.mode = u(rng) < 0.5 ? IntegrationMode::QuasiStatic : IntegrationMode::SecondOrder;
  t.planar = u(rng) < 0.5;
  t.hydrodynamic_coupling = u(rng) < 0.5;
  t.measurement.kind = static_cast<MeasurementKind>(pick(rng));
  t.measurement.noise_sigma = 1e-7 * u(rng);
  t.measurement.delay_steps = pick(rng);
  t.feedback_delay_steps = pick(rng);
  t.master_initial = random_vec(rng, -1e-2, 1e-2);
  t.slave_initial.position = random_vec(rng, -1e-5, 1e-5);
  t.slave_initial.orientation = Quat::UnitRandom();
  if (u(rng) < 0.3) {
    TwoLink arm;
    arm.l1 = 0.2 + 0.2 * u(rng);
    arm.gravity = u(rng) < 0.5;
    t.master = arm;
  } else {
    PointMass pm;
    pm.inertia = random_vec(rng, 0.05, 0.5);
    pm.stiffness = random_vec(rng, 0.0, 10.0);
    t.master = pm;
  }
  if (u(rng) < 0.5) t.pull_focus = random_vec(rng, -1e-4, 1e-4);
  for (Coil& coil : t.coils.coils) {
    coil.position *= 1.0 + 0.5 * u(rng);
    coil.max_current = 1.0 + 20.0 * u(rng);
  }
  for (WorldBody& obj : t.objects) {
    obj.state.position += random_vec(rng, -1e-6, 1e-6);
    obj.external_force = random_vec(rng, -1e-12, 1e-12);
  }
  for (ContactPair& p : t.pairs) {
    p.params.stiffness *= 1.0 + u(rng);
    p.released = u(rng) < 0.3;
  }
  t.engulfment.hold_time = 1.0 + 60.0 * u(rng);
  c.duration = 1.0 + 100.0 * u(rng);
  c.settle_band = 1e-6 + 1e-5 * u(rng);
  for (std::size_t i = 1; i < c.script.waypoints.size(); ++i) {
    c.script.waypoints[i].pose += random_vec(rng, -1e-4, 1e-4);
    c.script.waypoints[i].engage = u(rng) < 0.8;
  }
  return c;
}

TEST(Config, RandomizedRoundTrip) {
  std::mt19937_64 rng(2024);
  for (int k = 0; k < 200; ++k) {
    const ScenarioConfig c = random_config(rng);
    const std::string text = emit_config(c);
    ParsedConfig p;
    ASSERT_NO_THROW(p = parse_config(text)) << text;
    EXPECT_EQ(p.config, c) << "sample " << k;
    EXPECT_EQ(emit_config(p.config), text);
  }
}

TEST(Config, LoadFromFile) {
  const std::string path = ::testing::TempDir() + "microtele_config_test.json";
  {
    std::ofstream out(path);
    out << R"({"schema": 1, "scenario": "bubble_manipulation", "duration": 3})";
  }
  EXPECT_EQ(load_config_file(path).config.duration, 3.0);
  EXPECT_THROW(load_config_file(path + ".missing"), ConfigurationError);
}

}  // namespace
}  // namespace microtele
