#pragma once

#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "microtele/teleop.hpp"

namespace microtele {

enum class ScenarioKind { BeadPush, CellPenetration, BubbleManipulation };

std::string_view scenario_name(ScenarioKind kind);
/// Throws ConfigurationError for an unknown name.
ScenarioKind scenario_from_name(std::string_view name);

enum class WaypointMode { Approach, FastRetract, Hold };

struct Waypoint {
  double t = 0.0;
  Vec3 pose = Vec3::Zero();  // master task space, m
  WaypointMode mode = WaypointMode::Approach;  // describes the segment ending here
  bool engage = true;

  bool operator==(const Waypoint&) const = default;
};

struct OperatorScript {
  std::vector<Waypoint> waypoints;

  void validate() const;
  bool operator==(const OperatorScript&) const = default;
};

/// Piecewise-linear pose and its slope; holds the last pose past the final waypoint.
OperatorCommand scripted_operator(const OperatorScript& script, double t);

struct ScenarioConfig {
  ScenarioKind kind = ScenarioKind::BeadPush;
  TeleopConfig teleop;
  OperatorScript script;
  double duration = 25.0;    // s
  double settle_band = 1e-5; // m, settling band on the task error

  void validate() const;
  bool operator==(const ScenarioConfig&) const = default;
};

ScenarioConfig default_scenario(ScenarioKind kind);

struct Metrics {
  double max_steady_error = 0.0;   // m, final 10 % of the run
  double settling_time = 0.0;      // s
  double peak_contact_force = 0.0; // N
  double peak_magnetic_force = 0.0;
  double peak_commanded_force = 0.0;
  std::optional<double> first_contact_time;
  std::optional<double> penetration_time;
  std::optional<double> engulfment_time;
  bool release_success = false;    // a speed-gated release happened and adhesion cleared
  std::size_t saturated_frames = 0;
  std::size_t frames = 0;

  bool operator==(const Metrics&) const = default;
};

/// Metrics over a frame sequence; `settle_band` bounds the task error for settling.
Metrics compute_metrics(const std::vector<TelemetryFrame>& frames, double settle_band = 1e-5);

struct ScenarioRun {
  std::vector<TelemetryFrame> frames;
  std::vector<TeleopEvent> events;
  Metrics metrics;
  bool faulted = false;
  std::string diagnostic;
};

using FrameCallback = std::function<void(const TelemetryFrame&)>;

/// Runs duration/dt steps of the scripted session. A fault stops the run and
/// returns the frames produced so far together with the diagnostic.
ScenarioRun run_scenario(const ScenarioConfig& config, const FrameCallback& on_frame = {});

/// Time windows of the fast-retract segments of a script.
std::vector<std::pair<double, double>> fast_retract_segments(const OperatorScript& script);

/// Single-axis wall-contact setup used to probe loop stability: the slave rests
/// against a fixed wall, the operator holds the master with a spring.
struct StabilityProbe {
  TeleopConfig config;
  OperatorCommand hold;
};
StabilityProbe stability_probe(double force_scale, bool damped);

/// Ratio of peak to initial master energy over `seconds` of the probe run.
double energy_growth(const StabilityProbe& probe, double seconds);

}  // namespace microtele
