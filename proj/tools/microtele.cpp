// microtele: batch runs, stability maps, metrics and the streaming server.

#include <CLI11.hpp>

#include <atomic>
#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <thread>

#include "microtele/config.hpp"
#include "microtele/scenarios.hpp"
#include "microtele/stream_server.hpp"
#include "microtele/telemetry.hpp"
#include "microtele/two_port.hpp"

namespace {

using namespace microtele;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitRuntime = 2;

std::atomic<bool> g_interrupted{false};

void on_signal(int) { g_interrupted = true; }

std::string fmt(double v) { return format_double(v); }

std::string fmt_opt(const std::optional<double>& v) { return v ? fmt(*v) : "none"; }

void print_metrics(std::ostream& out, const Metrics& m) {
  out << "frames " << m.frames << "\n"
      << "max_steady_error " << fmt(m.max_steady_error) << "\n"
      << "settling_time " << fmt(m.settling_time) << "\n"
      << "peak_contact_force " << fmt(m.peak_contact_force) << "\n"
      << "peak_magnetic_force " << fmt(m.peak_magnetic_force) << "\n"
      << "peak_commanded_force " << fmt(m.peak_commanded_force) << "\n"
      << "first_contact_time " << fmt_opt(m.first_contact_time) << "\n"
      << "penetration_time " << fmt_opt(m.penetration_time) << "\n"
      << "engulfment_time " << fmt_opt(m.engulfment_time) << "\n"
      << "release_success " << (m.release_success ? "true" : "false") << "\n"
      << "saturated_frames " << m.saturated_frames << "\n";
}

int cmd_run(const std::string& path, const std::string& out_path, std::size_t frames_per_flush, bool quiet) {
  const ParsedConfig parsed = load_config_file(path);
  if (!quiet) {
    for (const std::string& d : parsed.defaults) std::cerr << "default: " << d << "\n";
  }
  std::ofstream file;
  std::optional<TelemetryWriter> writer;
  if (!out_path.empty()) {
    const TelemetryFormat format = format_for_path(out_path);
    file.open(out_path, std::ios::binary | std::ios::trunc);
    if (!file) throw Error("cannot open '" + out_path + "' for writing");
    writer.emplace(file, format, frames_per_flush);
  }
  const ScenarioRun run = run_scenario(parsed.config, [&](const TelemetryFrame& f) {
    if (writer) writer->write(f);
  });
  if (writer) writer->flush();
  for (const TeleopEvent& e : run.events) std::cout << "event " << fmt(e.t) << " " << e.kind << " " << e.detail << "\n";
  if (!run.frames.empty()) print_metrics(std::cout, run.metrics);
  if (writer) std::cout << "telemetry_bytes " << writer->bytes() << "\n";
  if (run.faulted) {
    std::cerr << "runtime fault: " << run.diagnostic << "\n";
    return kExitRuntime;
  }
  return kExitOk;
}

int cmd_stability(const std::string& path, const std::string& sweep, double omega_lo, double omega_hi, int omega_n) {
  const ParsedConfig parsed = load_config_file(path);
  const std::vector<double> omega = log_grid(omega_lo, omega_hi, omega_n);
  std::vector<StabilityMapRow> rows;
  std::string key = "config";
  if (sweep.empty()) {
    rows.push_back({0.0, analyze_stability(parsed.config.teleop, omega)});
  } else {
    const auto eq = sweep.find('=');
    const auto c1 = sweep.find(':', eq == std::string::npos ? 0 : eq);
    const auto c2 = c1 == std::string::npos ? std::string::npos : sweep.find(':', c1 + 1);
    if (eq == std::string::npos || c1 == std::string::npos || c2 == std::string::npos) {
      throw ConfigurationError("--sweep expects key=lo:hi:n");
    }
    key = sweep.substr(0, eq);
    double lo = 0.0, hi = 0.0;
    int n = 0;
    try {
      lo = std::stod(sweep.substr(eq + 1, c1 - eq - 1));
      hi = std::stod(sweep.substr(c1 + 1, c2 - c1 - 1));
      n = std::stoi(sweep.substr(c2 + 1));
    } catch (const std::exception&) {
      throw ConfigurationError("--sweep expects numeric lo:hi:n");
    }
    rows = stability_map(parsed.config.teleop, key, lo, hi, n, omega);
  }
  std::cout << key << ",stable,ports_passive,margin,margin_omega,min_re_h11,min_re_h22\n";
  for (const StabilityMapRow& r : rows) {
    std::cout << (sweep.empty() ? std::string("-") : fmt(r.value)) << "," << (r.result.stable ? 1 : 0) << ","
              << (r.result.ports_passive ? 1 : 0) << "," << fmt(r.result.margin) << "," << fmt(r.result.margin_omega)
              << "," << fmt(r.result.min_re_h11) << "," << fmt(r.result.min_re_h22) << "\n";
  }
  return kExitOk;
}

int cmd_metrics(const std::string& path, double settle_band) {
  if (format_for_path(path) != TelemetryFormat::Jsonl) {
    throw ConfigurationError("metrics need full-frame telemetry (.jsonl)");
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigurationError("cannot open '" + path + "'");
  const auto frames = read_jsonl_telemetry(in);
  if (frames.empty()) throw ConfigurationError("'" + path + "' holds no frames");
  print_metrics(std::cout, compute_metrics(frames, settle_band));
  return kExitOk;
}

int cmd_serve(const std::string& bind, std::uint16_t port, double speed, const std::vector<std::string>& configs) {
  stream::ServerOptions options;
  options.bind = bind;
  options.port = port;
  options.speed = speed;
  for (const std::string& path : configs) {
    const ParsedConfig parsed = load_config_file(path);
    options.scenarios[std::string(scenario_name(parsed.config.kind))] = parsed.config;
  }
  stream::StreamServer server(options);
  server.start();
  std::cout << "listening on " << bind << ":" << server.port() << std::endl;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  while (!g_interrupted) std::this_thread::sleep_for(std::chrono::milliseconds(100));
  server.stop();
  return kExitOk;
}

int cmd_config(const std::string& scenario) {
  std::cout << emit_config(default_scenario(scenario_from_name(scenario)));
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Magnetic micromanipulation teleoperation simulator"};
  app.require_subcommand(1);

  std::string config_path, out_path, sweep, metrics_path, bind = "127.0.0.1", scenario;
  std::size_t frames_per_flush = 0;
  bool quiet = false;
  double omega_lo = 0.1, omega_hi = 1e4, settle_band = 1e-5, speed = 1.0;
  int omega_n = 400;
  std::uint16_t port = 0;
  std::vector<std::string> serve_configs;

  auto* run = app.add_subcommand("run", "run a scenario configuration");
  run->add_option("config", config_path, "scenario configuration (JSON)")->required();
  run->add_option("--out", out_path, "telemetry file (.csv or .jsonl)");
  run->add_option("--frames-per-flush", frames_per_flush, "flush the telemetry file every N frames");
  run->add_flag("--quiet", quiet, "do not list defaulted keys");

  auto* stab = app.add_subcommand("analyze-stability", "Llewellyn stability map of the loop");
  stab->add_option("config", config_path, "scenario configuration (JSON)")->required();
  stab->add_option("--sweep", sweep, "key=lo:hi:n");
  stab->add_option("--omega-min", omega_lo, "lowest frequency, rad/s");
  stab->add_option("--omega-max", omega_hi, "highest frequency, rad/s");
  stab->add_option("--omega-points", omega_n, "frequency grid size");

  auto* met = app.add_subcommand("metrics", "metrics of a recorded run");
  met->add_option("telemetry", metrics_path, "telemetry file (.jsonl)")->required();
  met->add_option("--settle-band", settle_band, "task-error band for settling, m");

  auto* serve = app.add_subcommand("serve", "streaming session server");
  serve->add_option("--bind", bind, "listen address");
  serve->add_option("--port", port, "listen port, 0 picks one");
  serve->add_option("--speed", speed, "simulated seconds per wall second, 0 = unpaced");
  serve->add_option("--config", serve_configs, "scenario configuration overriding a default");

  auto* cfg = app.add_subcommand("config", "print the default configuration of a scenario");
  cfg->add_option("scenario", scenario, "bead_push, cell_penetration or bubble_manipulation")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*run) return cmd_run(config_path, out_path, frames_per_flush, quiet);
    if (*stab) return cmd_stability(config_path, sweep, omega_lo, omega_hi, omega_n);
    if (*met) return cmd_metrics(metrics_path, settle_band);
    if (*serve) return cmd_serve(bind, port, speed, serve_configs);
    if (*cfg) return cmd_config(scenario);
  } catch (const ConfigurationError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "runtime error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitOk;
}
