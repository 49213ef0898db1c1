#include <benchmark/benchmark.h>

#include <cmath>

#include "microtele/magnetics.hpp"
#include "microtele/scenarios.hpp"
#include "microtele/slave_dynamics.hpp"
#include "microtele/teleop.hpp"

namespace {

using namespace microtele;

void BM_SolveCurrents(benchmark::State& state) {
  const CoilArray coils = CoilArray::orthogonal_four();
  const MagneticCluster cluster{Sphere{50e-6}, shape_volume(Sphere{50e-6}), SaturatedMagnetization{4e4}};
  const Vec3 p(1e-4, 2e-5, 0.0);
  const Vec3 force(2e-9, -1e-9, 0.0);
  const Vec3 hold(5e-3, 0.0, 0.0);
  for (auto _ : state) benchmark::DoNotOptimize(solve_currents(coils, p, force, cluster, hold));
}
BENCHMARK(BM_SolveCurrents);

void BM_StepWorld(benchmark::State& state) {
  const ScenarioConfig cfg = default_scenario(ScenarioKind::BeadPush);
  World world;
  world.fluid = cfg.teleop.fluid;
  world.planar = cfg.teleop.planar;
  world.hydrodynamic_coupling = cfg.teleop.hydrodynamic_coupling;
  WorldBody slave;
  slave.body = cfg.teleop.slave;
  slave.state = cfg.teleop.slave_initial;
  slave.actuation_force = Vec3(1e-9, 0.0, 0.0);
  world.bodies.push_back(slave);
  for (const WorldBody& o : cfg.teleop.objects) world.bodies.push_back(o);
  world.pairs = cfg.teleop.pairs;
  const auto mode = state.range(0) == 0 ? IntegrationMode::QuasiStatic : IntegrationMode::SecondOrder;
  for (auto _ : state) {
    World w = world;
    benchmark::DoNotOptimize(step_world(w, cfg.teleop.dt, mode));
  }
}
BENCHMARK(BM_StepWorld)->Arg(0)->Arg(1);

void BM_TeleopStep(benchmark::State& state) {
  const ScenarioConfig cfg = default_scenario(ScenarioKind::BeadPush);
  TeleopSession session(cfg.teleop);
  double t = 0.0;
  for (auto _ : state) {
    OperatorCommand cmd = scripted_operator(cfg.script, std::fmod(t, 5.0));
    benchmark::DoNotOptimize(session.step(cmd));
    t += cfg.teleop.dt;
  }
}
BENCHMARK(BM_TeleopStep);

void BM_ScenarioRun(benchmark::State& state) {
  const auto kind = static_cast<ScenarioKind>(state.range(0));
  const ScenarioConfig cfg = default_scenario(kind);
  for (auto _ : state) benchmark::DoNotOptimize(run_scenario(cfg).metrics);
  state.SetLabel(std::string(scenario_name(kind)));
}
BENCHMARK(BM_ScenarioRun)->Arg(0)->Arg(2)->Unit(benchmark::kMillisecond)->Iterations(1);

}  // namespace

BENCHMARK_MAIN();
