#include <benchmark/benchmark.h>

#include <cmath>
#include <random>

#include "edecoh/analysis.hpp"
#include "edecoh/coherence.hpp"
#include "edecoh/models.hpp"
#include "edecoh/pipeline.hpp"
#include "edecoh/trajectory.hpp"

using namespace edecoh;

namespace {

void BM_Expint(benchmark::State& state) {
  double eta = 0.01;
  for (auto _ : state) {
    benchmark::DoNotOptimize(expint(eta));
    eta = eta > 10.0 ? 0.01 : eta * 1.01;
  }
}
BENCHMARK(BM_Expint);

void BM_PropagateEnsemble(benchmark::State& state) {
  const BeamSpec beam;
  GeometrySpec geometry;
  geometry.surface_height = 0.0;
  const auto states =
      sample_initial_conditions(beam, geometry, static_cast<std::size_t>(state.range(0)), 1);
  for (auto _ : state) {
    benchmark::DoNotOptimize(build_ensemble(states, geometry, beam, true, {}, 1));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_PropagateEnsemble)->Arg(1000)->Unit(benchmark::kMillisecond);

void BM_FarField(benchmark::State& state) {
  const BeamSpec beam;
  const GratingSpec grating;
  const auto grid = far_field_grid(200e-9, grating, FarFieldNumerics{});
  const auto psi = grating_transmit(
      pure_state_wavefunction(0.0, 200e-9, grid.step, grid.points), grating);
  for (auto _ : state) {
    benchmark::DoNotOptimize(far_field(psi, 0.24, beam.de_broglie_wavelength()));
  }
}
BENCHMARK(BM_FarField)->Unit(benchmark::kMicrosecond);

void BM_IncoherentPattern(benchmark::State& state) {
  const BeamSpec beam;
  const auto rho = initial_density_matrix(beam);
  const auto set = decompose(rho, static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        incoherent_pattern(set, GratingSpec{}, beam.de_broglie_wavelength()));
  }
}
BENCHMARK(BM_IncoherentPattern)->Arg(98)->Unit(benchmark::kMillisecond);

void BM_FitLineout(benchmark::State& state) {
  FitParams p;
  p.amplitude = 1000.0;
  p.spacing = 72e-6;
  p.alpha = 0.45 * M_PI / p.spacing;
  p.mixture = 0.6;
  p.width1 = 5e-6;
  p.width2 = 9e-6;
  p.background = 0.0;
  p.background_width = 150e-6;
  std::mt19937_64 rng(3);
  std::normal_distribution<double> gauss(0.0, 10.0);
  LineOut line;
  for (double x = -324e-6; x <= 324e-6; x += 0.5e-6) {
    line.x.push_back(x);
    line.counts.push_back(std::max(0.0, lineout_model(p, x) + gauss(rng)));
  }
  for (auto _ : state) benchmark::DoNotOptimize(fit_lineout(line));
}
BENCHMARK(BM_FitLineout)->Unit(benchmark::kMillisecond);

void BM_PatternForHeight(benchmark::State& state) {
  auto config = preset_config("silicon");
  config.numerics.trajectories = 4000;
  const auto prepared = prepare_ensemble(config);
  for (auto _ : state) {
    benchmark::DoNotOptimize(pattern_for_height(2e-6, 4.8e-6, prepared.ensemble, ModelId::Zurek,
                                                config.material, config.beam, config.grating));
  }
}
BENCHMARK(BM_PatternForHeight)->Unit(benchmark::kMillisecond)->Iterations(3);

}  // namespace
BENCHMARK_MAIN();
