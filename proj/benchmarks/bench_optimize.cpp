#include <benchmark/benchmark.h>

#include "artiprobe/optimize.hpp"
#include "random_segmentation.hpp"

using artiprobe::InterpMethod;

static void ObjectiveWithGradient(benchmark::State& state, InterpMethod method) {
  const auto f = bench::random_segmentation(2, static_cast<std::size_t>(state.range(0)), 26);
  const auto s = artiprobe::initial_state(f);
  artiprobe::ObjectiveGradient grad;
  for (auto _ : state) {
    auto terms = artiprobe::objective(s, f, method, 1e3, &grad);
    benchmark::DoNotOptimize(terms.total);
  }
  state.SetComplexityN(state.range(0));
}
BENCHMARK_CAPTURE(ObjectiveWithGradient, cubic_hermite, InterpMethod::CubicHermite)->RangeMultiplier(2)->Range(8, 64);
BENCHMARK_CAPTURE(ObjectiveWithGradient, natural_cubic, InterpMethod::NaturalCubic)->RangeMultiplier(2)->Range(8, 64);

static void OptimizeTargets(benchmark::State& state) {
  const auto f = bench::random_segmentation(3, 30, 26);
  artiprobe::OptimConfig cfg;
  cfg.optimize_timing = cfg.optimize_position = true;
  cfg.timing_lr = 1e-5;
  cfg.position_lr = 1e-2;
  cfg.lambda = 1e4;
  cfg.max_steps = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(artiprobe::optimize_targets(f, InterpMethod::NaturalCubic, cfg).objective);
}
BENCHMARK(OptimizeTargets)->Arg(20)->Arg(200)->Unit(benchmark::kMillisecond);
