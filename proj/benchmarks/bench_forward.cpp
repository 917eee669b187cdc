#include <benchmark/benchmark.h>

#include "artiprobe/forward.hpp"
#include "random_segmentation.hpp"

using artiprobe::InterpMethod;

static void Synthesize(benchmark::State& state, InterpMethod method) {
  const auto f = bench::random_segmentation(1, static_cast<std::size_t>(state.range(0)), 73, 0.0);
  for (auto _ : state) {
    auto traj = artiprobe::synthesize(f, method);
    benchmark::DoNotOptimize(traj.frames.data());
  }
  state.SetComplexityN(state.range(0));
}
BENCHMARK_CAPTURE(Synthesize, piecewise_constant, InterpMethod::PiecewiseConstant)->RangeMultiplier(2)->Range(8, 64);
BENCHMARK_CAPTURE(Synthesize, linear, InterpMethod::Linear)->RangeMultiplier(2)->Range(8, 64);
BENCHMARK_CAPTURE(Synthesize, cubic_hermite, InterpMethod::CubicHermite)->RangeMultiplier(2)->Range(8, 64);
BENCHMARK_CAPTURE(Synthesize, natural_cubic, InterpMethod::NaturalCubic)->RangeMultiplier(2)->Range(8, 64);

static void NaturalSplineMoments(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::vector<double> t(n), y(n);
  for (std::size_t i = 0; i < n; ++i) {
    t[i] = 0.1 * static_cast<double>(i);
    y[i] = (i % 3) - 1.0;
  }
  for (auto _ : state) benchmark::DoNotOptimize(artiprobe::natural_spline_moments(t, y));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(NaturalSplineMoments)->RangeMultiplier(4)->Range(16, 4096)->Complexity(benchmark::oN);
