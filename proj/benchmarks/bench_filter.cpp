#include <benchmark/benchmark.h>

#include <cmath>

#include "artiprobe/filter.hpp"

// Five seconds of 12-channel EMA at 500 Hz per iteration.
static void FilterAndDownsample(benchmark::State& state) {
  artiprobe::EmaRecord rec;
  rec.sample_rate = 500.0;
  rec.channels.resize(2500, 12);
  for (Eigen::Index i = 0; i < rec.channels.rows(); ++i)
    for (Eigen::Index c = 0; c < 12; ++c) rec.channels(i, c) = std::sin(0.01 * static_cast<double>(i * (c + 1)));
  for (auto _ : state) benchmark::DoNotOptimize(artiprobe::filter_and_downsample(rec).channels.data());
}
BENCHMARK(FilterAndDownsample)->Unit(benchmark::kMicrosecond);
