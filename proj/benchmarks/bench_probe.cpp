#include <benchmark/benchmark.h>

#include "artiprobe/forward.hpp"
#include "artiprobe/probe.hpp"
#include "random_segmentation.hpp"

namespace {

std::vector<artiprobe::ProbePair> pairs(std::size_t count, std::size_t dims, std::uint64_t seed) {
  std::vector<artiprobe::ProbePair> out;
  for (std::size_t u = 0; u < count; ++u) {
    const auto f = bench::random_segmentation(seed + u, 12, dims, 0.0);
    artiprobe::ProbePair p;
    p.utterance_id = std::to_string(u);
    p.features = artiprobe::synthesize(f, artiprobe::InterpMethod::Linear).frames;
    p.targets = p.features.leftCols(6);
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace

// One epoch over 390 utterances, the size of a speaker's training split.
static void ProbeEpoch(benchmark::State& state) {
  const auto train = pairs(390, static_cast<std::size_t>(state.range(0)), 10);
  const auto dev = pairs(20, static_cast<std::size_t>(state.range(0)), 1000);
  artiprobe::ProbeTrainOptions opts;
  opts.max_epochs = 1;
  for (auto _ : state) benchmark::DoNotOptimize(artiprobe::train_probe(train, dev, 0, opts).best_dev_loss);
}
BENCHMARK(ProbeEpoch)->Arg(26)->Arg(73)->Unit(benchmark::kMillisecond);

static void Pearson(benchmark::State& state) {
  Eigen::VectorXd x = Eigen::VectorXd::LinSpaced(state.range(0), 0.0, 1.0);
  Eigen::VectorXd y = x.array().sin();
  for (auto _ : state) benchmark::DoNotOptimize(artiprobe::pearson(x, y));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(Pearson)->RangeMultiplier(8)->Range(512, 1 << 18)->Complexity(benchmark::oN);
