#include "artiprobe/splits.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <fmt/format.h>

#include "artiprobe/error.hpp"

namespace artiprobe {

DataSplits make_splits(std::vector<std::string> ids, const SplitSizes& sizes, std::uint64_t seed) {
  if (ids.size() != sizes.total()) {
    throw ValidationError(
        fmt::format("split sizes {}+{} need {} utterances, got {}", sizes.train, sizes.test, sizes.total(), ids.size()));
  }
  if (sizes.dev > sizes.train) throw ValidationError("dev split larger than train split");
  std::sort(ids.begin(), ids.end());
  if (std::adjacent_find(ids.begin(), ids.end()) != ids.end()) throw ValidationError("duplicate utterance id");

  DataSplits s;
  s.test.assign(ids.end() - static_cast<std::ptrdiff_t>(sizes.test), ids.end());
  std::vector<std::string> pool(ids.begin(), ids.end() - static_cast<std::ptrdiff_t>(sizes.test));

  // Partial Fisher-Yates: the first `dev` slots become a uniform sample.
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < sizes.dev; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
    std::swap(pool[i], pool[pick(rng)]);
  }
  s.dev.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(sizes.dev));
  s.train.assign(pool.begin() + static_cast<std::ptrdiff_t>(sizes.dev), pool.end());
  std::sort(s.dev.begin(), s.dev.end());
  std::sort(s.train.begin(), s.train.end());
  return s;
}

std::vector<GridPoint> grid_points(const GridDefinition& grid, const OptimConfig& base) {
  const std::vector<double> timing = base.optimize_timing ? grid.timing_lrs : std::vector<double>{base.timing_lr};
  const std::vector<double> position = base.optimize_position ? grid.position_lrs : std::vector<double>{base.position_lr};
  const std::vector<double> lambdas = base.optimize_position ? grid.lambdas : std::vector<double>{base.lambda};
  std::vector<GridPoint> out;
  for (const double t : timing) {
    for (const double p : position) {
      for (const double l : lambdas) out.push_back({t, p, l});
    }
  }
  return out;
}

OptimConfig with_point(const OptimConfig& base, const GridPoint& point) {
  OptimConfig c = base;
  c.timing_lr = point.timing_lr;
  c.position_lr = point.position_lr;
  c.lambda = point.lambda;
  return c;
}

std::size_t select_best(std::span<const GridResult> results) {
  if (results.empty()) throw ValidationError("grid search: empty grid");
  auto better = [](const GridResult& a, const GridResult& b) {
    const bool an = std::isnan(a.dev_score);
    const bool bn = std::isnan(b.dev_score);
    if (an != bn) return bn;
    if (!an && a.dev_score != b.dev_score) return a.dev_score > b.dev_score;
    if (a.point.lambda != b.point.lambda) return a.point.lambda < b.point.lambda;
    if (a.point.timing_lr != b.point.timing_lr) return a.point.timing_lr < b.point.timing_lr;
    return a.point.position_lr < b.point.position_lr;
  };
  std::size_t best = 0;
  for (std::size_t i = 1; i < results.size(); ++i) {
    if (better(results[i], results[best])) best = i;
  }
  return best;
}

}  // namespace artiprobe
