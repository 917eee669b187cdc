#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "artiprobe/config.hpp"
#include "artiprobe/optimize.hpp"

namespace artiprobe {

struct DataSplits {
  std::vector<std::string> train;  // sorted
  std::vector<std::string> dev;    // sorted
  std::vector<std::string> test;   // sorted
};

// Test is the last `test` ids in sorted order; dev is drawn uniformly by
// `seed` from the remaining `train` ids and removed from them. Throws
// ValidationError when the id count differs from sizes.total() or ids repeat.
DataSplits make_splits(std::vector<std::string> ids, const SplitSizes& sizes, std::uint64_t seed);

struct GridPoint {
  double timing_lr = 0.0;
  double position_lr = 0.0;
  double lambda = 0.0;

  friend bool operator==(const GridPoint&, const GridPoint&) = default;
};

// Cartesian product restricted to the axes the base config frees: without
// timing optimization the timing axis collapses to base.timing_lr; without
// position optimization the position and lambda axes collapse to the base
// values (lambda only weighs position misses).
std::vector<GridPoint> grid_points(const GridDefinition& grid, const OptimConfig& base);

OptimConfig with_point(const OptimConfig& base, const GridPoint& point);

struct GridResult {
  GridPoint point;
  double dev_score = 0.0;
};

// Index of the highest dev score; ties go to the smaller lambda, then the
// smaller timing rate, then the smaller position rate. NaN scores lose.
// Throws ValidationError on an empty result list.
std::size_t select_best(std::span<const GridResult> results);

}  // namespace artiprobe
