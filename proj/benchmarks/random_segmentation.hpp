#pragma once

#include <random>

#include "artiprobe/alignment.hpp"

namespace bench {

inline artiprobe::FeaturalSegmentation random_segmentation(std::uint64_t seed, std::size_t phones, std::size_t dims,
                                                           double unknown = 0.2) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dur(0.03, 0.3);
  std::normal_distribution<double> value(0.0, 1.0);
  std::bernoulli_distribution unk(unknown);
  std::vector<artiprobe::FeatureVector> rows;
  std::vector<artiprobe::Interval> intervals;
  double t = 0.0;
  for (std::size_t i = 0; i < phones; ++i) {
    const double e = t + dur(rng);
    intervals.push_back({t, e});
    t = e;
    artiprobe::FeatureVector row;
    for (std::size_t j = 0; j < dims; ++j)
      row.push_back(unk(rng) ? artiprobe::FeatureValue::unknown() : artiprobe::FeatureValue::specified(value(rng)));
    rows.push_back(std::move(row));
  }
  return artiprobe::make_featural("bench", std::move(rows), std::move(intervals));
}

}  // namespace bench
