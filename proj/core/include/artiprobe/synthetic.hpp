#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace artiprobe {

struct SyntheticOptions {
  std::size_t speakers = 2;
  std::size_t utterances = 40;  // per speaker
  std::size_t dimension = 8;    // feature-table width
  std::uint64_t seed = 0;
  double noise = 0.0;             // std of Gaussian noise added to the articulatory parameters
  double unknown_fraction = 0.0;  // probability that a table entry is unspecified
  double ema_rate = 100.0;        // 100 (exact) or 500 (goes through the low-pass filter)
  double sp_probability = 0.1;    // chance of a short pause between phones
};

// Known generator of one speaker: parameters = A f + b (+ noise), where f is
// the linear interpolant of the featural targets, and EMA channels =
// B parameters + c.
struct SyntheticSpeaker {
  std::string name;
  Eigen::MatrixXd a;  // 6 x d
  Eigen::VectorXd b;  // 6
  Eigen::MatrixXd mix;     // 12 x 6
  Eigen::VectorXd offset;  // 12
};

struct SyntheticDataset {
  std::filesystem::path root;
  std::filesystem::path config;  // ready-to-run experiment config
  std::vector<SyntheticSpeaker> speakers;
  std::vector<std::string> utterances;  // ids shared across speakers
};

// Writes `root`/features.tsv, `root`/<speaker>/<id>.lab and .ema (EST track),
// ground_truth.json and config.json. Output is a pure function of the options.
SyntheticDataset generate_synthetic(const std::filesystem::path& root, const SyntheticOptions& options);

}  // namespace artiprobe
