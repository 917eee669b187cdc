#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "artiprobe/alignment.hpp"
#include "artiprobe/ema.hpp"
#include "artiprobe/forward.hpp"
#include "artiprobe/optimize.hpp"
#include "artiprobe/phonology.hpp"

namespace artiprobe {

struct SplitSizes {
  std::size_t train = 410;  // includes the dev draw
  std::size_t dev = 20;
  std::size_t test = 50;

  std::size_t total() const noexcept { return train + test; }
};

struct GridDefinition {
  std::vector<double> timing_lrs;
  std::vector<double> position_lrs;
  std::vector<double> lambdas;

  static GridDefinition replication();
  friend bool operator==(const GridDefinition&, const GridDefinition&) = default;
};

// Experiment description read from a JSON file. Relative paths resolve
// against the dataset root; `output_dir` resolves against the working
// directory. Directory templates may contain `{speaker}`.
struct ExperimentConfig {
  std::filesystem::path dataset_root;
  std::vector<std::string> speakers;
  std::string alignment_dir = "{speaker}";
  AlignmentFormat alignment_format = AlignmentFormat::Lab;
  std::string ema_dir = "{speaker}";
  EmaFormat ema_format = EmaFormat::EstTrack;
  FeatureSetId feature_set = FeatureSetId::parse("gp_unknown+phoneme");
  FeatureTableSources tables;  // empty entries fall back to the bundled tables
  std::vector<InterpMethod> methods = {InterpMethod::Linear};
  OptimConfig optimization;
  bool grid_search = true;  // only consulted when optimization is enabled
  GridDefinition grid = GridDefinition::replication();
  double frame_rate = 100.0;
  SplitSizes splits;
  std::uint64_t seed = 0;
  std::filesystem::path output_dir = "artiprobe-out";
  std::size_t jobs = 1;
  std::vector<std::string> silence_labels = {"sil", "sp", "spn", ""};
  std::string textgrid_tier;
  bool normalize_labels = true;

  void validate() const;

  std::filesystem::path resolve(const std::filesystem::path& p) const;
  std::filesystem::path alignment_path(std::string_view speaker, std::string_view utterance) const;
  std::filesystem::path ema_path(std::string_view speaker, std::string_view utterance) const;
  std::filesystem::path alignment_directory(std::string_view speaker) const;
  std::filesystem::path ema_directory(std::string_view speaker) const;
  FeatureTableSources resolved_tables() const;
  SilenceSet silence() const;
  AlignmentOptions alignment_options() const;
};

ExperimentConfig parse_config(std::string_view json_text, const std::filesystem::path& base_dir = {});
ExperimentConfig load_config(const std::filesystem::path& path);
// Canonical JSON (sorted keys) of the resolved configuration.
std::string config_to_json(const ExperimentConfig& cfg);

// Directory holding the bundled phonological tables: $ARTIPROBE_DATA_DIR,
// then the installed share directory, then the source tree.
std::filesystem::path default_data_dir();

std::string_view alignment_extension(AlignmentFormat f);
std::string_view ema_extension(EmaFormat f);

}  // namespace artiprobe
