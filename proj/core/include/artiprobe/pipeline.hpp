#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "artiprobe/config.hpp"
#include "artiprobe/ema.hpp"
#include "artiprobe/forward.hpp"
#include "artiprobe/guided_pca.hpp"
#include "artiprobe/optimize.hpp"
#include "artiprobe/phonology.hpp"
#include "artiprobe/probe.hpp"
#include "artiprobe/report.hpp"
#include "artiprobe/splits.hpp"

namespace artiprobe {

std::string_view library_version();

// Runs fn(0..count-1) on up to `jobs` threads. Every index runs even when one
// throws; the exception of the lowest failing index is rethrown.
void parallel_for(std::size_t count, std::size_t jobs, const std::function<void(std::size_t)>& fn);

struct Utterance {
  std::string id;
  FeaturalSegmentation featural;
  std::string featural_hash;  // content hash of the targets, intervals and timings
};

struct SpeakerCorpus {
  std::string speaker;
  std::map<std::string, Utterance> utterances;  // usable utterances by id
  std::vector<std::string> all_ids;             // every id with an alignment, sorted
  std::vector<std::string> rejected;            // dropped by silence trimming
};

struct SpeakerData {
  SpeakerCorpus corpus;
  DataSplits splits;        // usable ids only
  std::string ingest_hash;  // cache key of the articulatory series
  std::map<std::string, ArticulatorySeries> articulatory;  // aligned to the trimmed utterance
};

struct StageTiming {
  double seconds = 0.0;
  std::size_t work_items = 0;
  std::size_t cache_hits = 0;
};

struct GridLogEntry {
  std::string method;
  GridPoint point;
  double dev_score = 0.0;  // NaN when the point failed
  std::vector<double> speaker_dev_scores;
  std::string note;
};

// Provenance of one pipeline invocation.
class RunManifest {
 public:
  void record_input(const std::string& key, const std::string& hash);
  void record_output(const std::string& key, const std::string& hash);
  void record_stage(const std::string& stage, double seconds, std::size_t items, std::size_t hits);
  void record_grid(GridLogEntry entry);
  void warn(const std::string& message);

  std::string config_json;
  std::string to_json() const;
  std::vector<GridLogEntry> grid() const;
  std::vector<std::string> warnings() const;

 private:
  mutable std::mutex mutex_;
  std::map<std::string, std::string> inputs_;
  std::map<std::string, std::string> outputs_;
  std::map<std::string, StageTiming> stages_;
  std::vector<GridLogEntry> grid_;
  std::vector<std::string> warnings_;
};

struct MethodResult {
  InterpMethod method;
  OptimConfig optimization;  // the configuration used for the test scores
  ScoreReport test;
  std::vector<ProbeModel> probes;  // per speaker, config order
};

struct ExperimentResult {
  std::vector<MethodResult> methods;
  std::vector<GridLogEntry> grid;
};

// Orchestrates ingest -> featural segmentation -> synthesis (optionally with
// target optimization and grid search) -> probing -> scoring. Stage outputs
// are cached under <output_dir>/cache keyed by content hashes of their inputs.
class Pipeline {
 public:
  explicit Pipeline(ExperimentConfig cfg);

  const ExperimentConfig& config() const noexcept { return cfg_; }
  const FeatureTable& table() const noexcept { return *table_; }
  RunManifest& manifest() noexcept { return manifest_; }

  // Alignments only: parsed, trimmed and converted to featural segmentations.
  SpeakerCorpus load_corpus(const std::string& speaker);
  // Alignments plus EMA: splits, guided PCA fitted on the train split, and
  // aligned articulatory parameters for every usable utterance.
  SpeakerData ingest(const std::string& speaker);
  std::vector<SpeakerData> ingest_all();

  // Forward synthesis, optimizing targets first when `optim` enables it.
  Trajectory synthesize(const Utterance& utt, InterpMethod method, const OptimConfig& optim);
  OptimizedTargets optimize(const Utterance& utt, InterpMethod method, const OptimConfig& optim);

  // Trains a probe on the train split and scores `eval_ids` (one PCC per parameter).
  struct SpeakerEvaluation {
    ProbeModel probe;
    ParameterScores scores;
  };
  SpeakerEvaluation evaluate_speaker(const SpeakerData& data, std::size_t speaker_index, InterpMethod method,
                                     const OptimConfig& optim, const std::vector<std::string>& eval_ids);

  // Dev-score grid search for one method; logs every point in the manifest.
  GridPoint grid_search(const std::vector<SpeakerData>& speakers, InterpMethod method);

  // Full experiment over every configured method.
  ExperimentResult run(bool with_grid);

  // Writes report.csv, report.txt, grid.csv and manifest.json into output_dir.
  void write_outputs(const ExperimentResult& result);

 private:
  ExperimentConfig cfg_;
  std::shared_ptr<const FeatureTable> table_;
  std::string table_hash_;
  std::filesystem::path cache_root_;
  RunManifest manifest_;
};

// Averages the defined PCCs of one speaker; NaN when none is defined.
double mean_defined(const ParameterScores& scores);

// Curves of selected dimensions of a trajectory as a standalone SVG document.
std::string trajectory_svg(const Trajectory& traj, std::span<const std::string> names, const std::string& title,
                           std::size_t max_dims = 8);

}  // namespace artiprobe
