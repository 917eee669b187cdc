#include "artiprobe/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <limits>
#include <set>
#include <thread>

#include <fmt/format.h>
#include <json.hpp>

#include "artiprobe/error.hpp"
#include "artiprobe/filter.hpp"
#include "artiprobe/hash.hpp"
#include "artiprobe/trajectory_io.hpp"
#include "text_util.hpp"

#ifndef ARTIPROBE_VERSION
#define ARTIPROBE_VERSION "0.0.0"
#endif

namespace artiprobe {

using nlohmann::json;

std::string_view library_version() { return ARTIPROBE_VERSION; }

void parallel_for(std::size_t count, std::size_t jobs, const std::function<void(std::size_t)>& fn) {
  std::vector<std::exception_ptr> errors(count);
  auto guarded = [&](std::size_t i) {
    try {
      fn(i);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  };
  const std::size_t workers = std::min(std::max<std::size_t>(jobs, 1), count);
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) guarded(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < count; i = next++) guarded(i);
      });
    }
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

// Must be called from inside a catch block.
[[noreturn]] void rethrow_in_stage(const std::string& stage, const std::string& utterance) {
  try {
    throw;
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    std::throw_with_nested(StageError(stage, utterance, e.what()));
  }
}

std::string hex_double(double v) { return fmt::format("{:a}", v); }

std::string featural_hash(const FeaturalSegmentation& f) {
  Sha256 h;
  h.field("featural-v1").field(f.utterance_id).field(std::to_string(f.dimension));
  for (std::size_t k = 0; k < f.target_count(); ++k) {
    h.field(f.labels[k]).field(hex_double(f.timings[k]));
    h.field(hex_double(f.intervals[k].start)).field(hex_double(f.intervals[k].end));
    for (const auto& v : f.targets[k]) h.field(v.is_specified() ? hex_double(v.value()) : std::string("?"));
  }
  return h.hex();
}

std::string optim_key(const OptimConfig& o) {
  if (!o.enabled()) return "none";
  return fmt::format("t{}:x{}:tl{}:xl{}:l{}:n{}:g{}:s{}:w{}", o.optimize_timing, o.optimize_position,
                     hex_double(o.timing_lr), hex_double(o.position_lr), hex_double(o.lambda), o.max_steps,
                     hex_double(o.min_gap), hex_double(o.stall_tolerance), o.stall_window);
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  // splitmix64 finalizer
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::vector<std::string> list_ids(const std::filesystem::path& dir, std::string_view ext) {
  if (!std::filesystem::is_directory(dir)) throw ValidationError("alignment directory not found: " + dir.string());
  std::vector<std::string> ids;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ext) ids.push_back(entry.path().stem().string());
  }
  std::sort(ids.begin(), ids.end());
  return ids;
}

// Publishes a finished file under its final name so readers never see a
// partial cache entry.
void publish(const std::filesystem::path& tmp, const std::filesystem::path& dest) {
  std::filesystem::create_directories(dest.parent_path());
  std::filesystem::rename(tmp, dest);
}

std::filesystem::path temp_name(const std::filesystem::path& dest) {
  static std::atomic<unsigned long> counter{0};
  return dest.parent_path() /
         fmt::format(".{}.{}.{}.tmp", dest.filename().string(),
                     std::hash<std::thread::id>{}(std::this_thread::get_id()), counter++);
}

json matrix_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json r = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) r.push_back(m(i, j));
    rows.push_back(std::move(r));
  }
  return rows;
}

Eigen::MatrixXd matrix_from(const json& rows) {
  const auto n = static_cast<Eigen::Index>(rows.size());
  const auto m = n == 0 ? Eigen::Index{0} : static_cast<Eigen::Index>(rows[0].size());
  Eigen::MatrixXd out(n, m);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < m; ++j) out(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)].get<double>();
  return out;
}

json evaluation_json(const Pipeline::SpeakerEvaluation& ev) {
  json j;
  j["weight"] = matrix_json(ev.probe.weight);
  j["bias"] = std::vector<double>(ev.probe.bias.data(), ev.probe.bias.data() + ev.probe.bias.size());
  j["epochs_run"] = ev.probe.epochs_run;
  j["best_epoch"] = ev.probe.best_epoch;
  j["best_dev_loss"] = ev.probe.best_dev_loss;
  j["dev_loss_history"] = ev.probe.dev_loss_history;
  json pcc = json::array();
  for (const auto& v : ev.scores.pcc) pcc.push_back(v ? json(*v) : json(nullptr));
  j["pcc"] = pcc;
  j["warnings"] = ev.scores.warnings;
  return j;
}

Pipeline::SpeakerEvaluation evaluation_from(const json& j) {
  Pipeline::SpeakerEvaluation ev;
  ev.probe.weight = matrix_from(j.at("weight"));
  const auto bias = j.at("bias").get<std::vector<double>>();
  ev.probe.bias = Eigen::Map<const Eigen::VectorXd>(bias.data(), static_cast<Eigen::Index>(bias.size()));
  ev.probe.epochs_run = j.at("epochs_run").get<std::size_t>();
  ev.probe.best_epoch = j.at("best_epoch").get<std::size_t>();
  ev.probe.best_dev_loss = j.at("best_dev_loss").get<double>();
  ev.probe.dev_loss_history = j.at("dev_loss_history").get<std::vector<double>>();
  const auto& pcc = j.at("pcc");
  for (std::size_t k = 0; k < ev.scores.pcc.size(); ++k) {
    if (!pcc[k].is_null()) ev.scores.pcc[k] = pcc[k].get<double>();
  }
  ev.scores.warnings = j.at("warnings").get<std::vector<std::string>>();
  return ev;
}

std::string method_label(InterpMethod m, const OptimConfig& o) {
  std::string label(to_string(m));
  if (o.optimize_timing && o.optimize_position) return label + "[t,x]";
  if (o.optimize_timing) return label + "[t]";
  if (o.optimize_position) return label + "[x]";
  return label;
}

}  // namespace

double mean_defined(const ParameterScores& scores) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& v : scores.pcc) {
    if (v) {
      sum += *v;
      ++n;
    }
  }
  return n == 0 ? std::numeric_limits<double>::quiet_NaN() : sum / static_cast<double>(n);
}

// ---------------------------------------------------------------- manifest

void RunManifest::record_input(const std::string& key, const std::string& hash) {
  std::lock_guard lock(mutex_);
  inputs_[key] = hash;
}

void RunManifest::record_output(const std::string& key, const std::string& hash) {
  std::lock_guard lock(mutex_);
  outputs_[key] = hash;
}

void RunManifest::record_stage(const std::string& stage, double seconds, std::size_t items, std::size_t hits) {
  std::lock_guard lock(mutex_);
  auto& s = stages_[stage];
  s.seconds += seconds;
  s.work_items += items;
  s.cache_hits += hits;
}

void RunManifest::record_grid(GridLogEntry entry) {
  std::lock_guard lock(mutex_);
  grid_.push_back(std::move(entry));
}

void RunManifest::warn(const std::string& message) {
  std::lock_guard lock(mutex_);
  warnings_.push_back(message);
}

std::vector<GridLogEntry> RunManifest::grid() const {
  std::lock_guard lock(mutex_);
  return grid_;
}

std::vector<std::string> RunManifest::warnings() const {
  std::lock_guard lock(mutex_);
  return warnings_;
}

std::string RunManifest::to_json() const {
  std::lock_guard lock(mutex_);
  json j;
  j["version"] = library_version();
  j["config"] = config_json.empty() ? json::object() : json::parse(config_json);
  j["inputs"] = inputs_;
  j["outputs"] = outputs_;
  json stages = json::object();
  for (const auto& [name, s] : stages_) {
    stages[name] = {{"seconds", s.seconds}, {"work_items", s.work_items}, {"cache_hits", s.cache_hits}};
  }
  j["stages"] = stages;
  json grid = json::array();
  for (const auto& g : grid_) {
    grid.push_back({{"method", g.method},
                    {"timing_lr", g.point.timing_lr},
                    {"position_lr", g.point.position_lr},
                    {"lambda", g.point.lambda},
                    {"dev_score", std::isnan(g.dev_score) ? json(nullptr) : json(g.dev_score)},
                    {"speaker_dev_scores", g.speaker_dev_scores},
                    {"note", g.note}});
  }
  j["grid_evaluations"] = grid;
  j["warnings"] = warnings_;
  return j.dump(2) + "\n";
}

// ---------------------------------------------------------------- pipeline

Pipeline::Pipeline(ExperimentConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  const auto sources = cfg_.resolved_tables();
  table_ = std::make_shared<const FeatureTable>(load_feature_table(sources, cfg_.feature_set));
  Sha256 h;
  h.field("table-v1").field(cfg_.feature_set.str());
  for (const auto& p : {sources.gp, sources.ap, sources.ap_scale, sources.inventory}) {
    h.field(p.filename().string());
    if (std::filesystem::exists(p)) h.field(sha256_file(p));
  }
  table_hash_ = h.hex();
  cache_root_ = cfg_.output_dir / "cache";
  manifest_.config_json = config_to_json(cfg_);
  manifest_.record_input("feature_table", table_hash_);
}

SpeakerCorpus Pipeline::load_corpus(const std::string& speaker) {
  const auto start = Clock::now();
  SpeakerCorpus corpus;
  corpus.speaker = speaker;
  try {
    corpus.all_ids = list_ids(cfg_.alignment_directory(speaker), alignment_extension(cfg_.alignment_format));
  } catch (...) {
    rethrow_in_stage("ingest", "");
  }
  if (corpus.all_ids.empty()) {
    throw StageError("ingest", "", "no alignments found for speaker " + speaker);
  }
  const auto silence = cfg_.silence();
  const auto options = cfg_.alignment_options();
  for (const auto& id : corpus.all_ids) {
    try {
      auto seg = parse_alignment(cfg_.alignment_path(speaker, id), cfg_.alignment_format, options);
      seg.utterance_id = id;
      const auto trimmed = trim_and_filter(seg, silence);
      if (!trimmed) {
        corpus.rejected.push_back(id);
        manifest_.warn(fmt::format("{}/{}: no non-silence boundary trim possible; utterance dropped", speaker, id));
        continue;
      }
      Utterance u;
      u.id = id;
      u.featural = build_featural(*trimmed, *table_, silence);
      u.featural_hash = featural_hash(u.featural);
      corpus.utterances.emplace(id, std::move(u));
    } catch (...) {
      rethrow_in_stage("ingest", speaker + "/" + id);
    }
  }
  manifest_.record_stage("segmentation", seconds_since(start), corpus.all_ids.size(), 0);
  return corpus;
}

SpeakerData Pipeline::ingest(const std::string& speaker) {
  SpeakerData data;
  data.corpus = load_corpus(speaker);
  const auto start = Clock::now();
  const auto& corpus = data.corpus;

  DataSplits all;
  try {
    all = make_splits(corpus.all_ids, cfg_.splits, cfg_.seed);
  } catch (...) {
    rethrow_in_stage("ingest", speaker);
  }
  auto usable = [&](std::vector<std::string> ids) {
    std::erase_if(ids, [&](const std::string& id) { return !corpus.utterances.count(id); });
    return ids;
  };
  data.splits = {usable(all.train), usable(all.dev), usable(all.test)};
  if (data.splits.train.empty() || data.splits.dev.empty() || data.splits.test.empty()) {
    throw StageError("ingest", speaker, "a split is empty after dropping rejected utterances");
  }

  Sha256 key;
  key.field("ingest-v1").field(speaker).field(std::to_string(static_cast<int>(cfg_.ema_format)));
  key.field(hex_double(cfg_.frame_rate)).field(std::to_string(cfg_.seed));
  key.field(fmt::format("{}/{}/{}", cfg_.splits.train, cfg_.splits.dev, cfg_.splits.test));
  for (const auto& id : corpus.all_ids) {
    key.field(id);
    try {
      key.field(sha256_file(cfg_.alignment_path(speaker, id)));
      if (corpus.utterances.count(id)) {
        key.field(corpus.utterances.at(id).featural_hash);
        key.field(sha256_file(cfg_.ema_path(speaker, id)));
      }
    } catch (...) {
      rethrow_in_stage("ingest", speaker + "/" + id);
    }
  }
  data.ingest_hash = key.hex();
  manifest_.record_input("ingest/" + speaker, data.ingest_hash);

  auto drop = [&](const std::string& id) {
    data.corpus.utterances.erase(id);
    data.corpus.rejected.push_back(id);
    for (auto* part : {&data.splits.train, &data.splits.dev, &data.splits.test}) std::erase(*part, id);
  };

  const auto dir = cache_root_ / "ingest" / data.ingest_hash;
  if (std::filesystem::exists(dir / "complete")) {
    for (const auto& line : detail::read_lines(dir / "dropped.txt")) {
      if (!line.empty()) drop(line);
    }
    for (const auto& [id, u] : corpus.utterances) {
      auto series = read_articulatory_csv(dir / (id + ".csv"));
      series.utterance_id = id;
      data.articulatory.emplace(id, std::move(series));
    }
    manifest_.record_stage("ingest", seconds_since(start), 1, 1);
    return data;
  }

  std::map<std::string, EmaRecord> records;
  std::vector<std::string> dropped;
  for (const auto& [id, u] : corpus.utterances) {
    try {
      EmaRecord rec;
      try {
        rec = load_ema(cfg_.ema_path(speaker, id), cfg_.ema_format);
      } catch (const ExcessiveNanError& e) {
        manifest_.warn(fmt::format("{}/{}: {}; utterance dropped", speaker, id, e.what()));
        dropped.push_back(id);
        continue;
      }
      rec.utterance_id = id;
      if (rec.repaired_samples > 0) {
        manifest_.warn(fmt::format("{}/{}: repaired {} missing EMA samples", speaker, id, rec.repaired_samples));
      }
      if (rec.sample_rate == 500.0) {
        rec = filter_and_downsample(rec);
      } else if (rec.sample_rate != 100.0) {
        throw ValidationError(fmt::format("unsupported EMA sample rate {}", rec.sample_rate));
      }
      records.emplace(id, std::move(rec));
    } catch (...) {
      rethrow_in_stage("ingest", speaker + "/" + id);
    }
  }

  for (const auto& id : dropped) drop(id);
  if (data.splits.train.empty() || data.splits.dev.empty() || data.splits.test.empty()) {
    throw StageError("ingest", speaker, "a split is empty after dropping utterances with missing EMA data");
  }

  GuidedPcaModel pca;
  try {
    std::vector<EmaRecord> training;
    for (const auto& id : data.splits.train) training.push_back(records.at(id));
    pca = fit_guided_pca(training);
  } catch (...) {
    rethrow_in_stage("ingest", speaker);
  }
  for (const auto& [id, u] : corpus.utterances) {
    try {
      data.articulatory.emplace(id, align_frames(project(pca, records.at(id)), u.featural));
    } catch (...) {
      rethrow_in_stage("ingest", speaker + "/" + id);
    }
  }

  const auto tmp = cache_root_ / "ingest" / fmt::format(".{}.tmp", data.ingest_hash);
  std::filesystem::remove_all(tmp);
  std::filesystem::create_directories(tmp);
  for (const auto& [id, series] : data.articulatory) write_articulatory_csv(tmp / (id + ".csv"), series);
  std::string dropped_list;
  for (const auto& id : dropped) dropped_list += id + "\n";
  write_text_file(tmp / "dropped.txt", dropped_list);
  write_text_file(tmp / "complete", "");
  std::error_code ec;
  std::filesystem::rename(tmp, dir, ec);
  if (ec) std::filesystem::remove_all(tmp);  // another writer published the same entry first
  manifest_.record_stage("ingest", seconds_since(start), 1, 0);
  return data;
}

std::vector<SpeakerData> Pipeline::ingest_all() {
  std::vector<SpeakerData> out(cfg_.speakers.size());
  parallel_for(out.size(), cfg_.jobs, [&](std::size_t i) { out[i] = ingest(cfg_.speakers[i]); });
  return out;
}

OptimizedTargets Pipeline::optimize(const Utterance& utt, InterpMethod method, const OptimConfig& optim) {
  try {
    return optimize_targets(utt.featural, method, optim);
  } catch (...) {
    rethrow_in_stage("optimize", utt.id);
  }
}

Trajectory Pipeline::synthesize(const Utterance& utt, InterpMethod method, const OptimConfig& optim) {
  const std::string key = Sha256()
                              .field("synth-v1")
                              .field(utt.featural_hash)
                              .field(to_string(method))
                              .field(hex_double(cfg_.frame_rate))
                              .field(optim_key(optim))
                              .hex();
  const auto path = cache_root_ / "synth" / key.substr(0, 2) / (key + ".atrj");
  if (std::filesystem::exists(path)) return read_trajectory_binary(path);

  Trajectory traj;
  if (optim.enabled()) {
    const auto result = optimize(utt, method, optim);
    try {
      traj = artiprobe::synthesize(state_nodes(result.state), method, utt.featural.end_time(), cfg_.frame_rate);
    } catch (...) {
      rethrow_in_stage("synth", utt.id);
    }
  } else {
    try {
      traj = artiprobe::synthesize(utt.featural, method, cfg_.frame_rate);
    } catch (...) {
      rethrow_in_stage("synth", utt.id);
    }
  }
  std::filesystem::create_directories(path.parent_path());
  const auto tmp = temp_name(path);
  write_trajectory_binary(tmp, traj);
  publish(tmp, path);
  return traj;
}

Pipeline::SpeakerEvaluation Pipeline::evaluate_speaker(const SpeakerData& data, std::size_t speaker_index,
                                                       InterpMethod method, const OptimConfig& optim,
                                                       const std::vector<std::string>& eval_ids) {
  const auto start = Clock::now();
  const std::uint64_t seed = mix_seed(cfg_.seed, speaker_index);
  const auto& corpus = data.corpus;

  Sha256 key;
  key.field("probe-v1").field(data.ingest_hash).field(table_hash_).field(to_string(method));
  key.field(optim_key(optim)).field(std::to_string(seed)).field(hex_double(cfg_.frame_rate));
  for (const auto* part : {&data.splits.train, &data.splits.dev, &eval_ids}) {
    key.field(std::to_string(part->size()));
    for (const auto& id : *part) key.field(id).field(corpus.utterances.at(id).featural_hash);
  }
  const std::string hash = key.hex();
  const auto path = cache_root_ / "probe" / hash.substr(0, 2) / (hash + ".json");
  if (std::filesystem::exists(path)) {
    std::ifstream in(path);
    auto ev = evaluation_from(json::parse(in));
    manifest_.record_stage("probe", seconds_since(start), 1, 1);
    return ev;
  }

  auto pairs = [&](const std::vector<std::string>& ids) {
    std::vector<ProbePair> out;
    out.reserve(ids.size());
    for (const auto& id : ids) {
      const auto& utt = corpus.utterances.at(id);
      const auto traj = synthesize(utt, method, optim);
      try {
        out.push_back(make_pair(id, traj, data.articulatory.at(id)));
      } catch (...) {
        rethrow_in_stage("probe", corpus.speaker + "/" + id);
      }
    }
    return out;
  };
  const auto train = pairs(data.splits.train);
  const auto dev = pairs(data.splits.dev);
  const auto eval = pairs(eval_ids);

  SpeakerEvaluation ev;
  try {
    ev.probe = train_probe(train, dev, seed);
    ev.scores = score(ev.probe, eval);
  } catch (...) {
    rethrow_in_stage("probe", corpus.speaker);
  }
  for (auto& w : ev.scores.warnings) w = corpus.speaker + ": " + w;

  std::filesystem::create_directories(path.parent_path());
  const auto tmp = temp_name(path);
  write_text_file(tmp, evaluation_json(ev).dump() + "\n");
  publish(tmp, path);
  manifest_.record_stage("probe", seconds_since(start), 1, 0);
  return ev;
}

GridPoint Pipeline::grid_search(const std::vector<SpeakerData>& speakers, InterpMethod method) {
  const auto points = grid_points(cfg_.grid, cfg_.optimization);
  if (points.empty()) throw ValidationError("grid search: empty grid");
  const std::size_t ns = speakers.size();
  std::vector<double> scores(points.size() * ns, std::numeric_limits<double>::quiet_NaN());
  std::vector<std::string> notes(points.size() * ns);

  parallel_for(points.size() * ns, cfg_.jobs, [&](std::size_t item) {
    const std::size_t p = item / ns;
    const std::size_t s = item % ns;
    try {
      const auto ev =
          evaluate_speaker(speakers[s], s, method, with_point(cfg_.optimization, points[p]), speakers[s].splits.dev);
      scores[item] = mean_defined(ev.scores);
    } catch (const StageError& e) {
      // A diverging point is a legitimate (losing) grid outcome; anything
      // else aborts the search.
      try {
        std::rethrow_if_nested(e);
      } catch (const DivergenceError& d) {
        notes[item] = fmt::format("{}: {}", speakers[s].corpus.speaker, d.what());
        return;
      } catch (...) {
      }
      throw;
    }
  });

  std::vector<GridResult> results;
  for (std::size_t p = 0; p < points.size(); ++p) {
    GridLogEntry entry;
    entry.method = std::string(to_string(method));
    entry.point = points[p];
    double sum = 0.0;
    bool failed = false;
    for (std::size_t s = 0; s < ns; ++s) {
      const double v = scores[p * ns + s];
      entry.speaker_dev_scores.push_back(v);
      if (std::isnan(v)) failed = true;
      sum += v;
      if (!notes[p * ns + s].empty()) entry.note += (entry.note.empty() ? "" : "; ") + notes[p * ns + s];
    }
    entry.dev_score = failed ? std::numeric_limits<double>::quiet_NaN() : sum / static_cast<double>(ns);
    results.push_back({points[p], entry.dev_score});
    manifest_.record_grid(std::move(entry));
  }
  return results[select_best(results)].point;
}

ExperimentResult Pipeline::run(bool with_grid) {
  const auto speakers = ingest_all();
  ExperimentResult result;
  std::vector<std::string> param_names(kArticulatoryParameters.begin(), kArticulatoryParameters.end());

  for (const auto method : cfg_.methods) {
    MethodResult mr;
    mr.method = method;
    mr.optimization = cfg_.optimization;
    if (cfg_.optimization.enabled() && with_grid && cfg_.grid_search) {
      mr.optimization = with_point(cfg_.optimization, grid_search(speakers, method));
    }
    std::vector<SpeakerEvaluation> evals(speakers.size());
    parallel_for(speakers.size(), cfg_.jobs, [&](std::size_t s) {
      evals[s] = evaluate_speaker(speakers[s], s, method, mr.optimization, speakers[s].splits.test);
    });
    std::vector<std::vector<std::optional<double>>> matrix;
    for (auto& ev : evals) {
      matrix.emplace_back(ev.scores.pcc.begin(), ev.scores.pcc.end());
      for (const auto& w : ev.scores.warnings) manifest_.warn(w);
      mr.probes.push_back(std::move(ev.probe));
    }
    try {
      mr.test = aggregate(cfg_.speakers, param_names, std::move(matrix));
    } catch (...) {
      rethrow_in_stage("score", "");
    }
    result.methods.push_back(std::move(mr));
  }
  result.grid = manifest_.grid();
  return result;
}

void Pipeline::write_outputs(const ExperimentResult& result) {
  std::vector<MethodScore> rows;
  for (const auto& m : result.methods) rows.push_back({method_label(m.method, m.optimization), m.test});

  const std::string csv = score_csv(rows);
  std::string text = "Articulatory score\n" + overall_table(rows) + "\nPer speaker\n" + per_speaker_table(rows) +
                     "\nPer articulatory parameter\n" + per_parameter_table(rows);
  std::string grid = "method,timing_lr,position_lr,lambda,dev_score";
  for (const auto& s : cfg_.speakers) grid += "," + s;
  grid += "\n";
  for (const auto& g : result.grid) {
    grid += fmt::format("{},{:.17g},{:.17g},{:.17g},{}", g.method, g.point.timing_lr, g.point.position_lr,
                        g.point.lambda, std::isnan(g.dev_score) ? std::string("NA") : fmt::format("{:.17g}", g.dev_score));
    for (const double v : g.speaker_dev_scores) grid += std::isnan(v) ? std::string(",NA") : fmt::format(",{:.17g}", v);
    grid += "\n";
  }
  json selected = json::array();
  for (const auto& m : result.methods) {
    selected.push_back({{"method", to_string(m.method)},
                        {"timing_lr", m.optimization.timing_lr},
                        {"position_lr", m.optimization.position_lr},
                        {"lambda", m.optimization.lambda},
                        {"optimize_timing", m.optimization.optimize_timing},
                        {"optimize_position", m.optimization.optimize_position}});
  }

  const auto& out = cfg_.output_dir;
  write_text_file(out / "report.csv", csv);
  write_text_file(out / "report.txt", text);
  write_text_file(out / "grid.csv", grid);
  write_text_file(out / "selected.json", selected.dump(2) + "\n");
  manifest_.record_output("report.csv", sha256_hex(csv));
  manifest_.record_output("report.txt", sha256_hex(text));
  manifest_.record_output("grid.csv", sha256_hex(grid));
  write_text_file(out / "manifest.json", manifest_.to_json());
}

// ---------------------------------------------------------------- plotting

std::string trajectory_svg(const Trajectory& traj, std::span<const std::string> names, const std::string& title,
                           std::size_t max_dims) {
  const auto dims = std::min<std::size_t>(static_cast<std::size_t>(traj.dimension()), max_dims);
  constexpr double width = 800.0, panel = 90.0, left = 110.0, top = 30.0;
  const double height = top + panel * static_cast<double>(dims) + 20.0;
  const Eigen::Index n = traj.frame_count();
  std::string svg = fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" font-family=\"sans-serif\" "
      "font-size=\"11\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      "<text x=\"{}\" y=\"18\" font-size=\"13\">{}</text>\n",
      width, height, left, title);
  for (std::size_t d = 0; d < dims; ++d) {
    const auto col = traj.frames.col(static_cast<Eigen::Index>(d));
    double lo = n ? col.minCoeff() : 0.0;
    double hi = n ? col.maxCoeff() : 1.0;
    if (hi - lo < 1e-12) {
      lo -= 0.5;
      hi += 0.5;
    }
    const double y0 = top + panel * static_cast<double>(d);
    const std::string name = d < names.size() ? names[d] : fmt::format("f{}", d);
    svg += fmt::format("<text x=\"4\" y=\"{:.1f}\">{}</text>\n", y0 + panel / 2.0, name);
    svg += fmt::format("<rect x=\"{}\" y=\"{:.1f}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#ccc\"/>\n",
                       left, y0 + 5.0, width - left - 10.0, panel - 10.0);
    svg += "<polyline fill=\"none\" stroke=\"#1f5fa8\" stroke-width=\"1.2\" points=\"";
    for (Eigen::Index k = 0; k < n; ++k) {
      const double x = left + (width - left - 10.0) * (n > 1 ? static_cast<double>(k) / static_cast<double>(n - 1) : 0.0);
      const double y = y0 + 5.0 + (panel - 10.0) * (1.0 - (col(k) - lo) / (hi - lo));
      svg += fmt::format("{:.1f},{:.1f} ", x, y);
    }
    svg += "\"/>\n";
  }
  svg += "</svg>\n";
  return svg;
}

}  // namespace artiprobe
