#include "artiprobe/config.hpp"

#include <cstdlib>
#include <set>

#include <fmt/format.h>
#include <json.hpp>

#include "artiprobe/error.hpp"
#include "text_util.hpp"

namespace artiprobe {

using nlohmann::json;

GridDefinition GridDefinition::replication() {
  return {{1e-6, 5e-6, 1e-5, 5e-5, 1e-4}, {1e-3, 1e-2, 1e-1}, {0.0, 1e3, 1e4, 1e5, 1e6, 1e7}};
}

std::string_view alignment_extension(AlignmentFormat f) { return f == AlignmentFormat::Lab ? ".lab" : ".TextGrid"; }
std::string_view ema_extension(EmaFormat f) { return f == EmaFormat::EstTrack ? ".ema" : ".csv"; }

std::filesystem::path default_data_dir() {
  if (const char* env = std::getenv("ARTIPROBE_DATA_DIR"); env != nullptr && *env != '\0') return env;
#ifdef ARTIPROBE_INSTALL_DATA_DIR
  if (std::filesystem::exists(std::filesystem::path(ARTIPROBE_INSTALL_DATA_DIR) / "phonemes.txt")) {
    return ARTIPROBE_INSTALL_DATA_DIR;
  }
#endif
#ifdef ARTIPROBE_SOURCE_DATA_DIR
  return ARTIPROBE_SOURCE_DATA_DIR;
#else
  return "data";
#endif
}

namespace {

std::string expand(std::string_view tmpl, std::string_view speaker) {
  std::string out(tmpl);
  const std::string key = "{speaker}";
  for (auto pos = out.find(key); pos != std::string::npos; pos = out.find(key, pos + speaker.size())) {
    out.replace(pos, key.size(), speaker);
  }
  return out;
}

template <typename T>
T get_as(const json& j, std::string_view key) {
  try {
    return j.get<T>();
  } catch (const json::exception& e) {
    throw ValidationError(fmt::format("config key '{}': {}", key, e.what()));
  }
}

void reject_unknown(const json& obj, std::string_view where, const std::set<std::string>& allowed) {
  if (!obj.is_object()) throw ValidationError(fmt::format("config: '{}' must be an object", where));
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (!allowed.count(it.key())) throw ValidationError(fmt::format("config: unknown key '{}' in {}", it.key(), where));
  }
}

std::string_view ema_format_name(EmaFormat f) { return f == EmaFormat::EstTrack ? "est" : "csv"; }
std::string_view alignment_format_name(AlignmentFormat f) { return f == AlignmentFormat::Lab ? "lab" : "textgrid"; }

}  // namespace

void ExperimentConfig::validate() const {
  if (speakers.empty()) throw ValidationError("config: no speakers");
  if (std::set<std::string>(speakers.begin(), speakers.end()).size() != speakers.size()) {
    throw ValidationError("config: duplicate speaker");
  }
  if (methods.empty()) throw ValidationError("config: no interpolation methods");
  if (!(frame_rate > 0.0)) throw ValidationError("config: frame_rate must be positive");
  if (splits.dev == 0 || splits.test == 0 || splits.dev >= splits.train) {
    throw ValidationError("config: splits need test > 0 and 0 < dev < train");
  }
  if (jobs == 0) throw ValidationError("config: jobs must be at least 1");
  optimization.validate();
  if (optimization.enabled()) {
    for (const auto m : methods) {
      if (!is_cubic(m)) {
        throw ValidationError(fmt::format("config: target optimization needs a cubic method, got {}", to_string(m)));
      }
    }
    if (grid_search && (grid.timing_lrs.empty() || grid.position_lrs.empty() || grid.lambdas.empty())) {
      throw ValidationError("config: empty grid");
    }
  }
}

std::filesystem::path ExperimentConfig::resolve(const std::filesystem::path& p) const {
  return p.is_absolute() ? p : dataset_root / p;
}

std::filesystem::path ExperimentConfig::alignment_directory(std::string_view speaker) const {
  return resolve(expand(alignment_dir, speaker));
}

std::filesystem::path ExperimentConfig::ema_directory(std::string_view speaker) const {
  return resolve(expand(ema_dir, speaker));
}

std::filesystem::path ExperimentConfig::alignment_path(std::string_view speaker, std::string_view utterance) const {
  return alignment_directory(speaker) / (std::string(utterance) + std::string(alignment_extension(alignment_format)));
}

std::filesystem::path ExperimentConfig::ema_path(std::string_view speaker, std::string_view utterance) const {
  return ema_directory(speaker) / (std::string(utterance) + std::string(ema_extension(ema_format)));
}

FeatureTableSources ExperimentConfig::resolved_tables() const {
  const auto data = default_data_dir();
  auto pick = [&](const std::filesystem::path& p, const char* fallback) {
    return p.empty() ? data / fallback : resolve(p);
  };
  return {pick(tables.gp, "gp_features.tsv"), pick(tables.ap, "ap_features.tsv"),
          pick(tables.ap_scale, "ap_scale.tsv"), pick(tables.inventory, "phonemes.txt")};
}

SilenceSet ExperimentConfig::silence() const {
  std::set<std::string, std::less<>> s;
  for (const auto& l : silence_labels) s.insert(normalize_labels ? normalize_label(l) : l);
  return SilenceSet(std::move(s));
}

AlignmentOptions ExperimentConfig::alignment_options() const {
  AlignmentOptions o;
  o.tier = textgrid_tier;
  o.normalize_labels = normalize_labels;
  return o;
}

ExperimentConfig parse_config(std::string_view json_text, const std::filesystem::path& base_dir) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ValidationError(fmt::format("config: invalid JSON: {}", e.what()));
  }
  reject_unknown(j, "config",
                 {"dataset_root", "speakers", "alignment_dir", "alignment_format", "ema_dir", "ema_format",
                  "feature_set", "tables", "methods", "optimization", "grid_search", "grid", "frame_rate", "splits",
                  "seed", "output_dir", "jobs", "silence_labels", "textgrid_tier", "normalize_labels"});

  ExperimentConfig c;
  auto path_of = [&](const json& v, std::string_view key) {
    std::filesystem::path p = get_as<std::string>(v, key);
    return p.is_absolute() || base_dir.empty() ? p : base_dir / p;
  };
  if (!j.contains("dataset_root")) throw ValidationError("config: missing dataset_root");
  c.dataset_root = path_of(j["dataset_root"], "dataset_root");
  if (j.contains("speakers")) c.speakers = get_as<std::vector<std::string>>(j["speakers"], "speakers");
  if (j.contains("alignment_dir")) c.alignment_dir = get_as<std::string>(j["alignment_dir"], "alignment_dir");
  if (j.contains("alignment_format")) {
    c.alignment_format = parse_alignment_format(get_as<std::string>(j["alignment_format"], "alignment_format"));
  }
  if (j.contains("ema_dir")) c.ema_dir = get_as<std::string>(j["ema_dir"], "ema_dir");
  if (j.contains("ema_format")) c.ema_format = parse_ema_format(get_as<std::string>(j["ema_format"], "ema_format"));
  if (j.contains("feature_set")) c.feature_set = FeatureSetId::parse(get_as<std::string>(j["feature_set"], "feature_set"));
  if (j.contains("tables")) {
    const auto& t = j["tables"];
    reject_unknown(t, "tables", {"gp", "ap", "ap_scale", "inventory"});
    if (t.contains("gp")) c.tables.gp = get_as<std::string>(t["gp"], "tables.gp");
    if (t.contains("ap")) c.tables.ap = get_as<std::string>(t["ap"], "tables.ap");
    if (t.contains("ap_scale")) c.tables.ap_scale = get_as<std::string>(t["ap_scale"], "tables.ap_scale");
    if (t.contains("inventory")) c.tables.inventory = get_as<std::string>(t["inventory"], "tables.inventory");
  }
  if (j.contains("methods")) {
    c.methods.clear();
    for (const auto& m : get_as<std::vector<std::string>>(j["methods"], "methods")) c.methods.push_back(parse_interp_method(m));
  }
  if (j.contains("optimization")) {
    const auto& o = j["optimization"];
    reject_unknown(o, "optimization",
                   {"timing", "position", "max_steps", "min_gap", "timing_lr", "position_lr", "lambda"});
    auto& oc = c.optimization;
    if (o.contains("timing")) oc.optimize_timing = get_as<bool>(o["timing"], "optimization.timing");
    if (o.contains("position")) oc.optimize_position = get_as<bool>(o["position"], "optimization.position");
    if (o.contains("max_steps")) oc.max_steps = get_as<std::size_t>(o["max_steps"], "optimization.max_steps");
    if (o.contains("min_gap")) oc.min_gap = get_as<double>(o["min_gap"], "optimization.min_gap");
    if (o.contains("timing_lr")) oc.timing_lr = get_as<double>(o["timing_lr"], "optimization.timing_lr");
    if (o.contains("position_lr")) oc.position_lr = get_as<double>(o["position_lr"], "optimization.position_lr");
    if (o.contains("lambda")) oc.lambda = get_as<double>(o["lambda"], "optimization.lambda");
  }
  if (j.contains("grid_search")) c.grid_search = get_as<bool>(j["grid_search"], "grid_search");
  if (j.contains("grid")) {
    const auto& g = j["grid"];
    reject_unknown(g, "grid", {"timing_lr", "position_lr", "lambda"});
    if (g.contains("timing_lr")) c.grid.timing_lrs = get_as<std::vector<double>>(g["timing_lr"], "grid.timing_lr");
    if (g.contains("position_lr")) c.grid.position_lrs = get_as<std::vector<double>>(g["position_lr"], "grid.position_lr");
    if (g.contains("lambda")) c.grid.lambdas = get_as<std::vector<double>>(g["lambda"], "grid.lambda");
  }
  if (j.contains("frame_rate")) c.frame_rate = get_as<double>(j["frame_rate"], "frame_rate");
  if (j.contains("splits")) {
    const auto& s = j["splits"];
    reject_unknown(s, "splits", {"train", "dev", "test"});
    if (s.contains("train")) c.splits.train = get_as<std::size_t>(s["train"], "splits.train");
    if (s.contains("dev")) c.splits.dev = get_as<std::size_t>(s["dev"], "splits.dev");
    if (s.contains("test")) c.splits.test = get_as<std::size_t>(s["test"], "splits.test");
  }
  if (j.contains("seed")) c.seed = get_as<std::uint64_t>(j["seed"], "seed");
  if (j.contains("output_dir")) c.output_dir = path_of(j["output_dir"], "output_dir");
  if (j.contains("jobs")) c.jobs = get_as<std::size_t>(j["jobs"], "jobs");
  if (j.contains("silence_labels")) c.silence_labels = get_as<std::vector<std::string>>(j["silence_labels"], "silence_labels");
  if (j.contains("textgrid_tier")) c.textgrid_tier = get_as<std::string>(j["textgrid_tier"], "textgrid_tier");
  if (j.contains("normalize_labels")) c.normalize_labels = get_as<bool>(j["normalize_labels"], "normalize_labels");
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw ValidationError("config file not found: " + path.string());
  return parse_config(detail::read_file(path), path.parent_path());
}

std::string config_to_json(const ExperimentConfig& c) {
  json j;
  j["dataset_root"] = c.dataset_root.string();
  j["speakers"] = c.speakers;
  j["alignment_dir"] = c.alignment_dir;
  j["alignment_format"] = alignment_format_name(c.alignment_format);
  j["ema_dir"] = c.ema_dir;
  j["ema_format"] = ema_format_name(c.ema_format);
  j["feature_set"] = c.feature_set.str();
  const auto t = c.resolved_tables();
  j["tables"] = {{"gp", t.gp.string()}, {"ap", t.ap.string()}, {"ap_scale", t.ap_scale.string()},
                 {"inventory", t.inventory.string()}};
  std::vector<std::string> methods;
  for (const auto m : c.methods) methods.emplace_back(to_string(m));
  j["methods"] = methods;
  const auto& o = c.optimization;
  j["optimization"] = {{"timing", o.optimize_timing}, {"position", o.optimize_position}, {"max_steps", o.max_steps},
                       {"min_gap", o.min_gap}, {"timing_lr", o.timing_lr}, {"position_lr", o.position_lr},
                       {"lambda", o.lambda}};
  j["grid_search"] = c.grid_search;
  j["grid"] = {{"timing_lr", c.grid.timing_lrs}, {"position_lr", c.grid.position_lrs}, {"lambda", c.grid.lambdas}};
  j["frame_rate"] = c.frame_rate;
  j["splits"] = {{"train", c.splits.train}, {"dev", c.splits.dev}, {"test", c.splits.test}};
  j["seed"] = c.seed;
  j["output_dir"] = c.output_dir.string();
  j["jobs"] = c.jobs;
  j["silence_labels"] = c.silence_labels;
  j["textgrid_tier"] = c.textgrid_tier;
  j["normalize_labels"] = c.normalize_labels;
  return j.dump(2);
}

}  // namespace artiprobe
