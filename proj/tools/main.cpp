#include <cstdio>
#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include "artiprobe/config.hpp"
#include "artiprobe/error.hpp"
#include "artiprobe/optimize.hpp"
#include "artiprobe/pipeline.hpp"
#include "artiprobe/report.hpp"
#include "artiprobe/synthetic.hpp"
#include "artiprobe/trajectory_io.hpp"

namespace ap = artiprobe;
using nlohmann::json;

namespace {

struct CommonOptions {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string speakers;
  std::string feature_set;
  std::string method;
  std::optional<std::size_t> jobs;
  std::string out;
};

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (const char c : s) {
    if (c == ',') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else if (c != ' ') {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

void add_common(CLI::App* cmd, CommonOptions& o, bool needs_config = true) {
  auto* c = cmd->add_option("--config", o.config, "experiment config (JSON)");
  if (needs_config) c->required();
  cmd->add_option("--seed", o.seed, "random seed");
  cmd->add_option("--speakers", o.speakers, "comma-separated speaker list");
  cmd->add_option("--feature-set", o.feature_set, "feature set id, e.g. gp_unknown+phoneme");
  cmd->add_option("--method", o.method, "comma-separated interpolation methods");
  cmd->add_option("--jobs", o.jobs, "worker threads");
  cmd->add_option("--out", o.out, "output directory");
}

ap::ExperimentConfig resolve_config(const CommonOptions& o) {
  auto cfg = ap::load_config(o.config);
  if (o.seed) cfg.seed = *o.seed;
  if (!o.speakers.empty()) cfg.speakers = split_list(o.speakers);
  if (!o.feature_set.empty()) cfg.feature_set = ap::FeatureSetId::parse(o.feature_set);
  if (!o.method.empty()) {
    cfg.methods.clear();
    for (const auto& m : split_list(o.method)) cfg.methods.push_back(ap::parse_interp_method(m));
  }
  if (o.jobs) cfg.jobs = *o.jobs;
  if (!o.out.empty()) cfg.output_dir = o.out;
  cfg.validate();
  return cfg;
}

json probe_json(const ap::ProbeModel& m, const ap::ParameterScores& s) {
  json w = json::array();
  for (Eigen::Index i = 0; i < m.weight.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.weight.cols(); ++j) row.push_back(m.weight(i, j));
    w.push_back(row);
  }
  json pcc = json::object();
  for (std::size_t k = 0; k < s.pcc.size(); ++k) {
    pcc[std::string(ap::kArticulatoryParameters[k])] = s.pcc[k] ? json(*s.pcc[k]) : json(nullptr);
  }
  return {{"weight", w},
          {"bias", std::vector<double>(m.bias.data(), m.bias.data() + m.bias.size())},
          {"epochs_run", m.epochs_run},
          {"best_epoch", m.best_epoch},
          {"best_dev_loss", m.best_dev_loss},
          {"dev_pcc", pcc}};
}

void print_warnings(ap::RunManifest& manifest) {
  for (const auto& w : manifest.warnings()) fmt::print(stderr, "warning: {}\n", w);
}

int cmd_ingest(const CommonOptions& o) {
  ap::Pipeline p(resolve_config(o));
  const auto data = p.ingest_all();
  const auto out = p.config().output_dir;
  json splits;
  for (const auto& d : data) {
    const auto dir = out / "articulatory" / d.corpus.speaker;
    std::filesystem::create_directories(dir);
    for (const auto& [id, series] : d.articulatory) ap::write_articulatory_csv(dir / (id + ".csv"), series);
    splits[d.corpus.speaker] = {{"train", d.splits.train}, {"dev", d.splits.dev}, {"test", d.splits.test},
                                {"rejected", d.corpus.rejected}};
    fmt::print("{}: {} usable utterances ({} train, {} dev, {} test), {} rejected\n", d.corpus.speaker,
               d.corpus.utterances.size(), d.splits.train.size(), d.splits.dev.size(), d.splits.test.size(),
               d.corpus.rejected.size());
  }
  ap::write_text_file(out / "splits.json", splits.dump(2) + "\n");
  ap::write_text_file(out / "manifest.json", p.manifest().to_json());
  print_warnings(p.manifest());
  return 0;
}

int cmd_synth(const CommonOptions& o, bool binary, bool optimized) {
  auto cfg = resolve_config(o);
  if (optimized && !cfg.optimization.enabled()) {
    throw ap::ValidationError("optimize: the config enables neither timing nor position optimization");
  }
  ap::Pipeline p(cfg);
  const auto out = p.config().output_dir;
  const auto names = p.table().dimension_names();
  const ap::OptimConfig optim = optimized ? p.config().optimization : ap::OptimConfig{};
  std::size_t written = 0;
  for (const auto& spk : p.config().speakers) {
    const auto corpus = p.load_corpus(spk);
    for (const auto method : p.config().methods) {
      const auto dir = out / (optimized ? "optimized" : "trajectories") / std::string(ap::to_string(method)) / spk;
      for (const auto& [id, utt] : corpus.utterances) {
        if (optimized) ap::write_optimized_csv(dir / (id + ".targets.csv"), p.optimize(utt, method, optim), names);
        const auto traj = p.synthesize(utt, method, optim);
        if (binary) {
          ap::write_trajectory_binary(dir / (id + ".atrj"), traj);
        } else {
          ap::write_trajectory_csv(dir / (id + ".csv"), traj, names);
        }
        ++written;
      }
    }
  }
  fmt::print("wrote {} trajectories under {}\n", written, out.string());
  print_warnings(p.manifest());
  return 0;
}

int cmd_probe(const CommonOptions& o) {
  ap::Pipeline p(resolve_config(o));
  const auto data = p.ingest_all();
  const auto out = p.config().output_dir;
  for (const auto method : p.config().methods) {
    for (std::size_t s = 0; s < data.size(); ++s) {
      const auto ev = p.evaluate_speaker(data[s], s, method, p.config().optimization, data[s].splits.dev);
      ap::write_text_file(out / "probes" / std::string(ap::to_string(method)) / (data[s].corpus.speaker + ".json"),
                          probe_json(ev.probe, ev.scores).dump(2) + "\n");
      fmt::print("{} {}: {} epochs, best dev loss {:.6f}, dev score {:.3f}\n", ap::to_string(method),
                 data[s].corpus.speaker, ev.probe.epochs_run, ev.probe.best_dev_loss, ap::mean_defined(ev.scores));
    }
  }
  ap::write_text_file(out / "manifest.json", p.manifest().to_json());
  print_warnings(p.manifest());
  return 0;
}

int cmd_run(const CommonOptions& o, bool with_grid) {
  ap::Pipeline p(resolve_config(o));
  const auto result = p.run(with_grid);
  p.write_outputs(result);
  std::string text = ap::overall_table([&] {
    std::vector<ap::MethodScore> rows;
    for (const auto& m : result.methods) rows.push_back({std::string(ap::to_string(m.method)), m.test});
    return rows;
  }());
  fmt::print("{}", text);
  fmt::print("reports written to {}\n", p.config().output_dir.string());
  print_warnings(p.manifest());
  return 0;
}

int cmd_grid(const CommonOptions& o) {
  auto cfg = resolve_config(o);
  if (!cfg.optimization.enabled()) throw ap::ValidationError("grid: the config enables neither timing nor position optimization");
  ap::Pipeline p(cfg);
  const auto data = p.ingest_all();
  json selected = json::array();
  for (const auto method : p.config().methods) {
    const auto best = p.grid_search(data, method);
    selected.push_back({{"method", ap::to_string(method)}, {"timing_lr", best.timing_lr},
                        {"position_lr", best.position_lr}, {"lambda", best.lambda}});
    fmt::print("{}: timing_lr={:g} position_lr={:g} lambda={:g}\n", ap::to_string(method), best.timing_lr,
               best.position_lr, best.lambda);
  }
  const auto out = p.config().output_dir;
  std::string grid = "method,timing_lr,position_lr,lambda,dev_score\n";
  for (const auto& g : p.manifest().grid()) {
    grid += fmt::format("{},{:.17g},{:.17g},{:.17g},{}\n", g.method, g.point.timing_lr, g.point.position_lr,
                        g.point.lambda, std::isnan(g.dev_score) ? std::string("NA") : fmt::format("{:.17g}", g.dev_score));
  }
  ap::write_text_file(out / "grid.csv", grid);
  ap::write_text_file(out / "selected.json", selected.dump(2) + "\n");
  ap::write_text_file(out / "manifest.json", p.manifest().to_json());
  print_warnings(p.manifest());
  return 0;
}

int cmd_plot(const CommonOptions& o, const std::string& speaker, const std::string& utterance, std::string output) {
  auto cfg = resolve_config(o);
  ap::Pipeline p(cfg);
  const auto corpus = p.load_corpus(speaker);
  const auto it = corpus.utterances.find(utterance);
  if (it == corpus.utterances.end()) throw ap::ValidationError(fmt::format("no usable utterance {}/{}", speaker, utterance));
  const auto method = p.config().methods.front();
  const auto traj = p.synthesize(it->second, method, ap::OptimConfig{});
  if (output.empty()) output = (p.config().output_dir / fmt::format("{}_{}_{}.svg", speaker, utterance, ap::to_string(method))).string();
  const auto names = p.table().dimension_names();
  ap::write_text_file(output, ap::trajectory_svg(traj, std::vector<std::string>(names.begin(), names.end()),
                                                 fmt::format("{}/{} ({})", speaker, utterance, ap::to_string(method))));
  fmt::print("wrote {}\n", output);
  return 0;
}

// Exit status follows the innermost exception of a nested chain.
int report_failure(const std::exception& e) {
  int code = 2;
  const std::exception* cur = &e;
  std::string indent;
  std::vector<std::exception_ptr> keep;
  while (cur != nullptr) {
    fmt::print(stderr, "{}error: {}\n", indent, cur->what());
    code = dynamic_cast<const ap::ValidationError*>(cur) != nullptr ? 1 : 2;
    const auto* nested = dynamic_cast<const std::nested_exception*>(cur);
    if (nested == nullptr || !nested->nested_ptr()) break;
    keep.push_back(nested->nested_ptr());
    try {
      std::rethrow_exception(keep.back());
    } catch (const std::exception& inner) {
      // Rethrown exceptions are the stored objects, so pointers stay valid
      // while `keep` holds them.
      cur = &inner;
    } catch (...) {
      break;
    }
    indent += "  ";
  }
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Articulatory-feature trajectory synthesis and linear-probe evaluation"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(ap::library_version()));

  CommonOptions common;
  bool binary = false;
  auto* ingest = app.add_subcommand("ingest", "load alignments and EMA, write articulatory parameters");
  auto* synth = app.add_subcommand("synth", "synthesize feature trajectories");
  auto* optimize = app.add_subcommand("optimize", "optimize targets and synthesize trajectories");
  auto* probe = app.add_subcommand("probe", "train per-speaker probes (fixed configuration)");
  auto* score = app.add_subcommand("score", "train probes and score the test split");
  auto* grid = app.add_subcommand("grid", "grid-search optimization hyperparameters on dev");
  auto* run = app.add_subcommand("run", "full experiment: grid search, probing, scoring, reports");
  for (auto* c : {ingest, synth, optimize, probe, score, grid, run}) add_common(c, common);
  for (auto* c : {synth, optimize}) c->add_flag("--binary", binary, "write binary .atrj files instead of CSV");

  ap::SyntheticOptions syn;
  std::string syn_out;
  auto* gen = app.add_subcommand("gen-synthetic", "write a synthetic dataset with a known generator");
  gen->add_option("--out", syn_out, "dataset directory")->required();
  gen->add_option("--seed", syn.seed, "random seed");
  gen->add_option("--num-speakers", syn.speakers, "speaker count")->check(CLI::PositiveNumber);
  gen->add_option("--utterances", syn.utterances, "utterances per speaker")->check(CLI::PositiveNumber);
  gen->add_option("--dim", syn.dimension, "feature dimension")->check(CLI::PositiveNumber);
  gen->add_option("--noise", syn.noise, "noise std on the articulatory parameters");
  gen->add_option("--unknown-fraction", syn.unknown_fraction, "fraction of unspecified table entries");
  gen->add_option("--ema-rate", syn.ema_rate, "EMA sample rate (100 or 500)");

  std::string plot_speaker, plot_utterance, plot_output;
  auto* plot = app.add_subcommand("plot", "SVG of one synthesized trajectory");
  add_common(plot, common);
  plot->add_option("--speaker", plot_speaker, "speaker")->required();
  plot->add_option("--utterance", plot_utterance, "utterance id")->required();
  plot->add_option("--output", plot_output, "SVG path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*ingest) return cmd_ingest(common);
    if (*synth) return cmd_synth(common, binary, false);
    if (*optimize) return cmd_synth(common, binary, true);
    if (*probe) return cmd_probe(common);
    if (*score) return cmd_run(common, false);
    if (*grid) return cmd_grid(common);
    if (*run) return cmd_run(common, true);
    if (*gen) {
      const auto ds = ap::generate_synthetic(syn_out, syn);
      fmt::print("wrote {} speakers x {} utterances to {} (config: {})\n", ds.speakers.size(), ds.utterances.size(),
                 ds.root.string(), ds.config.string());
      return 0;
    }
    if (*plot) return cmd_plot(common, plot_speaker, plot_utterance, plot_output);
  } catch (const std::exception& e) {
    return report_failure(e);
  }
  return 2;
}
