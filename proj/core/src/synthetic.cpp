#include "artiprobe/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>

#include <fmt/format.h>
#include <json.hpp>

#include "artiprobe/config.hpp"
#include "artiprobe/ema.hpp"
#include "artiprobe/error.hpp"
#include "artiprobe/phonology.hpp"
#include "artiprobe/report.hpp"

namespace artiprobe {

namespace {

struct Segment {
  std::string label;
  long start_ms = 0;
  long end_ms = 0;
};

// Durations are whole multiples of 10 ms so every boundary lies on the
// 100 Hz frame grid.
std::vector<Segment> random_utterance(std::mt19937_64& rng, std::span<const std::string> phonemes, double sp_prob) {
  std::uniform_int_distribution<int> count(4, 15);
  std::uniform_int_distribution<int> dur(3, 30);
  std::uniform_int_distribution<std::size_t> ph(0, phonemes.size() - 1);
  std::bernoulli_distribution sp(sp_prob);
  std::vector<Segment> out;
  long t = 0;
  auto add = [&](std::string label) {
    const long d = 10L * dur(rng);
    out.push_back({std::move(label), t, t + d});
    t += d;
  };
  add("sil");
  const int k = count(rng);
  for (int i = 0; i < k; ++i) {
    if (i > 0 && sp(rng)) add("sp");
    add(phonemes[ph(rng)]);
  }
  add("sil");
  return out;
}

std::string ternary(double v) { return v > 0.0 ? "+" : (v < 0.0 ? "-" : "0"); }

// Piecewise-linear reference through the specified targets of each dimension,
// written independently of the forward module.
double reference_value(const std::vector<double>& times, const std::vector<double>& values, double tau) {
  if (tau <= times.front()) return values.front();
  if (tau >= times.back()) return values.back();
  const auto it = std::upper_bound(times.begin(), times.end(), tau);
  const std::size_t i = static_cast<std::size_t>(it - times.begin()) - 1;
  const double s = (tau - times[i]) / (times[i + 1] - times[i]);
  return values[i] + s * (values[i + 1] - values[i]);
}

Eigen::MatrixXd random_normal(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols, double scale) {
  std::normal_distribution<double> n(0.0, scale);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = n(rng);
  return m;
}

std::vector<std::vector<double>> to_rows(const Eigen::MatrixXd& m) {
  std::vector<std::vector<double>> out(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) out[static_cast<std::size_t>(i)].push_back(m(i, j));
  return out;
}

}  // namespace

SyntheticDataset generate_synthetic(const std::filesystem::path& root, const SyntheticOptions& o) {
  if (o.speakers == 0 || o.utterances == 0 || o.dimension == 0) {
    throw ValidationError("generate_synthetic: speakers, utterances and dimension must be at least 1");
  }
  if (o.ema_rate != 100.0 && o.ema_rate != 500.0) throw ValidationError("generate_synthetic: ema_rate must be 100 or 500");
  if (!(o.noise >= 0.0) || !(o.unknown_fraction >= 0.0 && o.unknown_fraction < 1.0)) {
    throw ValidationError("generate_synthetic: noise must be >= 0 and unknown_fraction in [0, 1)");
  }

  std::mt19937_64 rng(o.seed);
  std::filesystem::create_directories(root);
  const auto inventory = load_inventory(default_data_dir() / "phonemes.txt");
  std::vector<std::string> phonemes;
  for (const auto& p : inventory)
    if (p != kSilenceLabel) phonemes.push_back(p);

  // Random ternary table; 0 entries read as Unknown under custom_unknown.
  const auto d = static_cast<Eigen::Index>(o.dimension);
  std::map<std::string, std::vector<double>> table;
  {
    std::bernoulli_distribution plus(0.5);
    std::bernoulli_distribution unknown(o.unknown_fraction);
    std::string tsv = "phoneme";
    for (Eigen::Index j = 0; j < d; ++j) tsv += fmt::format("\tf{}", j);
    tsv += '\n';
    for (const auto& p : phonemes) {
      std::vector<double> row;
      tsv += p;
      for (Eigen::Index j = 0; j < d; ++j) {
        const double v = unknown(rng) ? 0.0 : (plus(rng) ? 1.0 : -1.0);
        row.push_back(v);
        tsv += '\t' + ternary(v);
      }
      tsv += '\n';
      table[p] = std::move(row);
    }
    write_text_file(root / "features.tsv", tsv);
  }

  SyntheticDataset ds;
  ds.root = root;
  for (std::size_t u = 0; u < o.utterances; ++u) ds.utterances.push_back(fmt::format("utt{:04d}", u + 1));

  std::normal_distribution<double> noise(0.0, 1.0);
  nlohmann::json truth;
  truth["options"] = {{"speakers", o.speakers}, {"utterances", o.utterances}, {"dimension", o.dimension},
                      {"seed", o.seed}, {"noise", o.noise}, {"unknown_fraction", o.unknown_fraction},
                      {"ema_rate", o.ema_rate}};
  for (std::size_t s = 0; s < o.speakers; ++s) {
    SyntheticSpeaker spk;
    spk.name = fmt::format("spk{}", s + 1);
    spk.a = random_normal(rng, 6, d, 1.0 / std::sqrt(static_cast<double>(d)));
    spk.b = random_normal(rng, 6, 1, 1.0);
    spk.mix = random_normal(rng, 12, 6, 1.0);
    spk.offset = random_normal(rng, 12, 1, 5.0);
    const auto dir = root / spk.name;
    std::filesystem::create_directories(dir);

    for (const auto& id : ds.utterances) {
      const auto segs = random_utterance(rng, phonemes, o.sp_probability);
      std::string lab;
      for (const auto& sg : segs) lab += fmt::format("{:.2f} {:.2f} {}\n", sg.start_ms / 1000.0, sg.end_ms / 1000.0, sg.label);
      write_text_file(dir / (id + ".lab"), lab);

      // Featural targets on the trimmed time axis: zero boundary targets at
      // both ends, internal pauses as zero targets, phonemes from the table.
      const long offset_ms = segs.front().end_ms;
      const long end_ms = segs.back().start_ms;
      std::vector<std::vector<double>> times(static_cast<std::size_t>(d)), values(static_cast<std::size_t>(d));
      for (Eigen::Index j = 0; j < d; ++j) {
        times[static_cast<std::size_t>(j)].push_back(0.0);
        values[static_cast<std::size_t>(j)].push_back(0.0);
      }
      for (std::size_t i = 1; i + 1 < segs.size(); ++i) {
        const double mid = 0.5 * static_cast<double>(segs[i].start_ms + segs[i].end_ms - 2 * offset_ms) / 1000.0;
        const bool pause = segs[i].label == "sp";
        for (Eigen::Index j = 0; j < d; ++j) {
          const double v = pause ? 0.0 : table.at(segs[i].label)[static_cast<std::size_t>(j)];
          if (!pause && v == 0.0) continue;  // Unknown: not a node
          times[static_cast<std::size_t>(j)].push_back(mid);
          values[static_cast<std::size_t>(j)].push_back(v);
        }
      }
      const double t_end = static_cast<double>(end_ms - offset_ms) / 1000.0;
      for (Eigen::Index j = 0; j < d; ++j) {
        times[static_cast<std::size_t>(j)].push_back(t_end);
        values[static_cast<std::size_t>(j)].push_back(0.0);
      }

      const long total_ms = segs.back().end_ms;
      const auto n = static_cast<Eigen::Index>(std::llround(static_cast<double>(total_ms) * o.ema_rate / 1000.0)) + 1;
      EmaRecord rec;
      rec.utterance_id = id;
      rec.sample_rate = o.ema_rate;
      rec.channels.resize(n, 12);
      Eigen::VectorXd f(d);
      for (Eigen::Index k = 0; k < n; ++k) {
        const double tau = static_cast<double>(k) / o.ema_rate - static_cast<double>(offset_ms) / 1000.0;
        for (Eigen::Index j = 0; j < d; ++j) {
          f(j) = reference_value(times[static_cast<std::size_t>(j)], values[static_cast<std::size_t>(j)], tau);
        }
        Eigen::VectorXd z = spk.a * f + spk.b;
        if (o.noise > 0.0)
          for (Eigen::Index p = 0; p < 6; ++p) z(p) += o.noise * noise(rng);
        rec.channels.row(k) = (spk.mix * z + spk.offset).transpose();
      }
      write_est_track(dir / (id + ".ema"), rec);
    }
    truth["speakers"][spk.name] = {{"A", to_rows(spk.a)}, {"b", to_rows(spk.b)},
                                   {"mix", to_rows(spk.mix)}, {"offset", to_rows(spk.offset)}};
    ds.speakers.push_back(std::move(spk));
  }
  write_text_file(root / "ground_truth.json", truth.dump(2) + "\n");

  // Splits scaled to the utterance count.
  const std::size_t test = std::max<std::size_t>(1, o.utterances / 5);
  const std::size_t dev = std::max<std::size_t>(1, o.utterances / 10);
  nlohmann::json cfg;
  cfg["dataset_root"] = ".";
  std::vector<std::string> names;
  for (const auto& s : ds.speakers) names.push_back(s.name);
  cfg["speakers"] = names;
  cfg["feature_set"] = o.unknown_fraction > 0.0 ? "custom_unknown" : "custom_binary";
  cfg["tables"] = {{"gp", "features.tsv"}};
  cfg["methods"] = {"linear"};
  cfg["ema_format"] = "est";
  cfg["splits"] = {{"train", o.utterances > test ? o.utterances - test : 0}, {"dev", dev}, {"test", test}};
  cfg["seed"] = o.seed;
  cfg["output_dir"] = "out";
  ds.config = root / "config.json";
  write_text_file(ds.config, cfg.dump(2) + "\n");
  return ds;
}

}  // namespace artiprobe
