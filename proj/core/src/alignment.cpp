#include "artiprobe/alignment.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "artiprobe/error.hpp"
#include "text_util.hpp"

namespace artiprobe {

SilenceSet::SilenceSet() : labels_{"sil", "sp", "spn", ""} {}

AlignmentFormat parse_alignment_format(std::string_view name) {
  if (name == "lab") return AlignmentFormat::Lab;
  if (name == "textgrid" || name == "TextGrid") return AlignmentFormat::TextGrid;
  throw ValidationError("unknown alignment format '" + std::string(name) + "'");
}

std::string normalize_label(std::string_view label) {
  std::string out;
  out.reserve(label.size());
  for (char c : label) out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  while (out.size() > 1 && std::isdigit(static_cast<unsigned char>(out.back()))) out.pop_back();
  return out;
}

void validate_segmentation(const PhoneSegmentation& seg, double tolerance) {
  const auto& id = seg.utterance_id;
  if (seg.phones.empty()) throw ValidationError(id + ": empty segmentation");
  for (std::size_t i = 0; i < seg.phones.size(); ++i) {
    const auto& p = seg.phones[i];
    if (!std::isfinite(p.start) || !std::isfinite(p.end) || p.start < 0.0)
      throw ValidationError(id + ": phone " + std::to_string(i) + " has invalid times");
    if (!(p.start < p.end))
      throw ValidationError(id + ": phone " + std::to_string(i) + " ('" + p.label + "') has non-positive duration");
    if (i > 0) {
      const double gap = p.start - seg.phones[i - 1].end;
      if (gap > tolerance) throw ValidationError(id + ": gap before phone " + std::to_string(i));
      if (gap < -tolerance) throw ValidationError(id + ": overlap before phone " + std::to_string(i));
    }
  }
}

namespace {

void snap_contiguous(PhoneSegmentation& seg) {
  // Remove sub-tolerance jitter so downstream timings are exactly contiguous.
  for (std::size_t i = 1; i < seg.phones.size(); ++i) seg.phones[i].start = seg.phones[i - 1].end;
}

std::string finish_label(std::string_view raw, const AlignmentOptions& options) {
  return options.normalize_labels ? normalize_label(raw) : std::string(raw);
}

}  // namespace

PhoneSegmentation parse_lab(std::string_view text, std::string utterance_id, const AlignmentOptions& options) {
  PhoneSegmentation seg;
  seg.utterance_id = std::move(utterance_id);
  std::size_t line_no = 0;
  for (auto line : detail::split(text, '\n')) {
    ++line_no;
    line = detail::trim(line);
    if (line.empty() || line.front() == '#') continue;
    const auto cols = detail::split_ws(line);
    if (cols.size() < 2 || cols.size() > 3)
      throw ParseError(seg.utterance_id, line_no, "expected 'start end label'");
    const auto start = detail::parse_double(cols[0]);
    const auto end = detail::parse_double(cols[1]);
    if (!start || !end) throw ParseError(seg.utterance_id, line_no, "unparseable time");
    seg.phones.push_back({finish_label(cols.size() == 3 ? cols[2] : std::string_view(), options), *start, *end});
  }
  validate_segmentation(seg, options.contiguity_tolerance);
  snap_contiguous(seg);
  return seg;
}

namespace {

// Tokenizer shared by the long and short TextGrid text formats: both are a
// stream of numbers, quoted strings and (long format only) `key =` labels,
// brackets and flags. In the short format the same values appear in order
// without keys, so reading the significant tokens positionally covers both.
struct TgToken {
  enum Kind { Number, String } kind;
  std::string text;
  double number = 0.0;
  std::size_t line = 0;
};

std::vector<TgToken> tokenize_textgrid(std::string_view text, const std::string& source) {
  std::vector<TgToken> out;
  std::size_t line = 1;
  std::size_t i = 0;
  while (i < text.size()) {
    const char c = text[i];
    if (c == '\n') {
      ++line;
      ++i;
    } else if (c == '"') {
      std::string s;
      ++i;
      while (true) {
        if (i >= text.size()) throw ParseError(source, line, "unterminated string");
        if (text[i] == '"') {
          if (i + 1 < text.size() && text[i + 1] == '"') {
            s.push_back('"');
            i += 2;
            continue;
          }
          ++i;
          break;
        }
        if (text[i] == '\n') ++line;
        s.push_back(text[i++]);
      }
      out.push_back({TgToken::String, std::move(s), 0.0, line});
    } else if (c == '-' || c == '+' || c == '.' || std::isdigit(static_cast<unsigned char>(c))) {
      const auto start = i;
      while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i])) && text[i] != ']') ++i;
      const auto tok = text.substr(start, i - start);
      if (const auto v = detail::parse_double(tok)) out.push_back({TgToken::Number, std::string(tok), *v, line});
    } else if (c == '<') {
      // <exists> / <absent> flags in the short format
      while (i < text.size() && text[i] != '>') ++i;
      ++i;
    } else if (std::isalpha(static_cast<unsigned char>(c))) {
      // keys such as `xmin =` and `intervals [3]:`: the bracketed index must not
      // be read as a value, so skip to the end of the key expression.
      while (i < text.size() && text[i] != '\n' && text[i] != '=' && text[i] != ':') {
        if (text[i] == '[') {
          while (i < text.size() && text[i] != ']') ++i;
        }
        ++i;
      }
      if (i < text.size() && text[i] != '\n') ++i;
    } else {
      ++i;
    }
  }
  return out;
}

class TgReader {
 public:
  TgReader(std::vector<TgToken> tokens, std::string source) : tokens_(std::move(tokens)), source_(std::move(source)) {}

  bool done() const { return pos_ >= tokens_.size(); }

  const TgToken& next() {
    if (done()) throw ParseError(source_, tokens_.empty() ? 1 : tokens_.back().line, "unexpected end of TextGrid");
    return tokens_[pos_++];
  }
  std::string string() {
    const auto& t = next();
    if (t.kind != TgToken::String) throw ParseError(source_, t.line, "expected a string, got '" + t.text + "'");
    return t.text;
  }
  double number() {
    const auto& t = next();
    if (t.kind != TgToken::Number) throw ParseError(source_, t.line, "expected a number, got \"" + t.text + "\"");
    return t.number;
  }
  std::size_t count() {
    const double v = number();
    if (v < 0 || v != std::floor(v)) throw ParseError(source_, tokens_[pos_ - 1].line, "expected a count");
    return static_cast<std::size_t>(v);
  }

 private:
  std::vector<TgToken> tokens_;
  std::string source_;
  std::size_t pos_ = 0;
};

}  // namespace

PhoneSegmentation parse_textgrid(std::string_view text, std::string utterance_id, const AlignmentOptions& options) {
  TgReader reader(tokenize_textgrid(text, utterance_id), utterance_id);
  if (reader.string() != "ooTextFile") throw ParseError(utterance_id, 1, "not a TextGrid text file");
  if (reader.string() != "TextGrid") throw ParseError(utterance_id, 1, "object class is not TextGrid");
  reader.number();  // xmin
  reader.number();  // xmax
  const auto tier_count = reader.count();

  PhoneSegmentation seg;
  seg.utterance_id = std::move(utterance_id);
  bool found = false;
  for (std::size_t t = 0; t < tier_count && !found; ++t) {
    const auto cls = reader.string();
    const auto name = reader.string();
    reader.number();
    reader.number();
    const auto n = reader.count();
    const bool interval = cls == "IntervalTier";
    const bool wanted = interval && (options.tier.empty() || options.tier == name);
    for (std::size_t k = 0; k < n; ++k) {
      if (interval) {
        const double xmin = reader.number();
        const double xmax = reader.number();
        auto label = reader.string();
        if (wanted) seg.phones.push_back({finish_label(label, options), xmin, xmax});
      } else {
        reader.number();
        reader.string();
      }
    }
    found = wanted;
  }
  if (!found)
    throw ValidationError(seg.utterance_id + ": no interval tier" +
                          (options.tier.empty() ? std::string() : " named '" + options.tier + "'"));
  if (seg.phones.empty()) throw ValidationError(seg.utterance_id + ": empty tier");
  validate_segmentation(seg, options.contiguity_tolerance);
  snap_contiguous(seg);
  return seg;
}

PhoneSegmentation parse_alignment(const std::filesystem::path& path, AlignmentFormat format,
                                  const AlignmentOptions& options) {
  const auto text = detail::read_file(path);
  auto id = path.stem().string();
  return format == AlignmentFormat::Lab ? parse_lab(text, std::move(id), options)
                                        : parse_textgrid(text, std::move(id), options);
}

std::optional<PhoneSegmentation> trim_and_filter(const PhoneSegmentation& seg, const SilenceSet& silence) {
  if (seg.trimmed) return seg;
  const auto& phones = seg.phones;
  if (phones.empty()) return std::nullopt;
  if (!silence.contains(phones.front().label) || !silence.contains(phones.back().label)) return std::nullopt;

  std::size_t first = 0;
  std::size_t last = phones.size();
  while (first < last && silence.contains(phones[first].label)) ++first;
  while (last > first && silence.contains(phones[last - 1].label)) --last;
  if (first == last) return std::nullopt;

  PhoneSegmentation out;
  out.utterance_id = seg.utterance_id;
  out.trimmed = true;
  const double shift = phones[first].start;
  out.time_offset = seg.time_offset + shift;
  for (std::size_t i = first; i < last; ++i)
    out.phones.push_back({phones[i].label, phones[i].start - shift, phones[i].end - shift});
  return out;
}

bool FeaturalSegmentation::fully_specified() const noexcept {
  for (const auto& row : targets)
    for (const auto& v : row)
      if (v.is_unknown()) return false;
  return true;
}

FeaturalSegmentation make_featural(std::string utterance_id, std::vector<FeatureVector> intermediate,
                                   std::vector<Interval> intervals) {
  if (intermediate.empty()) throw ValidationError(utterance_id + ": featural segmentation needs at least one target");
  if (intermediate.size() != intervals.size())
    throw ValidationError(utterance_id + ": target/interval count mismatch");
  const auto d = intermediate.front().size();

  FeaturalSegmentation fseg;
  fseg.utterance_id = std::move(utterance_id);
  fseg.dimension = d;
  fseg.targets.reserve(intermediate.size() + 2);
  fseg.targets.emplace_back(d, FeatureValue::specified(0.0));
  fseg.intervals.push_back({0.0, 0.0});
  for (std::size_t k = 0; k < intermediate.size(); ++k) {
    if (intermediate[k].size() != d) throw ValidationError(fseg.utterance_id + ": ragged target rows");
    fseg.targets.push_back(std::move(intermediate[k]));
    fseg.intervals.push_back(intervals[k]);
  }
  const double end = intervals.back().end;
  fseg.targets.emplace_back(d, FeatureValue::specified(0.0));
  fseg.intervals.push_back({end, end});
  for (const auto& iv : fseg.intervals) fseg.timings.push_back(iv.midpoint());
  fseg.labels.assign(fseg.targets.size(), std::string(kSilenceLabel));
  validate_featural(fseg);
  return fseg;
}

FeaturalSegmentation build_featural(const PhoneSegmentation& seg, const FeatureTable& table,
                                    const SilenceSet& silence) {
  if (seg.phones.empty()) throw ValidationError(seg.utterance_id + ": empty segmentation");
  std::vector<FeatureVector> targets;
  std::vector<Interval> intervals;
  std::vector<std::string> labels;
  for (const auto& p : seg.phones) {
    const std::string_view label = silence.contains(p.label) ? kSilenceLabel : std::string_view(p.label);
    try {
      targets.push_back(encode_target(table, label));
    } catch (const UnknownPhonemeError&) {
      throw UnknownPhonemeError(std::string(label) + "' in utterance '" + seg.utterance_id);
    }
    intervals.push_back({p.start, p.end});
    labels.emplace_back(label);
  }
  auto fseg = make_featural(seg.utterance_id, std::move(targets), std::move(intervals));
  std::copy(labels.begin(), labels.end(), fseg.labels.begin() + 1);
  fseg.time_offset = seg.time_offset;
  return fseg;
}

void validate_featural(const FeaturalSegmentation& fseg) {
  const auto& id = fseg.utterance_id;
  const auto n = fseg.targets.size();
  if (n < 3) throw ValidationError(id + ": featural segmentation needs K >= 1");
  if (fseg.intervals.size() != n || fseg.timings.size() != n || fseg.labels.size() != n)
    throw ValidationError(id + ": inconsistent featural segmentation sizes");
  for (const auto& row : fseg.targets)
    if (row.size() != fseg.dimension) throw ValidationError(id + ": ragged target rows");
  for (std::size_t j = 0; j < fseg.dimension; ++j) {
    if (fseg.targets.front()[j] != FeatureValue::specified(0.0) || fseg.targets.back()[j] != FeatureValue::specified(0.0))
      throw ValidationError(id + ": boundary targets must be zero");
  }
  if (fseg.intervals.front() != Interval{0.0, 0.0}) throw ValidationError(id + ": first interval must be (0, 0)");
  const double end = fseg.intervals[n - 2].end;
  if (fseg.intervals.back() != Interval{end, end}) throw ValidationError(id + ": last interval must be degenerate");
  for (std::size_t k = 0; k < n; ++k) {
    if (fseg.timings[k] != fseg.intervals[k].midpoint()) throw ValidationError(id + ": timings are not midpoints");
    if (k > 0 && !(fseg.timings[k] > fseg.timings[k - 1]))
      throw ValidationError(id + ": timings not strictly increasing");
  }
}

}  // namespace artiprobe
