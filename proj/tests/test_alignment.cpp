#include <doctest.h>

#include <fstream>
#include <sstream>
#include <random>

#include "artiprobe/alignment.hpp"
#include "artiprobe/error.hpp"
#include "support.hpp"

using namespace artiprobe;

namespace {

const char* kLongTextGrid = R"(File type = "ooTextFile"
Object class = "TextGrid"

xmin = 0
xmax = 1.4
tiers? <exists>
size = 2
item []:
    item [1]:
        class = "IntervalTier"
        name = "words"
        xmin = 0
        xmax = 1.4
        intervals: size = 3
        intervals [1]:
            xmin = 0
            xmax = 0.5
            text = ""
        intervals [2]:
            xmin = 0.5
            xmax = 0.9
            text = "ah"
        intervals [3]:
            xmin = 0.9
            xmax = 1.4
            text = ""
    item [2]:
        class = "IntervalTier"
        name = "phones"
        xmin = 0
        xmax = 1.4
        intervals: size = 4
        intervals [1]:
            xmin = 0
            xmax = 0.5
            text = "sil"
        intervals [2]:
            xmin = 0.5
            xmax = 0.7
            text = "AA1"
        intervals [3]:
            xmin = 0.7
            xmax = 0.9
            text = "T"
        intervals [4]:
            xmin = 0.9
            xmax = 1.4
            text = "sp"
)";

const char* kShortTextGrid = R"(File type = "ooTextFile"
Object class = "TextGrid"

0
1.4
<exists>
1
"IntervalTier"
"phones"
0
1.4
3
0
0.5
"sil"
0.5
0.9
"aa"
0.9
1.4
"sil"
)";

PhoneSegmentation seg_of(std::vector<Phone> phones) {
  PhoneSegmentation s;
  s.utterance_id = "u";
  s.phones = std::move(phones);
  return s;
}

// Independent reader for the long TextGrid format: collects the xmin/xmax/text
// triples of the named tier line by line.
std::vector<Phone> naive_long_textgrid(const std::string& text, const std::string& tier) {
  std::istringstream in(text);
  std::string line;
  bool in_tier = false;
  std::vector<Phone> out;
  Phone cur;
  int field = 0;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (line.find("name =") != std::string::npos) {
      in_tier = line.find("\"" + tier + "\"") != std::string::npos;
      continue;
    }
    if (!in_tier || eq == std::string::npos) continue;
    if (line.find("intervals [") != std::string::npos) continue;
    const std::string key = line.substr(line.find_first_not_of(' '), eq - line.find_first_not_of(' ') - 1);
    const std::string val = line.substr(eq + 2);
    const bool interval_level = line.rfind("            ", 0) == 0;  // 12-space indent
    if (key == "xmin" && field == 0 && interval_level) {
      cur.start = std::stod(val);
      field = 1;
    } else if (key == "xmax" && field == 1) {
      cur.end = std::stod(val);
      field = 2;
    } else if (key == "text" && field == 2) {
      cur.label = val.substr(1, val.size() - 2);
      out.push_back(cur);
      field = 0;
    }
  }
  return out;
}

}  // namespace

TEST_CASE("lab files parse into contiguous phones") {
  const auto seg = parse_lab("0.0 0.5 sil\n0.5 0.9 aa\n0.9 1.4 sil\n", "u1");
  REQUIRE(seg.phones.size() == 3);
  CHECK(seg.phones[1] == Phone{"aa", 0.5, 0.9});
  CHECK(seg.utterance_id == "u1");
}

TEST_CASE("lab parsing rejects gaps, overlaps and garbage") {
  CHECK_THROWS_AS(parse_lab("0.0 0.5 sil\n0.6 0.9 aa\n", "u"), ValidationError);
  CHECK_THROWS_AS(parse_lab("0.0 0.5 sil\n0.4 0.9 aa\n", "u"), ValidationError);
  CHECK_THROWS_AS(parse_lab("0.0 abc sil\n", "u"), ParseError);
  CHECK_THROWS_AS(parse_lab("", "u"), ValidationError);
  CHECK_THROWS_AS(parse_lab("0.5 0.5 aa\n", "u"), ValidationError);
}

TEST_CASE("label normalization strips stress digits and lowercases") {
  CHECK(normalize_label("AA1") == "aa");
  CHECK(normalize_label("T") == "t");
  CHECK(normalize_label("sil") == "sil");
  AlignmentOptions raw;
  raw.normalize_labels = false;
  CHECK(parse_lab("0 1 AA1\n", "u", raw).phones[0].label == "AA1");
}

TEST_CASE("long-format TextGrid: named tier, first interval tier by default") {
  AlignmentOptions opt;
  opt.tier = "phones";
  const auto seg = parse_textgrid(kLongTextGrid, "tg", opt);
  REQUIRE(seg.phones.size() == 4);
  CHECK(seg.phones[1] == Phone{"aa", 0.5, 0.7});
  CHECK(seg.phones[2] == Phone{"t", 0.7, 0.9});

  const auto words = parse_textgrid(kLongTextGrid, "tg");
  CHECK(words.phones.size() == 3);

  // Cross-check against an independent line-based reader.
  auto expected = naive_long_textgrid(kLongTextGrid, "phones");
  REQUIRE(expected.size() == seg.phones.size());
  for (std::size_t i = 0; i < expected.size(); ++i) {
    CHECK(seg.phones[i].start == expected[i].start);
    CHECK(seg.phones[i].end == expected[i].end);
    CHECK(seg.phones[i].label == normalize_label(expected[i].label));
  }
}

TEST_CASE("short-format TextGrid parses to the same phones") {
  const auto seg = parse_textgrid(kShortTextGrid, "tg");
  REQUIRE(seg.phones.size() == 3);
  CHECK(seg.phones[1] == Phone{"aa", 0.5, 0.9});
}

TEST_CASE("TextGrid errors: gaps, missing tier, not a TextGrid") {
  std::string gapped = kShortTextGrid;
  gapped.replace(gapped.find("0.5\n0.9"), 7, "0.6\n0.9");
  CHECK_THROWS_AS(parse_textgrid(gapped, "tg"), ValidationError);
  AlignmentOptions opt;
  opt.tier = "nope";
  CHECK_THROWS_AS(parse_textgrid(kShortTextGrid, "tg", opt), ValidationError);
  CHECK_THROWS_AS(parse_textgrid("hello", "tg"), ParseError);
}

TEST_CASE("parse_alignment reads files by format") {
  testing::TempDir dir("align");
  {
    std::ofstream(dir.path() / "a.lab") << "0.0 0.5 sil\n0.5 0.9 aa\n0.9 1.4 sil\n";
    std::ofstream(dir.path() / "a.TextGrid") << kShortTextGrid;
  }
  const auto lab = parse_alignment(dir.path() / "a.lab", AlignmentFormat::Lab);
  const auto tg = parse_alignment(dir.path() / "a.TextGrid", AlignmentFormat::TextGrid);
  CHECK(lab.utterance_id == "a");
  CHECK(lab.phones == tg.phones);
  CHECK_THROWS_AS(parse_alignment(dir.path() / "missing.lab", AlignmentFormat::Lab), ValidationError);
}

TEST_CASE("trim_and_filter removes boundary silences and shifts times") {
  const auto s = seg_of({{"sil", 0.0, 0.5}, {"aa", 0.5, 0.9}, {"sil", 0.9, 1.4}});
  const auto t = trim_and_filter(s);
  REQUIRE(t.has_value());
  REQUIRE(t->phones.size() == 1);
  CHECK(t->phones[0] == Phone{"aa", 0.0, 0.9 - 0.5});
  CHECK(t->time_offset == 0.5);

  CHECK_FALSE(trim_and_filter(seg_of({{"aa", 0.0, 0.5}, {"sil", 0.5, 1.0}})).has_value());
  CHECK_FALSE(trim_and_filter(seg_of({{"sil", 0.0, 0.5}, {"aa", 0.5, 1.0}})).has_value());
  CHECK_FALSE(trim_and_filter(seg_of({{"sil", 0.0, 0.5}, {"sp", 0.5, 1.0}})).has_value());
}

TEST_CASE("trim_and_filter keeps internal silences and is idempotent") {
  const auto s = seg_of({{"sil", 0.0, 0.2}, {"sp", 0.2, 0.3}, {"aa", 0.3, 0.5}, {"sp", 0.5, 0.6},
                         {"t", 0.6, 0.7}, {"sil", 0.7, 1.0}});
  const auto once = trim_and_filter(s);
  REQUIRE(once.has_value());
  REQUIRE(once->phones.size() == 3);  // leading sil+sp trimmed, internal sp kept
  CHECK(once->phones[0].label == "aa");
  CHECK(once->phones[1].label == "sp");
  CHECK(once->phones[0].start == 0.0);
  const auto twice = trim_and_filter(*once);
  REQUIRE(twice.has_value());
  CHECK(*twice == *once);
}

TEST_CASE("build_featural: one phone gives boundary zeros and midpoint timings") {
  const auto table = load_feature_table(testing::bundled_tables(), FeatureSetId::parse("gp_unknown"));
  const auto f = build_featural(seg_of({{"aa", 0.0, 0.4}}), table);
  CHECK(f.intermediate_count() == 1);
  REQUIRE(f.timings.size() == 3);
  CHECK(f.timings[0] == 0.0);
  CHECK(f.timings[1] == 0.2);
  CHECK(f.timings[2] == 0.4);
  CHECK(f.targets[1] == encode_target(table, "aa"));
  for (const auto& v : f.targets.front()) CHECK(v == FeatureValue::specified(0.0));
  for (const auto& v : f.targets.back()) CHECK(v == FeatureValue::specified(0.0));
  CHECK(f.intervals.front() == Interval{0.0, 0.0});
  CHECK(f.intervals.back() == Interval{0.4, 0.4});
}

TEST_CASE("build_featural: two phones") {
  const auto table = load_feature_table(testing::bundled_tables(), FeatureSetId::parse("gp_binary"));
  const auto f = build_featural(seg_of({{"p", 0.0, 0.2}, {"aa", 0.2, 0.6}}), table);
  REQUIRE(f.timings.size() == 4);
  CHECK(f.timings[1] == doctest::Approx(0.1).epsilon(1e-15));
  CHECK(f.timings[2] == doctest::Approx(0.4).epsilon(1e-15));
  CHECK(f.timings[3] == 0.6);
  CHECK_THROWS_AS(build_featural(seg_of({}), table), ValidationError);
  CHECK_THROWS_AS(build_featural(seg_of({{"qq", 0.0, 0.2}}), table), UnknownPhonemeError);
}

TEST_CASE("build_featural maps internal silences to zero targets") {
  const auto table = load_feature_table(testing::bundled_tables(), FeatureSetId::parse("gp_unknown"));
  const auto f = build_featural(seg_of({{"aa", 0.0, 0.2}, {"sp", 0.2, 0.3}, {"t", 0.3, 0.5}}), table);
  CHECK(f.labels[2] == kSilenceLabel);
  for (const auto& v : f.targets[2]) CHECK(v == FeatureValue::specified(0.0));
}

TEST_CASE("featural invariants hold on random segmentations") {
  std::mt19937_64 rng(7);
  const auto table = load_feature_table(testing::bundled_tables(), FeatureSetId::parse("gp_unknown+phoneme"));
  const auto phonemes = table.phonemes();
  for (int trial = 0; trial < 200; ++trial) {
    std::uniform_int_distribution<int> count(1, 30);
    std::uniform_real_distribution<double> dur(0.01, 0.3);
    std::uniform_int_distribution<std::size_t> pick(0, phonemes.size() - 1);
    std::vector<Phone> phones;
    double t = 0.0;
    const int k = count(rng);
    for (int i = 0; i < k; ++i) {
      const double e = t + dur(rng);
      phones.push_back({phonemes[pick(rng)], t, e});
      t = e;
    }
    const auto f = build_featural(seg_of(phones), table);
    REQUIRE(f.target_count() == phones.size() + 2);
    CHECK_NOTHROW(validate_featural(f));
    for (std::size_t i = 0; i < f.target_count(); ++i) {
      CHECK(f.timings[i] == 0.5 * (f.intervals[i].start + f.intervals[i].end));
      if (i > 0) CHECK(f.timings[i] > f.timings[i - 1]);
    }
  }
}
