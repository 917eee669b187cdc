#include <doctest.h>

#include <fstream>

#include "artiprobe/error.hpp"
#include "artiprobe/phonology.hpp"
#include "support.hpp"

using namespace artiprobe;

namespace {

FeatureTable load(const std::string& id) { return load_feature_table(testing::bundled_tables(), FeatureSetId::parse(id)); }

void write(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p);
  out << text;
}

std::string gp_header(std::size_t d) {
  std::string h = "phoneme";
  for (std::size_t j = 0; j < d; ++j) h += "\tf" + std::to_string(j);
  return h + "\n";
}

}  // namespace

TEST_CASE("feature set ids round-trip and declare their dimensions") {
  CHECK(FeatureSetId::parse("gp_unknown").declared_dimension() == 26u);
  CHECK(FeatureSetId::parse("gp_binary+phoneme").declared_dimension() == 73u);
  CHECK(FeatureSetId::parse("ap_scalar").declared_dimension() == 8u);
  CHECK(FeatureSetId::parse("ap_scalar+phoneme").declared_dimension() == 55u);
  CHECK(FeatureSetId::parse("ap_onehot+phoneme").declared_dimension() == 79u);
  CHECK(FeatureSetId::parse("phoneme_onehot").declared_dimension() == 47u);
  CHECK_FALSE(FeatureSetId::parse("custom_unknown").declared_dimension().has_value());
  for (const char* id : {"gp_binary", "gp_unknown+phoneme", "ap_onehot", "phoneme_onehot"}) {
    CHECK(FeatureSetId::parse(id).str() == id);
  }
  CHECK_THROWS_AS(FeatureSetId::parse("gp_fancy"), ValidationError);
  CHECK_THROWS_AS(FeatureSetId::parse("phoneme_onehot+phoneme"), ValidationError);
}

TEST_CASE("bundled tables load with the declared dimensions") {
  CHECK(load("gp_binary").dimension() == 26);
  CHECK(load("gp_unknown").dimension() == 26);
  CHECK(load("ap_scalar").dimension() == 8);
  CHECK(load("ap_onehot").dimension() == 32);
  CHECK(load("phoneme_onehot").dimension() == 47);
  CHECK(load("gp_unknown+phoneme").dimension() == 73);
  CHECK(load("ap_scalar+phoneme").dimension() == 55);
  CHECK(load("ap_onehot+phoneme").dimension() == 79);
}

TEST_CASE("every inventory phoneme has a row in every table") {
  const auto inventory = load_inventory(testing::data_dir() / "phonemes.txt");
  CHECK(inventory.size() == kPhonemeInventorySize);
  for (const char* id : {"gp_binary", "gp_unknown", "ap_scalar", "ap_onehot", "phoneme_onehot", "ap_onehot+phoneme"}) {
    const auto t = load(id);
    for (const auto& p : inventory) {
      REQUIRE(t.contains(p));
      CHECK(t.row(p).size() == t.dimension());
    }
  }
}

TEST_CASE("GP '0' is Unknown in gp_unknown and -1 in gp_binary") {
  const auto unk = load("gp_unknown");
  const auto bin = load("gp_binary");
  // /p/ is unspecified for the dorsal features in the bundled table.
  const auto& pu = encode_target(unk, "p");
  const auto& pb = encode_target(bin, "p");
  REQUIRE(pu.size() == 26);
  bool saw_unknown = false;
  for (std::size_t j = 0; j < 26; ++j) {
    if (pu[j].is_unknown()) {
      saw_unknown = true;
      CHECK(pb[j] == FeatureValue::specified(-1.0));
    } else {
      CHECK(pb[j] == pu[j]);
    }
  }
  CHECK(saw_unknown);
}

TEST_CASE("gp_binary equals gp_unknown with Unknown replaced by -1 for every phoneme") {
  const auto unk = load("gp_unknown");
  const auto bin = load("gp_binary");
  for (const auto& p : unk.phonemes()) {
    const auto& u = unk.row(p);
    const auto& b = bin.row(p);
    for (std::size_t j = 0; j < u.size(); ++j) {
      CHECK(b[j] == FeatureValue::specified(u[j].value_or(-1.0)));
      if (u[j].is_specified() && p != kSilenceLabel) CHECK((u[j].value() == 1.0 || u[j].value() == -1.0));
    }
  }
  CHECK(bin.fully_specified());
  CHECK_FALSE(unk.fully_specified());
}

TEST_CASE("silence encodes as the zero vector in non-one-hot sets") {
  for (const char* id : {"gp_binary", "gp_unknown", "ap_scalar", "ap_onehot"}) {
    const auto t = load(id);
    for (const auto& v : encode_target(t, kSilenceLabel)) CHECK(v == FeatureValue::specified(0.0));
  }
}

TEST_CASE("phoneme one-hot rows have a single +1 at the phoneme index") {
  const auto t = load("phoneme_onehot");
  const auto names = t.dimension_names();
  const auto& k = encode_target(t, "k");
  std::size_t ones = 0;
  for (std::size_t j = 0; j < k.size(); ++j) {
    REQUIRE(k[j].is_specified());
    if (k[j].value() == 1.0) {
      ++ones;
      CHECK(names[j].find("k") != std::string::npos);
    } else {
      CHECK(k[j].value() == 0.0);
    }
  }
  CHECK(ones == 1);
}

TEST_CASE("AP one-hot groups are one-hot or all-Unknown") {
  const auto t = load("ap_onehot");
  REQUIRE(t.onehot_groups().size() == 8);
  bool saw_unknown_group = false;
  for (const auto& p : t.phonemes()) {
    if (p == kSilenceLabel) continue;
    const auto& row = t.row(p);
    for (const auto& g : t.onehot_groups()) {
      std::size_t unknown = 0;
      double sum = 0.0;
      std::size_t ones = 0;
      for (std::size_t j = g.offset; j < g.offset + g.size; ++j) {
        if (row[j].is_unknown()) {
          ++unknown;
        } else {
          sum += row[j].value();
          if (row[j].value() == 1.0) ++ones;
        }
      }
      if (unknown > 0) {
        CHECK(unknown == g.size);
        saw_unknown_group = true;
      } else {
        CHECK(sum == 1.0);
        CHECK(ones == 1);
      }
    }
  }
  CHECK(saw_unknown_group);
  // /k/ has a context-dependent tongue-tip location in the bundled table.
  const auto& k = encode_target(t, "k");
  for (const auto& g : t.onehot_groups()) {
    if (g.name == "tt_loc") {
      for (std::size_t j = g.offset; j < g.offset + g.size; ++j) CHECK(k[j].is_unknown());
    }
  }
}

TEST_CASE("AP scalar values are equidistant in [0, 1] along the category order") {
  const auto scale = ApCategoryScale::load(testing::data_dir() / "ap_scale.tsv");
  CHECK(scale.features().size() == 8);
  CHECK(scale.onehot_dimension() == 32);
  for (const auto& f : scale.features()) {
    REQUIRE(f.values.size() >= 2);
    CHECK(f.values.front() == 0.0);
    CHECK(f.values.back() == 1.0);
    const double step = 1.0 / static_cast<double>(f.values.size() - 1);
    for (std::size_t i = 1; i < f.values.size(); ++i) {
      CHECK(f.values[i] > f.values[i - 1]);
      CHECK(f.values[i] - f.values[i - 1] == doctest::Approx(step).epsilon(1e-12));
    }
  }
  CHECK_THROWS_AS(ApCategoryScale({ApFeatureScale{"x", {"a", "b"}, {0.5, 0.2}}}), ValidationError);
}

TEST_CASE("enriched rows are the base row followed by the phoneme one-hot") {
  const auto base = load("gp_unknown");
  const auto oh = load("phoneme_onehot");
  const auto rich = load("gp_unknown+phoneme");
  for (const auto& p : base.phonemes()) {
    auto expected = base.row(p);
    expected.insert(expected.end(), oh.row(p).begin(), oh.row(p).end());
    CHECK(rich.row(p) == expected);
    for (std::size_t j = base.dimension(); j < rich.dimension(); ++j) CHECK(rich.row(p)[j].is_specified());
  }
  const auto inventory = load_inventory(testing::data_dir() / "phonemes.txt");
  CHECK_THROWS_AS(enrich_with_phonemes(rich, inventory), ValidationError);
  CHECK_THROWS_AS(enrich_with_phonemes(oh, inventory), ValidationError);
  CHECK(enrich_with_phonemes(load("ap_scalar"), inventory).dimension() == 55);
}

TEST_CASE("encode_target is a pure lookup and rejects unknown labels") {
  const auto t = load("gp_unknown");
  for (const auto& p : t.phonemes()) CHECK(encode_target(t, p) == t.row(p));
  CHECK_THROWS_AS(encode_target(t, "qq"), UnknownPhonemeError);
}

TEST_CASE("malformed GP tables are rejected") {
  testing::TempDir dir("gp");
  const auto path = dir.path() / "t.tsv";
  const auto id = FeatureSetId::parse("gp_unknown");

  std::string row25 = "p";
  for (int j = 0; j < 25; ++j) row25 += "\t+";
  write(path, gp_header(26) + row25 + "\n");
  CHECK_THROWS_AS(load_gp_table(path, id), ValidationError);

  std::string row26 = "p";
  for (int j = 0; j < 26; ++j) row26 += "\t+";
  write(path, gp_header(26) + row26 + "\n" + row26 + "\n");
  CHECK_THROWS_AS(load_gp_table(path, id), ValidationError);  // duplicate phoneme

  std::string bad = "p";
  for (int j = 0; j < 26; ++j) bad += j == 3 ? "\tx" : "\t+";
  write(path, gp_header(26) + bad + "\n");
  CHECK_THROWS_AS(load_gp_table(path, id), ValidationError);  // alphabet

  std::string short_row = "p";
  for (int j = 0; j < 5; ++j) short_row += "\t+";
  write(path, gp_header(5) + short_row + "\n");
  CHECK_THROWS_AS(load_gp_table(path, id), ValidationError);  // dimension mismatch
  CHECK(load_gp_table(path, FeatureSetId::parse("custom_unknown")).dimension() == 5);

  write(path, gp_header(26) + row26 + "\nsil" + row26.substr(1) + "\n");
  CHECK_THROWS_AS(load_gp_table(path, id), ValidationError);  // silence row is implicit
}

TEST_CASE("phoneme one-hot is generated from the inventory") {
  const auto inventory = load_inventory(testing::data_dir() / "phonemes.txt");
  const auto t = make_phoneme_onehot(inventory);
  CHECK(t.dimension() == 47);
  CHECK(t.phonemes().size() == 47);
  for (std::size_t i = 0; i < inventory.size(); ++i) {
    const auto& row = t.row(inventory[i]);
    for (std::size_t j = 0; j < row.size(); ++j) CHECK(row[j] == FeatureValue::specified(i == j ? 1.0 : 0.0));
  }
}
