#include "artiprobe/phonology.hpp"

#include <algorithm>
#include <set>

#include "artiprobe/error.hpp"
#include "text_util.hpp"

namespace artiprobe {

namespace {

struct BaseName {
  FeatureBase base;
  std::string_view name;
};

constexpr BaseName kBaseNames[] = {
    {FeatureBase::GpBinary, "gp_binary"},
    {FeatureBase::GpUnknown, "gp_unknown"},
    {FeatureBase::ApScalar, "ap_scalar"},
    {FeatureBase::ApOneHot, "ap_onehot"},
    {FeatureBase::PhonemeOneHot, "phoneme_onehot"},
    {FeatureBase::CustomBinary, "custom_binary"},
    {FeatureBase::CustomUnknown, "custom_unknown"},
};

constexpr std::string_view kEnrichedSuffix = "+phoneme";

bool is_gp_like(FeatureBase b) {
  return b == FeatureBase::GpBinary || b == FeatureBase::GpUnknown ||
         b == FeatureBase::CustomBinary || b == FeatureBase::CustomUnknown;
}

bool keeps_unknowns(FeatureBase b) {
  return b == FeatureBase::GpUnknown || b == FeatureBase::CustomUnknown ||
         b == FeatureBase::ApScalar || b == FeatureBase::ApOneHot;
}

}  // namespace

FeatureSetId FeatureSetId::parse(std::string_view id) {
  FeatureSetId out;
  std::string_view base = id;
  if (base.size() > kEnrichedSuffix.size() &&
      base.substr(base.size() - kEnrichedSuffix.size()) == kEnrichedSuffix) {
    out.enriched = true;
    base.remove_suffix(kEnrichedSuffix.size());
  }
  for (const auto& b : kBaseNames) {
    if (b.name == base) {
      out.base = b.base;
      if (out.enriched && out.base == FeatureBase::PhonemeOneHot)
        throw ValidationError("phoneme_onehot cannot be enriched with phonemes");
      return out;
    }
  }
  throw ValidationError("unknown feature set id '" + std::string(id) + "'");
}

std::string FeatureSetId::str() const {
  for (const auto& b : kBaseNames) {
    if (b.base == base) return std::string(b.name) + (enriched ? std::string(kEnrichedSuffix) : "");
  }
  return "?";
}

std::optional<std::size_t> FeatureSetId::declared_dimension() const {
  std::size_t d = 0;
  switch (base) {
    case FeatureBase::GpBinary:
    case FeatureBase::GpUnknown: d = kGpDimension; break;
    case FeatureBase::ApScalar: d = kApScalarDimension; break;
    case FeatureBase::ApOneHot: d = kApOneHotDimension; break;
    case FeatureBase::PhonemeOneHot: d = kPhonemeInventorySize; break;
    case FeatureBase::CustomBinary:
    case FeatureBase::CustomUnknown: return std::nullopt;
  }
  return enriched ? d + kPhonemeInventorySize : d;
}

std::optional<std::size_t> ApFeatureScale::index_of(std::string_view category) const {
  const auto it = std::find(categories.begin(), categories.end(), category);
  if (it == categories.end()) return std::nullopt;
  return static_cast<std::size_t>(it - categories.begin());
}

ApCategoryScale::ApCategoryScale(std::vector<ApFeatureScale> features)
    : features_(std::move(features)) {
  for (const auto& f : features_) {
    if (f.categories.size() < 2)
      throw ValidationError("AP feature '" + f.feature + "' needs at least two categories");
    if (f.values.size() != f.categories.size())
      throw ValidationError("AP feature '" + f.feature + "' has mismatched values");
    for (std::size_t i = 1; i < f.values.size(); ++i) {
      if (!(f.values[i] > f.values[i - 1]))
        throw ValidationError("AP feature '" + f.feature + "' values not strictly increasing");
    }
  }
}

ApCategoryScale ApCategoryScale::load(const std::filesystem::path& path) {
  const auto lines = detail::read_lines(path);
  const auto src = path.string();
  if (lines.empty()) throw ParseError(src, 1, "empty file");
  const auto header = detail::split(lines[0], '\t');
  if (header.size() != 3 || header[0] != "feature" || header[1] != "category" || header[2] != "rank")
    throw ParseError(src, 1, "expected header feature<TAB>category<TAB>rank");

  // feature -> (rank -> category), in first-seen feature order
  std::vector<std::string> order;
  std::map<std::string, std::map<int, std::string>> table;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (detail::trim(lines[i]).empty()) continue;
    const auto cols = detail::split(lines[i], '\t');
    if (cols.size() != 3) throw ParseError(src, i + 1, "wrong arity");
    const auto rank = detail::parse_double(cols[2]);
    if (!rank || *rank < 0 || *rank != static_cast<int>(*rank))
      throw ParseError(src, i + 1, "rank must be a non-negative integer");
    const std::string feature(cols[0]);
    if (!table.contains(feature)) order.push_back(feature);
    auto& ranks = table[feature];
    if (!ranks.emplace(static_cast<int>(*rank), std::string(cols[1])).second)
      throw ParseError(src, i + 1, "duplicate rank for feature '" + feature + "'");
  }

  std::vector<ApFeatureScale> features;
  for (const auto& name : order) {
    const auto& ranks = table[name];
    ApFeatureScale f;
    f.feature = name;
    int expected = 0;
    for (const auto& [rank, category] : ranks) {
      if (rank != expected++)
        throw ValidationError(src + ": ranks of '" + name + "' are not contiguous from 0");
      f.categories.push_back(category);
    }
    const auto n = f.categories.size();
    for (std::size_t k = 0; k < n; ++k)
      f.values.push_back(n > 1 ? static_cast<double>(k) / static_cast<double>(n - 1) : 0.0);
    features.push_back(std::move(f));
  }
  return ApCategoryScale(std::move(features));
}

const ApFeatureScale& ApCategoryScale::feature(std::string_view name) const {
  for (const auto& f : features_)
    if (f.feature == name) return f;
  throw ValidationError("AP scale has no feature '" + std::string(name) + "'");
}

std::size_t ApCategoryScale::onehot_dimension() const noexcept {
  std::size_t d = 0;
  for (const auto& f : features_) d += f.categories.size();
  return d;
}

FeatureTable::FeatureTable(FeatureSetId id, std::vector<std::string> dimension_names,
                           std::map<std::string, FeatureVector, std::less<>> rows,
                           std::vector<FeatureGroup> onehot_groups)
    : id_(id), names_(std::move(dimension_names)), rows_(std::move(rows)), groups_(std::move(onehot_groups)) {
  if (names_.empty()) throw ValidationError("feature table has no dimensions");
  for (const auto& [phoneme, vec] : rows_) {
    if (vec.size() != names_.size())
      throw ValidationError("row '" + phoneme + "' has " + std::to_string(vec.size()) +
                            " entries, expected " + std::to_string(names_.size()));
  }
  if (const auto d = id_.declared_dimension(); d && *d != names_.size())
    throw ValidationError("dimension mismatch: " + id_.str() + " declares " + std::to_string(*d) +
                          " features, table has " + std::to_string(names_.size()));
}

bool FeatureTable::contains(std::string_view phoneme) const { return rows_.find(phoneme) != rows_.end(); }

const FeatureVector& FeatureTable::row(std::string_view phoneme) const {
  const auto it = rows_.find(phoneme);
  if (it == rows_.end()) throw UnknownPhonemeError(std::string(phoneme));
  return it->second;
}

std::vector<std::string> FeatureTable::phonemes() const {
  std::vector<std::string> out;
  out.reserve(rows_.size());
  for (const auto& [p, _] : rows_) out.push_back(p);
  return out;
}

bool FeatureTable::fully_specified() const noexcept {
  for (const auto& [_, vec] : rows_)
    for (const auto& v : vec)
      if (v.is_unknown()) return false;
  return true;
}

std::vector<std::string> load_inventory(const std::filesystem::path& path) {
  std::vector<std::string> out;
  std::set<std::string, std::less<>> seen;
  const auto lines = detail::read_lines(path);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto label = detail::trim(lines[i]);
    if (label.empty() || label.front() == '#') continue;
    if (!seen.emplace(label).second)
      throw ParseError(path.string(), i + 1, "duplicate phoneme '" + std::string(label) + "'");
    out.emplace_back(label);
  }
  return out;
}

namespace {

struct RawTable {
  std::vector<std::string> header;  // dimension names
  std::vector<std::pair<std::string, std::vector<std::string>>> rows;
};

RawTable read_tsv_table(const std::filesystem::path& path) {
  const auto lines = detail::read_lines(path);
  const auto src = path.string();
  if (lines.empty()) throw ParseError(src, 1, "empty table");
  const auto header = detail::split(lines[0], '\t');
  if (header.size() < 2 || header[0] != "phoneme")
    throw ParseError(src, 1, "expected header phoneme<TAB>f1<TAB>...");

  RawTable raw;
  for (std::size_t i = 1; i < header.size(); ++i) raw.header.emplace_back(header[i]);

  std::set<std::string, std::less<>> seen;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (detail::trim(lines[i]).empty()) continue;
    const auto cols = detail::split(lines[i], '\t');
    if (cols.size() != header.size())
      throw ParseError(src, i + 1,
                       "wrong arity: " + std::to_string(cols.size() - 1) + " values, expected " +
                           std::to_string(header.size() - 1));
    std::string phoneme(cols[0]);
    if (phoneme == kSilenceLabel)
      throw ParseError(src, i + 1, "silence row is implicit and must not be listed");
    if (!seen.emplace(phoneme).second) throw ParseError(src, i + 1, "duplicate phoneme '" + phoneme + "'");
    std::vector<std::string> values;
    for (std::size_t c = 1; c < cols.size(); ++c) values.emplace_back(detail::trim(cols[c]));
    raw.rows.emplace_back(std::move(phoneme), std::move(values));
  }
  return raw;
}

}  // namespace

FeatureTable load_gp_table(const std::filesystem::path& path, FeatureSetId id) {
  if (!is_gp_like(id.base)) throw ValidationError(id.str() + " is not a GP-format feature set");
  const auto raw = read_tsv_table(path);
  const bool unknowns = keeps_unknowns(id.base);
  const auto d = raw.header.size();

  FeatureSetId base_id{id.base, false};
  if (const auto declared = base_id.declared_dimension(); declared && *declared != d)
    throw ValidationError("dimension mismatch: " + base_id.str() + " expects " + std::to_string(*declared) +
                          " features, '" + path.string() + "' has " + std::to_string(d));

  std::map<std::string, FeatureVector, std::less<>> rows;
  for (std::size_t r = 0; r < raw.rows.size(); ++r) {
    const auto& [phoneme, values] = raw.rows[r];
    FeatureVector vec;
    vec.reserve(d);
    for (const auto& v : values) {
      if (v == "+") {
        vec.push_back(FeatureValue::specified(1.0));
      } else if (v == "-") {
        vec.push_back(FeatureValue::specified(-1.0));
      } else if (v == "0") {
        // binary sets read a zero as the absence of the feature
        vec.push_back(unknowns ? FeatureValue::unknown() : FeatureValue::specified(-1.0));
      } else {
        throw ParseError(path.string(), r + 2, "value '" + v + "' outside {+,-,0}");
      }
    }
    rows.emplace(phoneme, std::move(vec));
  }
  rows.emplace(std::string(kSilenceLabel), FeatureVector(d, FeatureValue::specified(0.0)));
  return FeatureTable(base_id, raw.header, std::move(rows));
}

FeatureTable load_ap_table(const std::filesystem::path& path, const ApCategoryScale& scale, FeatureSetId id) {
  if (id.base != FeatureBase::ApScalar && id.base != FeatureBase::ApOneHot)
    throw ValidationError(id.str() + " is not an AP feature set");
  const bool onehot = id.base == FeatureBase::ApOneHot;
  const auto raw = read_tsv_table(path);

  std::vector<const ApFeatureScale*> columns;
  std::vector<std::string> names;
  std::vector<FeatureGroup> groups;
  for (const auto& h : raw.header) {
    const auto& f = scale.feature(h);
    columns.push_back(&f);
    if (onehot) {
      groups.push_back({f.feature, names.size(), f.categories.size()});
      for (const auto& c : f.categories) names.push_back(f.feature + "=" + c);
    } else {
      names.push_back(f.feature);
    }
  }

  std::map<std::string, FeatureVector, std::less<>> rows;
  for (std::size_t r = 0; r < raw.rows.size(); ++r) {
    const auto& [phoneme, values] = raw.rows[r];
    FeatureVector vec;
    for (std::size_t c = 0; c < values.size(); ++c) {
      const auto& f = *columns[c];
      if (values[c] == "?") {
        const auto n = onehot ? f.categories.size() : 1;
        vec.insert(vec.end(), n, FeatureValue::unknown());
        continue;
      }
      const auto idx = f.index_of(values[c]);
      if (!idx)
        throw ParseError(path.string(), r + 2,
                         "category '" + values[c] + "' not defined for feature '" + f.feature + "'");
      if (onehot) {
        for (std::size_t k = 0; k < f.categories.size(); ++k)
          vec.push_back(FeatureValue::specified(k == *idx ? 1.0 : 0.0));
      } else {
        vec.push_back(FeatureValue::specified(f.values[*idx]));
      }
    }
    rows.emplace(phoneme, std::move(vec));
  }
  rows.emplace(std::string(kSilenceLabel), FeatureVector(names.size(), FeatureValue::specified(0.0)));
  return FeatureTable(FeatureSetId{id.base, false}, std::move(names), std::move(rows), std::move(groups));
}

FeatureTable make_phoneme_onehot(std::span<const std::string> inventory) {
  std::map<std::string, FeatureVector, std::less<>> rows;
  std::vector<std::string> names;
  const auto n = inventory.size();
  for (std::size_t i = 0; i < n; ++i) {
    FeatureVector vec(n, FeatureValue::specified(0.0));
    vec[i] = FeatureValue::specified(1.0);
    if (!rows.emplace(inventory[i], std::move(vec)).second)
      throw ValidationError("duplicate phoneme '" + inventory[i] + "' in inventory");
    names.push_back("ph=" + inventory[i]);
  }
  return FeatureTable(FeatureSetId{FeatureBase::PhonemeOneHot, false}, std::move(names), std::move(rows),
                      {FeatureGroup{"phoneme", 0, n}});
}

FeatureTable load_feature_table(const FeatureTableSources& sources, FeatureSetId id) {
  const auto base = [&]() -> FeatureTable {
    switch (id.base) {
      case FeatureBase::GpBinary:
      case FeatureBase::GpUnknown:
      case FeatureBase::CustomBinary:
      case FeatureBase::CustomUnknown: return load_gp_table(sources.gp, FeatureSetId{id.base, false});
      case FeatureBase::ApScalar:
      case FeatureBase::ApOneHot:
        return load_ap_table(sources.ap, ApCategoryScale::load(sources.ap_scale), FeatureSetId{id.base, false});
      case FeatureBase::PhonemeOneHot: {
        const auto inventory = load_inventory(sources.inventory);
        return make_phoneme_onehot(inventory);
      }
    }
    throw ValidationError("unhandled feature set");
  }();
  if (!id.enriched) return base;
  const auto inventory = load_inventory(sources.inventory);
  return enrich_with_phonemes(base, inventory);
}

const FeatureVector& encode_target(const FeatureTable& table, std::string_view phoneme) {
  return table.row(phoneme);
}

FeatureTable enrich_with_phonemes(const FeatureTable& base, std::span<const std::string> inventory) {
  if (base.id().enriched) throw ValidationError("feature table is already enriched");
  if (base.id().base == FeatureBase::PhonemeOneHot)
    throw ValidationError("phoneme_onehot cannot be enriched with phonemes");

  const auto onehot = make_phoneme_onehot(inventory);
  const auto base_phonemes = base.phonemes();
  for (const auto& p : base_phonemes)
    if (!onehot.contains(p)) throw ValidationError("phoneme '" + p + "' is missing from the inventory");
  for (const auto& p : inventory)
    if (!base.contains(p)) throw ValidationError("inventory phoneme '" + p + "' has no base feature row");

  std::vector<std::string> names(base.dimension_names().begin(), base.dimension_names().end());
  names.insert(names.end(), onehot.dimension_names().begin(), onehot.dimension_names().end());

  std::map<std::string, FeatureVector, std::less<>> rows;
  for (const auto& p : base_phonemes) {
    FeatureVector vec = base.row(p);
    const auto& tail = onehot.row(p);
    vec.insert(vec.end(), tail.begin(), tail.end());
    rows.emplace(p, std::move(vec));
  }

  std::vector<FeatureGroup> groups(base.onehot_groups().begin(), base.onehot_groups().end());
  groups.push_back({"phoneme", base.dimension(), onehot.dimension()});
  return FeatureTable(FeatureSetId{base.id().base, true}, std::move(names), std::move(rows), std::move(groups));
}

}  // namespace artiprobe
