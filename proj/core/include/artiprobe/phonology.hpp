#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace artiprobe {

// A target feature value: either a specified real number or unknown
// (left to be determined from context by the forward model).
class FeatureValue {
 public:
  constexpr FeatureValue() = default;

  static constexpr FeatureValue specified(double v) { return FeatureValue(v); }
  static constexpr FeatureValue unknown() { return FeatureValue(); }

  constexpr bool is_specified() const noexcept { return value_.has_value(); }
  constexpr bool is_unknown() const noexcept { return !value_.has_value(); }
  // Precondition: is_specified().
  constexpr double value() const { return *value_; }
  constexpr double value_or(double fallback) const noexcept { return value_.value_or(fallback); }

  friend constexpr bool operator==(const FeatureValue&, const FeatureValue&) = default;

 private:
  constexpr explicit FeatureValue(double v) : value_(v) {}
  std::optional<double> value_;
};

using FeatureVector = std::vector<FeatureValue>;

enum class FeatureBase {
  GpBinary,
  GpUnknown,
  ApScalar,
  ApOneHot,
  PhonemeOneHot,
  CustomBinary,   // GP alphabet, arbitrary dimension
  CustomUnknown,
};

struct FeatureSetId {
  FeatureBase base = FeatureBase::GpUnknown;
  bool enriched = false;

  // "gp_unknown", "ap_onehot+phoneme", ...
  static FeatureSetId parse(std::string_view id);
  std::string str() const;

  // Declared dimension, or nullopt for custom sets (taken from the file header).
  std::optional<std::size_t> declared_dimension() const;

  friend bool operator==(const FeatureSetId&, const FeatureSetId&) = default;
};

inline constexpr std::size_t kGpDimension = 26;
inline constexpr std::size_t kApScalarDimension = 8;
inline constexpr std::size_t kApOneHotDimension = 32;
inline constexpr std::size_t kPhonemeInventorySize = 47;
inline constexpr std::string_view kSilenceLabel = "sil";

// Ordered categories of one AP feature with their scalar values.
struct ApFeatureScale {
  std::string feature;
  std::vector<std::string> categories;  // in rank order
  std::vector<double> values;           // strictly increasing, equidistant in [0, 1]

  std::optional<std::size_t> index_of(std::string_view category) const;
};

class ApCategoryScale {
 public:
  ApCategoryScale() = default;
  explicit ApCategoryScale(std::vector<ApFeatureScale> features);

  // TSV: `feature<TAB>category<TAB>rank`, ranks 0..n-1 per feature.
  static ApCategoryScale load(const std::filesystem::path& path);

  std::span<const ApFeatureScale> features() const noexcept { return features_; }
  const ApFeatureScale& feature(std::string_view name) const;
  std::size_t onehot_dimension() const noexcept;

 private:
  std::vector<ApFeatureScale> features_;
};

// Half-open range of dimensions forming one one-hot group.
struct FeatureGroup {
  std::string name;
  std::size_t offset = 0;
  std::size_t size = 0;
};

// Immutable phoneme -> target vector lookup.
class FeatureTable {
 public:
  FeatureTable(FeatureSetId id, std::vector<std::string> dimension_names,
               std::map<std::string, FeatureVector, std::less<>> rows,
               std::vector<FeatureGroup> onehot_groups = {});

  const FeatureSetId& id() const noexcept { return id_; }
  std::size_t dimension() const noexcept { return names_.size(); }
  std::span<const std::string> dimension_names() const noexcept { return names_; }
  std::span<const FeatureGroup> onehot_groups() const noexcept { return groups_; }

  bool contains(std::string_view phoneme) const;
  // Throws UnknownPhonemeError.
  const FeatureVector& row(std::string_view phoneme) const;
  std::vector<std::string> phonemes() const;
  // True when no row contains an Unknown entry.
  bool fully_specified() const noexcept;

 private:
  FeatureSetId id_;
  std::vector<std::string> names_;
  std::map<std::string, FeatureVector, std::less<>> rows_;
  std::vector<FeatureGroup> groups_;
};

// Where the tables for each feature family live on disk.
struct FeatureTableSources {
  std::filesystem::path gp;         // GP TSV, also used for custom_* sets
  std::filesystem::path ap;         // AP category TSV
  std::filesystem::path ap_scale;   // ApCategoryScale TSV
  std::filesystem::path inventory;  // phoneme list, one per line
};

std::vector<std::string> load_inventory(const std::filesystem::path& path);

FeatureTable load_gp_table(const std::filesystem::path& path, FeatureSetId id);
FeatureTable load_ap_table(const std::filesystem::path& path, const ApCategoryScale& scale,
                           FeatureSetId id);
FeatureTable make_phoneme_onehot(std::span<const std::string> inventory);

// Loads the base table named by `id` and enriches it when id.enriched is set.
FeatureTable load_feature_table(const FeatureTableSources& sources, FeatureSetId id);

// Pure lookup; throws UnknownPhonemeError.
const FeatureVector& encode_target(const FeatureTable& table, std::string_view phoneme);

// Concatenates the base rows with the one-hot encoding of each phoneme.
FeatureTable enrich_with_phonemes(const FeatureTable& base, std::span<const std::string> inventory);

}  // namespace artiprobe
