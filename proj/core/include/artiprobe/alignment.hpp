#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "artiprobe/phonology.hpp"

namespace artiprobe {

struct Phone {
  std::string label;
  double start = 0.0;  // seconds
  double end = 0.0;

  friend bool operator==(const Phone&, const Phone&) = default;
};

// Contiguous phone-level alignment of one utterance.
struct PhoneSegmentation {
  std::string utterance_id;
  std::vector<Phone> phones;
  // Seconds removed from the front by trim_and_filter; maps trimmed time back
  // to the recording clock.
  double time_offset = 0.0;
  // Set by trim_and_filter; trimming a trimmed segmentation is a no-op.
  bool trimmed = false;

  friend bool operator==(const PhoneSegmentation&, const PhoneSegmentation&) = default;
};

enum class AlignmentFormat { Lab, TextGrid };

AlignmentFormat parse_alignment_format(std::string_view name);

class SilenceSet {
 public:
  // sil, sp, spn and the empty label.
  SilenceSet();
  explicit SilenceSet(std::set<std::string, std::less<>> labels) : labels_(std::move(labels)) {}

  bool contains(std::string_view label) const { return labels_.find(label) != labels_.end(); }
  const std::set<std::string, std::less<>>& labels() const noexcept { return labels_; }

 private:
  std::set<std::string, std::less<>> labels_;
};

struct AlignmentOptions {
  // TextGrid tier to read; empty selects the first interval tier.
  std::string tier;
  // Lowercase labels and strip trailing stress digits (AA1 -> aa).
  bool normalize_labels = true;
  // Tolerated gap/overlap between consecutive intervals, seconds.
  double contiguity_tolerance = 1e-6;
};

std::string normalize_label(std::string_view label);

// Throws ValidationError on gaps, overlaps, empty tiers or unparseable input.
PhoneSegmentation parse_alignment(const std::filesystem::path& path, AlignmentFormat format,
                                  const AlignmentOptions& options = {});
PhoneSegmentation parse_lab(std::string_view text, std::string utterance_id,
                            const AlignmentOptions& options = {});
PhoneSegmentation parse_textgrid(std::string_view text, std::string utterance_id,
                                 const AlignmentOptions& options = {});

// Checks contiguity, positive durations and non-negative times.
void validate_segmentation(const PhoneSegmentation& seg, double tolerance = 1e-6);

// Drops the leading and trailing silence and re-times the remainder to start
// at 0. Rejects (nullopt) utterances whose original boundary phones are not
// silence, or that contain nothing but silence.
std::optional<PhoneSegmentation> trim_and_filter(const PhoneSegmentation& seg,
                                                 const SilenceSet& silence = {});

struct Interval {
  double start = 0.0;
  double end = 0.0;

  double midpoint() const noexcept { return 0.5 * (start + end); }
  friend bool operator==(const Interval&, const Interval&) = default;
};

// Targets X (K+2 rows of d values), intervals Y and midpoint timings t.
// Row 0 and row K+1 are the zero boundary targets with degenerate intervals.
struct FeaturalSegmentation {
  std::string utterance_id;
  std::vector<std::string> labels;  // K+2 entries; boundary rows labelled kSilenceLabel
  std::vector<FeatureVector> targets;
  std::vector<Interval> intervals;
  std::vector<double> timings;
  std::size_t dimension = 0;
  double time_offset = 0.0;

  std::size_t intermediate_count() const noexcept { return targets.size() < 2 ? 0 : targets.size() - 2; }
  std::size_t target_count() const noexcept { return targets.size(); }
  double end_time() const noexcept { return timings.empty() ? 0.0 : timings.back(); }
  bool fully_specified() const noexcept;
};

// Precondition: seg already trimmed. Silence labels inside the utterance map
// to the table's silence row.
FeaturalSegmentation build_featural(const PhoneSegmentation& seg, const FeatureTable& table,
                                    const SilenceSet& silence = {});

// Assembles a segmentation from raw intermediate targets (used by tests and the
// synthetic generator); intervals must be contiguous from 0.
FeaturalSegmentation make_featural(std::string utterance_id, std::vector<FeatureVector> intermediate,
                                   std::vector<Interval> intervals);

// Throws ValidationError when an invariant is violated.
void validate_featural(const FeaturalSegmentation& fseg);

}  // namespace artiprobe
