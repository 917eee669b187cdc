#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "artiprobe/alignment.hpp"

namespace artiprobe {

// Midsagittal (x, y) coordinates of tongue tip, tongue body, tongue dorsum,
// lower incisor, upper lip and lower lip, in this column order.
inline constexpr std::array<std::string_view, 12> kEmaChannels = {
    "tt_x", "tt_y", "tb_x", "tb_y", "td_x", "td_y", "li_x", "li_y", "ul_x", "ul_y", "ll_x", "ll_y"};

namespace ema_channel {
inline constexpr int tt_x = 0, tt_y = 1, tb_x = 2, tb_y = 3, td_x = 4, td_y = 5;
inline constexpr int li_x = 6, li_y = 7, ul_x = 8, ul_y = 9, ll_x = 10, ll_y = 11;
}  // namespace ema_channel

inline constexpr std::array<std::string_view, 6> kArticulatoryParameters = {
    "jaw_height", "tongue_body", "tongue_dorsum", "tongue_tip", "lip_protrusion", "lip_height"};

struct EmaRecord {
  std::string utterance_id;
  double sample_rate = 500.0;
  Eigen::MatrixXd channels;  // n x 12, kEmaChannels order
  std::size_t repaired_samples = 0;

  Eigen::Index sample_count() const noexcept { return channels.rows(); }
};

enum class EmaFormat { EstTrack, Csv };

EmaFormat parse_ema_format(std::string_view name);

struct EmaLoadOptions {
  // Reject a channel when more than this fraction of its samples are NaN.
  double max_nan_fraction = 0.05;
};

// Reads an EST track (binary or ascii) or a CSV with a `time` column plus
// named channel columns. Extra channels (velum, bridge) are ignored; isolated
// NaNs are repaired by linear interpolation.
EmaRecord load_ema(const std::filesystem::path& path, EmaFormat format, const EmaLoadOptions& options = {});

// Binary little-endian EST track with a time column and break flags.
void write_est_track(const std::filesystem::path& path, const EmaRecord& record);
void write_ema_csv(const std::filesystem::path& path, const EmaRecord& record);

// Replaces NaN runs by linear interpolation between the nearest finite
// neighbours (constant extension at the edges). Returns the repaired count.
std::size_t repair_nans(Eigen::MatrixXd& channels, double max_nan_fraction, std::string_view source);

// Six articulatory parameters at 100 Hz.
struct ArticulatorySeries {
  std::string utterance_id;
  double frame_rate = 100.0;
  Eigen::MatrixXd values;  // n x 6, kArticulatoryParameters order

  Eigen::Index frame_count() const noexcept { return values.rows(); }
};

void write_articulatory_csv(const std::filesystem::path& path, const ArticulatorySeries& series);
ArticulatorySeries read_articulatory_csv(const std::filesystem::path& path);

// Crops `z` to the trimmed utterance of `fseg`: the frame at the trim offset is
// the tau = 0 anchor, and row k-1 of the result is the frame at tau = k / rate
// for k = 1..n, matching synthesize(). A final frame missing from `z` is
// tolerated (one-frame rounding slack); anything shorter is an error.
ArticulatorySeries align_frames(const ArticulatorySeries& z, const FeaturalSegmentation& fseg);

}  // namespace artiprobe
