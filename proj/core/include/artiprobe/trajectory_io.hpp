#pragma once

#include <filesystem>
#include <span>
#include <string>

#include "artiprobe/forward.hpp"

namespace artiprobe {

// `frame,<dims...>` with one row per frame; frame k (1-based) sits at k / rate.
void write_trajectory_csv(const std::filesystem::path& path, const Trajectory& traj,
                          std::span<const std::string> dimension_names = {});
Trajectory read_trajectory_csv(const std::filesystem::path& path, double frame_rate = 100.0);

// Binary layout: "ATRJ", f64 frame rate, u64 rows, u64 cols, then row-major
// f64 values; all little-endian.
void write_trajectory_binary(const std::filesystem::path& path, const Trajectory& traj);
Trajectory read_trajectory_binary(const std::filesystem::path& path);

}  // namespace artiprobe
