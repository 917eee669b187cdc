#include "artiprobe/trajectory_io.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <vector>

#include <fmt/format.h>

#include "artiprobe/error.hpp"
#include "text_util.hpp"

static_assert(std::endian::native == std::endian::little, "binary trajectory I/O assumes a little-endian host");

namespace artiprobe {

namespace {

constexpr char kMagic[4] = {'A', 'T', 'R', 'J'};

template <typename T>
void put(std::ofstream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T get(std::ifstream& in, const std::filesystem::path& path) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!in) throw ValidationError(path.string() + ": truncated trajectory file");
  return v;
}

}  // namespace

void write_trajectory_csv(const std::filesystem::path& path, const Trajectory& traj,
                          std::span<const std::string> dimension_names) {
  if (!dimension_names.empty() && static_cast<Eigen::Index>(dimension_names.size()) != traj.dimension()) {
    throw ValidationError("write_trajectory_csv: dimension name count does not match the trajectory");
  }
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw RuntimeFailure("cannot write " + path.string());
  out << "frame";
  for (Eigen::Index j = 0; j < traj.dimension(); ++j) {
    out << ',' << (dimension_names.empty() ? fmt::format("f{}", j) : dimension_names[static_cast<std::size_t>(j)]);
  }
  out << '\n';
  for (Eigen::Index k = 0; k < traj.frame_count(); ++k) {
    out << (k + 1);
    for (Eigen::Index j = 0; j < traj.dimension(); ++j) out << ',' << fmt::format("{:.17g}", traj.frames(k, j));
    out << '\n';
  }
}

Trajectory read_trajectory_csv(const std::filesystem::path& path, double frame_rate) {
  const auto lines = detail::read_lines(path);
  if (lines.empty()) throw ParseError(path.string(), 1, "empty trajectory file");
  const auto header = detail::split(detail::trim(lines.front()), ',');
  if (header.empty() || detail::trim(header.front()) != "frame") throw ParseError(path.string(), 1, "expected a 'frame' column first");
  const std::size_t d = header.size() - 1;
  std::vector<std::vector<double>> rows;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto line = detail::trim(lines[i]);
    if (line.empty()) continue;
    const auto fields = detail::split(line, ',');
    if (fields.size() != d + 1) throw ParseError(path.string(), i + 1, fmt::format("expected {} fields", d + 1));
    std::vector<double> row;
    for (std::size_t j = 1; j < fields.size(); ++j) {
      const auto v = detail::parse_double(detail::trim(fields[j]));
      if (!v) throw ParseError(path.string(), i + 1, "bad number '" + std::string(fields[j]) + "'");
      row.push_back(*v);
    }
    rows.push_back(std::move(row));
  }
  Trajectory t;
  t.frame_rate = frame_rate;
  t.frames.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(d));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < d; ++j) t.frames(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  }
  return t;
}

void write_trajectory_binary(const std::filesystem::path& path, const Trajectory& traj) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw RuntimeFailure("cannot write " + path.string());
  out.write(kMagic, sizeof kMagic);
  put(out, traj.frame_rate);
  put(out, static_cast<std::uint64_t>(traj.frame_count()));
  put(out, static_cast<std::uint64_t>(traj.dimension()));
  for (Eigen::Index k = 0; k < traj.frame_count(); ++k) {
    for (Eigen::Index j = 0; j < traj.dimension(); ++j) put(out, traj.frames(k, j));
  }
  if (!out) throw RuntimeFailure("write failed: " + path.string());
}

Trajectory read_trajectory_binary(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path.string());
  char magic[4];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0) throw ValidationError(path.string() + ": not a trajectory file");
  Trajectory t;
  t.frame_rate = get<double>(in, path);
  const auto rows = get<std::uint64_t>(in, path);
  const auto cols = get<std::uint64_t>(in, path);
  if (rows > (1ULL << 32) || cols > (1ULL << 20)) throw ValidationError(path.string() + ": implausible trajectory shape");
  t.frames.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index k = 0; k < t.frames.rows(); ++k) {
    for (Eigen::Index j = 0; j < t.frames.cols(); ++j) t.frames(k, j) = get<double>(in, path);
  }
  return t;
}

}  // namespace artiprobe
