#include "artiprobe/ema.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <map>
#include <optional>

#include <fmt/format.h>

#include "artiprobe/error.hpp"
#include "artiprobe/forward.hpp"
#include "text_util.hpp"

namespace artiprobe {

EmaFormat parse_ema_format(std::string_view name) {
  if (name == "est" || name == "est_track" || name == "ema") return EmaFormat::EstTrack;
  if (name == "csv") return EmaFormat::Csv;
  throw ValidationError("unknown EMA format '" + std::string(name) + "'");
}

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

// Column of each canonical channel within the file's channel list.
std::array<std::size_t, 12> locate_channels(const std::vector<std::string>& names, const std::string& source) {
  std::array<std::size_t, 12> idx{};
  for (std::size_t c = 0; c < kEmaChannels.size(); ++c) {
    const auto it = std::find(names.begin(), names.end(), kEmaChannels[c]);
    if (it == names.end()) throw ValidationError(source + ": missing EMA channel '" + std::string(kEmaChannels[c]) + "'");
    idx[c] = static_cast<std::size_t>(it - names.begin());
  }
  return idx;
}

double infer_sample_rate(const std::vector<double>& times, const std::string& source) {
  if (times.size() < 2) throw ValidationError(source + ": need at least two frames to infer the sample rate");
  const double span = times.back() - times.front();
  if (!(span > 0.0)) throw ValidationError(source + ": non-increasing frame times");
  const double rate = static_cast<double>(times.size() - 1) / span;
  for (double known : {500.0, 100.0})
    if (std::abs(rate - known) <= 0.01 * known) return known;
  throw ValidationError(fmt::format("{}: unsupported sample rate {:.3f} Hz (expected 500 or 100)", source, rate));
}

float read_f32(const char* p, bool little) {
  std::uint32_t bits;
  std::memcpy(&bits, p, 4);
  if (little != (std::endian::native == std::endian::little)) {
    bits = ((bits & 0xFF) << 24) | ((bits & 0xFF00) << 8) | ((bits >> 8) & 0xFF00) | (bits >> 24);
  }
  float v;
  std::memcpy(&v, &bits, 4);
  return v;
}

EmaRecord load_est(const std::filesystem::path& path, const EmaLoadOptions& options) {
  const auto content = detail::read_file(path);
  const auto src = path.string();
  constexpr std::string_view end_marker = "EST_Header_End";
  const auto end_pos = content.find(end_marker);
  if (content.rfind("EST_File", 0) != 0 || end_pos == std::string::npos)
    throw ValidationError(src + ": unreadable EST header");

  std::map<std::string, std::string> header;
  std::map<std::size_t, std::string> channel_names;
  for (auto line : detail::split(std::string_view(content).substr(0, end_pos), '\n')) {
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto space = line.find_first_of(" \t");
    const auto key = std::string(line.substr(0, space));
    const auto value = space == std::string_view::npos ? std::string() : std::string(detail::trim(line.substr(space)));
    const auto lkey = lower(key);
    if (lkey.rfind("channel_", 0) == 0) {
      const auto idx = detail::parse_double(lkey.substr(8));
      if (!idx) throw ValidationError(src + ": bad channel key '" + key + "'");
      channel_names[static_cast<std::size_t>(*idx)] = lower(value);
    } else {
      header[lkey] = value;
    }
  }

  auto number = [&](const std::string& key) -> std::size_t {
    const auto it = header.find(key);
    if (it == header.end()) throw ValidationError(src + ": EST header lacks " + key);
    const auto v = detail::parse_double(it->second);
    if (!v || *v < 0) throw ValidationError(src + ": bad " + key);
    return static_cast<std::size_t>(*v);
  };
  const auto frames = number("numframes");
  const auto nch = number("numchannels");
  std::vector<std::string> names(nch);
  for (const auto& [i, name] : channel_names)
    if (i < nch) names[i] = name;
  const auto columns = locate_channels(names, src);

  const bool breaks = lower(header.count("breakspresent") ? header["breakspresent"] : "true") == "true";
  const bool binary = lower(header.count("datatype") ? header["datatype"] : "binary") == "binary";
  const auto values_per_frame = 1 + (breaks ? 1 : 0) + nch;

  std::vector<double> times(frames);
  Eigen::MatrixXd raw(static_cast<Eigen::Index>(frames), static_cast<Eigen::Index>(nch));
  auto body_start = content.find('\n', end_pos);
  body_start = body_start == std::string::npos ? content.size() : body_start + 1;

  if (binary) {
    const auto order = header.count("byteorder") ? header["byteorder"] : "10";
    const bool little = order != "01";
    const auto need = frames * values_per_frame * 4;
    if (content.size() - body_start < need) throw ValidationError(src + ": truncated EST data");
    const char* p = content.data() + body_start;
    for (std::size_t f = 0; f < frames; ++f) {
      times[f] = read_f32(p, little);
      p += 4 * (breaks ? 2 : 1);
      for (std::size_t c = 0; c < nch; ++c, p += 4)
        raw(static_cast<Eigen::Index>(f), static_cast<Eigen::Index>(c)) = read_f32(p, little);
    }
  } else {
    const auto tokens = detail::split_ws(std::string_view(content).substr(body_start));
    if (tokens.size() < frames * values_per_frame) throw ValidationError(src + ": truncated EST data");
    std::size_t t = 0;
    for (std::size_t f = 0; f < frames; ++f) {
      const auto v = detail::parse_double(tokens[t]);
      if (!v) throw ValidationError(src + ": bad time value");
      times[f] = *v;
      t += breaks ? 2 : 1;
      for (std::size_t c = 0; c < nch; ++c, ++t) {
        const auto x = detail::parse_double(tokens[t]);
        raw(static_cast<Eigen::Index>(f), static_cast<Eigen::Index>(c)) =
            x ? *x : std::numeric_limits<double>::quiet_NaN();
      }
    }
  }

  EmaRecord rec;
  rec.utterance_id = path.stem().string();
  rec.sample_rate = infer_sample_rate(times, src);
  rec.channels.resize(raw.rows(), 12);
  for (std::size_t c = 0; c < 12; ++c) rec.channels.col(static_cast<Eigen::Index>(c)) = raw.col(static_cast<Eigen::Index>(columns[c]));
  rec.repaired_samples = repair_nans(rec.channels, options.max_nan_fraction, src);
  return rec;
}

EmaRecord load_csv(const std::filesystem::path& path, const EmaLoadOptions& options) {
  const auto lines = detail::read_lines(path);
  const auto src = path.string();
  if (lines.empty()) throw ValidationError(src + ": empty CSV");
  std::vector<std::string> names;
  for (auto h : detail::split(lines[0], ',')) names.push_back(lower(detail::trim(h)));
  const auto time_it = std::find(names.begin(), names.end(), "time");
  if (time_it == names.end()) throw ValidationError(src + ": CSV lacks a 'time' column");
  const auto time_col = static_cast<std::size_t>(time_it - names.begin());
  const auto columns = locate_channels(names, src);

  std::vector<double> times;
  std::vector<std::array<double, 12>> rows;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (detail::trim(lines[i]).empty()) continue;
    const auto cols = detail::split(lines[i], ',');
    if (cols.size() != names.size()) throw ParseError(src, i + 1, "wrong arity");
    const auto t = detail::parse_double(cols[time_col]);
    if (!t) throw ParseError(src, i + 1, "bad time value");
    times.push_back(*t);
    std::array<double, 12> row{};
    for (std::size_t c = 0; c < 12; ++c) {
      const auto v = detail::parse_double(cols[columns[c]]);
      row[c] = v ? *v : std::numeric_limits<double>::quiet_NaN();
    }
    rows.push_back(row);
  }

  EmaRecord rec;
  rec.utterance_id = path.stem().string();
  rec.sample_rate = infer_sample_rate(times, src);
  rec.channels.resize(static_cast<Eigen::Index>(rows.size()), 12);
  for (std::size_t f = 0; f < rows.size(); ++f)
    for (std::size_t c = 0; c < 12; ++c) rec.channels(static_cast<Eigen::Index>(f), static_cast<Eigen::Index>(c)) = rows[f][c];
  rec.repaired_samples = repair_nans(rec.channels, options.max_nan_fraction, src);
  return rec;
}

}  // namespace

std::size_t repair_nans(Eigen::MatrixXd& channels, double max_nan_fraction, std::string_view source) {
  std::size_t repaired = 0;
  const auto n = channels.rows();
  for (Eigen::Index c = 0; c < channels.cols(); ++c) {
    auto col = channels.col(c);
    std::vector<Eigen::Index> finite;
    for (Eigen::Index i = 0; i < n; ++i)
      if (std::isfinite(col(i))) finite.push_back(i);
    const auto bad = static_cast<std::size_t>(n) - finite.size();
    if (bad == 0) continue;
    if (finite.empty() || static_cast<double>(bad) > max_nan_fraction * static_cast<double>(n))
      throw ExcessiveNanError(fmt::format("{}: channel {} has {} NaN samples of {}", source,
                                        c < 12 ? std::string(kEmaChannels[static_cast<std::size_t>(c)]) : std::to_string(c),
                                        bad, n));
    std::size_t next = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      while (next < finite.size() && finite[next] < i) ++next;
      if (next < finite.size() && finite[next] == i) continue;
      const bool has_hi = next < finite.size();
      const bool has_lo = next > 0;
      if (has_lo && has_hi) {
        const auto lo = finite[next - 1];
        const auto hi = finite[next];
        const double w = static_cast<double>(i - lo) / static_cast<double>(hi - lo);
        col(i) = (1.0 - w) * col(lo) + w * col(hi);
      } else {
        col(i) = has_hi ? col(finite[next]) : col(finite[next - 1]);
      }
      ++repaired;
    }
  }
  return repaired;
}

EmaRecord load_ema(const std::filesystem::path& path, EmaFormat format, const EmaLoadOptions& options) {
  return format == EmaFormat::EstTrack ? load_est(path, options) : load_csv(path, options);
}

void write_est_track(const std::filesystem::path& path, const EmaRecord& record) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write '" + path.string() + "'");
  const auto n = record.sample_count();
  out << "EST_File Track\n"
      << "DataType binary\n"
      << "NumFrames " << n << "\n"
      << "ByteOrder 10\n"
      << "NumChannels 12\n"
      << "EqualSpace 1\n"
      << "BreaksPresent true\n"
      << "CommentChar ;\n";
  for (std::size_t c = 0; c < kEmaChannels.size(); ++c) out << "Channel_" << c << ' ' << kEmaChannels[c] << '\n';
  out << "EST_Header_End\n";

  auto put = [&](float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    if constexpr (std::endian::native != std::endian::little)
      bits = ((bits & 0xFF) << 24) | ((bits & 0xFF00) << 8) | ((bits >> 8) & 0xFF00) | (bits >> 24);
    char buf[4];
    std::memcpy(buf, &bits, 4);
    out.write(buf, 4);
  };
  for (Eigen::Index f = 0; f < n; ++f) {
    put(static_cast<float>(static_cast<double>(f) / record.sample_rate));
    put(1.0f);
    for (Eigen::Index c = 0; c < 12; ++c) put(static_cast<float>(record.channels(f, c)));
  }
}

void write_ema_csv(const std::filesystem::path& path, const EmaRecord& record) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write '" + path.string() + "'");
  out << "time";
  for (const auto& name : kEmaChannels) out << ',' << name;
  out << '\n';
  for (Eigen::Index f = 0; f < record.sample_count(); ++f) {
    out << fmt::format("{:.17g}", static_cast<double>(f) / record.sample_rate);
    for (Eigen::Index c = 0; c < 12; ++c) out << ',' << fmt::format("{:.17g}", record.channels(f, c));
    out << '\n';
  }
}

void write_articulatory_csv(const std::filesystem::path& path, const ArticulatorySeries& series) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write '" + path.string() + "'");
  for (std::size_t p = 0; p < kArticulatoryParameters.size(); ++p) out << (p ? "," : "") << kArticulatoryParameters[p];
  out << '\n';
  for (Eigen::Index f = 0; f < series.frame_count(); ++f) {
    for (Eigen::Index p = 0; p < series.values.cols(); ++p) out << (p ? "," : "") << fmt::format("{:.17g}", series.values(f, p));
    out << '\n';
  }
}

ArticulatorySeries read_articulatory_csv(const std::filesystem::path& path) {
  const auto lines = detail::read_lines(path);
  const auto src = path.string();
  if (lines.empty()) throw ValidationError(src + ": empty CSV");
  const auto header = detail::split(lines[0], ',');
  if (header.size() != kArticulatoryParameters.size()) throw ParseError(src, 1, "expected 6 articulatory columns");
  for (std::size_t p = 0; p < header.size(); ++p)
    if (detail::trim(header[p]) != kArticulatoryParameters[p]) throw ParseError(src, 1, "unexpected column order");
  ArticulatorySeries series;
  series.utterance_id = path.stem().string();
  series.values.resize(static_cast<Eigen::Index>(lines.size() - 1), 6);
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto cols = detail::split(lines[i], ',');
    if (cols.size() != 6) throw ParseError(src, i + 1, "wrong arity");
    for (std::size_t p = 0; p < 6; ++p) {
      const auto v = detail::parse_double(cols[p]);
      if (!v) throw ParseError(src, i + 1, "bad value");
      series.values(static_cast<Eigen::Index>(i - 1), static_cast<Eigen::Index>(p)) = *v;
    }
  }
  return series;
}

ArticulatorySeries align_frames(const ArticulatorySeries& z, const FeaturalSegmentation& fseg) {
  const auto anchor = static_cast<Eigen::Index>(std::llround(fseg.time_offset * z.frame_rate));
  const auto needed = static_cast<Eigen::Index>(frame_count(fseg.end_time(), z.frame_rate));
  const auto available = std::max<Eigen::Index>(0, z.frame_count() - (anchor + 1));
  if (available + 1 < needed)
    throw ValidationError(fmt::format("{}: articulatory series has {} frames after the trim anchor, {} needed",
                                      fseg.utterance_id, available, needed));
  ArticulatorySeries out;
  out.utterance_id = fseg.utterance_id;
  out.frame_rate = z.frame_rate;
  out.values = z.values.middleRows(anchor + 1, std::min(needed, available));
  return out;
}

}  // namespace artiprobe
