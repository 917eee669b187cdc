#include "artiprobe/report.hpp"

#include <fstream>

#include <fmt/format.h>

#include "artiprobe/error.hpp"

namespace artiprobe {

namespace {

std::string cell(double v) { return fmt::format("{:.3f}", v); }
std::string cell(const std::optional<double>& v) { return v ? cell(*v) : std::string("NA"); }
std::string full(double v) { return fmt::format("{:.17g}", v); }
std::string full(const std::optional<double>& v) { return v ? full(*v) : std::string("NA"); }

std::size_t label_width(const std::vector<MethodScore>& rows) {
  std::size_t w = 6;
  for (const auto& r : rows) w = std::max(w, r.label.size());
  return w;
}

std::string table(const std::vector<MethodScore>& rows, const std::vector<std::string>& header,
                  const std::vector<std::vector<std::string>>& body) {
  const std::size_t lw = label_width(rows);
  std::vector<std::size_t> widths;
  for (const auto& h : header) widths.push_back(std::max<std::size_t>(h.size(), 6));
  std::string out = fmt::format("{:<{}}", "method", lw);
  for (std::size_t c = 0; c < header.size(); ++c) out += fmt::format("  {:>{}}", header[c], widths[c]);
  out += '\n';
  for (std::size_t r = 0; r < rows.size(); ++r) {
    out += fmt::format("{:<{}}", rows[r].label, lw);
    for (std::size_t c = 0; c < body[r].size(); ++c) out += fmt::format("  {:>{}}", body[r][c], widths[c]);
    out += '\n';
  }
  return out;
}

void require_same_columns(const std::vector<MethodScore>& rows, bool speakers) {
  for (const auto& r : rows) {
    const auto& a = speakers ? r.report.speakers : r.report.parameters;
    const auto& b = speakers ? rows.front().report.speakers : rows.front().report.parameters;
    if (a != b) throw ValidationError("report rows cover different " + std::string(speakers ? "speakers" : "parameters"));
  }
}

}  // namespace

std::string score_csv(const std::vector<MethodScore>& rows) {
  std::string out = "method,speaker,parameter,pcc\n";
  for (const auto& m : rows) {
    const auto& r = m.report;
    for (std::size_t s = 0; s < r.speakers.size(); ++s) {
      for (std::size_t p = 0; p < r.parameters.size(); ++p) {
        out += fmt::format("{},{},{},{}\n", m.label, r.speakers[s], r.parameters[p], full(r.pcc[s][p]));
      }
    }
    for (std::size_t s = 0; s < r.speakers.size(); ++s) {
      out += fmt::format("{},{},average,{}\n", m.label, r.speakers[s], full(r.speaker_means[s]));
    }
    for (std::size_t p = 0; p < r.parameters.size(); ++p) {
      out += fmt::format("{},average,{},{}\n", m.label, r.parameters[p], full(r.parameter_means[p]));
    }
    out += fmt::format("{},average,average,{}\n", m.label, full(r.grand_mean));
    out += fmt::format("{},standard_error,average,{}\n", m.label, full(r.standard_error));
  }
  return out;
}

std::string overall_table(const std::vector<MethodScore>& rows) {
  std::vector<std::vector<std::string>> body;
  for (const auto& m : rows) body.push_back({cell(m.report.grand_mean), cell(m.report.standard_error)});
  return table(rows, {"score", "se"}, body);
}

std::string per_speaker_table(const std::vector<MethodScore>& rows) {
  if (rows.empty()) return {};
  require_same_columns(rows, true);
  std::vector<std::string> header = rows.front().report.speakers;
  header.emplace_back("average");
  std::vector<std::vector<std::string>> body;
  for (const auto& m : rows) {
    std::vector<std::string> line;
    for (const double v : m.report.speaker_means) line.push_back(cell(v));
    line.push_back(cell(m.report.grand_mean));
    body.push_back(std::move(line));
  }
  return table(rows, header, body);
}

std::string per_parameter_table(const std::vector<MethodScore>& rows) {
  if (rows.empty()) return {};
  require_same_columns(rows, false);
  std::vector<std::string> header = rows.front().report.parameters;
  header.emplace_back("average");
  std::vector<std::vector<std::string>> body;
  for (const auto& m : rows) {
    std::vector<std::string> line;
    for (const double v : m.report.parameter_means) line.push_back(cell(v));
    line.push_back(cell(m.report.grand_mean));
    body.push_back(std::move(line));
  }
  return table(rows, header, body);
}

void write_text_file(const std::filesystem::path& path, const std::string& contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw RuntimeFailure("cannot write " + path.string());
  out << contents;
  if (!out) throw RuntimeFailure("write failed: " + path.string());
}

}  // namespace artiprobe
