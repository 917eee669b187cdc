#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "artiprobe/probe.hpp"

namespace artiprobe {

// One evaluated configuration (a table row).
struct MethodScore {
  std::string label;
  ScoreReport report;
};

// Long-format CSV: method,speaker,parameter,pcc (NA when undefined), followed
// by per-speaker, per-parameter and overall summary rows.
std::string score_csv(const std::vector<MethodScore>& rows);

// Fixed-width tables with methods as rows, values to 3 decimals.
std::string overall_table(const std::vector<MethodScore>& rows);        // score and standard error
std::string per_speaker_table(const std::vector<MethodScore>& rows);    // speakers + average
std::string per_parameter_table(const std::vector<MethodScore>& rows);  // parameters + average

void write_text_file(const std::filesystem::path& path, const std::string& contents);

}  // namespace artiprobe
