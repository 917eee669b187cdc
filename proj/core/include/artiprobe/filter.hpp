#pragma once

#include <complex>
#include <span>
#include <vector>

#include "artiprobe/ema.hpp"

namespace artiprobe {

// Direct-form II transposed second-order section, a0 normalized to 1.
struct Biquad {
  double b0 = 1.0, b1 = 0.0, b2 = 0.0;
  double a1 = 0.0, a2 = 0.0;
};

class SosFilter {
 public:
  SosFilter() = default;
  explicit SosFilter(std::vector<Biquad> sections) : sections_(std::move(sections)) {}

  // Digital Butterworth low-pass by bilinear transform with frequency
  // prewarping. Each section has unit DC gain.
  static SosFilter butterworth_lowpass(int order, double cutoff_hz, double sample_rate);

  std::span<const Biquad> sections() const noexcept { return sections_; }
  std::complex<double> response(double freq_hz, double sample_rate) const;

  // Causal filtering; when `steady_state` is set the initial state is the
  // steady state for a constant input equal to x[0].
  std::vector<double> apply(std::span<const double> x, bool steady_state) const;

 private:
  std::vector<Biquad> sections_;
};

// Zero-phase forward-backward filtering with odd-reflection padding.
std::vector<double> filtfilt(const SosFilter& filter, std::span<const double> x);

// 5th-order Butterworth at 50 Hz applied forward-backward, then decimation by
// 5 (every 5th sample from the first). Input must be at 500 Hz.
EmaRecord filter_and_downsample(const EmaRecord& rec);

}  // namespace artiprobe
