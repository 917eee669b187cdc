#include "artiprobe/filter.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "artiprobe/error.hpp"

namespace artiprobe {

SosFilter SosFilter::butterworth_lowpass(int order, double cutoff_hz, double sample_rate) {
  if (order < 1 || !(cutoff_hz > 0.0) || !(cutoff_hz < 0.5 * sample_rate))
    throw ValidationError("invalid Butterworth design parameters");
  const double fs2 = 2.0 * sample_rate;
  const double warped = fs2 * std::tan(std::numbers::pi * cutoff_hz / sample_rate);

  std::vector<Biquad> sections;
  // Analog poles warped * exp(i pi (2k + N - 1) / 2N); take the upper half and
  // pair each with its conjugate.
  for (int k = 1; k <= order / 2; ++k) {
    const double theta = std::numbers::pi * (2.0 * k + order - 1) / (2.0 * order);
    const std::complex<double> p = warped * std::polar(1.0, theta);
    const std::complex<double> z = (fs2 + p) / (fs2 - p);
    Biquad s;
    s.a1 = -2.0 * z.real();
    s.a2 = std::norm(z);
    const double g = (1.0 + s.a1 + s.a2) / 4.0;  // zeros at z = -1, unit DC gain
    s.b0 = g;
    s.b1 = 2.0 * g;
    s.b2 = g;
    sections.push_back(s);
  }
  if (order % 2 == 1) {
    const double p = -warped;
    const double z = (fs2 + p) / (fs2 - p);
    Biquad s;
    s.a1 = -z;
    const double g = (1.0 - z) / 2.0;
    s.b0 = g;
    s.b1 = g;
    sections.push_back(s);
  }
  return SosFilter(std::move(sections));
}

std::complex<double> SosFilter::response(double freq_hz, double sample_rate) const {
  const auto zinv = std::polar(1.0, -2.0 * std::numbers::pi * freq_hz / sample_rate);
  std::complex<double> h = 1.0;
  for (const auto& s : sections_)
    h *= (s.b0 + zinv * (s.b1 + zinv * s.b2)) / (1.0 + zinv * (s.a1 + zinv * s.a2));
  return h;
}

std::vector<double> SosFilter::apply(std::span<const double> x, bool steady_state) const {
  std::vector<double> y(x.begin(), x.end());
  if (y.empty()) return y;
  // With unit DC gain per section every section sees the same constant input.
  const double u = y.front();
  for (const auto& s : sections_) {
    double z1 = 0.0, z2 = 0.0;
    if (steady_state) {
      z2 = (s.b2 - s.a2) * u;
      z1 = (s.b1 - s.a1) * u + z2;
    }
    for (auto& v : y) {
      const double in = v;
      const double out = s.b0 * in + z1;
      z1 = s.b1 * in - s.a1 * out + z2;
      z2 = s.b2 * in - s.a2 * out;
      v = out;
    }
  }
  return y;
}

std::vector<double> filtfilt(const SosFilter& filter, std::span<const double> x) {
  const auto n = x.size();
  const auto pad = std::min<std::size_t>(3 * (2 * filter.sections().size() + 1), n > 0 ? n - 1 : 0);
  std::vector<double> ext;
  ext.reserve(n + 2 * pad);
  for (std::size_t i = pad; i >= 1; --i) ext.push_back(2.0 * x.front() - x[i]);
  ext.insert(ext.end(), x.begin(), x.end());
  for (std::size_t i = 1; i <= pad; ++i) ext.push_back(2.0 * x.back() - x[n - 1 - i]);

  auto forward = filter.apply(ext, true);
  std::reverse(forward.begin(), forward.end());
  auto backward = filter.apply(forward, true);
  std::reverse(backward.begin(), backward.end());
  return {backward.begin() + static_cast<std::ptrdiff_t>(pad), backward.begin() + static_cast<std::ptrdiff_t>(pad + n)};
}

EmaRecord filter_and_downsample(const EmaRecord& rec) {
  constexpr double kInputRate = 500.0;
  constexpr double kCutoff = 50.0;
  constexpr int kOrder = 5;
  constexpr Eigen::Index kFactor = 5;
  if (rec.sample_rate != kInputRate) throw ValidationError(rec.utterance_id + ": EMA input must be sampled at 500 Hz");

  static const auto lowpass = SosFilter::butterworth_lowpass(kOrder, kCutoff, kInputRate);
  const auto n = rec.sample_count();
  const auto m = n / kFactor;

  EmaRecord out;
  out.utterance_id = rec.utterance_id;
  out.sample_rate = kInputRate / static_cast<double>(kFactor);
  out.repaired_samples = rec.repaired_samples;
  out.channels.resize(m, rec.channels.cols());
  std::vector<double> column(static_cast<std::size_t>(n));
  for (Eigen::Index c = 0; c < rec.channels.cols(); ++c) {
    if (n == 0) continue;
    // Filtering the offset from the first sample leaves constant channels
    // bit-exact; with unit DC gain the result is otherwise unchanged.
    const double base = rec.channels(0, c);
    for (Eigen::Index i = 0; i < n; ++i) column[static_cast<std::size_t>(i)] = rec.channels(i, c) - base;
    const auto smooth = filtfilt(lowpass, column);
    for (Eigen::Index i = 0; i < m; ++i) out.channels(i, c) = base + smooth[static_cast<std::size_t>(i * kFactor)];
  }
  return out;
}

}  // namespace artiprobe
