#pragma once

#include <unistd.h>

#include <atomic>
#include <cmath>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "artiprobe/alignment.hpp"
#include "artiprobe/phonology.hpp"

namespace testing {

inline std::filesystem::path data_dir() { return ARTIPROBE_TEST_DATA_DIR; }

inline artiprobe::FeatureTableSources bundled_tables() {
  const auto d = data_dir();
  return {d / "gp_features.tsv", d / "ap_features.tsv", d / "ap_scale.tsv", d / "phonemes.txt"};
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("artiprobe-test-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

// Random featural segmentation: K phones of 30-300 ms, entries in {-1, +1}
// or Unknown with probability `unknown`.
inline artiprobe::FeaturalSegmentation random_featural(std::mt19937_64& rng, std::size_t k, std::size_t d,
                                                       double unknown) {
  std::uniform_real_distribution<double> dur(0.03, 0.3);
  std::bernoulli_distribution sign(0.5);
  std::bernoulli_distribution unk(unknown);
  std::vector<artiprobe::FeatureVector> rows;
  std::vector<artiprobe::Interval> intervals;
  double t = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    const double e = t + dur(rng);
    intervals.push_back({t, e});
    t = e;
    artiprobe::FeatureVector row;
    for (std::size_t j = 0; j < d; ++j) {
      row.push_back(unk(rng) ? artiprobe::FeatureValue::unknown()
                             : artiprobe::FeatureValue::specified(sign(rng) ? 1.0 : -1.0));
    }
    rows.push_back(std::move(row));
  }
  return artiprobe::make_featural("rand", std::move(rows), std::move(intervals));
}

// Real-valued variant with targets drawn from N(0, 1).
inline artiprobe::FeaturalSegmentation random_real_featural(std::mt19937_64& rng, std::size_t k, std::size_t d,
                                                            double unknown) {
  auto f = random_featural(rng, k, d, unknown);
  std::normal_distribution<double> n(0.0, 1.0);
  for (std::size_t r = 1; r + 1 < f.targets.size(); ++r) {
    for (auto& v : f.targets[r]) {
      if (v.is_specified()) v = artiprobe::FeatureValue::specified(n(rng));
    }
  }
  return f;
}

// Adaptive Simpson quadrature, an oracle independent of the closed forms.
inline double adaptive_simpson(const std::function<double(double)>& f, double a, double b, double tol,
                               int depth = 24) {
  std::function<double(double, double, double, double, double, double, double, int)> rec =
      [&](double lo, double hi, double flo, double fmid, double fhi, double whole, double eps, int level) {
        const double mid = 0.5 * (lo + hi);
        const double lm = 0.5 * (lo + mid), rm = 0.5 * (mid + hi);
        const double flm = f(lm), frm = f(rm);
        const double left = (mid - lo) / 6.0 * (flo + 4.0 * flm + fmid);
        const double right = (hi - mid) / 6.0 * (fmid + 4.0 * frm + fhi);
        const double diff = std::abs(left + right - whole);
        if (level <= 0 || diff <= 15.0 * eps || diff <= 1e-14 * std::abs(whole)) return left + right + (left + right - whole) / 15.0;
        return rec(lo, mid, flo, flm, fmid, left, eps / 2.0, level - 1) +
               rec(mid, hi, fmid, frm, fhi, right, eps / 2.0, level - 1);
      };
  const double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
  return rec(a, b, fa, fm, fb, (b - a) / 6.0 * (fa + 4.0 * fm + fb), tol, depth);
}

// Golden-section minimization of a unimodal function on [lo, hi].
inline double golden_section(const std::function<double(double)>& f, double lo, double hi, double tol = 1e-10) {
  const double g = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo, b = hi;
  double c = b - g * (b - a), d = a + g * (b - a);
  double fc = f(c), fd = f(d);
  while (b - a > tol) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - g * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + g * (b - a);
      fd = f(d);
    }
  }
  return 0.5 * (a + b);
}


// Central-difference velocity with Richardson extrapolation over h, 2h, 3h.
// The plain stencil at a node of a piecewise cubic carries a truncation term
// a*h + b*h^2 whenever the curvature differs across the node; the combination
// below cancels both, so it returns the true one-sided-average velocity up to
// rounding as long as 3h stays inside the adjacent segments.
inline double central_velocity(const std::function<double(double)>& g, double t, double h) {
  const auto d = [&](double s) { return (g(t + s) - g(t - s)) / (2.0 * s); };
  return 3.0 * d(h) - 3.0 * d(2.0 * h) + d(3.0 * h);
}

struct OneSided {
  double value = 0.0;
  double velocity = 0.0;
  double acceleration = 0.0;
};

// Limits of g, g', g'' at t from one side (dir = +1 or -1), using only
// samples of g at t + dir * i * e, i = 1..4. The stencils are exact for cubics.
inline OneSided one_sided_limits(const std::function<double(double)>& g, double t, double dir, double e) {
  const double g1 = g(t + dir * e), g2 = g(t + dir * 2 * e), g3 = g(t + dir * 3 * e), g4 = g(t + dir * 4 * e);
  OneSided r;
  r.value = 4 * g1 - 6 * g2 + 4 * g3 - g4;
  // Cubic through the four samples, differentiated at offset 0.
  r.velocity = dir * (-26 * g1 + 57 * g2 - 42 * g3 + 11 * g4) / (6 * e);
  r.acceleration = (3 * g1 - 8 * g2 + 7 * g3 - 2 * g4) / (e * e);
  return r;
}

}  // namespace testing
