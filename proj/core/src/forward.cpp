#include "artiprobe/forward.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "artiprobe/error.hpp"

namespace artiprobe {

InterpMethod parse_interp_method(std::string_view name) {
  if (name == "piecewise_constant" || name == "piecewise-cst" || name == "constant") return InterpMethod::PiecewiseConstant;
  if (name == "linear") return InterpMethod::Linear;
  if (name == "cubic_hermite" || name == "hermite") return InterpMethod::CubicHermite;
  if (name == "natural_cubic" || name == "natural") return InterpMethod::NaturalCubic;
  throw ValidationError("unknown interpolation method '" + std::string(name) + "'");
}

std::string_view to_string(InterpMethod method) {
  switch (method) {
    case InterpMethod::PiecewiseConstant: return "piecewise_constant";
    case InterpMethod::Linear: return "linear";
    case InterpMethod::CubicHermite: return "cubic_hermite";
    case InterpMethod::NaturalCubic: return "natural_cubic";
  }
  return "?";
}

std::vector<DimensionNodes> select_nodes(const FeaturalSegmentation& fseg) {
  const auto n = fseg.target_count();
  std::vector<DimensionNodes> out(fseg.dimension);
  for (std::size_t j = 0; j < fseg.dimension; ++j) {
    auto& nodes = out[j];
    nodes.times.reserve(n);
    nodes.values.reserve(n);
    nodes.intervals.reserve(n);
    for (std::size_t k = 0; k < n; ++k) {
      const auto& v = fseg.targets[k][j];
      const bool boundary = k == 0 || k + 1 == n;
      if (!boundary && v.is_unknown()) continue;
      nodes.times.push_back(fseg.timings[k]);
      nodes.values.push_back(boundary ? 0.0 : v.value());
      nodes.intervals.push_back(fseg.intervals[k]);
    }
  }
  return out;
}

std::vector<double> natural_spline_moments(std::span<const double> times, std::span<const double> values) {
  const auto n = times.size();
  if (n != values.size() || n < 2) throw std::invalid_argument("natural spline needs at least two nodes");
  std::vector<double> moments(n, 0.0);
  if (n == 2) return moments;

  // Interior unknowns M_1..M_{n-2}:
  //   h_{m-1}/6 M_{m-1} + (h_{m-1}+h_m)/3 M_m + h_m/6 M_{m+1} = s_m - s_{m-1}
  const auto m = n - 2;
  std::vector<double> diag(m), upper(m), rhs(m);
  for (std::size_t i = 0; i < m; ++i) {
    const double h0 = times[i + 1] - times[i];
    const double h1 = times[i + 2] - times[i + 1];
    diag[i] = (h0 + h1) / 3.0;
    upper[i] = h1 / 6.0;
    rhs[i] = (values[i + 2] - values[i + 1]) / h1 - (values[i + 1] - values[i]) / h0;
  }
  // Thomas forward sweep; sub-diagonal entry of row i is h_i / 6 = upper[i-1].
  for (std::size_t i = 1; i < m; ++i) {
    const double w = upper[i - 1] / diag[i - 1];
    diag[i] -= w * upper[i - 1];
    rhs[i] -= w * rhs[i - 1];
  }
  moments[m] = rhs[m - 1] / diag[m - 1];
  for (std::size_t i = m - 1; i-- > 0;) moments[i + 1] = (rhs[i] - upper[i] * moments[i + 2]) / diag[i];
  return moments;
}

Interpolant::Interpolant(DimensionNodes nodes, InterpMethod method) : nodes_(std::move(nodes)), method_(method) {
  const auto n = nodes_.times.size();
  if (nodes_.values.size() != n) throw std::invalid_argument("node times/values size mismatch");
  if (method_ == InterpMethod::PiecewiseConstant) {
    if (nodes_.intervals.size() != n || n == 0)
      throw std::invalid_argument("piecewise-constant interpolation needs phone intervals");
  } else if (n < 2) {
    throw std::invalid_argument("interpolation needs at least two nodes");
  }
  for (std::size_t i = 1; i < n; ++i)
    if (!(nodes_.times[i] > nodes_.times[i - 1])) throw std::invalid_argument("node times must be strictly increasing");
  if (method_ == InterpMethod::NaturalCubic) moments_ = natural_spline_moments(nodes_.times, nodes_.values);
}

double Interpolant::checked(double tau) const {
  // Frame times k / rate can overshoot the final node by rounding.
  constexpr double slack = 1e-9;
  const double lo = method_ == InterpMethod::PiecewiseConstant ? nodes_.intervals.front().start : start_time();
  const double hi = method_ == InterpMethod::PiecewiseConstant ? nodes_.intervals.back().end : end_time();
  if (!(tau >= lo - slack && tau <= hi + slack)) throw std::out_of_range("interpolation time out of range");
  return std::clamp(tau, lo, hi);
}

std::size_t Interpolant::segment(double tau) const {
  const auto& t = nodes_.times;
  const auto it = std::upper_bound(t.begin(), t.end(), tau);
  const auto idx = static_cast<std::size_t>(it - t.begin());
  if (idx == 0) return 0;
  return std::min(idx - 1, t.size() - 2);
}

double Interpolant::value(double tau) const {
  tau = checked(tau);
  const auto& t = nodes_.times;
  const auto& y = nodes_.values;

  if (method_ == InterpMethod::PiecewiseConstant) {
    // Each phone holds its value over [start, end); the final instant belongs
    // to the last phone. Degenerate boundary intervals never match.
    const auto& iv = nodes_.intervals;
    std::size_t last = iv.size();
    for (std::size_t k = 0; k < iv.size(); ++k) {
      if (iv[k].end <= iv[k].start) continue;
      if (tau >= iv[k].start && tau < iv[k].end) return y[k];
      last = k;
    }
    if (last < iv.size()) return y[last];
    throw std::out_of_range("no phone interval covers the requested time");
  }

  const auto i = segment(tau);
  const double h = t[i + 1] - t[i];
  const double s = (tau - t[i]) / h;
  switch (method_) {
    case InterpMethod::Linear: return y[i] + (y[i + 1] - y[i]) * s;
    case InterpMethod::CubicHermite: return y[i] + (y[i + 1] - y[i]) * s * s * (3.0 - 2.0 * s);
    case InterpMethod::NaturalCubic: {
      const double a = 1.0 - s;
      const double b = s;
      return a * y[i] + b * y[i + 1] +
             ((a * a * a - a) * moments_[i] + (b * b * b - b) * moments_[i + 1]) * h * h / 6.0;
    }
    default: break;
  }
  return 0.0;
}

double Interpolant::first_derivative(double tau) const {
  tau = checked(tau);
  if (method_ == InterpMethod::PiecewiseConstant) return 0.0;
  const auto& t = nodes_.times;
  const auto& y = nodes_.values;
  const auto i = segment(tau);
  const double h = t[i + 1] - t[i];
  const double s = (tau - t[i]) / h;
  const double slope = (y[i + 1] - y[i]) / h;
  switch (method_) {
    case InterpMethod::Linear: return slope;
    case InterpMethod::CubicHermite: return slope * 6.0 * s * (1.0 - s);
    case InterpMethod::NaturalCubic: {
      const double a = 1.0 - s;
      const double b = s;
      return slope - (3.0 * a * a - 1.0) / 6.0 * h * moments_[i] + (3.0 * b * b - 1.0) / 6.0 * h * moments_[i + 1];
    }
    default: break;
  }
  return 0.0;
}

double Interpolant::second_derivative(double tau) const {
  if (!is_cubic(method_)) throw std::logic_error("second derivative is defined for cubic methods only");
  tau = checked(tau);
  const auto& t = nodes_.times;
  const auto& y = nodes_.values;
  const auto i = segment(tau);
  const double h = t[i + 1] - t[i];
  const double s = (tau - t[i]) / h;
  if (method_ == InterpMethod::CubicHermite) return (y[i + 1] - y[i]) * (6.0 - 12.0 * s) / (h * h);
  return (1.0 - s) * moments_[i] + s * moments_[i + 1];
}

double interpolate(const DimensionNodes& nodes, InterpMethod method, double tau) {
  return Interpolant(nodes, method).value(tau);
}

double second_derivative(const DimensionNodes& nodes, InterpMethod method, double tau) {
  if (!is_cubic(method)) throw std::logic_error("second derivative is defined for cubic methods only");
  return Interpolant(nodes, method).second_derivative(tau);
}

std::size_t frame_count(double end_time, double frame_rate) {
  if (!(end_time >= 0.0) || !(frame_rate > 0.0)) throw ValidationError("invalid end time or frame rate");
  return static_cast<std::size_t>(std::floor(end_time * frame_rate + 1e-9));
}

Trajectory synthesize(std::span<const DimensionNodes> nodes, InterpMethod method, double end_time,
                      double frame_rate) {
  if (nodes.empty()) throw ValidationError("cannot synthesize a trajectory with no dimensions");
  const auto n = frame_count(end_time, frame_rate);
  Trajectory traj;
  traj.frame_rate = frame_rate;
  traj.frames.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(nodes.size()));
  for (std::size_t j = 0; j < nodes.size(); ++j) {
    const Interpolant interp(nodes[j], method);
    for (std::size_t k = 1; k <= n; ++k) {
      const double tau = std::min(static_cast<double>(k) / frame_rate, end_time);
      traj.frames(static_cast<Eigen::Index>(k - 1), static_cast<Eigen::Index>(j)) = interp.value(tau);
    }
  }
  return traj;
}

Trajectory synthesize(const FeaturalSegmentation& fseg, InterpMethod method, double frame_rate) {
  if (fseg.intermediate_count() == 0) throw ValidationError(fseg.utterance_id + ": empty featural segmentation");
  if (method == InterpMethod::PiecewiseConstant && !fseg.fully_specified())
    throw ValidationError(fseg.utterance_id +
                          ": piecewise-constant interpolation requires a fully specified feature set");
  const auto nodes = select_nodes(fseg);
  return synthesize(nodes, method, fseg.end_time(), frame_rate);
}

}  // namespace artiprobe
