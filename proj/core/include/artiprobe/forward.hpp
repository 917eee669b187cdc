#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "artiprobe/alignment.hpp"

namespace artiprobe {

enum class InterpMethod { PiecewiseConstant, Linear, CubicHermite, NaturalCubic };

InterpMethod parse_interp_method(std::string_view name);
std::string_view to_string(InterpMethod method);
constexpr bool is_cubic(InterpMethod m) { return m == InterpMethod::CubicHermite || m == InterpMethod::NaturalCubic; }

// Interpolation nodes of one feature dimension: the two boundary targets plus
// every intermediate target whose entry in this dimension is specified.
struct DimensionNodes {
  std::vector<double> times;
  std::vector<double> values;
  // Phone intervals parallel to `times`; only piecewise-constant reads them.
  std::vector<Interval> intervals;

  std::size_t size() const noexcept { return times.size(); }
};

std::vector<DimensionNodes> select_nodes(const FeaturalSegmentation& fseg);

// Second derivatives at the knots of the natural cubic spline through the
// nodes (zero at both ends), from the tridiagonal system solved by the Thomas
// algorithm.
std::vector<double> natural_spline_moments(std::span<const double> times, std::span<const double> values);

// Evaluator for one dimension; construction solves any global system once.
class Interpolant {
 public:
  Interpolant(DimensionNodes nodes, InterpMethod method);

  InterpMethod method() const noexcept { return method_; }
  const DimensionNodes& nodes() const noexcept { return nodes_; }
  double start_time() const noexcept { return nodes_.times.front(); }
  double end_time() const noexcept { return nodes_.times.back(); }

  // Throws std::out_of_range outside [start, end].
  double value(double tau) const;
  double first_derivative(double tau) const;
  // Exact g'' of the piecewise cubic; cubic methods only.
  double second_derivative(double tau) const;

  // Knot second derivatives of the natural spline; empty for other methods.
  std::span<const double> moments() const noexcept { return moments_; }

 private:
  std::size_t segment(double tau) const;
  double checked(double tau) const;

  DimensionNodes nodes_;
  InterpMethod method_;
  std::vector<double> moments_;  // natural cubic only
};

double interpolate(const DimensionNodes& nodes, InterpMethod method, double tau);
double second_derivative(const DimensionNodes& nodes, InterpMethod method, double tau);

// d-dimensional series sampled at k / frame_rate for k = 1..n.
struct Trajectory {
  double frame_rate = 100.0;
  Eigen::MatrixXd frames;  // n x d

  Eigen::Index frame_count() const noexcept { return frames.rows(); }
  Eigen::Index dimension() const noexcept { return frames.cols(); }
};

// floor(end_time * frame_rate), robust to representation error at exact multiples.
std::size_t frame_count(double end_time, double frame_rate);

// Throws ValidationError for piecewise-constant on segmentations with Unknown entries.
Trajectory synthesize(const FeaturalSegmentation& fseg, InterpMethod method, double frame_rate = 100.0);
Trajectory synthesize(std::span<const DimensionNodes> nodes, InterpMethod method, double end_time,
                      double frame_rate = 100.0);

}  // namespace artiprobe
