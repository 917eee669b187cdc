#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "artiprobe/alignment.hpp"
#include "artiprobe/error.hpp"
#include "artiprobe/forward.hpp"

namespace artiprobe {

struct OptimConfig {
  double timing_lr = 1e-5;
  double position_lr = 1e-2;
  double lambda = 0.0;
  std::size_t max_steps = 200;
  bool optimize_timing = false;
  bool optimize_position = false;
  double min_gap = 1e-3;  // seconds between consecutive target timings
  // Stop when the objective improved by less than this fraction over the last
  // `stall_window` steps.
  double stall_tolerance = 1e-6;
  std::size_t stall_window = 10;

  bool enabled() const noexcept { return optimize_timing || optimize_position; }
  void validate() const;
};

using SpecifiedMask = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

// Target timings t' and positions X' of one utterance. Entries whose mask is
// false are Unknown: they are not nodes and not optimization variables.
struct TargetState {
  std::vector<double> timings;  // K+2
  Eigen::MatrixXd positions;    // (K+2) x d
  SpecifiedMask mask;           // (K+2) x d

  std::size_t target_count() const noexcept { return timings.size(); }
  std::size_t dimension() const noexcept { return static_cast<std::size_t>(positions.cols()); }
};

TargetState initial_state(const FeaturalSegmentation& fseg);
std::vector<DimensionNodes> state_nodes(const TargetState& state);

struct ObjectiveTerms {
  double smoothness = 0.0;  // integral of |g''|^2 over the utterance
  double attainment = 0.0;  // sum of squared target misses (unweighted)
  double total = 0.0;       // smoothness + lambda * attainment
};

struct ObjectiveGradient {
  std::vector<double> timings;  // zero at frozen boundary timings
  Eigen::MatrixXd positions;    // zero at boundary rows and Unknown entries
};

// Closed-form curvature integral of one dimension's interpolant: g'' is
// piecewise linear, so each segment contributes h/3 (Ma^2 + Ma Mb + Mb^2).
double smoothness(const DimensionNodes& nodes, InterpMethod method);

// Evaluates the smoothness-plus-attainment objective for a cubic method; the
// attainment term uses g(t'_k) = x'_k and reduces to |X' - X|^2 over the
// specified intermediate entries. Fills `gradient` when non-null.
ObjectiveTerms objective(const TargetState& state, const FeaturalSegmentation& original, InterpMethod method,
                         double lambda, ObjectiveGradient* gradient = nullptr);

// Attainment term computed by evaluating the interpolants at t'_k; agrees
// with ObjectiveTerms::attainment by construction of the interpolants.
double attainment_by_evaluation(const TargetState& state, const FeaturalSegmentation& original, InterpMethod method);

struct OptimizedTargets {
  TargetState state;
  double objective = 0.0;
  double initial_objective = 0.0;
  std::size_t steps = 0;          // accepted gradient steps
  std::vector<double> history;    // objective after initialization and each accepted step
};

// The objective became non-finite. Carries the last finite iterate.
class DivergenceError : public RuntimeFailure {
 public:
  DivergenceError(const std::string& what, OptimizedTargets last)
      : RuntimeFailure(what), last_(std::move(last)) {}
  const OptimizedTargets& last_finite() const noexcept { return last_; }

 private:
  OptimizedTargets last_;
};

// Gradient descent from (X', t') = (X, t) with separate timing/position step
// sizes. A step that would raise the objective is halved until it does not, so
// accepted objectives never increase. Timings are projected after each step to
// keep consecutive gaps >= min(min_gap, smallest original gap).
OptimizedTargets optimize_targets(const FeaturalSegmentation& fseg, InterpMethod method, const OptimConfig& cfg);

// Keeps boundaries fixed and enforces ordering with the given minimum gap.
void project_timings(std::vector<double>& timings, double min_gap);

struct GradientEntry {
  enum class Kind { Timing, Position } kind = Kind::Timing;
  std::size_t target = 0;
  std::size_t dim = 0;  // Position entries only
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_error = 0.0;
  bool frozen = false;
};

struct GradientCheckReport {
  double max_rel_error = 0.0;
  std::vector<GradientEntry> entries;
};

// Central finite differences against the analytic gradient at `state`, over
// every coordinate the config frees. Frozen coordinates are reported with
// zero gradients without being probed.
GradientCheckReport gradient_check(const TargetState& state, const FeaturalSegmentation& fseg, InterpMethod method,
                                   const OptimConfig& cfg, double epsilon);
GradientCheckReport gradient_check(const FeaturalSegmentation& fseg, InterpMethod method, const OptimConfig& cfg,
                                   double epsilon);

// `k,t,<dims...>` with NA for Unknown entries.
void write_optimized_csv(const std::filesystem::path& path, const OptimizedTargets& result,
                         std::span<const std::string> dimension_names = {});

}  // namespace artiprobe
