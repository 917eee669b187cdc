#include "artiprobe/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include <fmt/format.h>

namespace artiprobe {

void OptimConfig::validate() const {
  if (optimize_timing && !(timing_lr > 0.0)) throw ValidationError("timing learning rate must be positive");
  if (optimize_position && !(position_lr > 0.0)) throw ValidationError("position learning rate must be positive");
  if (!(lambda >= 0.0)) throw ValidationError("lambda must be non-negative");
  if (!(min_gap > 0.0)) throw ValidationError("min_gap must be positive");
}

TargetState initial_state(const FeaturalSegmentation& fseg) {
  const auto n = static_cast<Eigen::Index>(fseg.target_count());
  const auto d = static_cast<Eigen::Index>(fseg.dimension);
  TargetState state;
  state.timings = fseg.timings;
  state.positions = Eigen::MatrixXd::Zero(n, d);
  state.mask = SpecifiedMask::Constant(n, d, true);
  for (Eigen::Index k = 0; k < n; ++k) {
    for (Eigen::Index j = 0; j < d; ++j) {
      const auto& v = fseg.targets[static_cast<std::size_t>(k)][static_cast<std::size_t>(j)];
      const bool boundary = k == 0 || k + 1 == n;
      if (boundary) continue;
      if (v.is_unknown()) {
        state.mask(k, j) = false;
      } else {
        state.positions(k, j) = v.value();
      }
    }
  }
  return state;
}

std::vector<DimensionNodes> state_nodes(const TargetState& state) {
  const auto n = state.target_count();
  std::vector<DimensionNodes> out(state.dimension());
  for (std::size_t j = 0; j < out.size(); ++j) {
    for (std::size_t k = 0; k < n; ++k) {
      if (!state.mask(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j))) continue;
      out[j].times.push_back(state.timings[k]);
      out[j].values.push_back(state.positions(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j)));
    }
  }
  return out;
}

namespace {

// Smoothness of one dimension and its derivatives w.r.t. node times/values.
double dimension_smoothness(std::span<const double> t, std::span<const double> y, InterpMethod method,
                            std::vector<double>* dt, std::vector<double>* dy) {
  const auto n = t.size();
  if (dt) dt->assign(n, 0.0);
  if (dy) dy->assign(n, 0.0);
  double total = 0.0;

  if (method == InterpMethod::CubicHermite) {
    // g'' = 6D/h^2 at the left end, -6D/h^2 at the right: 12 D^2 / h^3 per segment.
    for (std::size_t i = 0; i + 1 < n; ++i) {
      const double h = t[i + 1] - t[i];
      const double delta = y[i + 1] - y[i];
      const double h3 = h * h * h;
      total += 12.0 * delta * delta / h3;
      if (dy) {
        const double g = 24.0 * delta / h3;
        (*dy)[i + 1] += g;
        (*dy)[i] -= g;
      }
      if (dt) {
        const double g = -36.0 * delta * delta / (h3 * h);
        (*dt)[i + 1] += g;
        (*dt)[i] -= g;
      }
    }
    return total;
  }

  // Natural cubic: S = M^T R M = b^T R^{-1} b with b the slope differences,
  // so dS = 2 M^T db - M^T dR M.
  const auto moments = natural_spline_moments(t, y);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const double h = t[i + 1] - t[i];
    const double ma = moments[i];
    const double mb = moments[i + 1];
    const double q = (ma * ma + ma * mb + mb * mb) / 3.0;
    total += h * q;
    const double c = ma - mb;
    const double slope = (y[i + 1] - y[i]) / h;
    if (dy) {
      (*dy)[i + 1] += 2.0 * c / h;
      (*dy)[i] -= 2.0 * c / h;
    }
    if (dt) {
      const double dh = -2.0 * c * slope / h - q;
      (*dt)[i + 1] += dh;
      (*dt)[i] -= dh;
    }
  }
  return total;
}

void require_cubic(InterpMethod method) {
  if (!is_cubic(method))
    throw ValidationError("target optimization is defined for cubic methods only, got " +
                          std::string(to_string(method)));
}

}  // namespace

double smoothness(const DimensionNodes& nodes, InterpMethod method) {
  require_cubic(method);
  return dimension_smoothness(nodes.times, nodes.values, method, nullptr, nullptr);
}

ObjectiveTerms objective(const TargetState& state, const FeaturalSegmentation& original, InterpMethod method,
                         double lambda, ObjectiveGradient* gradient) {
  require_cubic(method);
  const auto n = state.target_count();
  const auto d = state.dimension();
  if (original.target_count() != n || original.dimension != d)
    throw ValidationError("target state does not match the featural segmentation");

  if (gradient) {
    gradient->timings.assign(n, 0.0);
    gradient->positions = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  }

  ObjectiveTerms terms;
  std::vector<double> t, y, dt, dy;
  std::vector<std::size_t> rows;
  for (std::size_t j = 0; j < d; ++j) {
    const auto jj = static_cast<Eigen::Index>(j);
    t.clear();
    y.clear();
    rows.clear();
    for (std::size_t k = 0; k < n; ++k) {
      const auto kk = static_cast<Eigen::Index>(k);
      if (!state.mask(kk, jj)) continue;
      t.push_back(state.timings[k]);
      y.push_back(state.positions(kk, jj));
      rows.push_back(k);
    }
    terms.smoothness += dimension_smoothness(t, y, method, gradient ? &dt : nullptr, gradient ? &dy : nullptr);
    if (gradient) {
      for (std::size_t m = 0; m < rows.size(); ++m) {
        gradient->timings[rows[m]] += dt[m];
        gradient->positions(static_cast<Eigen::Index>(rows[m]), jj) += dy[m];
      }
    }
    for (std::size_t k = 1; k + 1 < n; ++k) {
      const auto kk = static_cast<Eigen::Index>(k);
      if (!state.mask(kk, jj)) continue;
      const double miss = state.positions(kk, jj) - original.targets[k][j].value();
      terms.attainment += miss * miss;
      if (gradient) gradient->positions(kk, jj) += 2.0 * lambda * miss;
    }
  }
  terms.total = terms.smoothness + lambda * terms.attainment;

  if (gradient) {
    gradient->timings.front() = 0.0;
    gradient->timings.back() = 0.0;
    gradient->positions.row(0).setZero();
    gradient->positions.row(static_cast<Eigen::Index>(n - 1)).setZero();
  }
  return terms;
}

double attainment_by_evaluation(const TargetState& state, const FeaturalSegmentation& original, InterpMethod method) {
  require_cubic(method);
  const auto nodes = state_nodes(state);
  const auto n = state.target_count();
  double total = 0.0;
  for (std::size_t j = 0; j < nodes.size(); ++j) {
    const Interpolant g(nodes[j], method);
    for (std::size_t k = 1; k + 1 < n; ++k) {
      if (!state.mask(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j))) continue;
      const double miss = g.value(state.timings[k]) - original.targets[k][j].value();
      total += miss * miss;
    }
  }
  return total;
}

void project_timings(std::vector<double>& timings, double min_gap) {
  const auto n = timings.size();
  if (n < 3) return;
  const double end = timings.back();
  // Clamp each interior timing into the window that leaves room for its
  // neighbours, then push forward; the result respects every gap.
  for (std::size_t k = 1; k + 1 < n; ++k) {
    const double lo = timings.front() + static_cast<double>(k) * min_gap;
    const double hi = end - static_cast<double>(n - 1 - k) * min_gap;
    timings[k] = std::clamp(timings[k], lo, hi);
    timings[k] = std::max(timings[k], timings[k - 1] + min_gap);
  }
}

namespace {

double effective_gap(const std::vector<double>& timings, double min_gap) {
  double smallest = std::numeric_limits<double>::infinity();
  for (std::size_t k = 1; k < timings.size(); ++k) smallest = std::min(smallest, timings[k] - timings[k - 1]);
  return std::min(min_gap, smallest);
}

}  // namespace

OptimizedTargets optimize_targets(const FeaturalSegmentation& fseg, InterpMethod method, const OptimConfig& cfg) {
  require_cubic(method);
  cfg.validate();
  if (fseg.intermediate_count() == 0) throw ValidationError(fseg.utterance_id + ": optimization needs K >= 1");

  OptimizedTargets result;
  result.state = initial_state(fseg);
  result.initial_objective = objective(result.state, fseg, method, cfg.lambda).total;
  result.objective = result.initial_objective;
  result.history.push_back(result.objective);
  if (!std::isfinite(result.objective))
    throw DivergenceError(fseg.utterance_id + ": initial objective is not finite", result);
  if (!cfg.enabled()) return result;

  const double gap = effective_gap(fseg.timings, cfg.min_gap);
  const auto n = result.state.target_count();
  const auto rows = static_cast<Eigen::Index>(n);
  constexpr int kMaxHalvings = 30;

  ObjectiveGradient grad;
  for (std::size_t step = 0; step < cfg.max_steps; ++step) {
    objective(result.state, fseg, method, cfg.lambda, &grad);

    bool accepted = false;
    double scale = 1.0;
    for (int attempt = 0; attempt < kMaxHalvings && !accepted; ++attempt, scale *= 0.5) {
      TargetState trial = result.state;
      if (cfg.optimize_timing) {
        for (std::size_t k = 1; k + 1 < n; ++k) trial.timings[k] -= scale * cfg.timing_lr * grad.timings[k];
        project_timings(trial.timings, gap);
      }
      if (cfg.optimize_position) {
        const auto interior = rows - 2;
        trial.positions.middleRows(1, interior) -=
            (scale * cfg.position_lr * grad.positions.middleRows(1, interior).array() *
             trial.mask.middleRows(1, interior).cast<double>())
                .matrix();
      }
      const double value = objective(trial, fseg, method, cfg.lambda).total;
      if (!std::isfinite(value))
        throw DivergenceError(fmt::format("{}: objective diverged at step {}", fseg.utterance_id, step + 1), result);
      if (value <= result.objective) {
        result.state = std::move(trial);
        result.objective = value;
        accepted = true;
      }
    }
    if (!accepted) break;
    ++result.steps;
    result.history.push_back(result.objective);

    const auto h = result.history.size();
    if (h > cfg.stall_window) {
      const double before = result.history[h - 1 - cfg.stall_window];
      const double denom = std::max(std::abs(before), std::numeric_limits<double>::min());
      if ((before - result.objective) / denom < cfg.stall_tolerance) break;
    }
  }
  return result;
}

GradientCheckReport gradient_check(const TargetState& state, const FeaturalSegmentation& fseg, InterpMethod method,
                                   const OptimConfig& cfg, double epsilon) {
  ObjectiveGradient grad;
  objective(state, fseg, method, cfg.lambda, &grad);
  const auto n = state.target_count();
  const auto d = state.dimension();

  double scale = 0.0;
  for (double g : grad.timings) scale = std::max(scale, std::abs(g));
  scale = std::max(scale, grad.positions.cwiseAbs().maxCoeff());
  // Relative errors of near-zero components are measured against the overall
  // gradient magnitude.
  const double floor = 1e-8 * std::max(1.0, scale);

  auto f = [&](const TargetState& s) { return objective(s, fseg, method, cfg.lambda).total; };
  auto record = [&](GradientCheckReport& report, GradientEntry e) {
    if (!e.frozen) {
      e.rel_error = std::abs(e.analytic - e.numeric) / std::max({std::abs(e.analytic), std::abs(e.numeric), floor});
      report.max_rel_error = std::max(report.max_rel_error, e.rel_error);
    }
    report.entries.push_back(e);
  };

  GradientCheckReport report;
  for (std::size_t k = 0; k < n; ++k) {
    GradientEntry e{GradientEntry::Kind::Timing, k, 0, 0.0, 0.0, 0.0, true};
    if (cfg.optimize_timing && k > 0 && k + 1 < n) {
      e.frozen = false;
      e.analytic = grad.timings[k];
      TargetState plus = state, minus = state;
      plus.timings[k] += epsilon;
      minus.timings[k] -= epsilon;
      e.numeric = (f(plus) - f(minus)) / (2.0 * epsilon);
    }
    record(report, e);
  }
  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t j = 0; j < d; ++j) {
      const auto kk = static_cast<Eigen::Index>(k);
      const auto jj = static_cast<Eigen::Index>(j);
      GradientEntry e{GradientEntry::Kind::Position, k, j, 0.0, 0.0, 0.0, true};
      if (cfg.optimize_position && k > 0 && k + 1 < n && state.mask(kk, jj)) {
        e.frozen = false;
        e.analytic = grad.positions(kk, jj);
        TargetState plus = state, minus = state;
        plus.positions(kk, jj) += epsilon;
        minus.positions(kk, jj) -= epsilon;
        e.numeric = (f(plus) - f(minus)) / (2.0 * epsilon);
      }
      record(report, e);
    }
  }
  return report;
}

GradientCheckReport gradient_check(const FeaturalSegmentation& fseg, InterpMethod method, const OptimConfig& cfg,
                                   double epsilon) {
  return gradient_check(initial_state(fseg), fseg, method, cfg, epsilon);
}

void write_optimized_csv(const std::filesystem::path& path, const OptimizedTargets& result,
                         std::span<const std::string> dimension_names) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write '" + path.string() + "'");
  const auto& s = result.state;
  out << "k,t";
  for (std::size_t j = 0; j < s.dimension(); ++j)
    out << ',' << (j < dimension_names.size() ? dimension_names[j] : fmt::format("x{}", j + 1));
  out << '\n';
  for (std::size_t k = 0; k < s.target_count(); ++k) {
    out << (k + 1) << ',' << fmt::format("{:.17g}", s.timings[k]);
    for (std::size_t j = 0; j < s.dimension(); ++j) {
      const auto kk = static_cast<Eigen::Index>(k);
      const auto jj = static_cast<Eigen::Index>(j);
      out << ',' << (s.mask(kk, jj) ? fmt::format("{:.17g}", s.positions(kk, jj)) : std::string("NA"));
    }
    out << '\n';
  }
}

}  // namespace artiprobe
