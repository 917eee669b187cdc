#include "artiprobe/probe.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

#include <fmt/format.h>

#include "artiprobe/adam.hpp"
#include "artiprobe/error.hpp"

namespace artiprobe {

ProbePair make_pair(std::string utterance_id, const Trajectory& trajectory, const ArticulatorySeries& series) {
  if (series.values.cols() != kParameterCount) {
    throw ValidationError(fmt::format("{}: expected {} articulatory parameters, got {}", utterance_id,
                                      kParameterCount, series.values.cols()));
  }
  const Eigen::Index nf = trajectory.frame_count();
  const Eigen::Index nz = series.frame_count();
  if (std::abs(nf - nz) > 1) {
    throw ValidationError(
        fmt::format("{}: trajectory has {} frames but articulatory series has {}", utterance_id, nf, nz));
  }
  const Eigen::Index n = std::min(nf, nz);
  ProbePair p;
  p.utterance_id = std::move(utterance_id);
  p.features = trajectory.frames.topRows(n);
  p.targets = series.values.topRows(n);
  return p;
}

Eigen::MatrixXd ProbeModel::predict(const Eigen::MatrixXd& features) const {
  if (features.cols() != weight.cols()) {
    throw ValidationError(fmt::format("probe expects {} features, got {}", weight.cols(), features.cols()));
  }
  Eigen::MatrixXd out = features * weight.transpose();
  out.rowwise() += bias.transpose();
  return out;
}

double utterance_loss(const ProbeModel& model, const ProbePair& pair) {
  return (model.predict(pair.features) - pair.targets).squaredNorm() / static_cast<double>(pair.frame_count());
}

double mean_loss(const ProbeModel& model, std::span<const ProbePair> pairs) {
  if (pairs.empty()) throw ValidationError("mean_loss: no utterances");
  double sum = 0.0;
  for (const auto& p : pairs) sum += utterance_loss(model, p);
  return sum / static_cast<double>(pairs.size());
}

bool EarlyStopper::update(double loss) {
  ++epochs_;
  if (epochs_ == 1 || loss < best_) {
    best_ = loss;
    best_epoch_ = epochs_;
    since_best_ = 0;
    return true;
  }
  ++since_best_;
  return false;
}

namespace {

void check_pairs(std::span<const ProbePair> pairs, Eigen::Index d, const char* what) {
  for (const auto& p : pairs) {
    if (p.frame_count() == 0) throw ValidationError(fmt::format("{} utterance {} has no frames", what, p.utterance_id));
    if (p.features.cols() != d || p.targets.cols() != kParameterCount || p.targets.rows() != p.features.rows()) {
      throw ValidationError(fmt::format("{} utterance {} has inconsistent shapes ({}x{} features, {}x{} targets)",
                                        what, p.utterance_id, p.features.rows(), p.features.cols(),
                                        p.targets.rows(), p.targets.cols()));
    }
  }
}

void unpack(const Eigen::MatrixXd& packed, ProbeModel& model) {
  const Eigen::Index d = packed.cols() - 1;
  model.weight = packed.leftCols(d);
  model.bias = packed.col(d);
}

}  // namespace

ProbeModel train_probe(std::span<const ProbePair> train, std::span<const ProbePair> dev, std::uint64_t seed,
                       const ProbeTrainOptions& options) {
  if (train.empty() || dev.empty()) throw ValidationError("train_probe needs non-empty train and dev sets");
  if (options.max_epochs == 0) throw ValidationError("train_probe: max_epochs must be positive");
  const Eigen::Index d = train.front().features.cols();
  check_pairs(train, d, "train");
  check_pairs(dev, d, "dev");

  // Weight and bias packed as one 6 x (d+1) matrix; the last column is the bias.
  Eigen::MatrixXd packed = Eigen::MatrixXd::Zero(kParameterCount, d + 1);
  AdamState adam = AdamState::zeros(kParameterCount, d + 1);
  adam.learning_rate = options.learning_rate;
  adam.beta1 = options.beta1;
  adam.beta2 = options.beta2;
  adam.epsilon = options.epsilon;

  ProbeModel current;
  ProbeModel best;
  EarlyStopper stopper(options.patience);
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  Eigen::MatrixXd grad(kParameterCount, d + 1);

  for (std::size_t epoch = 0; epoch < options.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (const std::size_t i : order) {
      const ProbePair& p = train[i];
      const double scale = 2.0 / static_cast<double>(p.frame_count());
      Eigen::MatrixXd residual = p.features * packed.leftCols(d).transpose();
      residual.rowwise() += packed.col(d).transpose();
      residual -= p.targets;
      grad.leftCols(d).noalias() = scale * residual.transpose() * p.features;
      grad.col(d) = scale * residual.colwise().sum().transpose();
      adam_step(adam, packed, grad);
    }
    unpack(packed, current);
    const double loss = mean_loss(current, dev);
    if (!std::isfinite(loss)) throw RuntimeFailure(fmt::format("probe dev loss became non-finite at epoch {}", epoch + 1));
    best.dev_loss_history.push_back(loss);
    if (stopper.update(loss)) {
      best.weight = current.weight;
      best.bias = current.bias;
    }
    if (stopper.should_stop()) break;
  }
  best.epochs_run = stopper.epochs();
  best.best_epoch = stopper.best_epoch();
  best.best_dev_loss = stopper.best_loss();
  return best;
}

std::optional<double> pearson(const Eigen::Ref<const Eigen::VectorXd>& x, const Eigen::Ref<const Eigen::VectorXd>& y) {
  if (x.size() != y.size()) throw std::invalid_argument("pearson: series lengths differ");
  if (x.size() < 2) throw std::invalid_argument("pearson: need at least two samples");
  const Eigen::ArrayXd xc = x.array() - x.mean();
  const Eigen::ArrayXd yc = y.array() - y.mean();
  const double sxx = xc.square().sum();
  const double syy = yc.square().sum();
  if (!(sxx > 0.0) || !(syy > 0.0)) return std::nullopt;
  const double r = (xc * yc).sum() / std::sqrt(sxx * syy);
  return std::clamp(r, -1.0, 1.0);
}

std::optional<double> pearson(std::span<const double> x, std::span<const double> y) {
  const Eigen::Map<const Eigen::VectorXd> mx(x.data(), static_cast<Eigen::Index>(x.size()));
  const Eigen::Map<const Eigen::VectorXd> my(y.data(), static_cast<Eigen::Index>(y.size()));
  return pearson(mx, my);
}

ParameterScores score(const ProbeModel& probe, std::span<const ProbePair> test) {
  if (test.empty()) throw ValidationError("score: empty test set");
  Eigen::Index total = 0;
  for (const auto& p : test) total += p.frame_count();
  Eigen::MatrixXd predicted(total, kParameterCount);
  Eigen::MatrixXd truth(total, kParameterCount);
  Eigen::Index row = 0;
  for (const auto& p : test) {
    if (p.targets.cols() != kParameterCount || p.targets.rows() != p.features.rows()) {
      throw ValidationError(fmt::format("test utterance {} has inconsistent shapes", p.utterance_id));
    }
    predicted.middleRows(row, p.frame_count()) = probe.predict(p.features);
    truth.middleRows(row, p.frame_count()) = p.targets;
    row += p.frame_count();
  }
  ParameterScores out;
  for (Eigen::Index k = 0; k < kParameterCount; ++k) {
    out.pcc[static_cast<std::size_t>(k)] = pearson(predicted.col(k), truth.col(k));
    if (!out.pcc[static_cast<std::size_t>(k)]) {
      out.warnings.push_back(fmt::format("correlation for {} is undefined (zero variance); excluded",
                                         kArticulatoryParameters[static_cast<std::size_t>(k)]));
    }
  }
  return out;
}

ScoreReport aggregate(std::vector<std::string> speakers, std::vector<std::string> parameters,
                      std::vector<std::vector<std::optional<double>>> pcc) {
  if (speakers.empty() || parameters.empty()) throw ValidationError("aggregate: empty score matrix");
  if (pcc.size() != speakers.size()) {
    throw ValidationError(fmt::format("aggregate: {} speaker names for {} rows", speakers.size(), pcc.size()));
  }
  const std::size_t ns = speakers.size();
  const std::size_t np = parameters.size();
  ScoreReport r;
  for (std::size_t s = 0; s < ns; ++s) {
    if (pcc[s].size() != np) {
      throw ValidationError(fmt::format("aggregate: speaker {} has {} entries, expected {}", speakers[s],
                                        pcc[s].size(), np));
    }
  }

  std::vector<double> col_sum(np, 0.0);
  std::vector<std::size_t> col_n(np, 0);
  for (std::size_t s = 0; s < ns; ++s) {
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t p = 0; p < np; ++p) {
      const auto& v = pcc[s][p];
      if (!v) {
        r.warnings.push_back(fmt::format("{} / {}: undefined correlation excluded", speakers[s], parameters[p]));
        continue;
      }
      sum += *v;
      ++n;
      col_sum[p] += *v;
      ++col_n[p];
    }
    if (n == 0) throw ValidationError("aggregate: speaker " + speakers[s] + " has no defined correlation");
    r.speaker_means.push_back(sum / static_cast<double>(n));
  }
  for (std::size_t p = 0; p < np; ++p) {
    if (col_n[p] == 0) throw ValidationError("aggregate: parameter " + parameters[p] + " has no defined correlation");
    r.parameter_means.push_back(col_sum[p] / static_cast<double>(col_n[p]));
  }

  const double grand = std::accumulate(r.speaker_means.begin(), r.speaker_means.end(), 0.0) / static_cast<double>(ns);
  r.grand_mean = grand;
  if (ns >= 2) {
    double ss = 0.0;
    for (const double m : r.speaker_means) ss += (m - grand) * (m - grand);
    r.standard_error = std::sqrt(ss / static_cast<double>(ns - 1)) / std::sqrt(static_cast<double>(ns));
  }
  r.speakers = std::move(speakers);
  r.parameters = std::move(parameters);
  r.pcc = std::move(pcc);
  return r;
}

}  // namespace artiprobe
