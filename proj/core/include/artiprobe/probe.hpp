#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "artiprobe/ema.hpp"
#include "artiprobe/forward.hpp"

namespace artiprobe {

inline constexpr Eigen::Index kParameterCount = 6;

// One utterance: synthesized features and the articulatory parameters they
// are probed against, frame-aligned.
struct ProbePair {
  std::string utterance_id;
  Eigen::MatrixXd features;  // n x d
  Eigen::MatrixXd targets;   // n x 6

  Eigen::Index frame_count() const noexcept { return features.rows(); }
};

// Truncates both to the shorter length; a difference above one frame is a
// ValidationError.
ProbePair make_pair(std::string utterance_id, const Trajectory& trajectory, const ArticulatorySeries& series);

struct ProbeModel {
  Eigen::MatrixXd weight;  // 6 x d
  Eigen::VectorXd bias;    // 6
  std::size_t epochs_run = 0;
  std::size_t best_epoch = 0;  // 1-based; 0 before training
  double best_dev_loss = 0.0;
  std::vector<double> dev_loss_history;  // one entry per epoch run

  Eigen::Index dimension() const noexcept { return weight.cols(); }
  Eigen::MatrixXd predict(const Eigen::MatrixXd& features) const;  // n x 6
};

// Frame-mean squared reconstruction error, summed over parameters.
double utterance_loss(const ProbeModel& model, const ProbePair& pair);
// Utterance-weighted mean of utterance_loss.
double mean_loss(const ProbeModel& model, std::span<const ProbePair> pairs);

// Patience-based early stopping on a loss that should decrease.
class EarlyStopper {
 public:
  explicit EarlyStopper(std::size_t patience) : patience_(patience) {}

  // Records the loss of the next epoch; returns true when it is a new best.
  bool update(double loss);
  bool should_stop() const noexcept { return since_best_ >= patience_; }
  std::size_t best_epoch() const noexcept { return best_epoch_; }
  double best_loss() const noexcept { return best_; }
  std::size_t epochs() const noexcept { return epochs_; }

 private:
  std::size_t patience_;
  std::size_t epochs_ = 0;
  std::size_t best_epoch_ = 0;
  std::size_t since_best_ = 0;
  double best_ = 0.0;
};

struct ProbeTrainOptions {
  std::size_t max_epochs = 100;
  std::size_t patience = 5;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Zero-initialized affine probe trained with one Adam step per training
// utterance, in an order reshuffled each epoch from `seed`. Returns the
// parameters with the lowest dev loss.
ProbeModel train_probe(std::span<const ProbePair> train, std::span<const ProbePair> dev, std::uint64_t seed,
                       const ProbeTrainOptions& options = {});

// Sample correlation; nullopt when either input has zero variance.
// Throws std::invalid_argument on mismatched lengths or fewer than 2 samples.
std::optional<double> pearson(std::span<const double> x, std::span<const double> y);
std::optional<double> pearson(const Eigen::Ref<const Eigen::VectorXd>& x, const Eigen::Ref<const Eigen::VectorXd>& y);

struct ParameterScores {
  std::array<std::optional<double>, kParameterCount> pcc;
  std::vector<std::string> warnings;
};

// Correlates predictions with targets over the concatenation of all test
// utterances, separately for each articulatory parameter.
ParameterScores score(const ProbeModel& probe, std::span<const ProbePair> test);

struct ScoreReport {
  std::vector<std::string> speakers;
  std::vector<std::string> parameters;
  // speakers x parameters; nullopt where the correlation was undefined.
  std::vector<std::vector<std::optional<double>>> pcc;
  std::vector<double> speaker_means;
  std::vector<double> parameter_means;
  double grand_mean = 0.0;
  // Sample standard deviation of the speaker means over sqrt(#speakers);
  // nullopt with a single speaker.
  std::optional<double> standard_error;
  std::vector<std::string> warnings;
};

// Undefined entries are left out of the means with a warning. The grand mean
// is the mean of the speaker means. Throws ValidationError on a ragged matrix,
// mismatched names, or a speaker or parameter with no defined entry.
ScoreReport aggregate(std::vector<std::string> speakers, std::vector<std::string> parameters,
                      std::vector<std::vector<std::optional<double>>> pcc);

}  // namespace artiprobe
