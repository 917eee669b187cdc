#pragma once

#include <cstdint>

#include <Eigen/Core>

namespace artiprobe {

struct AdamState {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::int64_t step = 0;
  Eigen::MatrixXd first_moment;
  Eigen::MatrixXd second_moment;

  static AdamState zeros(Eigen::Index rows, Eigen::Index cols);
};

// Bias-corrected Adam update of `params` in place. Throws std::invalid_argument
// on a shape mismatch and RuntimeFailure on a non-finite gradient.
void adam_step(AdamState& state, Eigen::Ref<Eigen::MatrixXd> params, const Eigen::Ref<const Eigen::MatrixXd>& grads);

}  // namespace artiprobe
