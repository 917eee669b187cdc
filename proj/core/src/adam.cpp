#include "artiprobe/adam.hpp"

#include <cmath>
#include <stdexcept>

#include "artiprobe/error.hpp"

namespace artiprobe {

AdamState AdamState::zeros(Eigen::Index rows, Eigen::Index cols) {
  AdamState s;
  s.first_moment = Eigen::MatrixXd::Zero(rows, cols);
  s.second_moment = Eigen::MatrixXd::Zero(rows, cols);
  return s;
}

void adam_step(AdamState& state, Eigen::Ref<Eigen::MatrixXd> params, const Eigen::Ref<const Eigen::MatrixXd>& grads) {
  if (params.rows() != grads.rows() || params.cols() != grads.cols() ||
      state.first_moment.rows() != params.rows() || state.first_moment.cols() != params.cols() ||
      state.second_moment.rows() != params.rows() || state.second_moment.cols() != params.cols()) {
    throw std::invalid_argument("adam_step: parameter, gradient and moment shapes differ");
  }
  if (!grads.allFinite()) throw RuntimeFailure("adam_step: non-finite gradient");

  ++state.step;
  state.first_moment = state.beta1 * state.first_moment + (1.0 - state.beta1) * grads;
  state.second_moment = state.beta2 * state.second_moment + (1.0 - state.beta2) * grads.cwiseAbs2();
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  params.array() -= state.learning_rate * (state.first_moment.array() / c1) /
                    ((state.second_moment.array() / c2).sqrt() + state.epsilon);
}

}  // namespace artiprobe
