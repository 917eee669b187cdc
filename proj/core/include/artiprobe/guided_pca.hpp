#pragma once

#include <span>

#include <Eigen/Core>

#include "artiprobe/ema.hpp"

namespace artiprobe {

// Jaw-first linear decomposition of the 12 EMA coordinates into the six
// articulatory parameters:
//   1. jaw height: first principal axis of the lower-incisor (x, y);
//   2. every other coordinate is regressed on the jaw parameter and replaced
//      by its residual;
//   3. tongue body, dorsum and tip: first principal axis of each coil's
//      residual (x, y);
//   4. lip protrusion: first principal axis of the residual (ul_x, ll_x);
//   5. lip height: residual vertical aperture (ll_y - ul_y) / sqrt(2).
// Each principal axis is oriented so its largest-magnitude loading is
// positive. Parameters are z-scored with the training-frame statistics.
struct GuidedPcaModel {
  Eigen::Matrix<double, 12, 1> channel_means = Eigen::Matrix<double, 12, 1>::Zero();
  Eigen::Vector2d jaw_axis = Eigen::Vector2d::Zero();
  // Regression coefficient on the jaw parameter per channel (0 for li_x, li_y).
  Eigen::Matrix<double, 12, 1> jaw_regression = Eigen::Matrix<double, 12, 1>::Zero();
  Eigen::Vector2d tongue_body_axis = Eigen::Vector2d::Zero();
  Eigen::Vector2d tongue_dorsum_axis = Eigen::Vector2d::Zero();
  Eigen::Vector2d tongue_tip_axis = Eigen::Vector2d::Zero();
  Eigen::Vector2d lip_protrusion_axis = Eigen::Vector2d::Zero();  // on (ul_x, ll_x)
  Eigen::Vector2d lip_height_axis = Eigen::Vector2d::Zero();      // on (ll_y, ul_y)
  Eigen::Matrix<double, 6, 1> parameter_mean = Eigen::Matrix<double, 6, 1>::Zero();
  Eigen::Matrix<double, 6, 1> parameter_std = Eigen::Matrix<double, 6, 1>::Ones();

  // Linear part of the decomposition: raw parameters = L (x - channel_means).
  Eigen::Matrix<double, 6, 12> loadings() const;
};

// Precondition: >= 2 records at 100 Hz, >= 1000 pooled frames.
GuidedPcaModel fit_guided_pca(std::span<const EmaRecord> training);

// Parameters before z-scoring: rows are L (x - mean).
Eigen::MatrixXd project_raw(const GuidedPcaModel& model, const EmaRecord& rec);

// z-scored parameters.
ArticulatorySeries project(const GuidedPcaModel& model, const EmaRecord& rec);

// First principal axis of two centred coordinates, sign-normalized.
Eigen::Vector2d principal_axis(const Eigen::Ref<const Eigen::VectorXd>& x, const Eigen::Ref<const Eigen::VectorXd>& y);

}  // namespace artiprobe
