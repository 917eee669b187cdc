#include "artiprobe/guided_pca.hpp"

#include <cmath>
#include <string>
#include <string_view>

#include <Eigen/Eigenvalues>

#include "artiprobe/error.hpp"

namespace artiprobe {

namespace ch = ema_channel;

namespace {

void orient(Eigen::Vector2d& axis) {
  const Eigen::Index largest = std::abs(axis(1)) > std::abs(axis(0)) ? 1 : 0;
  if (axis(largest) < 0.0) axis = -axis;
}

}  // namespace

Eigen::Vector2d principal_axis(const Eigen::Ref<const Eigen::VectorXd>& x, const Eigen::Ref<const Eigen::VectorXd>& y) {
  const double n = static_cast<double>(x.size());
  Eigen::Matrix2d cov;
  cov(0, 0) = x.squaredNorm() / n;
  cov(1, 1) = y.squaredNorm() / n;
  cov(0, 1) = cov(1, 0) = x.dot(y) / n;
  const Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(cov);
  Eigen::Vector2d axis = eig.eigenvectors().col(1);  // eigenvalues ascend
  axis.normalize();
  orient(axis);
  return axis;
}

Eigen::Matrix<double, 6, 12> GuidedPcaModel::loadings() const {
  using Row = Eigen::Matrix<double, 1, 12>;
  Row jaw = Row::Zero();
  jaw(ch::li_x) = jaw_axis(0);
  jaw(ch::li_y) = jaw_axis(1);

  // Residual of channel c as a linear function of the centred coordinates.
  auto residual = [&](int c) {
    Row r = -jaw_regression(c) * jaw;
    r(c) += 1.0;
    return r;
  };
  auto combine = [&](const Eigen::Vector2d& axis, int cx, int cy) {
    return Row(axis(0) * residual(cx) + axis(1) * residual(cy));
  };

  Eigen::Matrix<double, 6, 12> l;
  l.row(0) = jaw;
  l.row(1) = combine(tongue_body_axis, ch::tb_x, ch::tb_y);
  l.row(2) = combine(tongue_dorsum_axis, ch::td_x, ch::td_y);
  l.row(3) = combine(tongue_tip_axis, ch::tt_x, ch::tt_y);
  l.row(4) = combine(lip_protrusion_axis, ch::ul_x, ch::ll_x);
  l.row(5) = combine(lip_height_axis, ch::ll_y, ch::ul_y);
  return l;
}

GuidedPcaModel fit_guided_pca(std::span<const EmaRecord> training) {
  if (training.size() < 2) throw ValidationError("guided PCA needs at least two training records");
  Eigen::Index frames = 0;
  for (const auto& r : training) {
    if (r.sample_rate != 100.0) throw ValidationError(r.utterance_id + ": guided PCA expects 100 Hz records");
    if (r.channels.cols() != 12) throw ValidationError(r.utterance_id + ": expected 12 EMA channels");
    frames += r.sample_count();
  }
  if (frames < 1000) throw ValidationError("guided PCA needs at least 1000 pooled frames");

  Eigen::MatrixXd x(frames, 12);
  Eigen::Index row = 0;
  for (const auto& r : training) {
    x.middleRows(row, r.sample_count()) = r.channels;
    row += r.sample_count();
  }

  GuidedPcaModel model;
  model.channel_means = x.colwise().mean().transpose();
  x.rowwise() -= model.channel_means.transpose();
  // A single constant coordinate is fine (its coil then moves along the other
  // axis); a coil pair without any variance has no principal direction.
  const auto coil_axis = [&](const Eigen::MatrixXd& m, int cx, int cy, std::string_view name) {
    const double var = (m.col(cx).squaredNorm() + m.col(cy).squaredNorm()) / static_cast<double>(frames);
    if (!(var > 1e-18)) throw RuntimeFailure("degenerate covariance: " + std::string(name) + " has zero variance");
    return principal_axis(m.col(cx), m.col(cy));
  };

  model.jaw_axis = coil_axis(x, ch::li_x, ch::li_y, "lower incisor");
  const Eigen::VectorXd jaw = model.jaw_axis(0) * x.col(ch::li_x) + model.jaw_axis(1) * x.col(ch::li_y);
  const double jaw_ss = jaw.squaredNorm();

  Eigen::MatrixXd residual = x;
  for (int c = 0; c < 12; ++c) {
    if (c == ch::li_x || c == ch::li_y) continue;
    model.jaw_regression(c) = x.col(c).dot(jaw) / jaw_ss;
    residual.col(c) -= model.jaw_regression(c) * jaw;
  }

  model.tongue_body_axis = coil_axis(residual, ch::tb_x, ch::tb_y, "tongue body residual");
  model.tongue_dorsum_axis = coil_axis(residual, ch::td_x, ch::td_y, "tongue dorsum residual");
  model.tongue_tip_axis = coil_axis(residual, ch::tt_x, ch::tt_y, "tongue tip residual");
  model.lip_protrusion_axis = coil_axis(residual, ch::ul_x, ch::ll_x, "lip protrusion residual");
  model.lip_height_axis = Eigen::Vector2d(1.0, -1.0) / std::sqrt(2.0);

  const Eigen::MatrixXd params = x * model.loadings().transpose();
  model.parameter_mean = params.colwise().mean().transpose();
  const Eigen::MatrixXd centred = params.rowwise() - model.parameter_mean.transpose();
  for (Eigen::Index p = 0; p < 6; ++p) {
    const double sd = std::sqrt(centred.col(p).squaredNorm() / static_cast<double>(frames));
    if (!(sd > 0.0)) throw RuntimeFailure("degenerate covariance: articulatory parameter " + std::string(kArticulatoryParameters[static_cast<std::size_t>(p)]) + " is constant");
    model.parameter_std(p) = sd;
  }
  return model;
}

Eigen::MatrixXd project_raw(const GuidedPcaModel& model, const EmaRecord& rec) {
  if (rec.channels.cols() != 12) throw ValidationError(rec.utterance_id + ": expected 12 EMA channels");
  const Eigen::MatrixXd centred = rec.channels.rowwise() - model.channel_means.transpose();
  return centred * model.loadings().transpose();
}

ArticulatorySeries project(const GuidedPcaModel& model, const EmaRecord& rec) {
  if (rec.sample_rate != 100.0) throw ValidationError(rec.utterance_id + ": projection expects a 100 Hz record");
  ArticulatorySeries out;
  out.utterance_id = rec.utterance_id;
  out.frame_rate = rec.sample_rate;
  out.values = project_raw(model, rec);
  out.values.rowwise() -= model.parameter_mean.transpose();
  out.values.array().rowwise() /= model.parameter_std.transpose().array();
  return out;
}

}  // namespace artiprobe
