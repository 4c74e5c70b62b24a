#include "blockdetail/eval/fid.h"

#include "blockdetail/common/error.h"
#include "blockdetail/eval/features.h"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>

namespace blockdetail {

namespace {

constexpr double kRegularization = 1e-6;
constexpr double kShrinkage = 0.1;

Eigen::MatrixXd symmetric_sqrt(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (m + m.transpose()));
  const Eigen::VectorXd roots = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return eig.eigenvectors() * roots.asDiagonal() * eig.eigenvectors().transpose();
}

}  // namespace

GaussianFit fit_gaussian(const Eigen::MatrixXd& features) {
  const Eigen::Index n = features.rows();
  const Eigen::Index d = features.cols();
  if (n == 0) throw ValidationError("cannot fit a Gaussian to an empty set");
  if (!features.allFinite()) throw ValidationError("non-finite feature value");
  GaussianFit fit;
  fit.mean = features.colwise().mean().transpose();
  const Eigen::MatrixXd centered = features.rowwise() - fit.mean.transpose();
  fit.covariance = n > 1 ? Eigen::MatrixXd(centered.transpose() * centered / double(n - 1))
                         : Eigen::MatrixXd::Zero(d, d);
  if (n < d + 1) {
    const double avg = fit.covariance.trace() / double(d);
    fit.covariance *= 1.0 - kShrinkage;
    fit.covariance.diagonal().array() += kShrinkage * avg;
  }
  fit.covariance.diagonal().array() += kRegularization;
  return fit;
}

namespace {

// tr sqrt(S_a^1/2 S_b S_a^1/2).
double cross_trace(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  const Eigen::MatrixXd root_a = symmetric_sqrt(a);
  const Eigen::MatrixXd product = root_a * b * root_a;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (product + product.transpose()),
                                                     Eigen::EigenvaluesOnly);
  return eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();
}

}  // namespace

double frechet_distance(const GaussianFit& a, const GaussianFit& b) {
  if (a.mean.size() != b.mean.size()) throw ValidationError("feature dimensions differ");
  // Mean over both factor orders.
  const double cross = 0.5 * (cross_trace(a.covariance, b.covariance) +
                              cross_trace(b.covariance, a.covariance));
  const double value = (a.mean - b.mean).squaredNorm() + a.covariance.trace() +
                       b.covariance.trace() - 2.0 * cross;
  return std::max(0.0, value);
}

double fid_features(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return frechet_distance(fit_gaussian(a), fit_gaussian(b));
}

Eigen::MatrixXd feature_matrix(const std::vector<MotionArray>& clips, double fps) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(clips.size()), kFeatureDim);
  for (std::size_t i = 0; i < clips.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = motion_features(clips[i], fps).transpose();
  }
  return out;
}

double fid(const std::vector<MotionArray>& set_a, const std::vector<MotionArray>& set_b) {
  if (set_a.empty() || set_b.empty()) throw ValidationError("fid needs two non-empty sets");
  return fid_features(feature_matrix(set_a), feature_matrix(set_b));
}

double fid(const std::vector<Motion>& set_a, const std::vector<Motion>& set_b) {
  std::vector<MotionArray> a;
  std::vector<MotionArray> b;
  for (const Motion& m : set_a) a.push_back(m.frames());
  for (const Motion& m : set_b) b.push_back(m.frames());
  return fid(a, b);
}

}  // namespace blockdetail
