#pragma once

#include "blockdetail/motion/motion.h"

#include <Eigen/Core>

#include <vector>

namespace blockdetail {

struct GaussianFit {
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;
};

/// Mean and unbiased covariance of the rows of `features` (n x d), plus
/// 1e-6 I. With fewer than d + 1 rows the covariance is first shrunk 10%
/// toward (trace / d) I. Throws ValidationError for n = 0.
GaussianFit fit_gaussian(const Eigen::MatrixXd& features);

/// |mu_a - mu_b|^2 + tr(S_a + S_b - 2 (S_a S_b)^1/2), the cross term taken
/// as tr sqrt(S_a^1/2 S_b S_a^1/2) from a symmetric eigendecomposition with
/// negative eigenvalues clamped to 0. Never negative.
double frechet_distance(const GaussianFit& a, const GaussianFit& b);

/// Frechet distance between feature sets given as rows.
double fid_features(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

/// motion_features for every clip, one row each.
Eigen::MatrixXd feature_matrix(const std::vector<MotionArray>& clips, double fps = kDefaultFps);

double fid(const std::vector<MotionArray>& set_a, const std::vector<MotionArray>& set_b);
double fid(const std::vector<Motion>& set_a, const std::vector<Motion>& set_b);

}  // namespace blockdetail
