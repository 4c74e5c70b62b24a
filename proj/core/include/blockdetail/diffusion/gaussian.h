#pragma once

#include "blockdetail/diffusion/denoiser.h"
#include "blockdetail/motion/motion.h"

#include <memory>
#include <vector>

namespace blockdetail {

struct KernelParams {
  double variance = 0.04;  // sigma^2, m^2
  double length = 6.0;     // frames
  double jitter = 1e-6;    // added to the diagonal
};

/// Independent Gaussian process per joint-coordinate channel over frames:
/// channel c ~ N(mean[:, c], covariance(c)).
class GaussianMotionPrior {
 public:
  /// `covariances` holds either one F x F matrix shared by every channel or
  /// one per channel. Throws ValidationError if any is not symmetric
  /// positive definite.
  GaussianMotionPrior(MotionArray mean, std::vector<Eigen::MatrixXd> covariances);

  /// Squared-exponential temporal kernel shared across channels.
  static GaussianMotionPrior squared_exponential(MotionArray mean, const KernelParams& kernel = {});

  /// Mean of `dataset` (all clips must share a shape) with an SE kernel.
  static GaussianMotionPrior fit(const std::vector<Motion>& dataset,
                                 const KernelParams& kernel = {});

  const MotionArray& mean() const { return mean_; }
  const ArrayShape& shape() const { return mean_.shape(); }
  bool shared_covariance() const { return covariances_.size() == 1; }
  const Eigen::MatrixXd& covariance(int channel) const {
    return covariances_[shared_covariance() ? 0 : channel];
  }

  /// One exact draw from the prior.
  MotionArray sample(std::uint64_t seed) const;

 private:
  MotionArray mean_;
  std::vector<Eigen::MatrixXd> covariances_;
};

Eigen::MatrixXd squared_exponential_kernel(int frames, const KernelParams& kernel);

/// E[Y | Y_t] under the prior: per channel
/// mu + sqrt(ab) S (ab S + (1 - ab) I)^-1 (Y_t - sqrt(ab) mu), via Cholesky.
MotionArray gaussian_posterior_x0(const GaussianMotionPrior& prior, const NoiseSchedule& schedule,
                                  const MotionArray& noisy, int t);

/// E[Y | Y_t, X] where X = Y + N(0, obs_variance I).
MotionArray gaussian_conditional_x0(const GaussianMotionPrior& prior,
                                    const NoiseSchedule& schedule, const Condition& condition,
                                    double obs_variance, const MotionArray& noisy, int t);

class GaussianDenoiserU final : public DenoiserU {
 public:
  GaussianDenoiserU(std::shared_ptr<const GaussianMotionPrior> prior, NoiseSchedule schedule);

  const NoiseSchedule& schedule() const override { return schedule_; }
  ArrayShape shape() const override { return prior_->shape(); }
  std::string name() const override { return "gaussian-u"; }
  void predict_batch(std::span<const MotionArray> noisy, int t,
                     std::span<MotionArray> out) const override;

  const GaussianMotionPrior& prior() const { return *prior_; }

 private:
  std::shared_ptr<const GaussianMotionPrior> prior_;
  NoiseSchedule schedule_;
};

class GaussianDenoiserR final : public DenoiserR {
 public:
  GaussianDenoiserR(std::shared_ptr<const GaussianMotionPrior> prior, NoiseSchedule schedule,
                    double obs_variance = 0.01);

  const NoiseSchedule& schedule() const override { return schedule_; }
  ArrayShape shape() const override { return prior_->shape(); }
  std::string name() const override { return "gaussian-r"; }
  void predict_batch(std::span<const Condition> conditions, std::span<const MotionArray> noisy,
                     int t, std::span<MotionArray> out) const override;

  double obs_variance() const { return obs_variance_; }

 private:
  std::shared_ptr<const GaussianMotionPrior> prior_;
  NoiseSchedule schedule_;
  double obs_variance_;
};

}  // namespace blockdetail
