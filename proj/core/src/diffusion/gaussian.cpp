#include "blockdetail/diffusion/gaussian.h"

#include "blockdetail/common/error.h"
#include "blockdetail/common/rng.h"

#include <Eigen/Cholesky>

#include <cmath>
#include <utility>

namespace blockdetail {

namespace {

Eigen::LLT<Eigen::MatrixXd> factor(const Eigen::MatrixXd& m) {
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  if (llt.info() != Eigen::Success) throw Error("covariance system is not positive definite");
  return llt;
}

// out_i = mean + s * S (a S + b I)^-1 r_i for every item, channel by channel.
// With a shared covariance all channels and items go through one
// factorization as a single multi-column solve.
void apply_gain(const GaussianMotionPrior& prior, double a, double b, double s,
                const std::vector<Eigen::MatrixXd>& residuals, std::span<MotionArray> out) {
  const ArrayShape shape = prior.shape();
  const int frames = shape.frames;
  const int channels = shape.channels();
  const Eigen::Index items = static_cast<Eigen::Index>(residuals.size());
  const Eigen::MatrixXd identity = Eigen::MatrixXd::Identity(frames, frames);

  for (Eigen::Index i = 0; i < items; ++i) {
    if (!(out[i].shape() == shape)) out[i] = MotionArray(shape);
  }

  if (prior.shared_covariance()) {
    const Eigen::MatrixXd& cov = prior.covariance(0);
    const auto llt = factor(a * cov + b * identity);
    Eigen::MatrixXd rhs(frames, channels * items);
    for (Eigen::Index i = 0; i < items; ++i) rhs.middleCols(i * channels, channels) = residuals[i];
    const Eigen::MatrixXd gain = s * (cov * llt.solve(rhs));
    for (Eigen::Index i = 0; i < items; ++i) {
      out[i].data() = prior.mean().data() + gain.middleCols(i * channels, channels);
    }
    return;
  }

  Eigen::MatrixXd rhs(frames, items);
  for (int c = 0; c < channels; ++c) {
    const Eigen::MatrixXd& cov = prior.covariance(c);
    const auto llt = factor(a * cov + b * identity);
    for (Eigen::Index i = 0; i < items; ++i) rhs.col(i) = residuals[i].col(c);
    const Eigen::MatrixXd gain = s * (cov * llt.solve(rhs));
    for (Eigen::Index i = 0; i < items; ++i) {
      out[i].data().col(c) = prior.mean().data().col(c) + gain.col(i);
    }
  }
}

void check_shape(const GaussianMotionPrior& prior, const MotionArray& a, const char* what) {
  if (!(a.shape() == prior.shape())) {
    throw ValidationError(std::string(what) + " shape " + to_string(a.shape()) +
                          " does not match prior shape " + to_string(prior.shape()));
  }
}

}  // namespace

Eigen::MatrixXd squared_exponential_kernel(int frames, const KernelParams& kernel) {
  if (frames < 1) throw ValidationError("kernel needs at least one frame");
  if (!(kernel.variance > 0.0) || !(kernel.length > 0.0) || !(kernel.jitter >= 0.0)) {
    throw ValidationError("kernel parameters must be positive", "kernel");
  }
  Eigen::MatrixXd k(frames, frames);
  for (int i = 0; i < frames; ++i) {
    for (int j = 0; j < frames; ++j) {
      const double d = i - j;
      k(i, j) = kernel.variance * std::exp(-d * d / (2.0 * kernel.length * kernel.length));
    }
  }
  k.diagonal().array() += kernel.jitter;
  return k;
}

GaussianMotionPrior::GaussianMotionPrior(MotionArray mean, std::vector<Eigen::MatrixXd> covariances)
    : mean_(std::move(mean)), covariances_(std::move(covariances)) {
  require_finite(mean_, "prior mean");
  if (covariances_.size() != 1 && static_cast<int>(covariances_.size()) != mean_.channels()) {
    throw ValidationError("prior needs one shared covariance or one per channel", "covariances");
  }
  for (std::size_t c = 0; c < covariances_.size(); ++c) {
    const Eigen::MatrixXd& m = covariances_[c];
    const std::string path = "covariances[" + std::to_string(c) + "]";
    if (m.rows() != mean_.frames() || m.cols() != mean_.frames()) {
      throw ValidationError("covariance must be F x F", path);
    }
    if (!m.allFinite() || (m - m.transpose()).cwiseAbs().maxCoeff() > 1e-12 * m.cwiseAbs().maxCoeff()) {
      throw ValidationError("covariance must be symmetric", path);
    }
    Eigen::LLT<Eigen::MatrixXd> llt(m);
    if (llt.info() != Eigen::Success) {
      throw ValidationError("covariance is not positive definite", path);
    }
  }
}

GaussianMotionPrior GaussianMotionPrior::squared_exponential(MotionArray mean,
                                                             const KernelParams& kernel) {
  Eigen::MatrixXd k = squared_exponential_kernel(mean.frames(), kernel);
  return GaussianMotionPrior(std::move(mean), {std::move(k)});
}

GaussianMotionPrior GaussianMotionPrior::fit(const std::vector<Motion>& dataset,
                                             const KernelParams& kernel) {
  if (dataset.empty()) throw ValidationError("cannot fit a prior to an empty dataset", "dataset");
  const ArrayShape shape = dataset.front().frames().shape();
  Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(shape.frames, shape.channels());
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    if (!(dataset[i].frames().shape() == shape)) {
      throw ValidationError("dataset clips differ in shape", "dataset[" + std::to_string(i) + "]");
    }
    sum += dataset[i].frames().data();
  }
  return squared_exponential(MotionArray(shape, sum / double(dataset.size())), kernel);
}

MotionArray GaussianMotionPrior::sample(std::uint64_t seed) const {
  Rng rng(seed);
  std::normal_distribution<double> normal;
  MotionArray out = mean_;
  Eigen::VectorXd z(mean_.frames());
  const Eigen::LLT<Eigen::MatrixXd> shared = factor(covariances_[0]);
  for (int c = 0; c < mean_.channels(); ++c) {
    for (Eigen::Index f = 0; f < z.size(); ++f) z[f] = normal(rng);
    if (shared_covariance()) {
      out.data().col(c) += shared.matrixL() * z;
    } else {
      out.data().col(c) += factor(covariances_[c]).matrixL() * z;
    }
  }
  return out;
}

MotionArray gaussian_posterior_x0(const GaussianMotionPrior& prior, const NoiseSchedule& schedule,
                                  const MotionArray& noisy, int t) {
  GaussianDenoiserU u(std::make_shared<const GaussianMotionPrior>(prior), schedule);
  return u.predict(noisy, t);
}

MotionArray gaussian_conditional_x0(const GaussianMotionPrior& prior,
                                    const NoiseSchedule& schedule, const Condition& condition,
                                    double obs_variance, const MotionArray& noisy, int t) {
  GaussianDenoiserR r(std::make_shared<const GaussianMotionPrior>(prior), schedule, obs_variance);
  return r.predict(condition, noisy, t);
}

GaussianDenoiserU::GaussianDenoiserU(std::shared_ptr<const GaussianMotionPrior> prior,
                                     NoiseSchedule schedule)
    : prior_(std::move(prior)), schedule_(std::move(schedule)) {
  if (!prior_) throw ValidationError("missing prior", "prior");
}

void GaussianDenoiserU::predict_batch(std::span<const MotionArray> noisy, int t,
                                      std::span<MotionArray> out) const {
  check_denoiser_inputs(schedule_, shape(), noisy, t);
  if (out.size() != noisy.size()) throw ValidationError("output batch size mismatch");
  const double ab = schedule_.alpha_bar(t);
  const double root_ab = std::sqrt(ab);
  std::vector<Eigen::MatrixXd> residuals;
  residuals.reserve(noisy.size());
  for (const MotionArray& y : noisy) residuals.push_back(y.data() - root_ab * prior_->mean().data());
  apply_gain(*prior_, ab, 1.0 - ab, root_ab, residuals, out);
}

GaussianDenoiserR::GaussianDenoiserR(std::shared_ptr<const GaussianMotionPrior> prior,
                                     NoiseSchedule schedule, double obs_variance)
    : prior_(std::move(prior)), schedule_(std::move(schedule)), obs_variance_(obs_variance) {
  if (!prior_) throw ValidationError("missing prior", "prior");
  if (!(obs_variance > 0.0) || !std::isfinite(obs_variance)) {
    throw ValidationError("observation variance must be positive", "obs_variance");
  }
}

void GaussianDenoiserR::predict_batch(std::span<const Condition> conditions,
                                      std::span<const MotionArray> noisy, int t,
                                      std::span<MotionArray> out) const {
  check_denoiser_inputs(schedule_, shape(), noisy, t);
  if (out.size() != noisy.size() || conditions.size() != noisy.size()) {
    throw ValidationError("batch size mismatch");
  }
  for (const Condition& c : conditions) check_shape(*prior_, c.frames, "condition");

  // Fold both observations of Y into one: z = Y + N(0, 1/lambda).
  const double ab = schedule_.alpha_bar(t);
  const double diffusion_precision = ab / (1.0 - ab);
  const double condition_precision = 1.0 / obs_variance_;
  const double lambda = diffusion_precision + condition_precision;
  const double y_weight = std::sqrt(ab) / (1.0 - ab) / lambda;
  const double x_weight = condition_precision / lambda;

  std::vector<Eigen::MatrixXd> residuals;
  residuals.reserve(noisy.size());
  for (std::size_t i = 0; i < noisy.size(); ++i) {
    residuals.push_back(y_weight * noisy[i].data() + x_weight * conditions[i].frames.data() -
                        prior_->mean().data());
  }
  apply_gain(*prior_, 1.0, 1.0 / lambda, 1.0, residuals, out);
}

}  // namespace blockdetail
