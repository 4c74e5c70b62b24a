#include "blockdetail/diffusion/sampler.h"

#include "blockdetail/common/error.h"
#include "blockdetail/common/rng.h"

#include <cmath>
#include <random>

namespace blockdetail {

namespace {

void fill_normal(Eigen::MatrixXd& m, Rng& rng) {
  std::normal_distribution<double> normal;
  double* p = m.data();
  for (Eigen::Index i = 0; i < m.size(); ++i) p[i] = normal(rng);
}

void check_condition(const Condition& c, const ArrayShape& shape, std::size_t chain) {
  const std::string where = "conditions[" + std::to_string(chain) + "]";
  if (!(c.frames.shape() == shape) || c.frames.data().rows() != shape.frames ||
      c.frames.data().cols() != shape.channels()) {
    throw ValidationError("step hook returned malformed condition: shape " +
                              to_string(c.frames.shape()) + ", expected " + to_string(shape),
                          where);
  }
  if (!c.frames.all_finite()) {
    throw ValidationError("step hook returned malformed condition: non-finite entries", where);
  }
}

}  // namespace

std::vector<MotionArray> run_ancestral_batch(const NoiseSchedule& schedule, ArrayShape shape,
                                             std::span<const std::uint64_t> seeds,
                                             const PredictFn& predict,
                                             const StepObserver& observer) {
  if (shape.frames < 1 || shape.channels() < 1) throw ValidationError("empty sample shape");
  const std::size_t chains = seeds.size();
  std::vector<Rng> rngs;
  rngs.reserve(chains);
  std::vector<MotionArray> y(chains, MotionArray(shape));
  std::vector<MotionArray> x0(chains, MotionArray(shape));
  for (std::size_t i = 0; i < chains; ++i) {
    rngs.emplace_back(seeds[i]);
    fill_normal(y[i].data(), rngs[i]);
  }

  Eigen::MatrixXd noise(shape.frames, shape.channels());
  for (int t = schedule.steps(); t >= 1; --t) {
    predict(t, y, x0);
    for (std::size_t i = 0; i < chains; ++i) {
      if (!(x0[i].shape() == shape)) {
        throw Error("denoiser returned shape " + to_string(x0[i].shape()));
      }
    }
    if (observer) observer(t, y, x0);

    const PosteriorCoefficients c = posterior_coefficients(schedule, t);
    for (std::size_t i = 0; i < chains; ++i) {
      if (t == 1) {
        y[i] = x0[i];
        continue;
      }
      fill_normal(noise, rngs[i]);
      y[i].data() = c.c0 * x0[i].data() + c.ct * y[i].data() + std::sqrt(c.variance) * noise;
    }
  }
  return y;
}

std::vector<MotionArray> run_conditioned_batch(const DenoiserR& denoiser,
                                               std::span<const std::uint64_t> seeds,
                                               std::vector<Condition> conditions,
                                               const ConditionHook& hook) {
  const ArrayShape shape = denoiser.shape();
  if (conditions.size() != seeds.size()) {
    throw ValidationError("need one condition per chain", "conditions");
  }
  for (std::size_t i = 0; i < conditions.size(); ++i) {
    if (!(conditions[i].frames.shape() == shape) || !conditions[i].frames.all_finite()) {
      throw ValidationError("condition does not match denoiser shape " + to_string(shape),
                            "conditions[" + std::to_string(i) + "]");
    }
  }
  auto predict = [&](int t, std::span<const MotionArray> noisy, std::span<MotionArray> x0) {
    denoiser.predict_batch(conditions, noisy, t, x0);
  };
  auto observe = [&](int t, std::span<const MotionArray> noisy, std::span<const MotionArray> x0) {
    if (!hook) return;
    hook(t, noisy, x0, conditions);
    for (std::size_t i = 0; i < conditions.size(); ++i) check_condition(conditions[i], shape, i);
  };
  return run_ancestral_batch(denoiser.schedule(), shape, seeds, predict, observe);
}

MotionArray sample(const DenoiserU& denoiser, std::uint64_t seed, const StepObserver& observer) {
  auto predict = [&](int t, std::span<const MotionArray> noisy, std::span<MotionArray> x0) {
    denoiser.predict_batch(noisy, t, x0);
  };
  const std::uint64_t seeds[] = {seed};
  return std::move(
      run_ancestral_batch(denoiser.schedule(), denoiser.shape(), seeds, predict, observer)[0]);
}

MotionArray sample_conditioned(const DenoiserR& denoiser, const Condition& condition,
                               std::uint64_t seed, const ConditionHook& hook) {
  const std::uint64_t seeds[] = {seed};
  return std::move(run_conditioned_batch(denoiser, seeds, {condition}, hook)[0]);
}

}  // namespace blockdetail
