#include "blockdetail/diffusion/schedule.h"

#include "blockdetail/common/error.h"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace blockdetail {

namespace {

constexpr double kMaxBeta = 0.99999;

}  // namespace

NoiseSchedule::NoiseSchedule(int steps, double offset) : steps_(steps), offset_(offset) {
  if (steps < 1) throw ValidationError("schedule needs T >= 1", "schedule.steps");
  if (!(offset > 0.0)) throw ValidationError("cosine offset must be positive", "schedule.offset");

  auto f = [&](int t) {
    const double x = (double(t) / steps + offset) / (1.0 + offset) * std::numbers::pi / 2.0;
    const double c = std::cos(x);
    return c * c;
  };
  alpha_bar_.assign(steps + 1, 1.0);
  for (int t = 1; t <= steps; ++t) {
    const double beta = std::clamp(1.0 - f(t) / f(t - 1), 0.0, kMaxBeta);
    alpha_bar_[t] = alpha_bar_[t - 1] * (1.0 - beta);
  }

  for (int t = 1; t <= steps; ++t) {
    if (!(alpha_bar_[t] < alpha_bar_[t - 1]) || !(alpha_bar_[t] > 0.0)) {
      throw ValidationError("alpha_bar is not strictly decreasing in (0, 1] at t=" +
                                std::to_string(t),
                            "schedule");
    }
  }
  if (!(alpha_bar_[steps] < 1e-4)) {
    throw ValidationError("alpha_bar(T) must be below 1e-4", "schedule");
  }
}

MotionArray forward_noise(const NoiseSchedule& schedule, const MotionArray& clean, int t,
                          const MotionArray& noise) {
  if (t < 0 || t > schedule.steps()) {
    throw ValidationError("timestep " + std::to_string(t) + " outside [0, " +
                              std::to_string(schedule.steps()) + "]",
                          "t");
  }
  if (!(clean.shape() == noise.shape())) throw ValidationError("noise shape differs", "noise");
  const double ab = schedule.alpha_bar(t);
  if (t == 0) return clean;
  return MotionArray(clean.shape(),
                     std::sqrt(ab) * clean.data() + std::sqrt(1.0 - ab) * noise.data());
}

PosteriorCoefficients posterior_coefficients(const NoiseSchedule& schedule, int t) {
  if (t < 1 || t > schedule.steps()) {
    throw ValidationError("timestep " + std::to_string(t) + " outside [1, " +
                              std::to_string(schedule.steps()) + "]",
                          "t");
  }
  const double ab_t = schedule.alpha_bar(t);
  const double ab_prev = schedule.alpha_bar(t - 1);
  const double beta = 1.0 - ab_t / ab_prev;
  const double alpha = 1.0 - beta;
  PosteriorCoefficients c;
  c.c0 = std::sqrt(ab_prev) * beta / (1.0 - ab_t);
  c.ct = std::sqrt(alpha) * (1.0 - ab_prev) / (1.0 - ab_t);
  c.variance = (1.0 - ab_prev) / (1.0 - ab_t) * beta;
  return c;
}

}  // namespace blockdetail
