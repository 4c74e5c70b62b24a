#pragma once

#include "blockdetail/motion/array.h"

#include <vector>

namespace blockdetail {

inline constexpr int kDefaultSteps = 1000;

/// Cosine alpha-bar schedule with T steps; alpha_bar(0) = 1.
class NoiseSchedule {
 public:
  NoiseSchedule() : NoiseSchedule(kDefaultSteps) {}
  /// Throws ValidationError for steps < 1 and if the resulting table breaks
  /// strict monotonicity or ends above 1e-4.
  explicit NoiseSchedule(int steps, double offset = 0.008);

  int steps() const { return steps_; }
  double offset() const { return offset_; }

  double alpha_bar(int t) const { return alpha_bar_.at(t); }
  double beta(int t) const { return 1.0 - alpha_bar_.at(t) / alpha_bar_.at(t - 1); }
  const std::vector<double>& alpha_bar_table() const { return alpha_bar_; }

  friend bool operator==(const NoiseSchedule& a, const NoiseSchedule& b) {
    return a.steps_ == b.steps_ && a.offset_ == b.offset_;
  }

 private:
  int steps_;
  double offset_;
  std::vector<double> alpha_bar_;
};

/// Y_t = sqrt(alpha_bar_t) Y + sqrt(1 - alpha_bar_t) noise.
MotionArray forward_noise(const NoiseSchedule& schedule, const MotionArray& clean, int t,
                          const MotionArray& noise);

/// Coefficients of q(Y_{t-1} | Y_t, x0) = N(c0 x0 + ct Y_t, variance).
struct PosteriorCoefficients {
  double c0 = 0.0;
  double ct = 0.0;
  double variance = 0.0;
};

PosteriorCoefficients posterior_coefficients(const NoiseSchedule& schedule, int t);

}  // namespace blockdetail
