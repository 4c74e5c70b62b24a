#pragma once

#include "blockdetail/diffusion/schedule.h"
#include "blockdetail/motion/array.h"
#include "blockdetail/motion/condition.h"

#include <span>
#include <string>

namespace blockdetail {

/// Unconditioned x0-predictor U(t, Y_t). Implementations are pure: the same
/// inputs give the same outputs, and evaluation draws no randomness.
class DenoiserU {
 public:
  virtual ~DenoiserU() = default;

  virtual const NoiseSchedule& schedule() const = 0;
  virtual ArrayShape shape() const = 0;
  virtual std::string name() const = 0;

  /// out[i] = U(t, noisy[i]). `out` entries are resized as needed.
  virtual void predict_batch(std::span<const MotionArray> noisy, int t,
                             std::span<MotionArray> out) const = 0;

  MotionArray predict(const MotionArray& noisy, int t) const;
};

/// Condition-taking x0-predictor R(X, t, Y_t). Same purity contract as
/// DenoiserU.
class DenoiserR {
 public:
  virtual ~DenoiserR() = default;

  virtual const NoiseSchedule& schedule() const = 0;
  virtual ArrayShape shape() const = 0;
  virtual std::string name() const = 0;

  virtual void predict_batch(std::span<const Condition> conditions,
                             std::span<const MotionArray> noisy, int t,
                             std::span<MotionArray> out) const = 0;

  MotionArray predict(const Condition& condition, const MotionArray& noisy, int t) const;
};

/// Throws ValidationError unless every entry of `arrays` has `shape` and t is
/// in [1, T].
void check_denoiser_inputs(const NoiseSchedule& schedule, const ArrayShape& shape,
                           std::span<const MotionArray> arrays, int t);

}  // namespace blockdetail
