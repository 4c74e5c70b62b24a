#include "blockdetail/diffusion/denoiser.h"

#include "blockdetail/common/error.h"

namespace blockdetail {

MotionArray DenoiserU::predict(const MotionArray& noisy, int t) const {
  MotionArray out;
  predict_batch({&noisy, 1}, t, {&out, 1});
  return out;
}

MotionArray DenoiserR::predict(const Condition& condition, const MotionArray& noisy, int t) const {
  MotionArray out;
  predict_batch({&condition, 1}, {&noisy, 1}, t, {&out, 1});
  return out;
}

void check_denoiser_inputs(const NoiseSchedule& schedule, const ArrayShape& shape,
                           std::span<const MotionArray> arrays, int t) {
  if (t < 1 || t > schedule.steps()) {
    throw ValidationError("timestep " + std::to_string(t) + " outside [1, " +
                              std::to_string(schedule.steps()) + "]",
                          "t");
  }
  for (const MotionArray& a : arrays) {
    if (!(a.shape() == shape)) {
      throw ValidationError("array shape " + to_string(a.shape()) + " does not match denoiser " +
                            to_string(shape));
    }
  }
}

}  // namespace blockdetail
