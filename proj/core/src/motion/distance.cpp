#include "blockdetail/motion/distance.h"

#include "blockdetail/common/error.h"

#include <cmath>

namespace blockdetail {

namespace {

int masked_count(const JointMask& mask, int joints) {
  if (static_cast<int>(mask.size()) != joints) {
    throw ValidationError("joint mask size does not match pose", "mask");
  }
  int count = 0;
  for (bool m : mask) count += m ? 1 : 0;
  if (count == 0) throw ValidationError("joint mask selects no joints", "mask");
  return count;
}

}  // namespace

double pose_distance(const Pose& a, const Pose& b, const JointMask& mask) {
  if (a.joints() != b.joints() || a.dims() != b.dims()) {
    throw ValidationError("pose shapes differ");
  }
  const int count = masked_count(mask, a.joints());
  double sum = 0.0;
  for (int j = 1; j < a.joints(); ++j) {
    if (!mask[j]) continue;
    for (int d = 0; d < a.dims(); ++d) {
      const double diff = a(j, d) - b(j, d);
      sum += diff * diff;
    }
  }
  return std::sqrt(sum / (double(count) * a.dims()));
}

double pose_distance(const MotionArray& frames, int frame, const Pose& b, const JointMask& mask) {
  if (frames.joints() != b.joints() || frames.dims() != b.dims()) {
    throw ValidationError("pose shapes differ");
  }
  const int count = masked_count(mask, b.joints());
  double sum = 0.0;
  for (int j = 1; j < b.joints(); ++j) {
    if (!mask[j]) continue;
    for (int d = 0; d < b.dims(); ++d) {
      const double diff = frames(frame, j, d) - b(j, d);
      sum += diff * diff;
    }
  }
  return std::sqrt(sum / (double(count) * b.dims()));
}

}  // namespace blockdetail
