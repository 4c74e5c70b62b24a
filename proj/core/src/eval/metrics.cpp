#include "blockdetail/eval/metrics.h"

#include "blockdetail/common/error.h"
#include "blockdetail/motion/distance.h"

#include <algorithm>
#include <cmath>
#include <limits>

namespace blockdetail {

double footskate(const MotionArray& motion, const SkeletonSpec& skeleton, double height_thresh) {
  if (motion.frames() < 2) throw ValidationError("footskate needs F >= 2", "frames");
  if (skeleton.foot_joints.empty()) throw ValidationError("skeleton has no foot joints");
  double total = 0.0;
  for (int foot : skeleton.foot_joints) {
    for (int f = 0; f + 1 < motion.frames(); ++f) {
      const Eigen::Vector3d a = world_position(motion, f, foot);
      const Eigen::Vector3d b = world_position(motion, f + 1, foot);
      if (a.y() < height_thresh && b.y() < height_thresh) {
        total += std::hypot(b.x() - a.x(), b.z() - a.z());
      }
    }
  }
  return total / (double(motion.frames() - 1) * skeleton.foot_joints.size());
}

double jitter(const MotionArray& motion) {
  if (motion.frames() < 4) throw ValidationError("jitter needs F >= 4", "frames");
  double total = 0.0;
  for (int j = 0; j < motion.joints(); ++j) {
    for (int f = 0; f + 3 < motion.frames(); ++f) {
      const Eigen::Vector3d d3 = world_position(motion, f + 3, j) -
                                 3.0 * world_position(motion, f + 2, j) +
                                 3.0 * world_position(motion, f + 1, j) -
                                 world_position(motion, f, j);
      total += d3.norm();
    }
  }
  return total / (double(motion.frames() - 3) * motion.joints());
}

double keyframe_error(const BlockingSet& blocking, const MotionArray& generated, int radius) {
  blocking.validate();
  if (!(generated.shape() == blocking.shape())) {
    throw ValidationError("generated motion shape " + to_string(generated.shape()) +
                          " does not match blocking " + to_string(blocking.shape()));
  }
  if (radius < 0) throw ValidationError("radius must be >= 0", "radius");
  double total = 0.0;
  for (const BlockingPose& key : blocking.poses) {
    double best = std::numeric_limits<double>::infinity();
    const int lo = std::max(0, key.frame - radius);
    const int hi = std::min(generated.frames() - 1, key.frame + radius);
    for (int f = lo; f <= hi; ++f) {
      best = std::min(best, pose_distance(generated, f, key.pose, key.specified));
    }
    total += best;
  }
  return total / blocking.size();
}

}  // namespace blockdetail
