#include "blockdetail/motion/motion.h"

#include "blockdetail/common/error.h"

#include <utility>

namespace blockdetail {

Motion::Motion(MotionArray frames, double fps) : frames_(std::move(frames)), fps_(fps) {
  if (frames_.frames() < 2) throw ValidationError("motion needs F >= 2 frames", "frames");
  if (!(fps_ > 0.0)) throw ValidationError("fps must be positive", "fps");
  require_finite(frames_, "motion");
}

Eigen::Vector3d world_position(const MotionArray& frames, int frame, int joint) {
  Eigen::Vector3d root(frames(frame, 0, 0), frames(frame, 0, 1), frames(frame, 0, 2));
  if (joint == 0) return root;
  return root + Eigen::Vector3d(frames(frame, joint, 0), frames(frame, joint, 1),
                                frames(frame, joint, 2));
}

Eigen::Vector3d world_position(const Pose& pose, int joint) {
  if (joint == 0) return pose.position(0);
  return pose.position(0) + pose.position(joint);
}

}  // namespace blockdetail
