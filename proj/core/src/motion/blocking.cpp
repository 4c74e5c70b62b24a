#include "blockdetail/motion/blocking.h"

#include "blockdetail/common/error.h"

#include <algorithm>
#include <cmath>

namespace blockdetail {

namespace {

std::string pose_path(int k) { return "poses[" + std::to_string(k) + "]"; }

}  // namespace

int BlockingPose::specified_count() const {
  return static_cast<int>(std::count(specified.begin(), specified.end(), true));
}

bool operator==(const BlockingPose& a, const BlockingPose& b) {
  return a.frame == b.frame && a.pose == b.pose && a.specified == b.specified &&
         a.tolerance.size() == b.tolerance.size() && a.tolerance == b.tolerance;
}

ArrayShape BlockingSet::shape() const {
  if (poses.empty()) return {timeline_length, 0, 0};
  return {timeline_length, poses.front().pose.joints(), poses.front().pose.dims()};
}

void BlockingSet::validate() const {
  if (poses.empty()) throw ValidationError("no blocking poses", "poses");
  if (timeline_length < 1) throw ValidationError("timeline_length must be >= 1", "timeline_length");
  if (size() > timeline_length) {
    throw ValidationError("more blocking poses than timeline frames", "poses");
  }
  const int joints = poses.front().pose.joints();
  const int dims = poses.front().pose.dims();
  if (joints < 1 || dims < 1) throw ValidationError("empty pose", pose_path(0) + ".features");
  for (int k = 0; k < size(); ++k) {
    const BlockingPose& key = poses[k];
    const std::string path = pose_path(k);
    if (key.frame < 0 || key.frame >= timeline_length) {
      throw ValidationError("frame " + std::to_string(key.frame) + " outside [0, " +
                                std::to_string(timeline_length) + ")",
                            path + ".frame");
    }
    if (k > 0 && key.frame <= poses[k - 1].frame) {
      throw ValidationError("blocking frames must be strictly increasing", path + ".frame");
    }
    if (key.pose.joints() != joints || key.pose.dims() != dims) {
      throw ValidationError("pose shape differs from the first pose", path + ".features");
    }
    if (!key.pose.all_finite()) {
      throw ValidationError("non-finite pose feature", path + ".features");
    }
    if (static_cast<int>(key.specified.size()) != joints) {
      throw ValidationError("specified mask needs one entry per joint", path + ".specified");
    }
    if (!key.specified[0]) {
      throw ValidationError("the root joint must be specified", path + ".specified[0]");
    }
    if (key.tolerance.size() != joints) {
      throw ValidationError("tolerance needs one entry per joint", path + ".tolerance");
    }
    for (int j = 0; j < joints; ++j) {
      const double c = key.tolerance[j];
      if (!(c >= 0.0 && c <= 1.0)) {
        throw ValidationError("tolerance outside [0, 1]",
                              path + ".tolerance[" + std::to_string(j) + "]");
      }
    }
  }
}

void BlockingSet::validate_input(const SkeletonSpec& skeleton) const {
  validate();
  const ArrayShape s = shape();
  if (s.joints != skeleton.joint_count() || s.dims != 3) {
    throw ValidationError("blocking poses do not match skeleton (expected J=" +
                              std::to_string(skeleton.joint_count()) + ", D=3)",
                          "poses");
  }
  for (int k = 0; k < size(); ++k) {
    const BlockingPose& key = poses[k];
    for (int j = 1; j < s.joints; ++j) {
      if (key.specified[j]) continue;
      if (key.pose.position(j) != skeleton.neutral(j)) {
        throw ValidationError("unspecified joint must hold its neutral value",
                              pose_path(k) + ".features[" + std::to_string(j) + "]");
      }
    }
  }
}

BlockingSet BlockingSet::with_uniform_tolerance(double c) const {
  BlockingSet out = *this;
  for (BlockingPose& key : out.poses) key.tolerance.setConstant(c);
  return out;
}

Pose neutral_pose(const SkeletonSpec& skeleton) {
  Pose pose(skeleton.joint_count(), 3);
  for (int j = 0; j < skeleton.joint_count(); ++j) pose.set_position(j, skeleton.neutral(j));
  return pose;
}

}  // namespace blockdetail
