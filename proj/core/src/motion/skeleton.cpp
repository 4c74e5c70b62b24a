#include "blockdetail/motion/skeleton.h"

#include "blockdetail/common/error.h"

#include <algorithm>

namespace blockdetail {

bool SkeletonSpec::is_important(int joint) const {
  return std::find(important_joints.begin(), important_joints.end(), joint) !=
         important_joints.end();
}

void SkeletonSpec::validate() const {
  const int count = joint_count();
  if (count < 1) throw ValidationError("skeleton has no joints", "skeleton.joint_names");
  if (static_cast<int>(parent.size()) != count ||
      static_cast<int>(rest_local_position.size()) != count) {
    throw ValidationError("skeleton tables disagree on joint count", "skeleton");
  }
  if (parent[0] != -1) throw ValidationError("joint 0 must be the root", "skeleton.parents[0]");
  for (int j = 1; j < count; ++j) {
    if (parent[j] < 0 || parent[j] >= count || parent[j] == j) {
      throw ValidationError("invalid parent index for joint " + std::to_string(j),
                            "skeleton.parents[" + std::to_string(j) + "]");
    }
    // Walk up; a tree reaches the root in fewer than `count` hops.
    int hops = 0;
    for (int k = j; k != 0; k = parent[k]) {
      if (++hops > count) {
        throw ValidationError("parent table contains a cycle through joint " + std::to_string(j),
                              "skeleton.parents");
      }
    }
  }
  auto check_indices = [&](const std::vector<int>& indices, const char* name) {
    for (int j : indices) {
      if (j < 0 || j >= count) {
        throw ValidationError(std::string(name) + " index out of range",
                              std::string("skeleton.") + name);
      }
    }
  };
  check_indices(important_joints, "important_joints");
  check_indices(foot_joints, "foot_joints");
  if (!is_important(0)) {
    throw ValidationError("important joints must contain the root", "skeleton.important_joints");
  }
}

SkeletonSpec SkeletonSpec::desk() {
  using namespace desk;
  SkeletonSpec s;
  s.joint_names = {"root",       "spine",     "neck",      "head",
                   "l_shoulder", "l_elbow",   "l_wrist",   "r_shoulder",
                   "r_elbow",    "r_wrist",   "l_hip",     "l_knee",
                   "l_ankle",    "r_hip",     "r_knee",    "r_ankle"};
  s.parent = {-1, kRoot, kSpine, kNeck, kNeck, kLeftShoulder, kLeftElbow, kNeck,
              kRightShoulder, kRightElbow, kRoot, kLeftHip, kLeftKnee, kRoot,
              kRightHip, kRightKnee};

  const double hip_drop = 0.05;
  const double root_height = hip_drop + kThighLength + kShinLength;
  const double shoulder_y = 0.44;
  s.rest_local_position = {
      {0.0, root_height, 0.0},
      {0.0, 0.20, 0.0},
      {0.0, 0.48, 0.0},
      {0.0, 0.62, 0.0},
      // Unposed arms are the T-pose of the rest skeleton.
      {0.18, shoulder_y, 0.0},
      {0.18 + kUpperArmLength, shoulder_y, 0.0},
      {0.18 + kUpperArmLength + kForearmLength, shoulder_y, 0.0},
      {-0.18, shoulder_y, 0.0},
      {-0.18 - kUpperArmLength, shoulder_y, 0.0},
      {-0.18 - kUpperArmLength - kForearmLength, shoulder_y, 0.0},
      {0.10, -hip_drop, 0.0},
      {0.10, -hip_drop - kThighLength, 0.0},
      {0.10, -root_height, 0.0},
      {-0.10, -hip_drop, 0.0},
      {-0.10, -hip_drop - kThighLength, 0.0},
      {-0.10, -root_height, 0.0},
  };
  s.important_joints = {kRoot, kLeftShoulder, kRightShoulder, kLeftElbow, kRightElbow,
                        kLeftHip, kRightHip, kLeftKnee, kRightKnee};
  s.foot_joints = {kLeftAnkle, kRightAnkle};
  return s;
}

}  // namespace blockdetail
