#pragma once

#include "blockdetail/motion/array.h"
#include "blockdetail/motion/blocking.h"

namespace blockdetail {

/// Root-mean-square coordinate difference over the joints selected by
/// `mask`. The root contributes zero (its world translation is excluded) but
/// still counts toward the mean. Throws ValidationError for an all-false
/// mask or mismatched shapes.
double pose_distance(const Pose& a, const Pose& b, const JointMask& mask);

/// Same metric evaluated against one frame of a motion-shaped array,
/// without materializing the Pose.
double pose_distance(const MotionArray& frames, int frame, const Pose& b, const JointMask& mask);

}  // namespace blockdetail
