#pragma once

#include "blockdetail/motion/blocking.h"
#include "blockdetail/motion/motion.h"
#include "blockdetail/motion/skeleton.h"

namespace blockdetail {

inline constexpr double kContactHeight = 0.05;
inline constexpr char kMetricVersion[] = "blockdetail-metric-v1";

/// Mean over adjacent frame pairs and foot joints of the horizontal (x, z)
/// displacement of the foot, counting a pair only when the foot is below
/// `height_thresh` in both frames (other pairs contribute 0). Meters/frame.
double footskate(const MotionArray& motion, const SkeletonSpec& skeleton,
                 double height_thresh = kContactHeight);

/// Mean L2 norm of the third finite difference of world joint positions over
/// all joints and frames f in [0, F - 4]. m/frame^3. Throws for F < 4.
double jitter(const MotionArray& motion);

/// Mean over keys of the smallest pose_distance (specified joints, root
/// compared root-relative) within +-radius frames of f_k.
double keyframe_error(const BlockingSet& blocking, const MotionArray& generated, int radius = 10);

}  // namespace blockdetail
