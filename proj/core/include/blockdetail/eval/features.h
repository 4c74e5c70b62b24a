#pragma once

#include "blockdetail/motion/motion.h"

#include <Eigen/Core>

namespace blockdetail {

inline constexpr int kFeatureDim = 34;

/// Fixed-length per-clip statistics of a desk-skeleton motion (world
/// positions, speeds in m/s at `fps`):
///   [0, 8)   speed mean/std for root, torso, arms, legs
///   [8, 16)  acceleration magnitude mean/std, same groups (10 m/s^2 units)
///   [16, 18) root horizontal speed mean/std
///   [18, 20) root height mean/std
///   [20, 24) ankle-height histogram, fractions in [0, .02), [.02, .08),
///            [.08, .2), [.2, inf)
///   [24, 30) pose extent (mean distance of group joints from the root)
///            mean/std for torso, arms, legs
///   [30, 32) wrist-to-wrist distance mean/std
///   [32, 34) jerk magnitude mean/std over all joints (100 m/s^3 units)
/// Throws ValidationError unless J = 16, D = 3 and F >= 4.
Eigen::VectorXd motion_features(const MotionArray& motion, double fps = kDefaultFps);

}  // namespace blockdetail
