#pragma once

#include "blockdetail/motion/array.h"
#include "blockdetail/motion/skeleton.h"

#include <vector>

namespace blockdetail {

using JointMask = std::vector<bool>;

/// One animator key: a partially specified pose placed at `frame`.
struct BlockingPose {
  int frame = 0;
  Pose pose;
  JointMask specified;        // true = posed by the animator; root always true
  Eigen::VectorXd tolerance;  // C_k, one weight per joint in [0, 1]

  int specified_count() const;

  friend bool operator==(const BlockingPose& a, const BlockingPose& b);
};

/// K blocking poses on a timeline of F frames, sorted by frame.
struct BlockingSet {
  int timeline_length = 0;
  std::vector<BlockingPose> poses;

  int size() const { return static_cast<int>(poses.size()); }
  bool empty() const { return poses.empty(); }
  ArrayShape shape() const;

  /// Structural invariants: 1 <= K <= F, strictly increasing frames inside
  /// [0, F), matching pose shapes, root specified, tolerances in [0, 1],
  /// finite features.
  void validate() const;

  /// validate() plus the authoring invariant that unspecified joints hold the
  /// skeleton's neutral value. Refined sets drop this property, so it is
  /// checked only on fresh input.
  void validate_input(const SkeletonSpec& skeleton) const;

  /// Copy with every tolerance entry replaced by `c`.
  BlockingSet with_uniform_tolerance(double c) const;

  friend bool operator==(const BlockingSet&, const BlockingSet&) = default;
};

/// Pose whose non-root joints sit at their rest offsets and whose root sits
/// at its rest world position.
Pose neutral_pose(const SkeletonSpec& skeleton);

}  // namespace blockdetail
