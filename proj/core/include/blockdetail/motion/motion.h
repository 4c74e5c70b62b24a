#pragma once

#include "blockdetail/motion/array.h"
#include "blockdetail/motion/skeleton.h"

namespace blockdetail {

inline constexpr double kDefaultFps = 20.0;
inline constexpr int kDefaultClipLength = 60;

/// A complete animation: F >= 2 frames of finite features.
class Motion {
 public:
  Motion() = default;
  /// Throws ValidationError if F < 2 or any entry is non-finite.
  explicit Motion(MotionArray frames, double fps = kDefaultFps);

  const MotionArray& frames() const { return frames_; }
  double fps() const { return fps_; }
  int frame_count() const { return frames_.frames(); }

  friend bool operator==(const Motion&, const Motion&) = default;

 private:
  MotionArray frames_;
  double fps_ = kDefaultFps;
};

/// World position of `joint` at `frame` (root + root-relative offset).
Eigen::Vector3d world_position(const MotionArray& frames, int frame, int joint);
Eigen::Vector3d world_position(const Pose& pose, int joint);

}  // namespace blockdetail
