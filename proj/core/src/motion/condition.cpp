#include "blockdetail/motion/condition.h"

#include "blockdetail/common/error.h"

#include <utility>

namespace blockdetail {

Condition build_condition(const BlockingSet& blocking) {
  if (blocking.empty()) throw ValidationError("no blocking poses", "poses");
  blocking.validate();

  const ArrayShape shape = blocking.shape();
  MotionArray frames(shape);
  const auto& keys = blocking.poses;

  for (int f = 0; f <= keys.front().frame; ++f) frames.set_pose(f, keys.front().pose);
  for (int f = keys.back().frame; f < shape.frames; ++f) frames.set_pose(f, keys.back().pose);

  for (std::size_t k = 0; k + 1 < keys.size(); ++k) {
    const BlockingPose& a = keys[k];
    const BlockingPose& b = keys[k + 1];
    const double span = b.frame - a.frame;
    frames.set_pose(a.frame, a.pose);
    for (int f = a.frame + 1; f < b.frame; ++f) {
      const double w = (f - a.frame) / span;
      frames.data().row(f) =
          ((1.0 - w) * a.pose.values() + w * b.pose.values()).transpose();
    }
  }
  return Condition{std::move(frames)};
}

}  // namespace blockdetail
