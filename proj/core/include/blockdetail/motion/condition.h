#pragma once

#include "blockdetail/motion/array.h"
#include "blockdetail/motion/blocking.h"

namespace blockdetail {

/// Dense conditioning timeline fed to the retiming model.
struct Condition {
  MotionArray frames;

  friend bool operator==(const Condition&, const Condition&) = default;
};

/// Per-coordinate linear interpolation between consecutive blocking poses,
/// holding the first/last pose constant outside [f_1, f_K]. Exact at every
/// key frame. Throws ValidationError("no blocking poses") for an empty set.
Condition build_condition(const BlockingSet& blocking);

}  // namespace blockdetail
