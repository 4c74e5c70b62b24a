#pragma once

#include "blockdetail/motion/blocking.h"

#include <Eigen/Core>

namespace blockdetail {

/// Per-frame, per-joint output blending weight M in [0, 1] (F x J). Weight 1
/// keeps the conditioned prediction, 0 the unconditioned one.
struct BlendMask {
  Eigen::MatrixXd values;

  int frames() const { return static_cast<int>(values.rows()); }
  int joints() const { return static_cast<int>(values.cols()); }

  /// Throws ValidationError for entries outside [0, 1] or non-finite.
  void validate() const;

  static BlendMask constant(int frames, int joints, double value);
};

/// c on the specified joints of every key frame, 0 elsewhere.
BlendMask sparse_mask(const BlockingSet& blocking, double c);

/// Per specified joint, a triangle of height c at f_k reaching 0 at
/// f_k +- falloff; overlapping triangles combine by maximum.
BlendMask soft_mask(const BlockingSet& blocking, double c, int falloff = 10);

}  // namespace blockdetail
