#include "blockdetail/baselines/masks.h"

#include "blockdetail/common/error.h"

#include <algorithm>
#include <cmath>
#include <cstdlib>

namespace blockdetail {

namespace {

void check_c(double c) {
  if (!(c >= 0.0 && c <= 1.0)) throw ValidationError("mask value c must lie in [0, 1]", "c");
}

}  // namespace

void BlendMask::validate() const {
  for (Eigen::Index f = 0; f < values.rows(); ++f) {
    for (Eigen::Index j = 0; j < values.cols(); ++j) {
      const double v = values(f, j);
      if (!(v >= 0.0 && v <= 1.0)) {
        throw ValidationError("blend mask entry outside [0, 1]",
                              "mask[" + std::to_string(f) + "][" + std::to_string(j) + "]");
      }
    }
  }
}

BlendMask BlendMask::constant(int frames, int joints, double value) {
  check_c(value);
  return {Eigen::MatrixXd::Constant(frames, joints, value)};
}

BlendMask sparse_mask(const BlockingSet& blocking, double c) {
  check_c(c);
  blocking.validate();
  const ArrayShape s = blocking.shape();
  BlendMask mask{Eigen::MatrixXd::Zero(s.frames, s.joints)};
  for (const BlockingPose& key : blocking.poses) {
    for (int j = 0; j < s.joints; ++j) {
      if (key.specified[j]) mask.values(key.frame, j) = c;
    }
  }
  return mask;
}

BlendMask soft_mask(const BlockingSet& blocking, double c, int falloff) {
  check_c(c);
  if (falloff < 1) throw ValidationError("falloff must be >= 1 frame", "falloff");
  blocking.validate();
  const ArrayShape s = blocking.shape();
  BlendMask mask{Eigen::MatrixXd::Zero(s.frames, s.joints)};
  for (const BlockingPose& key : blocking.poses) {
    const int lo = std::max(0, key.frame - falloff);
    const int hi = std::min(s.frames - 1, key.frame + falloff);
    for (int f = lo; f <= hi; ++f) {
      const double w = c * (1.0 - double(std::abs(f - key.frame)) / falloff);
      for (int j = 0; j < s.joints; ++j) {
        if (key.specified[j]) mask.values(f, j) = std::max(mask.values(f, j), w);
      }
    }
  }
  return mask;
}

}  // namespace blockdetail
