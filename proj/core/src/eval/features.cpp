#include "blockdetail/eval/features.h"

#include "blockdetail/common/error.h"
#include "blockdetail/motion/skeleton.h"

#include <algorithm>
#include <cmath>
#include <vector>

namespace blockdetail {

namespace {

struct Moments {
  double sum = 0.0;
  double sum_sq = 0.0;
  double count = 0.0;

  void add(double v) {
    sum += v;
    sum_sq += v * v;
    count += 1.0;
  }
  double mean() const { return count > 0 ? sum / count : 0.0; }
  double stddev() const {
    if (count <= 0) return 0.0;
    const double m = mean();
    return std::sqrt(std::max(0.0, sum_sq / count - m * m));
  }
};

// Acceleration is reported in units of 10 m/s^2, jerk in units of 100 m/s^3.
constexpr double kAccelUnit = 10.0;
constexpr double kJerkUnit = 100.0;

}  // namespace

Eigen::VectorXd motion_features(const MotionArray& motion, double fps) {
  using namespace desk;
  if (motion.joints() != kJointCount || motion.dims() != 3) {
    throw ValidationError("features need the 16-joint desk skeleton with D=3");
  }
  if (motion.frames() < 4) throw ValidationError("features need F >= 4", "frames");
  const int frames = motion.frames();

  const std::vector<std::vector<int>> groups = {
      {kRoot},
      {kSpine, kNeck, kHead},
      {kLeftShoulder, kLeftElbow, kLeftWrist, kRightShoulder, kRightElbow, kRightWrist},
      {kLeftHip, kLeftKnee, kLeftAnkle, kRightHip, kRightKnee, kRightAnkle}};

  std::vector<std::vector<Eigen::Vector3d>> world(frames, std::vector<Eigen::Vector3d>(kJointCount));
  for (int f = 0; f < frames; ++f) {
    for (int j = 0; j < kJointCount; ++j) world[f][j] = world_position(motion, f, j);
  }

  Eigen::VectorXd out = Eigen::VectorXd::Zero(kFeatureDim);
  for (std::size_t g = 0; g < groups.size(); ++g) {
    Moments speed;
    Moments accel;
    for (int j : groups[g]) {
      for (int f = 0; f + 1 < frames; ++f) speed.add((world[f + 1][j] - world[f][j]).norm() * fps);
      for (int f = 0; f + 2 < frames; ++f) {
        accel.add((world[f + 2][j] - 2.0 * world[f + 1][j] + world[f][j]).norm() * fps * fps / kAccelUnit);
      }
    }
    out[2 * g] = speed.mean();
    out[2 * g + 1] = speed.stddev();
    out[8 + 2 * g] = accel.mean();
    out[8 + 2 * g + 1] = accel.stddev();
  }

  Moments root_speed;
  Moments root_height;
  for (int f = 0; f < frames; ++f) {
    root_height.add(world[f][kRoot].y());
    if (f + 1 < frames) {
      const Eigen::Vector3d d = world[f + 1][kRoot] - world[f][kRoot];
      root_speed.add(std::hypot(d.x(), d.z()) * fps);
    }
  }
  out[16] = root_speed.mean();
  out[17] = root_speed.stddev();
  out[18] = root_height.mean();
  out[19] = root_height.stddev();

  const double edges[] = {0.02, 0.08, 0.2};
  double histogram[4] = {0, 0, 0, 0};
  for (int f = 0; f < frames; ++f) {
    for (int foot : {kLeftAnkle, kRightAnkle}) {
      const double h = world[f][foot].y();
      int bin = 3;
      for (int b = 0; b < 3; ++b) {
        if (h < edges[b]) {
          bin = b;
          break;
        }
      }
      histogram[bin] += 1.0;
    }
  }
  for (int b = 0; b < 4; ++b) out[20 + b] = histogram[b] / (2.0 * frames);

  for (std::size_t g = 1; g < groups.size(); ++g) {
    Moments extent;
    for (int f = 0; f < frames; ++f) {
      double sum = 0.0;
      for (int j : groups[g]) sum += (world[f][j] - world[f][kRoot]).norm();
      extent.add(sum / groups[g].size());
    }
    out[24 + 2 * (g - 1)] = extent.mean();
    out[24 + 2 * (g - 1) + 1] = extent.stddev();
  }

  Moments spread;
  for (int f = 0; f < frames; ++f) spread.add((world[f][kLeftWrist] - world[f][kRightWrist]).norm());
  out[30] = spread.mean();
  out[31] = spread.stddev();

  Moments jerk;
  for (int j = 0; j < kJointCount; ++j) {
    for (int f = 0; f + 3 < frames; ++f) {
      const Eigen::Vector3d d3 =
          world[f + 3][j] - 3.0 * world[f + 2][j] + 3.0 * world[f + 1][j] - world[f][j];
      jerk.add(d3.norm() * fps * fps * fps / kJerkUnit);
    }
  }
  out[32] = jerk.mean();
  out[33] = jerk.stddev();
  return out;
}

}  // namespace blockdetail
