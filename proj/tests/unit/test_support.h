#pragma once

#include "blockdetail/common/rng.h"
#include "blockdetail/motion/array.h"
#include "blockdetail/motion/blocking.h"
#include "blockdetail/motion/skeleton.h"

#include <algorithm>
#include <filesystem>
#include <random>
#include <string>

namespace blockdetail::testing {

inline MotionArray random_array(ArrayShape shape, Rng& rng, double scale = 1.0) {
  std::normal_distribution<double> normal(0.0, scale);
  MotionArray a(shape);
  for (Eigen::Index i = 0; i < a.data().size(); ++i) a.data().data()[i] = normal(rng);
  return a;
}

inline Pose random_pose(int joints, int dims, Rng& rng, double scale = 1.0) {
  std::normal_distribution<double> normal(0.0, scale);
  Pose p(joints, dims);
  for (Eigen::Index i = 0; i < p.values().size(); ++i) p.values()[i] = normal(rng);
  return p;
}

inline JointMask random_mask(int joints, Rng& rng) {
  std::bernoulli_distribution coin(0.5);
  JointMask m(joints);
  for (int j = 0; j < joints; ++j) m[j] = coin(rng);
  m[0] = true;
  return m;
}

/// Random structurally valid blocking set (all joints specified unless a
/// mask is drawn; features arbitrary).
inline BlockingSet random_blocking(ArrayShape shape, int keys, Rng& rng, double tolerance) {
  std::vector<int> frames(shape.frames);
  for (int f = 0; f < shape.frames; ++f) frames[f] = f;
  std::vector<int> chosen;
  std::sample(frames.begin(), frames.end(), std::back_inserter(chosen), keys, rng);
  BlockingSet b;
  b.timeline_length = shape.frames;
  for (int f : chosen) {
    BlockingPose key;
    key.frame = f;
    key.pose = random_pose(shape.joints, shape.dims, rng);
    key.specified = random_mask(shape.joints, rng);
    key.tolerance = Eigen::VectorXd::Constant(shape.joints, tolerance);
    b.poses.push_back(std::move(key));
  }
  return b;
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("blockdetail-" + tag + "-" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace blockdetail::testing
