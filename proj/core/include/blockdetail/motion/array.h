#pragma once

#include <Eigen/Core>

#include <string>

namespace blockdetail {

/// Frames x joints x feature-dims extent of a motion-shaped array.
struct ArrayShape {
  int frames = 0;
  int joints = 0;
  int dims = 0;

  int channels() const { return joints * dims; }
  Eigen::Index size() const { return Eigen::Index{frames} * channels(); }

  friend bool operator==(const ArrayShape&, const ArrayShape&) = default;
};

std::string to_string(const ArrayShape& shape);

/// Per-joint features of a single frame, J x D, joint-major.
class Pose {
 public:
  Pose() = default;
  Pose(int joints, int dims);
  Pose(int joints, int dims, Eigen::VectorXd values);

  int joints() const { return joints_; }
  int dims() const { return dims_; }

  double& operator()(int joint, int dim) { return values_[index(joint, dim)]; }
  double operator()(int joint, int dim) const { return values_[index(joint, dim)]; }

  Eigen::Vector3d position(int joint) const;
  void set_position(int joint, const Eigen::Vector3d& value);

  const Eigen::VectorXd& values() const { return values_; }
  Eigen::VectorXd& values() { return values_; }

  bool all_finite() const { return values_.allFinite(); }

  friend bool operator==(const Pose& a, const Pose& b);

 private:
  Eigen::Index index(int joint, int dim) const { return Eigen::Index{joint} * dims_ + dim; }

  int joints_ = 0;
  int dims_ = 0;
  Eigen::VectorXd values_;
};

/// Dense F x J x D array. Storage is a frames x channels matrix where
/// channel = joint * D + dim, so each column is one joint-coordinate channel
/// over time.
class MotionArray {
 public:
  MotionArray() = default;
  explicit MotionArray(ArrayShape shape);
  MotionArray(ArrayShape shape, Eigen::MatrixXd data);

  const ArrayShape& shape() const { return shape_; }
  int frames() const { return shape_.frames; }
  int joints() const { return shape_.joints; }
  int dims() const { return shape_.dims; }
  int channels() const { return shape_.channels(); }

  double& operator()(int frame, int joint, int dim) {
    return data_(frame, Eigen::Index{joint} * shape_.dims + dim);
  }
  double operator()(int frame, int joint, int dim) const {
    return data_(frame, Eigen::Index{joint} * shape_.dims + dim);
  }

  Pose pose(int frame) const;
  void set_pose(int frame, const Pose& pose);

  const Eigen::MatrixXd& data() const { return data_; }
  Eigen::MatrixXd& data() { return data_; }

  bool all_finite() const { return data_.allFinite(); }

  friend bool operator==(const MotionArray& a, const MotionArray& b);

 private:
  ArrayShape shape_;
  Eigen::MatrixXd data_;
};

/// Throws ValidationError naming the first non-finite entry as
/// "frame f joint j coord d".
void require_finite(const MotionArray& array, const std::string& what);

}  // namespace blockdetail
