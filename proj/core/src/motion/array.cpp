#include "blockdetail/motion/array.h"

#include "blockdetail/common/error.h"

#include <cmath>
#include <utility>

namespace blockdetail {

std::string to_string(const ArrayShape& shape) {
  return std::to_string(shape.frames) + "x" + std::to_string(shape.joints) + "x" +
         std::to_string(shape.dims);
}

Pose::Pose(int joints, int dims)
    : joints_(joints), dims_(dims), values_(Eigen::VectorXd::Zero(Eigen::Index{joints} * dims)) {}

Pose::Pose(int joints, int dims, Eigen::VectorXd values)
    : joints_(joints), dims_(dims), values_(std::move(values)) {
  if (values_.size() != Eigen::Index{joints} * dims) {
    throw ValidationError("pose value count does not match joints x dims");
  }
}

Eigen::Vector3d Pose::position(int joint) const {
  return values_.segment<3>(index(joint, 0));
}

void Pose::set_position(int joint, const Eigen::Vector3d& value) {
  values_.segment<3>(index(joint, 0)) = value;
}

bool operator==(const Pose& a, const Pose& b) {
  return a.joints_ == b.joints_ && a.dims_ == b.dims_ && a.values_ == b.values_;
}

MotionArray::MotionArray(ArrayShape shape)
    : shape_(shape), data_(Eigen::MatrixXd::Zero(shape.frames, shape.channels())) {}

MotionArray::MotionArray(ArrayShape shape, Eigen::MatrixXd data)
    : shape_(shape), data_(std::move(data)) {
  if (data_.rows() != shape.frames || data_.cols() != shape.channels()) {
    throw ValidationError("array data does not match shape " + to_string(shape));
  }
}

Pose MotionArray::pose(int frame) const {
  return Pose(shape_.joints, shape_.dims, data_.row(frame).transpose());
}

void MotionArray::set_pose(int frame, const Pose& pose) {
  if (pose.joints() != shape_.joints || pose.dims() != shape_.dims) {
    throw ValidationError("pose shape does not match array shape " + to_string(shape_));
  }
  data_.row(frame) = pose.values().transpose();
}

bool operator==(const MotionArray& a, const MotionArray& b) {
  return a.shape_ == b.shape_ && a.data_ == b.data_;
}

void require_finite(const MotionArray& array, const std::string& what) {
  for (int f = 0; f < array.frames(); ++f) {
    for (int j = 0; j < array.joints(); ++j) {
      for (int d = 0; d < array.dims(); ++d) {
        if (!std::isfinite(array(f, j, d))) {
          throw ValidationError(what + ": non-finite value at frame " + std::to_string(f) +
                                    " joint " + std::to_string(j) + " coord " +
                                    std::to_string(d),
                                "frames[" + std::to_string(f) + "][" + std::to_string(j) + "][" +
                                    std::to_string(d) + "]");
        }
      }
    }
  }
}

}  // namespace blockdetail
