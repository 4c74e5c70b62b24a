#pragma once

#include <Eigen/Core>

#include <string>
#include <vector>

namespace blockdetail {

/// Joint hierarchy of the character. Joint 0 is the root; the root feature
/// is its world position, every other joint's feature is its position
/// relative to the root (world axes, meters, y up).
struct SkeletonSpec {
  std::vector<std::string> joint_names;
  std::vector<int> parent;  // -1 for the root
  std::vector<Eigen::Vector3d> rest_local_position;
  std::vector<int> important_joints;
  std::vector<int> foot_joints;

  int joint_count() const { return static_cast<int>(joint_names.size()); }

  /// Root-relative rest position for non-root joints; for the root, its
  /// rest world position.
  Eigen::Vector3d neutral(int joint) const { return rest_local_position[joint]; }

  bool is_important(int joint) const;

  /// Throws ValidationError when the parent table is not a tree rooted at
  /// joint 0, when index sets are out of range, or when the root is missing
  /// from the important set.
  void validate() const;

  friend bool operator==(const SkeletonSpec&, const SkeletonSpec&) = default;

  /// The 16-joint desk skeleton: root, spine, neck, head and left/right
  /// shoulder, elbow, wrist, hip, knee, ankle.
  static SkeletonSpec desk();
};

/// Joint indices of the desk skeleton.
namespace desk {
inline constexpr int kRoot = 0;
inline constexpr int kSpine = 1;
inline constexpr int kNeck = 2;
inline constexpr int kHead = 3;
inline constexpr int kLeftShoulder = 4;
inline constexpr int kLeftElbow = 5;
inline constexpr int kLeftWrist = 6;
inline constexpr int kRightShoulder = 7;
inline constexpr int kRightElbow = 8;
inline constexpr int kRightWrist = 9;
inline constexpr int kLeftHip = 10;
inline constexpr int kLeftKnee = 11;
inline constexpr int kLeftAnkle = 12;
inline constexpr int kRightHip = 13;
inline constexpr int kRightKnee = 14;
inline constexpr int kRightAnkle = 15;
inline constexpr int kJointCount = 16;

inline constexpr double kThighLength = 0.42;
inline constexpr double kShinLength = 0.42;
inline constexpr double kUpperArmLength = 0.27;
inline constexpr double kForearmLength = 0.25;
}  // namespace desk

}  // namespace blockdetail
