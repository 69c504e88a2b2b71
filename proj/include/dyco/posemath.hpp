#pragma once

#include "dyco/kinematic_tree.hpp"

#include <Eigen/Core>

#include <vector>

namespace dyco {

/// Direction is the rotation axis, norm is the angle in radians.
using AxisAngle = Eigen::Vector3d;

enum class RotRepresentation { AxisAngle, Rodrigues, QuaternionImag };

const char* to_string(RotRepresentation rep);
RotRepresentation parse_rot_representation(const std::string& name);

struct Pose {
  std::vector<AxisAngle> joint_rotations;  // joint-local; joint 0 carries the global rotation
  Vec3 global_translation = Vec3::Zero();

  Pose() = default;
  explicit Pose(int joints) : joint_rotations(joints, AxisAngle::Zero()) {}

  int joint_count() const noexcept { return static_cast<int>(joint_rotations.size()); }
  bool operator==(const Pose& other) const;
};

/// 3K per-joint relative rotations followed by the 3-vector translation change.
using DeltaPose = Eigen::VectorXd;

struct RigidTransform {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  Vec3 apply(const Vec3& x) const { return rotation * x + translation; }
  RigidTransform inverse() const;
  RigidTransform operator*(const RigidTransform& rhs) const;
};

struct BoneTransforms {
  std::vector<RigidTransform> forward;  // canonical -> observation
  std::vector<RigidTransform> inverse;  // observation -> canonical, used by backward skinning
  std::vector<Vec3> joint_positions;    // posed joint origins

  int joint_count() const noexcept { return static_cast<int>(forward.size()); }
};

Mat3 skew(const Vec3& v);

/// Rodrigues formula. Total; the result is orthonormal with det +1.
Mat3 axis_angle_to_matrix(const AxisAngle& aa);

/// Inverse of axis_angle_to_matrix with the angle in [0, pi].
/// Throws NonRotation when R is not orthonormal within 1e-6 or det != +1.
AxisAngle matrix_to_axis_angle(const Mat3& R);

/// True when the rotation angle is within `margin` of pi, where the axis sign is ambiguous.
bool near_pi(const AxisAngle& aa, double margin = 1e-3);

/// Encodes R_cur * R_prev^-1 in the requested representation.
Vec3 relative_rotation(const AxisAngle& cur, const AxisAngle& prev, RotRepresentation rep);

/// Decodes a representation vector back to a rotation matrix.
Mat3 representation_to_matrix(const Vec3& v, RotRepresentation rep);

DeltaPose delta_pose(const Pose& current, const Pose& previous, RotRepresentation rep);

/// Throws SkeletonMismatch when the pose does not match the tree.
BoneTransforms forward_kinematics(const KinematicTree& tree, const Pose& pose);

}  // namespace dyco
