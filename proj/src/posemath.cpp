#include "dyco/posemath.hpp"

#include "dyco/error.hpp"

#include <Eigen/Geometry>

#include <cmath>
#include <numbers>

namespace dyco {

const char* to_string(RotRepresentation rep) {
  switch (rep) {
    case RotRepresentation::AxisAngle: return "axis-angle";
    case RotRepresentation::Rodrigues: return "rodrigues";
    case RotRepresentation::QuaternionImag: return "quaternion";
  }
  return "axis-angle";
}

RotRepresentation parse_rot_representation(const std::string& name) {
  if (name == "axis-angle") return RotRepresentation::AxisAngle;
  if (name == "rodrigues") return RotRepresentation::Rodrigues;
  if (name == "quaternion") return RotRepresentation::QuaternionImag;
  throw Error(ErrorCode::ParseError, "unknown rotation representation '" + name + "'");
}

bool Pose::operator==(const Pose& other) const {
  if (joint_count() != other.joint_count()) return false;
  for (int j = 0; j < joint_count(); ++j)
    if (joint_rotations[j] != other.joint_rotations[j]) return false;
  return global_translation == other.global_translation;
}

RigidTransform RigidTransform::inverse() const {
  RigidTransform inv;
  inv.rotation = rotation.transpose();
  inv.translation = -(inv.rotation * translation);
  return inv;
}

RigidTransform RigidTransform::operator*(const RigidTransform& rhs) const {
  RigidTransform out;
  out.rotation = rotation * rhs.rotation;
  out.translation = rotation * rhs.translation + translation;
  return out;
}

Mat3 skew(const Vec3& v) {
  Mat3 k;
  k << 0.0, -v.z(), v.y(),  //
      v.z(), 0.0, -v.x(),   //
      -v.y(), v.x(), 0.0;
  return k;
}

Mat3 axis_angle_to_matrix(const AxisAngle& aa) {
  const double theta = aa.norm();
  const Mat3 k = skew(aa);
  if (theta < 1e-8) {
    // Second-order series; exact to double precision at this scale.
    return Mat3::Identity() + k + 0.5 * k * k;
  }
  const double a = std::sin(theta) / theta;
  const double b = (1.0 - std::cos(theta)) / (theta * theta);
  return Mat3::Identity() + a * k + b * k * k;
}

AxisAngle matrix_to_axis_angle(const Mat3& R) {
  if (!R.allFinite() || (R.transpose() * R - Mat3::Identity()).cwiseAbs().maxCoeff() > 1e-6 ||
      R.determinant() < 0.0)
    throw Error(ErrorCode::NonRotation, "matrix is not a proper rotation");
  Eigen::Quaterniond q(R);
  q.normalize();
  if (q.w() < 0.0) q.coeffs() *= -1.0;
  const Vec3 v = q.vec();
  const double s = v.norm();
  if (s < 1e-300) return AxisAngle::Zero();
  const double angle = 2.0 * std::atan2(s, q.w());
  return v * (angle / s);
}

bool near_pi(const AxisAngle& aa, double margin) {
  return aa.norm() > std::numbers::pi - margin;
}

namespace {

Vec3 encode_rotation(const Mat3& rel, RotRepresentation rep) {
  const AxisAngle aa = matrix_to_axis_angle(rel);
  const double theta = aa.norm();
  switch (rep) {
    case RotRepresentation::AxisAngle:
      return aa;
    case RotRepresentation::Rodrigues: {
      // axis * tan(theta/2); diverges at pi.
      if (theta < 1e-12) return aa * 0.5;
      return aa * (std::tan(0.5 * theta) / theta);
    }
    case RotRepresentation::QuaternionImag: {
      // imaginary part of the unit quaternion with w >= 0: axis * sin(theta/2)
      if (theta < 1e-12) return aa * 0.5;
      return aa * (std::sin(0.5 * theta) / theta);
    }
  }
  return aa;
}

}  // namespace

Mat3 representation_to_matrix(const Vec3& v, RotRepresentation rep) {
  switch (rep) {
    case RotRepresentation::AxisAngle:
      return axis_angle_to_matrix(v);
    case RotRepresentation::Rodrigues: {
      const double n = v.norm();
      if (n < 1e-300) return Mat3::Identity();
      return axis_angle_to_matrix(v * (2.0 * std::atan(n) / n));
    }
    case RotRepresentation::QuaternionImag: {
      const double n = std::min(v.norm(), 1.0);
      if (n < 1e-300) return Mat3::Identity();
      return axis_angle_to_matrix(v * (2.0 * std::asin(n) / v.norm()));
    }
  }
  return Mat3::Identity();
}

Vec3 relative_rotation(const AxisAngle& cur, const AxisAngle& prev, RotRepresentation rep) {
  if (cur == prev) return Vec3::Zero();
  const Mat3 rel = axis_angle_to_matrix(cur) * axis_angle_to_matrix(prev).transpose();
  return encode_rotation(rel, rep);
}

DeltaPose delta_pose(const Pose& current, const Pose& previous, RotRepresentation rep) {
  const int k = current.joint_count();
  if (previous.joint_count() != k)
    throw Error(ErrorCode::SkeletonMismatch, "poses have different joint counts");
  DeltaPose d(3 * k + 3);
  for (int j = 0; j < k; ++j)
    d.segment<3>(3 * j) =
        relative_rotation(current.joint_rotations[j], previous.joint_rotations[j], rep);
  d.tail<3>() = current.global_translation - previous.global_translation;
  return d;
}

BoneTransforms forward_kinematics(const KinematicTree& tree, const Pose& pose) {
  const int k = tree.joint_count();
  if (pose.joint_count() != k)
    throw Error(ErrorCode::SkeletonMismatch, "pose has " + std::to_string(pose.joint_count()) +
                                                 " joints, skeleton has " + std::to_string(k));
  std::vector<RigidTransform> global(k);
  for (int j : tree.topological_order()) {
    RigidTransform local;
    local.rotation = axis_angle_to_matrix(pose.joint_rotations[j]);
    local.translation = tree.rest_offset(j);
    const int p = tree.parent(j);
    if (p < 0) {
      local.translation += pose.global_translation;
      global[j] = local;
    } else {
      global[j] = global[p] * local;
    }
  }

  const auto rest = tree.rest_positions();
  BoneTransforms out;
  out.forward.resize(k);
  out.inverse.resize(k);
  out.joint_positions.resize(k);
  for (int j = 0; j < k; ++j) {
    // Skinning transform: undo the rest placement, then apply the posed global frame.
    RigidTransform rest_inv;
    rest_inv.translation = -rest[j];
    out.forward[j] = global[j] * rest_inv;
    out.inverse[j] = out.forward[j].inverse();
    out.joint_positions[j] = global[j].translation;
  }
  return out;
}

}  // namespace dyco
