#include <doctest.h>

#include "dyco/error.hpp"
#include "dyco/posemath.hpp"
#include "dyco/rng.hpp"

#include <Eigen/LU>

#include <cmath>
#include <numbers>

using namespace dyco;

namespace {

// exp of a skew matrix by truncated power series
Mat3 taylor_exp(const Mat3& A, int terms = 20) {
  Mat3 sum = Mat3::Identity(), term = Mat3::Identity();
  for (int k = 1; k < terms; ++k) {
    term = term * A / k;
    sum += term;
  }
  return sum;
}

AxisAngle random_axis_angle(Rng& rng, double max_angle) {
  Vec3 axis;
  do {
    axis = Vec3(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
  } while (axis.norm() < 0.1 || axis.norm() > 1.0);
  return axis.normalized() * rng.uniform(0.0, max_angle);
}

Pose random_pose(Rng& rng, int k) {
  Pose p(k);
  for (auto& r : p.joint_rotations) r = random_axis_angle(rng, 2.5);
  p.global_translation = Vec3(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
  return p;
}

}  // namespace

TEST_CASE("axis_angle_to_matrix basics") {
  CHECK(axis_angle_to_matrix(Vec3::Zero()).isApprox(Mat3::Identity(), 0.0));
  Mat3 quarter;
  quarter << 0, -1, 0, 1, 0, 0, 0, 0, 1;
  CHECK((axis_angle_to_matrix(Vec3(0, 0, std::numbers::pi / 2)) - quarter).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("axis_angle_to_matrix matches series exponential") {
  const Vec3 aa(0.3, -0.2, 0.1);
  const Mat3 R = axis_angle_to_matrix(aa);
  CHECK((R - taylor_exp(skew(aa))).cwiseAbs().maxCoeff() < 1e-14);
  CHECK(std::abs(R.determinant() - 1.0) < 1e-12);
  CHECK((R * R.transpose() - Mat3::Identity()).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("tiny angles stay accurate") {
  const Vec3 aa(1e-10, -2e-10, 3e-11);
  CHECK((axis_angle_to_matrix(aa) - taylor_exp(skew(aa))).cwiseAbs().maxCoeff() < 1e-18);
  CHECK((matrix_to_axis_angle(axis_angle_to_matrix(aa)) - aa).norm() < 1e-18);
}

TEST_CASE("matrix_to_axis_angle") {
  CHECK(matrix_to_axis_angle(Mat3::Identity()) == Vec3::Zero());
  const Vec3 z = matrix_to_axis_angle(axis_angle_to_matrix(Vec3(0, 0, std::numbers::pi / 2)));
  CHECK((z - Vec3(0, 0, std::numbers::pi / 2)).norm() < 1e-15);

  Rng rng(7);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    Vec3 axis;
    do {
      axis = Vec3(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
    } while (axis.norm() < 0.1);
    const AxisAngle aa = axis.normalized() * rng.uniform(1e-6, std::numbers::pi - 0.1);
    worst = std::max(worst, (matrix_to_axis_angle(axis_angle_to_matrix(aa)) - aa).norm());
  }
  CHECK(worst < 1e-9);
}

TEST_CASE("round trip near pi reproduces the matrix") {
  Rng rng(3);
  for (int i = 0; i < 200; ++i) {
    const Vec3 axis = random_axis_angle(rng, 1.0).normalized();
    const AxisAngle aa = axis * (std::numbers::pi - 1e-3 - rng.uniform(0.0, 0.05));
    const Mat3 R = axis_angle_to_matrix(aa);
    const AxisAngle back = matrix_to_axis_angle(R);
    CHECK(back.norm() <= std::numbers::pi);
    CHECK((axis_angle_to_matrix(back) - R).cwiseAbs().maxCoeff() < 1e-9);
  }
  CHECK(near_pi(Vec3(0, 0, std::numbers::pi - 1e-4)));
  CHECK_FALSE(near_pi(Vec3(0, 0, 1.0)));
}

TEST_CASE("matrix_to_axis_angle rejects non-rotations") {
  Mat3 scaled = 1.01 * Mat3::Identity();
  CHECK_THROWS_AS(matrix_to_axis_angle(scaled), Error);
  Mat3 reflect = Mat3::Identity();
  reflect(2, 2) = -1;
  try {
    matrix_to_axis_angle(reflect);
    FAIL("expected a throw");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NonRotation);
  }
}

TEST_CASE("relative_rotation") {
  for (auto rep : {RotRepresentation::AxisAngle, RotRepresentation::Rodrigues, RotRepresentation::QuaternionImag})
    CHECK(relative_rotation(Vec3(0, 0, 0.4), Vec3(0, 0, 0.4), rep) == Vec3::Zero());
  CHECK((relative_rotation(Vec3(0, 0, 0.5), Vec3(0, 0, 0.4), RotRepresentation::AxisAngle) - Vec3(0, 0, 0.1)).norm() < 1e-15);

  const Vec3 cur(0.3, -0.5, 0.2), prev(-0.1, 0.4, 0.7);
  const Mat3 rel = axis_angle_to_matrix(cur) * axis_angle_to_matrix(prev).transpose();
  const Vec3 aa = relative_rotation(cur, prev, RotRepresentation::AxisAngle);
  CHECK((aa - matrix_to_axis_angle(rel)).norm() < 1e-14);
  const double angle = aa.norm();
  const Vec3 axis = aa / angle;
  CHECK((relative_rotation(cur, prev, RotRepresentation::Rodrigues) - axis * std::tan(angle / 2)).norm() < 1e-14);
  const Vec3 q = relative_rotation(cur, prev, RotRepresentation::QuaternionImag);
  CHECK((q - axis * std::sin(angle / 2)).norm() < 1e-14);
  for (auto rep : {RotRepresentation::AxisAngle, RotRepresentation::Rodrigues, RotRepresentation::QuaternionImag})
    CHECK((representation_to_matrix(relative_rotation(cur, prev, rep), rep) - rel).cwiseAbs().maxCoeff() < 1e-13);
}

TEST_CASE("representation names") {
  for (auto rep : {RotRepresentation::AxisAngle, RotRepresentation::Rodrigues, RotRepresentation::QuaternionImag})
    CHECK(parse_rot_representation(to_string(rep)) == rep);
  CHECK_THROWS_AS(parse_rot_representation("euler"), Error);
}

TEST_CASE("delta_pose") {
  Rng rng(11);
  const Pose p = random_pose(rng, 4);
  const DeltaPose zero = delta_pose(p, p, RotRepresentation::AxisAngle);
  CHECK(zero.size() == 15);
  CHECK(zero.isZero(0.0));

  Pose a(4), b(4);
  a.joint_rotations[2] = Vec3(0, 0, 0.3);
  b.joint_rotations[2] = Vec3(0, 0, 0.1);
  a.global_translation = Vec3(1, 0, 0);
  const DeltaPose d = delta_pose(a, b, RotRepresentation::AxisAngle);
  Eigen::VectorXd expect = Eigen::VectorXd::Zero(15);
  expect.segment<3>(6) = Vec3(0, 0, 0.2);
  expect.tail<3>() = Vec3(1, 0, 0);
  CHECK((d - expect).norm() < 1e-15);

  CHECK_THROWS_AS(delta_pose(Pose(4), Pose(5), RotRepresentation::AxisAngle), Error);
}

TEST_CASE("delta_pose matches per-joint matrix oracle for K=24") {
  Rng rng(5);
  const Pose cur = random_pose(rng, 24), prev = random_pose(rng, 24);
  const DeltaPose d = delta_pose(cur, prev, RotRepresentation::AxisAngle);
  REQUIRE(d.size() == 75);
  for (int j = 0; j < 24; ++j) {
    const Mat3 rel = axis_angle_to_matrix(cur.joint_rotations[j]) * axis_angle_to_matrix(prev.joint_rotations[j]).transpose();
    const Vec3 got = d.segment<3>(3 * j);
    CHECK((axis_angle_to_matrix(got) - rel).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(got.norm() <= std::numbers::pi + 1e-12);
  }
  CHECK((d.tail<3>() - (cur.global_translation - prev.global_translation)).norm() == 0.0);
}

TEST_CASE("doubled-step delta equals the composition of single steps") {
  Rng rng(19);
  for (int trial = 0; trial < 50; ++trial) {
    const AxisAngle r0 = random_axis_angle(rng, 1.0), r1 = random_axis_angle(rng, 1.0), r2 = random_axis_angle(rng, 1.0);
    const Vec3 d01 = relative_rotation(r1, r0, RotRepresentation::AxisAngle);
    const Vec3 d12 = relative_rotation(r2, r1, RotRepresentation::AxisAngle);
    const Vec3 d02 = relative_rotation(r2, r0, RotRepresentation::AxisAngle);
    const Mat3 composed = axis_angle_to_matrix(d12) * axis_angle_to_matrix(d01);
    CHECK((axis_angle_to_matrix(d02) - composed).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("forward kinematics") {
  const KinematicTree tree = make_arm_chain();
  const Pose rest(4);
  const BoneTransforms b = forward_kinematics(tree, rest);
  const auto rest_pos = tree.rest_positions();
  for (int j = 0; j < 4; ++j) {
    CHECK(b.forward[j].rotation.isApprox(Mat3::Identity(), 0.0));
    CHECK(b.forward[j].translation.norm() < 1e-15);
    CHECK((b.joint_positions[j] - rest_pos[j]).norm() < 1e-15);
  }

  Pose shifted(4);
  shifted.global_translation = Vec3(0, 0, 1);
  const BoneTransforms s = forward_kinematics(tree, shifted);
  for (int j = 0; j < 4; ++j) CHECK((s.joint_positions[j] - rest_pos[j] - Vec3(0, 0, 1)).norm() < 1e-15);

  CHECK_THROWS_AS(forward_kinematics(tree, Pose(3)), Error);
}

TEST_CASE("two-link chain matches hand composition") {
  const KinematicTree tree({-1, 0}, {Vec3::Zero(), Vec3(1, 0, 0)});
  Pose p(2);
  p.joint_rotations[1] = Vec3(0, 0, std::numbers::pi / 2);
  const BoneTransforms b = forward_kinematics(tree, p);
  // the leaf bone runs from (1,0,0) along its own offset; rotated a quarter turn it ends at (1,1,0)
  const Vec3 tip_rest = tree.rest_bone_segment(1).second;
  CHECK((tip_rest - Vec3(2, 0, 0)).norm() < 1e-15);
  CHECK((b.forward[1].apply(tip_rest) - Vec3(1, 1, 0)).norm() < 1e-15);
  CHECK((b.joint_positions[1] - Vec3(1, 0, 0)).norm() < 1e-15);

  p.joint_rotations[0] = Vec3(0, 0, std::numbers::pi / 2);
  const BoneTransforms c = forward_kinematics(tree, p);
  CHECK((c.joint_positions[1] - Vec3(0, 1, 0)).norm() < 1e-15);
  CHECK((c.forward[1].apply(tip_rest) - Vec3(-1, 1, 0)).norm() < 1e-15);
}

TEST_CASE("forward and inverse bone transforms cancel") {
  const KinematicTree tree = make_smpl_tree();
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    const BoneTransforms b = forward_kinematics(tree, random_pose(rng, 24));
    for (int j = 0; j < 24; ++j) {
      const RigidTransform id = b.forward[j] * b.inverse[j];
      CHECK((id.rotation - Mat3::Identity()).cwiseAbs().maxCoeff() < 1e-9);
      CHECK(id.translation.norm() < 1e-9);
    }
  }
}

TEST_CASE("cyclic trees are rejected") {
  try {
    KinematicTree bad({1, 0}, {Vec3::Zero(), Vec3::Zero()});
    FAIL("expected a throw");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::CyclicTree);
  }
  CHECK_THROWS_AS(KinematicTree({-1, -1}, {Vec3::Zero(), Vec3::Zero()}), Error);
  CHECK_THROWS_AS(KinematicTree({-1, 5}, {Vec3::Zero(), Vec3::Zero()}), Error);
}

TEST_CASE("skeleton text round trip") {
  const KinematicTree tree = make_smpl_tree();
  const KinematicTree back = skeleton_from_string(skeleton_to_string(tree));
  CHECK(back.parents() == tree.parents());
  for (int j = 0; j < tree.joint_count(); ++j) CHECK(back.rest_offset(j) == tree.rest_offset(j));
}
