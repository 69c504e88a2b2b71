#include <doctest.h>

#include "dyco/error.hpp"
#include "dyco/rng.hpp"
#include "dyco/skeleton.hpp"

#include <algorithm>
#include <set>

using namespace dyco;

namespace {

// Published SMPL parent array.
const std::vector<int> kSmplParents = {-1, 0, 0, 0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 9, 9, 12, 13, 14, 16, 17, 18, 19, 20, 21};
constexpr int kLeftWrist = 20;

std::set<int> chain_oracle(const std::vector<int>& parents, int k) {
  std::set<int> out;
  for (int j = k; j >= 0; j = parents[j]) out.insert(j);
  // descendants: any joint whose ancestor walk hits k
  for (int j = 0; j < static_cast<int>(parents.size()); ++j)
    for (int a = j; a >= 0; a = parents[a])
      if (a == k) out.insert(j);
  return out;
}

BlendWeightVolume unit_volume(int k, int d) {
  return BlendWeightVolume(k, d, Aabb{Vec3(-1, -1, -1), Vec3(1, 1, 1)});
}

}  // namespace

TEST_CASE("kinematic chains") {
  const KinematicTree chain = make_arm_chain();
  CHECK(kinematic_chains(chain, 0) == std::vector<int>{0, 1, 2, 3});
  CHECK(kinematic_chains(chain, 2) == std::vector<int>{0, 1, 2, 3});
  CHECK_THROWS_AS(kinematic_chains(chain, 4), Error);
  CHECK_THROWS_AS(kinematic_chains(chain, -1), Error);

  const KinematicTree smpl = make_smpl_tree();
  REQUIRE(smpl.parents() == kSmplParents);
  CHECK(kinematic_chains(smpl, 0).size() == 24u);
  for (int k = 0; k < 24; ++k) {
    const auto got = kinematic_chains(smpl, k);
    const auto want = chain_oracle(kSmplParents, k);
    CHECK(std::set<int>(got.begin(), got.end()) == want);
  }
  const auto wrist = kinematic_chains(smpl, kLeftWrist);
  CHECK(wrist == std::vector<int>{0, 3, 6, 9, 13, 16, 18, 20, 22});
  for (int right_leg : {2, 5, 8, 11}) CHECK(std::find(wrist.begin(), wrist.end(), right_leg) == wrist.end());
}

TEST_CASE("joint masks") {
  const KinematicTree chain = make_arm_chain();
  CHECK(joint_mask(chain, 2) == Eigen::VectorXd::Ones(15));
  const KinematicTree smpl = make_smpl_tree();
  CHECK(joint_mask(smpl, 0) == Eigen::VectorXd::Ones(75));
  const Eigen::VectorXd m = joint_mask(smpl, kLeftWrist);
  const auto oracle = chain_oracle(kSmplParents, kLeftWrist);
  for (int j = 0; j < 24; ++j)
    for (int a = 0; a < 3; ++a) CHECK(m[3 * j + a] == (oracle.count(j) ? 1.0 : 0.0));
  for (int right_leg : {2, 5, 8, 11}) CHECK(m.segment<3>(3 * right_leg).isZero(0.0));
  CHECK(m.tail<3>() == Vec3::Ones());
  CHECK_THROWS_AS(joint_mask(smpl, 24), Error);
}

TEST_CASE("nearest joint") {
  Eigen::VectorXd w = Eigen::VectorXd::Zero(5);
  w[3] = 1.0;
  CHECK(nearest_joint(w, 4) == 3);
  CHECK(nearest_joint(Eigen::VectorXd::Constant(5, 0.2), 4) == 0);
  Eigen::VectorXd v(5);
  v << 0.1, 0.5, 0.2, 0.1, 0.1;
  CHECK(nearest_joint(v, 4) == 1);
  Eigen::VectorXd bg(5);
  bg << 0.1, 0.1, 0.15, 0.05, 0.6;
  CHECK(nearest_joint(bg, 4) == 2);
}

TEST_CASE("blend weights at nodes and under uniform logits") {
  BlendWeightVolume vol = unit_volume(3, 5);
  Rng rng(1);
  for (auto& x : vol.logits.value) x = rng.uniform(-2, 2);
  const Vec3 node = vol.node_position(1, 3, 2);
  const Eigen::VectorXd w = sample_blend_weights(vol, node);
  Eigen::VectorXd expect(4);
  for (int c = 0; c < 4; ++c) expect[c] = std::exp(vol.logit(1, 3, 2, c));
  expect /= expect.sum();
  CHECK((w - expect).cwiseAbs().maxCoeff() < 1e-15);

  BlendWeightVolume flat = unit_volume(3, 4);
  std::fill(flat.logits.value.begin(), flat.logits.value.end(), 0.7);
  const Eigen::VectorXd u = sample_blend_weights(flat, Vec3(0.13, -0.4, 0.9));
  CHECK((u - Eigen::VectorXd::Constant(4, 0.25)).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("trilinear oracle at a cell centre") {
  BlendWeightVolume vol = unit_volume(1, 3);
  Rng rng(4);
  for (auto& x : vol.logits.value) x = rng.uniform(-3, 3);
  // centre of the cell between nodes (1..2)^3; hand average of its eight corners
  const Vec3 p = 0.5 * (vol.node_position(1, 1, 1) + vol.node_position(2, 2, 2));
  for (int c = 0; c < 2; ++c) {
    double avg = 0.0;
    for (int dz = 1; dz <= 2; ++dz)
      for (int dy = 1; dy <= 2; ++dy)
        for (int dx = 1; dx <= 2; ++dx) avg += vol.logit(dx, dy, dz, c) / 8.0;
    double got[2];
    vol.interpolate(vol.stencil(p), got);
    CHECK(std::abs(got[c] - avg) < 1e-14);
  }
  double l[2];
  vol.interpolate(vol.stencil(p), l);
  const double w0 = std::exp(l[0]) / (std::exp(l[0]) + std::exp(l[1]));
  CHECK(std::abs(sample_blend_weights(vol, p)[0] - w0) < 1e-15);
}

TEST_CASE("weights are a continuous simplex and clamp outside the box") {
  BlendWeightVolume vol = unit_volume(4, 6);
  Rng rng(9);
  for (auto& x : vol.logits.value) x = rng.uniform(-5, 5);
  for (int i = 0; i < 200; ++i) {
    const Vec3 p(rng.uniform(-1.2, 1.2), rng.uniform(-1.2, 1.2), rng.uniform(-1.2, 1.2));
    const Eigen::VectorXd w = sample_blend_weights(vol, p);
    CHECK(w.minCoeff() >= 0.0);
    CHECK(std::abs(w.sum() - 1.0) < 1e-12);
    const Eigen::VectorXd w2 = sample_blend_weights(vol, p + Vec3(1e-6, -1e-6, 1e-6));
    CHECK((w - w2).cwiseAbs().maxCoeff() < 1e-3);
  }
  const Eigen::VectorXd out = sample_blend_weights(vol, Vec3(5, 0.2, -0.3));
  const Eigen::VectorXd edge = sample_blend_weights(vol, Vec3(1, 0.2, -0.3));
  CHECK((out - edge).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("blend weight gradient matches finite differences") {
  BlendWeightVolume vol = unit_volume(3, 3);
  Rng rng(21);
  for (auto& x : vol.logits.value) x = rng.uniform(-2, 2);
  ParamStore store({&vol.logits});
  const Vec3 p(0.31, -0.47, 0.12);
  const Eigen::VectorXd coef = Eigen::VectorXd::Random(4);
  auto loss = [&] { return coef.dot(sample_blend_weights(vol, p)); };

  GradBuffer g(store, false);
  const Eigen::VectorXd w = sample_blend_weights(vol, p);
  Eigen::VectorXd dl(4);
  softmax_backward(w.data(), coef.data(), 4, dl.data());
  vol.accumulate(vol.stencil(p), dl.data(), g);
  for (const auto& r : finite_difference_check(store, g, loss, 1e-6)) CHECK(r.rel_error < 1e-5);
}

TEST_CASE("skeleton initialisation favours the nearest bone") {
  const KinematicTree tree = make_arm_chain();
  BlendWeightVolume vol(4, 24, Aabb{Vec3(-0.5, -0.5, -0.5), Vec3(1.1, 1.2, 0.5)});
  vol.init_from_skeleton(tree);
  for (int j = 0; j < 4; ++j) {
    const auto [a, b] = tree.rest_bone_segment(j);
    const Eigen::VectorXd w = sample_blend_weights(vol, 0.5 * (a + b));
    CHECK(nearest_joint(w, 4) == j);
  }
  const Eigen::VectorXd far = sample_blend_weights(vol, Vec3(-0.5, -0.5, 0.5));
  CHECK(far[4] > 0.9);
  CHECK_THROWS_AS(vol.init_from_skeleton(make_smpl_tree()), Error);
}
