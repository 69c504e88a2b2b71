#include <doctest.h>

#include "dyco/context_encoder.hpp"
#include "dyco/deform.hpp"
#include "dyco/error.hpp"
#include "oracles.hpp"

#include <cmath>

using namespace dyco;

namespace {

RigidTransform make_rt(const Vec3& aa, const Vec3& t) {
  RigidTransform r;
  r.rotation = axis_angle_to_matrix(aa);
  r.translation = t;
  return r;
}

BoneTransforms bones_from_inverse(const std::vector<RigidTransform>& inv) {
  BoneTransforms b;
  for (const auto& i : inv) {
    b.inverse.push_back(i);
    b.forward.push_back(i.inverse());
    b.joint_positions.push_back(b.forward.back().translation);
  }
  return b;
}

BlendWeightVolume random_volume(int k, int res, std::uint64_t seed, double spread = 3.0) {
  BlendWeightVolume vol(k, res, Aabb{Vec3(-1, -1, -1), Vec3(1, 1, 1)});
  Rng rng(seed);
  for (auto& v : vol.logits.value) v = rng.uniform(-spread, spread);
  return vol;
}

Vec3 random_point(Rng& rng, double r = 0.8) { return {rng.uniform(-r, r), rng.uniform(-r, r), rng.uniform(-r, r)}; }

}  // namespace

TEST_CASE("positional encoding layout") {
  CHECK(positional_encoding_dim(6) == 39);
  const Vec3 x(0.3, -0.7, 1.1);
  std::vector<double> pe(39);
  positional_encoding(x, 6, pe.data());
  CHECK(pe[0] == x.x());
  CHECK(pe[2] == x.z());
  for (int f = 0; f < 6; ++f)
    for (int a = 0; a < 3; ++a) {
      CHECK(pe[3 + 6 * f + a] == doctest::Approx(std::sin(std::ldexp(1.0, f) * x[a])).epsilon(1e-14));
      CHECK(pe[6 + 6 * f + a] == doctest::Approx(std::cos(std::ldexp(1.0, f) * x[a])).epsilon(1e-14));
    }
}

TEST_CASE("rigid transform: identity pose keeps the point") {
  const KinematicTree tree = make_arm_chain();
  const BoneTransforms rest = forward_kinematics(tree, Pose(4));
  const BlendWeightVolume vol = random_volume(4, 5, 7);
  Rng rng(2);
  for (int i = 0; i < 200; ++i) {
    const Vec3 x = random_point(rng, 1.3);
    const RigidWarp w = rigid_transform(x, rest, vol);
    CHECK((w.x_r - x).norm() < 1e-9);
    const Eigen::VectorXd omega = sample_blend_weights(vol, x);
    CHECK(w.foreground == doctest::Approx(omega.head(4).sum()).epsilon(1e-12));
    CHECK(w.observed_weights.minCoeff() >= 0.0);
  }
}

TEST_CASE("rigid transform: single joint follows its bone") {
  const KinematicTree tree({-1}, {Vec3::Zero()});
  BlendWeightVolume vol(1, 3, Aabb{Vec3(-3, -3, -3), Vec3(3, 3, 3)});
  for (int n = 0; n < 27; ++n) {
    vol.logits.value[2 * n] = 60.0;
    vol.logits.value[2 * n + 1] = 0.0;
  }
  Pose pose(1);
  pose.global_translation = Vec3(1, 0, 0);
  const BoneTransforms bones = forward_kinematics(tree, pose);
  for (const Vec3& x : {Vec3(0.2, 0.4, -0.1), Vec3(1.5, -0.5, 0.7)}) {
    const RigidWarp w = rigid_transform(x, bones, vol);
    CHECK((w.x_r - (x - Vec3(1, 0, 0))).norm() < 1e-12);
    CHECK(w.foreground == 1.0);
    CHECK(w.observed_weights[0] == 1.0);
  }
}

TEST_CASE("rigid transform: equal weights give the candidate midpoint") {
  BlendWeightVolume vol(2, 2, Aabb{Vec3(-5, -5, -5), Vec3(5, 5, 5)});
  for (int n = 0; n < 8; ++n) {
    vol.logits.value[3 * n] = 40.0;
    vol.logits.value[3 * n + 1] = 40.0;
    vol.logits.value[3 * n + 2] = 0.0;
  }
  const BoneTransforms bones = bones_from_inverse(
      {make_rt(Vec3(0, 0, 0.5), Vec3(0.1, 0, 0)), make_rt(Vec3(0.3, -0.2, 0), Vec3(0, -0.4, 0.2))});
  const Vec3 x(0.4, 0.3, -0.2);
  const Vec3 y0 = axis_angle_to_matrix(Vec3(0, 0, 0.5)) * x + Vec3(0.1, 0, 0);
  const Vec3 y1 = axis_angle_to_matrix(Vec3(0.3, -0.2, 0)) * x + Vec3(0, -0.4, 0.2);
  const RigidWarp w = rigid_transform(x, bones, vol);
  CHECK((w.x_r - 0.5 * (y0 + y1)).norm() < 1e-12);
  CHECK(w.observed_weights[0] == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(w.foreground == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("rigid transform: degenerate support and shift invariance") {
  BlendWeightVolume vol(2, 2, Aabb{Vec3(-1, -1, -1), Vec3(1, 1, 1)});
  for (int n = 0; n < 8; ++n) {
    vol.logits.value[3 * n] = -900.0;
    vol.logits.value[3 * n + 1] = -900.0;
    vol.logits.value[3 * n + 2] = 0.0;
  }
  const BoneTransforms bones = bones_from_inverse({make_rt(Vec3(0, 0.4, 0), Vec3(0.2, 0, 0)), RigidTransform{}});
  const Vec3 x(0.1, 0.2, 0.3);
  const RigidWarp dead = rigid_transform(x, bones, vol);
  CHECK(dead.foreground == 0.0);
  CHECK(dead.x_r == x);
  CHECK(dead.observed_weights.isZero(0.0));

  BlendWeightVolume a = random_volume(2, 4, 11);
  BlendWeightVolume b = a;
  for (auto& v : b.logits.value) v += 2.75;
  Rng rng(12);
  for (int i = 0; i < 50; ++i) {
    const Vec3 p = random_point(rng);
    const RigidWarp wa = rigid_transform(p, bones, a), wb = rigid_transform(p, bones, b);
    CHECK((wa.observed_weights - wb.observed_weights).cwiseAbs().maxCoeff() < 1e-12);
  }
  CHECK_THROWS_AS(rigid_transform(x, forward_kinematics(make_arm_chain(), Pose(4)), a), Error);
}

TEST_CASE("non-rigid MLP: zero last layer and dense oracle") {
  NonRigidMlp nr(6, 32, 16, 6);
  Rng rng(41);
  nr.init(rng);
  CHECK(nr.input_dim() == 39 + 6 + 32);
  for (int i = 0; i < 20; ++i) {
    const Vector pc = Vector::Random(6), ctx = Vector::Random(32);
    CHECK(nonrigid_transform(nr, random_point(rng, 2.0), pc, ctx) == Vec3::Zero());
  }

  std::vector<Param*> ps;
  nr.mlp.collect(ps);
  oracle::randomize(ps, rng, -0.5, 0.5);
  std::vector<double> input(nr.input_dim(), 0.0);
  for (int f = 0; f < 6; ++f)
    for (int a = 0; a < 3; ++a) input[6 + 6 * f + a] = 1.0;  // cos(0)
  const auto want = oracle::mlp(nr.mlp, input);
  const Vec3 got = nonrigid_transform(nr, Vec3::Zero(), Vector::Zero(6), Vector::Zero(32));
  for (int a = 0; a < 3; ++a) CHECK(std::abs(got[a] - want[a]) < 1e-13);
  CHECK(got.norm() > 0.0);
  CHECK_THROWS_AS(nonrigid_transform(nr, Vec3::Zero(), Vector::Zero(5), Vector::Zero(32)), Error);
  CHECK_THROWS_AS(nonrigid_transform(nr, Vec3::Zero(), Vector::Zero(6), Vector::Zero(31)), Error);
}

TEST_CASE("non-rigid offset ignores masked-out context inputs") {
  const KinematicTree tree = make_arm_chain();
  ContextEncoder enc("enc", 4, 2);
  NonRigidMlp nr(12, 32, 16, 2);
  Rng rng(6);
  enc.init_fan_in(rng);
  nr.init(rng);
  std::vector<Param*> ps;
  nr.mlp.collect(ps);
  oracle::randomize(ps, rng, -0.5, 0.5);
  // joint 3 chain covers every joint in the arm, so use a branching tree
  const KinematicTree branch({-1, 0, 0, 0}, {Vec3::Zero(), Vec3(1, 0, 0), Vec3(-1, 0, 0), Vec3(0, 1, 0)});
  const Vector mask = joint_mask(branch, 1);
  std::vector<DeltaPose> s1(2, DeltaPose(15)), s2;
  for (auto& d : s1) d = Vector::Random(15);
  s2 = s1;
  for (auto& d : s2) d.segment<3>(6) += Vec3(4, -2, 1);  // joint 2, outside joint 1's chain
  const Vector pc = Vector::Random(12);
  const Vec3 xr(0.1, 0.2, -0.3);
  CHECK(nonrigid_transform(nr, xr, pc, enc.encode(s1, mask)) == nonrigid_transform(nr, xr, pc, enc.encode(s2, mask)));
  (void)tree;
}

TEST_CASE("warp ramp") {
  const KinematicTree tree = make_arm_chain();
  Pose pose(4);
  pose.joint_rotations[1] = Vec3(0, 0, 0.4);
  const BoneTransforms bones = forward_kinematics(tree, pose);
  const BlendWeightVolume vol = random_volume(4, 4, 19);
  NonRigidMlp nr(12, 32, 16, 3);
  Rng rng(23);
  nr.init(rng);
  const Vector pc = Vector::Random(12), ctx = Vector::Random(32);
  const Vec3 x(0.1, 0.5, 0.05);

  const WarpResult zero_init = warp(x, bones, vol, nr, pc, ctx, 1.0);
  CHECK(zero_init.x_c == zero_init.x_r);
  std::vector<Param*> ps;
  nr.mlp.collect(ps);
  oracle::randomize(ps, rng, -0.5, 0.5);
  const WarpResult off = warp(x, bones, vol, nr, pc, ctx, 0.0);
  CHECK(off.x_c == off.x_r);
  CHECK(off.delta.norm() > 0.0);
  const WarpResult half = warp(x, bones, vol, nr, pc, ctx, 0.5);
  for (int a = 0; a < 3; ++a) CHECK(half.x_c[a] == half.x_r[a] + 0.5 * half.delta[a]);
  const WarpResult full = warp(x, bones, vol, nr, pc, ctx, 1.0);
  CHECK(full.x_c == full.x_r + full.delta);
  CHECK(full.observed_weights.minCoeff() >= 0.0);
}

TEST_CASE("warp gradients match finite differences") {
  const KinematicTree tree = make_arm_chain();
  Pose pose(4);
  pose.joint_rotations[0] = Vec3(0.1, 0.2, 0.0);
  pose.joint_rotations[2] = Vec3(0, 0, -0.6);
  const BoneTransforms bones = forward_kinematics(tree, pose);
  BlendWeightVolume vol(4, 4, Aabb{Vec3(-0.5, -0.5, -0.5), Vec3(1, 1.2, 0.5)});
  Rng rng(31);
  for (auto& v : vol.logits.value) v = rng.uniform(-1.5, 1.5);
  ContextEncoder enc("enc", 4, 2);
  enc.init_fan_in(rng);
  for (auto& v : enc.temporal.bias.value) v = rng.uniform(0.0, 0.2);
  NonRigidMlp nr(12, 32, 8, 2);
  nr.init(rng);
  std::vector<Param*> nrp;
  nr.mlp.collect(nrp);
  oracle::randomize(nrp, rng, -0.4, 0.4);

  std::vector<Param*> all{&vol.logits};
  enc.collect(all);
  nr.mlp.collect(all);
  ParamStore store(all);

  std::vector<DeltaPose> seq(2, DeltaPose(15));
  for (auto& d : seq) d = 0.3 * Vector::Random(15);
  const Vector mask = Vector::Ones(15);
  const Vector pc = Vector::Random(12);
  const Vec3 coef(0.7, -1.1, 0.4);
  const double ramp = 0.8;

  for (const Vec3& x : {Vec3(0.05, 0.3, 0.02), Vec3(0.2, 0.75, -0.05)}) {
    auto loss = [&] {
      return coef.dot(warp(x, bones, vol, nr, pc, enc.encode(seq, mask), ramp).x_c);
    };
    ContextEncoder::Cache ecache;
    const Vector ctx = enc.encode(seq, mask, &ecache);
    const RigidWarp rigid = rigid_transform(x, bones, vol);
    Matrix in(nr.input_dim(), 1);
    nr.assemble_input(rigid.x_r, pc, ctx, in.data());
    Mlp::Cache mcache;
    nr.mlp.forward(in, &mcache);

    GradBuffer g(store, false);
    const Matrix d_in = nr.mlp.backward(mcache, Matrix(ramp * coef), g);
    Vec3 d_xr = coef;
    positional_encoding_backward(rigid.x_r, nr.pe_freqs(), d_in.data(), d_xr);
    const int ctx_off = positional_encoding_dim(nr.pe_freqs()) + nr.pose_dim();
    enc.backward(ecache, d_in.block(ctx_off, 0, 32, 1), g);
    rigid_transform_backward(rigid, vol, d_xr, 0.0, g);

    int checked_logits = 0;
    for (const auto& r : finite_difference_check(store, g, loss, 1e-6)) {
      CHECK(r.rel_error < 1e-4);
      if (r.param == vol.logits.name && r.analytic != 0.0) ++checked_logits;
    }
    CHECK(checked_logits > 0);
  }
}
