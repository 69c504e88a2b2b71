#include "dyco/deform.hpp"

#include "dyco/error.hpp"

#include <cmath>

namespace dyco {

int positional_encoding_dim(int freqs) { return 3 + 6 * freqs; }

void positional_encoding(const Vec3& x, int freqs, double* out) {
  out[0] = x.x();
  out[1] = x.y();
  out[2] = x.z();
  double scale = 1.0;
  for (int f = 0; f < freqs; ++f, scale *= 2.0) {
    double* o = out + 3 + 6 * f;
    for (int a = 0; a < 3; ++a) {
      o[a] = std::sin(scale * x[a]);
      o[3 + a] = std::cos(scale * x[a]);
    }
  }
}

void positional_encoding_backward(const Vec3& x, int freqs, const double* d_pe, Vec3& d_x) {
  for (int a = 0; a < 3; ++a) d_x[a] += d_pe[a];
  double scale = 1.0;
  for (int f = 0; f < freqs; ++f, scale *= 2.0) {
    const double* g = d_pe + 3 + 6 * f;
    for (int a = 0; a < 3; ++a)
      d_x[a] += scale * (g[a] * std::cos(scale * x[a]) - g[3 + a] * std::sin(scale * x[a]));
  }
}

RigidWarp rigid_transform(const Vec3& x, const BoneTransforms& bones, const BlendWeightVolume& vol) {
  const int k = vol.joint_count();
  if (bones.joint_count() != k)
    throw Error(ErrorCode::SkeletonMismatch, "bone transforms and blend volume disagree on K");
  RigidWarp out;
  out.raw_weights.resize(k);
  out.observed_weights = Eigen::VectorXd::Zero(k);
  out.candidates.resize(k);
  out.stencils.resize(k);
  out.softmax.resize(k);

  double sum = 0.0;
  for (int i = 0; i < k; ++i) {
    const Vec3 y = bones.inverse[i].apply(x);
    out.candidates[i] = y;
    out.stencils[i] = vol.stencil(y);
    Eigen::VectorXd p(vol.channels());
    vol.interpolate(out.stencils[i], p.data());
    const double mx = p.maxCoeff();
    p = (p.array() - mx).exp();
    p /= p.sum();
    out.softmax[i] = p;
    out.raw_weights[i] = p[i];
    sum += p[i];
  }
  out.weight_sum = sum;
  if (sum <= kSkinningEpsilon) {
    out.degenerate = true;
    out.x_r = x;
    out.foreground = 0.0;
    return out;
  }
  out.observed_weights = out.raw_weights / sum;
  out.x_r.setZero();
  for (int i = 0; i < k; ++i) out.x_r += out.observed_weights[i] * out.candidates[i];
  out.foreground = std::min(sum, 1.0);
  return out;
}

void rigid_transform_backward(const RigidWarp& warp, const BlendWeightVolume& vol, const Vec3& d_xr,
                              double d_foreground, GradBuffer& grads) {
  if (warp.degenerate) return;
  const int k = vol.joint_count();
  const double sum = warp.weight_sum;
  // omega_i = w_i / S
  Eigen::VectorXd d_omega(k);
  for (int i = 0; i < k; ++i) d_omega[i] = d_xr.dot(warp.candidates[i]);
  const double dot = d_omega.dot(warp.observed_weights);
  Eigen::VectorXd d_logits(vol.channels());
  for (int i = 0; i < k; ++i) {
    double dw = (d_omega[i] - dot) / sum;
    if (sum < 1.0) dw += d_foreground;
    if (dw == 0.0) continue;
    // w_i = softmax_i(l); dl_c = w_i (delta_ic - p_c) dw
    const Eigen::VectorXd& p = warp.softmax[i];
    d_logits = -p * (p[i] * dw);
    d_logits[i] += p[i] * dw;
    vol.accumulate(warp.stencils[i], d_logits.data(), grads);
  }
}

NonRigidMlp::NonRigidMlp(int pose_dim, int context_dim, int width, int pe_freqs)
    : pose_dim_(pose_dim), context_dim_(context_dim), freqs_(pe_freqs) {
  mlp = Mlp("nonrigid", {input_dim(), width, width, 3});
}

void NonRigidMlp::init(Rng& rng) {
  mlp.init_fan_in(rng);
  mlp.layers().back().zero();
}

void NonRigidMlp::assemble_input(const Vec3& x_r, const Vector& pose_cond, const Vector& ctx,
                                 double* column) const {
  positional_encoding(x_r, freqs_, column);
  const int pe = positional_encoding_dim(freqs_);
  for (int i = 0; i < pose_dim_; ++i) column[pe + i] = pose_cond[i];
  for (int i = 0; i < context_dim_; ++i) column[pe + pose_dim_ + i] = ctx[i];
}

Vec3 nonrigid_transform(const NonRigidMlp& params, const Vec3& x_r, const Vector& pose_cond, const Vector& ctx) {
  if (pose_cond.size() != params.pose_dim() || ctx.size() != params.context_dim())
    throw Error(ErrorCode::DimensionMismatch, "non-rigid condition dimensions do not match the MLP");
  Matrix in(params.input_dim(), 1);
  params.assemble_input(x_r, pose_cond, ctx, in.data());
  const Matrix out = params.mlp.forward(in);
  return out.col(0);
}

WarpResult warp(const Vec3& x, const BoneTransforms& bones, const BlendWeightVolume& vol,
                const NonRigidMlp& nr, const Vector& pose_cond, const Vector& ctx, double ramp) {
  const RigidWarp rigid = rigid_transform(x, bones, vol);
  WarpResult out;
  out.x_r = rigid.x_r;
  out.foreground = rigid.foreground;
  out.observed_weights = rigid.observed_weights;
  out.delta = nonrigid_transform(nr, rigid.x_r, pose_cond, ctx);
  out.x_c = out.x_r + ramp * out.delta;
  return out;
}

}  // namespace dyco
