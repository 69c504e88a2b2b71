#pragma once

#include "dyco/nn.hpp"
#include "dyco/posemath.hpp"
#include "dyco/skeleton.hpp"

#include <vector>

namespace dyco {

/// [x, sin(2^f x), cos(2^f x) for f < freqs]; dimension 3 + 6 freqs.
int positional_encoding_dim(int freqs);
void positional_encoding(const Vec3& x, int freqs, double* out);
/// d_x += J^T d_pe
void positional_encoding_backward(const Vec3& x, int freqs, const double* d_pe, Vec3& d_x);

/// Inverse-LBS result for one point, with what the backward pass needs.
struct RigidWarp {
  Vec3 x_r = Vec3::Zero();
  Eigen::VectorXd observed_weights;  // omega_o, K entries
  Eigen::VectorXd raw_weights;       // w_i = omega_c^i(R_i x + t_i), K entries
  double foreground = 0.0;
  double weight_sum = 0.0;
  bool degenerate = false;
  std::vector<Vec3> candidates;           // y_i = R_i x + t_i
  std::vector<GridStencil> stencils;      // per joint
  std::vector<Eigen::VectorXd> softmax;   // K+1 per joint
};

constexpr double kSkinningEpsilon = 1e-9;

/// Backward skinning: candidates y_i from inverse bone transforms, weights
/// sampled from the canonical volume at y_i and normalized; x_r is the
/// weighted candidate mean, foreground the clamped unnormalized weight sum.
RigidWarp rigid_transform(const Vec3& x, const BoneTransforms& bones, const BlendWeightVolume& vol);

/// Scatters dL/dx_r and dL/dforeground into the logit gradient.
void rigid_transform_backward(const RigidWarp& warp, const BlendWeightVolume& vol, const Vec3& d_xr,
                              double d_foreground, GradBuffer& grads);

/// Non-rigid offset MLP over [PE(x_r), pose condition, context]; two hidden
/// ReLU layers, last layer zero-initialized.
class NonRigidMlp {
 public:
  NonRigidMlp() = default;
  NonRigidMlp(int pose_dim, int context_dim, int width = 128, int pe_freqs = 6);

  int input_dim() const noexcept { return positional_encoding_dim(freqs_) + pose_dim_ + context_dim_; }
  int pose_dim() const noexcept { return pose_dim_; }
  int context_dim() const noexcept { return context_dim_; }
  int pe_freqs() const noexcept { return freqs_; }

  void init(Rng& rng);

  /// Fills one input column.
  void assemble_input(const Vec3& x_r, const Vector& pose_cond, const Vector& ctx, double* column) const;

  Mlp mlp;

 private:
  int pose_dim_ = 0;
  int context_dim_ = 0;
  int freqs_ = 6;
};

/// Throws DimensionMismatch when the condition sizes disagree with the MLP.
Vec3 nonrigid_transform(const NonRigidMlp& params, const Vec3& x_r, const Vector& pose_cond, const Vector& ctx);

struct WarpResult {
  Vec3 x_r = Vec3::Zero();
  Vec3 delta = Vec3::Zero();
  Vec3 x_c = Vec3::Zero();
  double foreground = 0.0;
  Eigen::VectorXd observed_weights;
};

/// x_c = x_r + ramp * dx
WarpResult warp(const Vec3& x, const BoneTransforms& bones, const BlendWeightVolume& vol,
                const NonRigidMlp& nr, const Vector& pose_cond, const Vector& ctx, double ramp);

}  // namespace dyco
