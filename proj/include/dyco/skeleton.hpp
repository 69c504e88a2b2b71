#pragma once

#include "dyco/aabb.hpp"
#include "dyco/diffengine.hpp"
#include "dyco/kinematic_tree.hpp"

#include <Eigen/Core>

#include <array>
#include <vector>

namespace dyco {

/// Union of every root-to-leaf chain through k: ancestors, k, and k's subtree.
/// Sorted ascending. Throws OutOfRange for an invalid joint.
std::vector<int> kinematic_chains(const KinematicTree& tree, int k);

/// 3K+3 binary mask: ones over the chain joints of k and over the translation tail.
Eigen::VectorXd joint_mask(const KinematicTree& tree, int k);

/// Argmax over the first K channels of a K+1 weight vector (background last);
/// ties go to the lowest index.
int nearest_joint(const Eigen::Ref<const Eigen::VectorXd>& weights, int joint_count);

/// Trilinear stencil into a node grid: 8 flat node indices and their weights.
struct GridStencil {
  std::array<int, 8> node{};
  std::array<double, 8> weight{};
};

/// Learnable D^3 x (K+1) grid of skinning logits over a canonical box. Channel
/// K is the background. Layout is [z][y][x][channel].
class BlendWeightVolume {
 public:
  BlendWeightVolume() = default;
  BlendWeightVolume(int joint_count, int resolution, const Aabb& box);

  int joint_count() const noexcept { return joints_; }
  int channels() const noexcept { return joints_ + 1; }
  int resolution() const noexcept { return res_; }
  const Aabb& box() const noexcept { return box_; }

  /// Gaussian logit bumps around each rest bone segment (sigma = half the bone
  /// length), shifted so that off-skeleton space favours the background channel.
  void init_from_skeleton(const KinematicTree& tree, double amplitude = 8.0, double floor = -4.0);

  Eigen::Vector3d node_position(int ix, int iy, int iz) const;
  double& logit(int ix, int iy, int iz, int c);

  /// Points outside the box clamp to the boundary.
  GridStencil stencil(const Eigen::Vector3d& x) const;

  /// Interpolated logits (K+1) for a stencil.
  void interpolate(const GridStencil& s, double* out) const;

  /// Softmax of the interpolated logits.
  Eigen::VectorXd sample(const Eigen::Vector3d& x) const;

  /// Scatters dL/dlogits (K+1) through a stencil.
  void accumulate(const GridStencil& s, const double* d_logits, GradBuffer& grads) const;

  Param logits;

 private:
  int joints_ = 0;
  int res_ = 0;
  Aabb box_;
};

/// Softmax-normalized canonical skinning weights at x (K+1 entries summing to 1).
Eigen::VectorXd sample_blend_weights(const BlendWeightVolume& vol, const Eigen::Vector3d& x);

/// Backward of softmax: given weights w and dL/dw, returns dL/dlogits.
void softmax_backward(const double* w, const double* dw, int n, double* d_logits);

}  // namespace dyco
