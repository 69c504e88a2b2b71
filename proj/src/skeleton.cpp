#include "dyco/skeleton.hpp"

#include "dyco/error.hpp"

#include <algorithm>
#include <cmath>

namespace dyco {

std::vector<int> kinematic_chains(const KinematicTree& tree, int k) {
  const int n = tree.joint_count();
  if (k < 0 || k >= n) throw Error(ErrorCode::OutOfRange, "joint " + std::to_string(k) + " out of range");
  std::vector<char> in(n, 0);
  in[k] = 1;
  for (int p = tree.parent(k); p >= 0; p = tree.parent(p)) in[p] = 1;
  std::vector<int> stack = {k};
  while (!stack.empty()) {
    const int j = stack.back();
    stack.pop_back();
    for (int c : tree.children(j)) {
      in[c] = 1;
      stack.push_back(c);
    }
  }
  std::vector<int> out;
  for (int j = 0; j < n; ++j)
    if (in[j]) out.push_back(j);
  return out;
}

Eigen::VectorXd joint_mask(const KinematicTree& tree, int k) {
  const int n = tree.joint_count();
  Eigen::VectorXd mask = Eigen::VectorXd::Zero(3 * n + 3);
  for (int j : kinematic_chains(tree, k)) mask.segment<3>(3 * j).setOnes();
  mask.tail<3>().setOnes();
  return mask;
}

int nearest_joint(const Eigen::Ref<const Eigen::VectorXd>& weights, int joint_count) {
  int best = 0;
  for (int j = 1; j < joint_count; ++j)
    if (weights[j] > weights[best]) best = j;
  return best;
}

BlendWeightVolume::BlendWeightVolume(int joint_count, int resolution, const Aabb& box)
    : logits("blend.logits", {resolution, resolution, resolution, joint_count + 1}, ParamGroup::Other, true),
      joints_(joint_count),
      res_(resolution),
      box_(box) {
  if (resolution < 2) throw Error(ErrorCode::DimensionMismatch, "blend grid needs at least 2 nodes per axis");
}

Eigen::Vector3d BlendWeightVolume::node_position(int ix, int iy, int iz) const {
  const Eigen::Vector3d f(ix, iy, iz);
  return box_.min + (box_.extent().array() * f.array() / static_cast<double>(res_ - 1)).matrix();
}

double& BlendWeightVolume::logit(int ix, int iy, int iz, int c) {
  return logits.value[((static_cast<std::size_t>(iz) * res_ + iy) * res_ + ix) * channels() + c];
}

namespace {

double segment_distance(const Vec3& p, const Vec3& a, const Vec3& b) {
  const Vec3 ab = b - a;
  const double len2 = ab.squaredNorm();
  const double t = len2 > 0.0 ? std::clamp((p - a).dot(ab) / len2, 0.0, 1.0) : 0.0;
  return (p - (a + t * ab)).norm();
}

}  // namespace

void BlendWeightVolume::init_from_skeleton(const KinematicTree& tree, double amplitude, double floor) {
  if (tree.joint_count() != joints_)
    throw Error(ErrorCode::SkeletonMismatch, "skeleton and blend volume disagree on K");
  std::vector<std::pair<Vec3, Vec3>> bones;
  std::vector<double> sigma;
  for (int j = 0; j < joints_; ++j) {
    bones.push_back(tree.rest_bone_segment(j));
    sigma.push_back(std::max(0.5 * (bones.back().second - bones.back().first).norm(), 0.05));
  }
  for (int iz = 0; iz < res_; ++iz)
    for (int iy = 0; iy < res_; ++iy)
      for (int ix = 0; ix < res_; ++ix) {
        const Vec3 p = node_position(ix, iy, iz);
        for (int j = 0; j < joints_; ++j) {
          const double d = segment_distance(p, bones[j].first, bones[j].second);
          logit(ix, iy, iz, j) = amplitude * std::exp(-d * d / (2.0 * sigma[j] * sigma[j])) + floor;
        }
        logit(ix, iy, iz, joints_) = 0.0;
      }
}

GridStencil BlendWeightVolume::stencil(const Eigen::Vector3d& x) const {
  GridStencil s;
  int i0[3];
  double f[3];
  for (int a = 0; a < 3; ++a) {
    const double ext = box_.max[a] - box_.min[a];
    double u = ext > 0.0 ? (x[a] - box_.min[a]) / ext * (res_ - 1) : 0.0;
    u = std::clamp(u, 0.0, static_cast<double>(res_ - 1));
    int i = static_cast<int>(std::floor(u));
    if (i >= res_ - 1) i = res_ - 2;
    i0[a] = i;
    f[a] = u - i;
  }
  for (int c = 0; c < 8; ++c) {
    const int dx = c & 1, dy = (c >> 1) & 1, dz = (c >> 2) & 1;
    s.node[c] = ((i0[2] + dz) * res_ + (i0[1] + dy)) * res_ + (i0[0] + dx);
    s.weight[c] = (dx ? f[0] : 1.0 - f[0]) * (dy ? f[1] : 1.0 - f[1]) * (dz ? f[2] : 1.0 - f[2]);
  }
  return s;
}

void BlendWeightVolume::interpolate(const GridStencil& s, double* out) const {
  const int ch = channels();
  std::fill(out, out + ch, 0.0);
  for (int c = 0; c < 8; ++c) {
    const double w = s.weight[c];
    if (w == 0.0) continue;
    const double* src = logits.value.data() + static_cast<std::size_t>(s.node[c]) * ch;
    for (int k = 0; k < ch; ++k) out[k] += w * src[k];
  }
}

namespace {

void softmax_inplace(double* v, int n) {
  double mx = v[0];
  for (int k = 1; k < n; ++k) mx = std::max(mx, v[k]);
  double sum = 0.0;
  for (int k = 0; k < n; ++k) {
    v[k] = std::exp(v[k] - mx);
    sum += v[k];
  }
  for (int k = 0; k < n; ++k) v[k] /= sum;
}

}  // namespace

Eigen::VectorXd BlendWeightVolume::sample(const Eigen::Vector3d& x) const {
  Eigen::VectorXd w(channels());
  interpolate(stencil(x), w.data());
  softmax_inplace(w.data(), channels());
  return w;
}

void BlendWeightVolume::accumulate(const GridStencil& s, const double* d_logits, GradBuffer& grads) const {
  const int ch = channels();
  for (int c = 0; c < 8; ++c) {
    const double w = s.weight[c];
    if (w == 0.0) continue;
    const std::size_t base = static_cast<std::size_t>(s.node[c]) * ch;
    for (int k = 0; k < ch; ++k)
      if (d_logits[k] != 0.0) grads.add(logits.id, base + k, w * d_logits[k]);
  }
}

Eigen::VectorXd sample_blend_weights(const BlendWeightVolume& vol, const Eigen::Vector3d& x) {
  return vol.sample(x);
}

void softmax_backward(const double* w, const double* dw, int n, double* d_logits) {
  double dot = 0.0;
  for (int k = 0; k < n; ++k) dot += w[k] * dw[k];
  for (int k = 0; k < n; ++k) d_logits[k] = w[k] * (dw[k] - dot);
}

}  // namespace dyco
