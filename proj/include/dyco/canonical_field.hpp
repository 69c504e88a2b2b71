#pragma once

#include "dyco/aabb.hpp"
#include "dyco/nn.hpp"

#include <array>
#include <vector>

namespace dyco {

struct FieldShape {
  std::vector<int> resolutions = {16, 32, 64, 128};
  int features = 32;
  int density_width = 256;
  int color_width = 256;
};

/// Multi-scale triplane (xy, xz, yz planes per scale, features fused by
/// elementwise product, concatenated across scales) with density and colour
/// heads over [features, pose condition, context].
class TriplaneField {
 public:
  /// Bilinear lookups for one point, kept for the backward pass.
  struct PlaneTap {
    int u0 = 0, v0 = 0;
    double fu = 0.0, fv = 0.0;
  };
  struct SampleCache {
    Eigen::Vector3d coord_scale = Eigen::Vector3d::Zero();  // d(grid coord)/dx per axis, 0 when clamped
    std::vector<std::array<PlaneTap, 3>> taps;              // per scale
    std::vector<double> plane_values;                       // scale x plane x F
  };

  TriplaneField() = default;
  TriplaneField(const FieldShape& shape, const Aabb& box, int pose_dim, int context_dim);

  int scales() const noexcept { return static_cast<int>(planes.size()); }
  int features() const noexcept { return shape_.features; }
  int feature_dim() const noexcept { return scales() * shape_.features; }
  int pose_dim() const noexcept { return pose_dim_; }
  int context_dim() const noexcept { return context_dim_; }
  int head_input_dim() const noexcept { return feature_dim() + pose_dim_ + context_dim_; }
  const Aabb& box() const noexcept { return box_; }
  const FieldShape& shape() const noexcept { return shape_; }

  /// Planes uniform in +-0.1, heads fan-in uniform.
  void init(Rng& rng);

  void sample(const Eigen::Vector3d& x_c, double* features, SampleCache* cache = nullptr) const;

  /// Scatters dL/dfeatures into the plane gradients; adds dL/dx_c to `d_x` when given.
  void sample_backward(const SampleCache& cache, const double* d_features, GradBuffer& grads,
                       Eigen::Vector3d* d_x) const;

  void collect(std::vector<Param*>& out) {
    for (auto& p : planes) out.push_back(&p);
    density.collect(out);
    color.collect(out);
  }

  double& plane_value(int scale, int plane, int u, int v, int f);

  std::vector<Param> planes;  // per scale, shape [3][r][r][F]
  Mlp density;                // -> 1, softplus, gated by foreground
  Mlp color;                  // -> 3, sigmoid

 private:
  FieldShape shape_;
  Aabb box_;
  int pose_dim_ = 0;
  int context_dim_ = 0;
};

Vector triplane_sample(const TriplaneField& field, const Eigen::Vector3d& x_c);

struct FieldValue {
  double sigma = 0.0;
  Eigen::Vector3d color = Eigen::Vector3d::Zero();
};

/// Throws DimensionMismatch when the conditions disagree with the heads.
FieldValue field_eval(const TriplaneField& field, const Eigen::Vector3d& x_c, const Vector& pose_cond,
                      const Vector& ctx, double foreground);

}  // namespace dyco
