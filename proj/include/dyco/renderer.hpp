#pragma once

#include "dyco/aabb.hpp"
#include "dyco/posemath.hpp"

#include <Eigen/Core>

#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace dyco {

/// Pinhole camera; the extrinsic maps world to camera coordinates
/// (x right, y down, z forward).
struct Camera {
  double fx = 1.0, fy = 1.0, cx = 0.0, cy = 0.0;
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();
  int width = 1, height = 1;

  Vec3 center() const { return -(rotation.transpose() * translation); }

  /// Camera at `eye` looking at `target` with world up `up`.
  static Camera look_at(const Vec3& eye, const Vec3& target, const Vec3& up, double fx, double fy,
                        int width, int height);
};

struct Ray {
  Vec3 origin = Vec3::Zero();
  Vec3 direction = Vec3::UnitZ();
  double t_near = 0.0;
  double t_far = 0.0;

  Vec3 at(double t) const { return origin + t * direction; }
};

/// Rays through pixel centers (u + 0.5, v + 0.5). Throws OutOfBounds.
std::vector<Ray> generate_rays(const Camera& cam, const std::vector<std::pair<int, int>>& pixels);
Ray generate_ray(const Camera& cam, int u, int v);

/// Slab intersection with t_near clamped to >= 0; nullopt on a miss.
std::optional<std::pair<double, double>> ray_bounds(const Ray& ray, const Aabb& box);

struct RenderSample {
  double t = 0.0;
  double sigma = 0.0;
  Vec3 color = Vec3::Zero();
};

struct CompositeResult {
  Vec3 color = Vec3::Zero();
  double opacity = 0.0;
  std::vector<double> weights;  // T_i alpha_i
  std::vector<double> deltas;
};

/// Discrete volume rendering; the last interval ends at t_far.
/// Throws UnsortedSamples unless t is strictly increasing and below t_far.
CompositeResult composite(const std::vector<RenderSample>& samples, double t_far);

/// Gradients of a composite with respect to each sigma_i and c_i.
void composite_backward(const std::vector<RenderSample>& samples, const CompositeResult& result,
                        const Vec3& d_color, double d_opacity, std::vector<double>& d_sigma,
                        std::vector<Vec3>& d_colors);

/// Cameras file: `#dyco-cams v1` then per camera `fx fy cx cy`, 12 extrinsic
/// reals (row-major 3x4 [R|t]) and `W H` on one line.
std::vector<Camera> read_cameras(const std::string& path);
void write_cameras(const std::vector<Camera>& cams, const std::string& path);

}  // namespace dyco
