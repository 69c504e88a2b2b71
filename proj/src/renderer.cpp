#include "dyco/renderer.hpp"

#include "dyco/error.hpp"

#include <Eigen/Geometry>

#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

namespace dyco {

Camera Camera::look_at(const Vec3& eye, const Vec3& target, const Vec3& up, double fx, double fy, int width,
                       int height) {
  const Vec3 forward = (target - eye).normalized();
  const Vec3 right = forward.cross(up).normalized();
  const Vec3 down = forward.cross(right);
  Camera cam;
  cam.rotation.row(0) = right;
  cam.rotation.row(1) = down;
  cam.rotation.row(2) = forward;
  cam.translation = -(cam.rotation * eye);
  cam.fx = fx;
  cam.fy = fy;
  cam.cx = 0.5 * width;
  cam.cy = 0.5 * height;
  cam.width = width;
  cam.height = height;
  return cam;
}

Ray generate_ray(const Camera& cam, int u, int v) {
  if (u < 0 || v < 0 || u >= cam.width || v >= cam.height)
    throw Error(ErrorCode::OutOfBounds, "pixel (" + std::to_string(u) + ", " + std::to_string(v) + ") outside image");
  const Vec3 local((u + 0.5 - cam.cx) / cam.fx, (v + 0.5 - cam.cy) / cam.fy, 1.0);
  Ray r;
  r.origin = cam.center();
  r.direction = (cam.rotation.transpose() * local).normalized();
  return r;
}

std::vector<Ray> generate_rays(const Camera& cam, const std::vector<std::pair<int, int>>& pixels) {
  std::vector<Ray> rays;
  rays.reserve(pixels.size());
  for (const auto& [u, v] : pixels) rays.push_back(generate_ray(cam, u, v));
  return rays;
}

std::optional<std::pair<double, double>> ray_bounds(const Ray& ray, const Aabb& box) {
  double t0 = -std::numeric_limits<double>::infinity();
  double t1 = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 3; ++a) {
    const double o = ray.origin[a], d = ray.direction[a];
    if (d == 0.0) {
      if (o < box.min[a] || o > box.max[a]) return std::nullopt;
      continue;
    }
    double ta = (box.min[a] - o) / d, tb = (box.max[a] - o) / d;
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
  }
  t0 = std::max(t0, 0.0);
  if (!(t0 < t1)) return std::nullopt;
  return std::make_pair(t0, t1);
}

CompositeResult composite(const std::vector<RenderSample>& samples, double t_far) {
  const std::size_t n = samples.size();
  CompositeResult out;
  out.weights.resize(n);
  out.deltas.resize(n);
  double transmittance = 1.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double next = i + 1 < n ? samples[i + 1].t : t_far;
    if (!(next > samples[i].t)) throw Error(ErrorCode::UnsortedSamples, "sample depths must increase strictly");
    out.deltas[i] = next - samples[i].t;
    const double alpha = -std::expm1(-samples[i].sigma * out.deltas[i]);
    const double w = transmittance * alpha;
    out.weights[i] = w;
    out.color += w * samples[i].color;
    out.opacity += w;
    transmittance *= 1.0 - alpha;
  }
  return out;
}

void composite_backward(const std::vector<RenderSample>& samples, const CompositeResult& result,
                        const Vec3& d_color, double d_opacity, std::vector<double>& d_sigma,
                        std::vector<Vec3>& d_colors) {
  const std::size_t n = samples.size();
  d_sigma.assign(n, 0.0);
  d_colors.assign(n, Vec3::Zero());
  // dC/dsigma_k = delta_k (T_{k+1} g_k - sum_{i>k} w_i g_i), g_i = d_color . c_i + d_opacity
  double suffix = 0.0;
  double t_after = 1.0 - result.opacity;  // transmittance after the last sample
  for (std::size_t k = n; k-- > 0;) {
    const double g = d_color.dot(samples[k].color) + d_opacity;
    d_sigma[k] = result.deltas[k] * (t_after * g - suffix);
    d_colors[k] = result.weights[k] * d_color;
    suffix += result.weights[k] * g;
    t_after += result.weights[k];  // T_k = T_{k+1} + w_k
  }
}

std::vector<Camera> read_cameras(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path);
  std::string header;
  std::getline(in, header);
  if (header.rfind("#dyco-cams v1", 0) != 0) throw Error(ErrorCode::ParseError, "missing '#dyco-cams v1' header");
  std::vector<Camera> cams;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    Camera c;
    ls >> c.fx >> c.fy >> c.cx >> c.cy;
    for (int r = 0; r < 3; ++r) {
      for (int k = 0; k < 3; ++k) ls >> c.rotation(r, k);
      ls >> c.translation[r];
    }
    ls >> c.width >> c.height;
    if (!ls || c.fx <= 0 || c.fy <= 0 || c.width <= 0 || c.height <= 0)
      throw Error(ErrorCode::ParseError, "malformed camera line: " + line);
    cams.push_back(c);
  }
  return cams;
}

void write_cameras(const std::vector<Camera>& cams, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path);
  out << std::setprecision(17) << "#dyco-cams v1\n";
  for (const auto& c : cams) {
    out << c.fx << ' ' << c.fy << ' ' << c.cx << ' ' << c.cy;
    for (int r = 0; r < 3; ++r) {
      for (int k = 0; k < 3; ++k) out << ' ' << c.rotation(r, k);
      out << ' ' << c.translation[r];
    }
    out << ' ' << c.width << ' ' << c.height << '\n';
  }
}

}  // namespace dyco
