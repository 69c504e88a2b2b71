#include "dyco/synthdata.hpp"

#include "dyco/error.hpp"
#include "dyco/parallel.hpp"
#include "dyco/rng.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <numbers>
#include <optional>

namespace dyco {

SynthScene SynthScene::standard() {
  SynthScene s;
  s.tree = make_arm_chain();
  s.bones = {
      {0.12, Vec3(0.85, 0.35, 0.25)},
      {0.12, Vec3(0.30, 0.75, 0.35)},
      {0.07, Vec3(0.25, 0.45, 0.90)},
      {0.06, Vec3(0.90, 0.80, 0.20)},
  };
  return s;
}

Vec3 pendulum_anchor(const SynthScene& scene, const BoneTransforms& bones) {
  const int j = scene.pendulum.anchor_joint;
  return bones.forward[j].apply(scene.tree.rest_bone_segment(j).second);
}

Vec3 pendulum_tangent(const SynthScene& scene, const BoneTransforms& bones) {
  const Vec3 r = pendulum_anchor(scene, bones) - bones.joint_positions[scene.tree.root()];
  const double h = std::hypot(r.x(), r.z());
  if (h < 1e-12) return Vec3::UnitX();
  return Vec3(r.z() / h, 0.0, -r.x() / h);
}

Vec3 pendulum_bob(const SynthScene& scene, const BoneTransforms& bones, double theta) {
  const double l = scene.pendulum.length;
  return pendulum_anchor(scene, bones) + l * (std::sin(theta) * pendulum_tangent(scene, bones) - std::cos(theta) * Vec3::UnitY());
}

double pendulum_energy(const PendulumSpec& p, double theta, double omega) {
  return 0.5 * p.length * p.length * omega * omega + p.gravity * p.length * (1.0 - std::cos(theta));
}

PendulumTrace simulate_pendulum(const PoseTrack& track, const SynthScene& scene, double dt, double theta0,
                                double omega0) {
  if (!(dt > 0.0)) throw Error(ErrorCode::OutOfRange, "time step must be positive");
  const int n = track.size();
  PendulumTrace out;
  if (n == 0) return out;
  std::vector<Vec3> anchor(n), tangent(n);
  for (int f = 0; f < n; ++f) {
    const BoneTransforms b = forward_kinematics(scene.tree, track.frame(f).pose);
    anchor[f] = pendulum_anchor(scene, b);
    tangent[f] = pendulum_tangent(scene, b);
  }
  std::vector<double> accel(n);
  for (int f = 0; f < n; ++f) {
    const Vec3& prev = anchor[std::max(0, f - 1)];
    const Vec3& next = anchor[std::min(n - 1, f + 1)];
    accel[f] = (next - 2.0 * anchor[f] + prev).dot(tangent[f]) / (dt * dt);
  }
  const PendulumSpec& p = scene.pendulum;
  const int steps = std::max(1, p.substeps);
  const double h = dt / steps;
  double theta = theta0, omega = omega0;
  out.theta.push_back(theta);
  out.omega.push_back(omega);
  for (int f = 0; f + 1 < n; ++f) {
    for (int s = 0; s < steps; ++s) {
      // first half of the interval is driven by frame f, second half by f + 1
      const double a = 2 * s < steps ? accel[f] : accel[f + 1];
      omega += h * (-(p.gravity / p.length) * std::sin(theta) - p.gamma * omega - a / p.length);
      theta += h * omega;
    }
    out.theta.push_back(theta);
    out.omega.push_back(omega);
  }
  return out;
}

namespace {

std::optional<double> hit_sphere(const Vec3& ro, const Vec3& rd, const Vec3& c, double r) {
  const Vec3 oc = ro - c;
  const double b = oc.dot(rd);
  const double cc = oc.squaredNorm() - r * r;
  const double h = b * b - cc;
  if (h < 0.0) return std::nullopt;
  const double t = -b - std::sqrt(h);
  if (t <= 0.0) return std::nullopt;
  return t;
}

// rd must be unit length
std::optional<double> hit_capsule(const Vec3& ro, const Vec3& rd, const Vec3& pa, const Vec3& pb, double r) {
  const Vec3 ba = pb - pa;
  const Vec3 oa = ro - pa;
  const double baba = ba.dot(ba);
  if (baba < 1e-18) return hit_sphere(ro, rd, pa, r);
  const double bard = ba.dot(rd);
  const double baoa = ba.dot(oa);
  const double rdoa = rd.dot(oa);
  const double oaoa = oa.dot(oa);
  const double a = baba - bard * bard;
  const double b = baba * rdoa - baoa * bard;
  const double c = baba * oaoa - baoa * baoa - r * r * baba;
  const double h = b * b - a * c;
  if (h >= 0.0 && a > 1e-18) {
    const double t = (-b - std::sqrt(h)) / a;
    const double y = baoa + t * bard;
    if (y > 0.0 && y < baba) {
      if (t > 0.0) return t;
      return std::nullopt;
    }
  }
  // end caps
  std::optional<double> best;
  for (const Vec3* end : {&pa, &pb}) {
    const auto t = hit_sphere(ro, rd, *end, r);
    if (t && (!best || *t < *best)) best = t;
  }
  return best;
}

Vec3 capsule_normal(const Vec3& p, const Vec3& a, const Vec3& b) {
  const Vec3 ba = b - a;
  const double baba = ba.dot(ba);
  const double h = baba > 0.0 ? std::clamp((p - a).dot(ba) / baba, 0.0, 1.0) : 0.0;
  return (p - (a + h * ba)).normalized();
}

}  // namespace

TraceResult raytrace_primitives(const std::vector<Primitive>& prims, const Camera& cam, const Vec3& light_dir) {
  TraceResult out{Image(cam.width, cam.height, 3), Image(cam.width, cam.height, 1),
                  std::vector<int>(static_cast<std::size_t>(cam.width) * cam.height, -1)};
  for (int v = 0; v < cam.height; ++v)
    for (int u = 0; u < cam.width; ++u) {
      const Ray ray = generate_ray(cam, u, v);
      double best = std::numeric_limits<double>::infinity();
      const Primitive* hit = nullptr;
      for (const auto& p : prims) {
        const auto t = hit_capsule(ray.origin, ray.direction, p.a, p.b, p.radius);
        if (t && *t < best) {
          best = *t;
          hit = &p;
        }
      }
      if (!hit) continue;
      const Vec3 n = capsule_normal(ray.at(best), hit->a, hit->b);
      const double shade = 0.5 + 0.5 * std::max(0.0, n.dot(light_dir));
      for (int c = 0; c < 3; ++c) out.image.at(u, v, c) = hit->color[c] * shade;
      out.mask.at(u, v) = 1.0;
      out.hit[static_cast<std::size_t>(v) * cam.width + u] = hit->id;
    }
  return out;
}

std::vector<Primitive> scene_primitives(const SynthScene& scene, const Pose& pose, double theta) {
  const BoneTransforms b = forward_kinematics(scene.tree, pose);
  std::vector<Primitive> prims;
  for (int j = 0; j < scene.tree.joint_count(); ++j) {
    const auto [a, e] = scene.tree.rest_bone_segment(j);
    prims.push_back({b.forward[j].apply(a), b.forward[j].apply(e), scene.bones.at(j).radius, scene.bones.at(j).color, j});
  }
  const Vec3 bob = pendulum_bob(scene, b, theta);
  prims.push_back({bob, bob, scene.pendulum.bob_radius, scene.pendulum.color, scene.tree.joint_count()});
  return prims;
}

TraceResult raytrace_frame(const SynthScene& scene, const Pose& pose, double theta, const Camera& cam) {
  return raytrace_primitives(scene_primitives(scene, pose, theta), cam, scene.light_dir);
}

PoseTrack spin_stop_track(int joints, int frames, int start, int stop_frame, double rate, double fps) {
  std::vector<TrackFrame> out;
  for (int f = 0; f < frames; ++f) {
    Pose p;
    p.joint_rotations.assign(joints, AxisAngle::Zero());
    p.global_translation = Vec3::Zero();
    p.joint_rotations[0] = AxisAngle(0.0, rate * std::max(0, f - start), 0.0);
    out.push_back({f, p});
  }
  PoseTrack spin(out, fps);
  return stop_frame < frames ? abrupt_stop(spin, stop_frame) : spin;
}

std::vector<Camera> ring_cameras(int train, int held_out, int size, std::uint64_t seed) {
  Rng rng(derive_seed({seed, 0x63616d73}));
  const double phase = (20.0 + rng.uniform(-4.0, 4.0)) * std::numbers::pi / 180.0;
  const Vec3 target(0.0, 0.38, 0.0);
  const double radius = 2.3, height = 0.6;
  const double f = 88.0 * size / 64.0;
  std::vector<Camera> cams;
  auto place = [&](double angle) {
    const Vec3 eye = target + Vec3(radius * std::cos(angle), height, radius * std::sin(angle));
    cams.push_back(Camera::look_at(eye, target, Vec3::UnitY(), f, f, size, size));
  };
  const double two_pi = 2.0 * std::numbers::pi;
  for (int i = 0; i < train; ++i) place(phase + two_pi * i / std::max(1, train));
  for (int i = 0; i < held_out; ++i) place(phase + two_pi * (i + 0.5) / std::max(1, held_out) + two_pi / (4.0 * std::max(1, train)));
  return cams;
}

PendulumTrace generate_dataset(const SynthScene& scene, const PoseTrack& track, const std::vector<Camera>& cams,
                               int train_cams, const std::string& out_dir, int threads) {
  namespace fs = std::filesystem;
  const fs::path root(out_dir);
  std::error_code ec;
  fs::create_directories(root / "images", ec);
  fs::create_directories(root / "masks", ec);
  if (ec || !fs::is_directory(root / "images")) throw Error(ErrorCode::IoError, "cannot create " + out_dir);

  const PendulumTrace trace = simulate_pendulum(track, scene, 1.0 / track.frame_rate());
  write_skeleton(scene.tree, (root / "skeleton.txt").string());
  write_cameras(cams, (root / "cameras.txt").string());
  write_pose_track(track, (root / "poses.txt").string());

  Manifest m;
  m.train_cams = train_cams;
  const int n_cams = static_cast<int>(cams.size());
  for (int f = 0; f < track.size(); ++f)
    for (int c = 0; c < n_cams; ++c) m.entries.push_back({f, c, image_name(f, c), mask_name(f, c)});
  write_text_file((root / "manifest.txt").string(), manifest_to_string(m));

  parallel_for(track.size() * n_cams, threads, [&](int k) {
    const int f = k / n_cams, c = k % n_cams;
    const TraceResult r = raytrace_frame(scene, track.frame(f).pose, trace.theta[f], cams[c]);
    write_pnm(r.image, (root / image_name(f, c)).string());
    write_pnm(r.mask, (root / mask_name(f, c)).string());
  });
  return trace;
}

PendulumTrace generate_standard_dataset(const SynthOptions& o, const std::string& out_dir) {
  const SynthScene scene = SynthScene::standard();
  const PoseTrack track = spin_stop_track(scene.tree.joint_count(), o.frames, o.spin_start, o.stop_frame, o.spin_rate, o.fps);
  const auto cams = ring_cameras(o.train_cams, o.held_out_cams, o.image_size, o.seed);
  return generate_dataset(scene, track, cams, o.train_cams, out_dir, o.threads);
}

}  // namespace dyco
