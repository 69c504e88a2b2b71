#pragma once

#include "dyco/dataset.hpp"
#include "dyco/image.hpp"
#include "dyco/kinematic_tree.hpp"
#include "dyco/renderer.hpp"
#include "dyco/sequence.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace dyco {

struct BoneShape {
  double radius = 0.1;
  Vec3 color = Vec3::Ones();
};

/// Passive damped pendulum hanging from the tip of `anchor_joint`'s bone,
/// swinging in the vertical plane through the horizontal tangent of the anchor.
struct PendulumSpec {
  int anchor_joint = 3;
  double length = 0.3;
  double gamma = 1.0;
  double gravity = 9.81;
  double bob_radius = 0.13;
  Vec3 color = Vec3(1.0, 0.2, 0.9);
  int substeps = 200;  // integrator steps per frame interval
};

struct SynthScene {
  KinematicTree tree;
  std::vector<BoneShape> bones;  // one capsule per joint, along its rest bone segment
  PendulumSpec pendulum;
  Vec3 light_dir = Vec3(0.4, 0.8, -0.45).normalized();  // towards the light

  /// Chain root -> spine -> shoulder -> arm with the pendulum at the arm tip.
  static SynthScene standard();
};

struct PendulumTrace {
  std::vector<double> theta;  // per frame
  std::vector<double> omega;
};

/// Semi-implicit Euler on theta'' = -(g/l) sin(theta) - gamma theta' - a(t)/l, with
/// a the anchor's tangential acceleration from central differences of its FK trajectory.
PendulumTrace simulate_pendulum(const PoseTrack& track, const SynthScene& scene, double dt, double theta0 = 0.0,
                                double omega0 = 0.0);

/// Kinetic plus potential energy per unit mass.
double pendulum_energy(const PendulumSpec& p, double theta, double omega);

/// World positions for a posed scene.
Vec3 pendulum_anchor(const SynthScene& scene, const BoneTransforms& bones);
Vec3 pendulum_tangent(const SynthScene& scene, const BoneTransforms& bones);
Vec3 pendulum_bob(const SynthScene& scene, const BoneTransforms& bones, double theta);

/// Analytic primitives; a sphere has a == b.
struct Primitive {
  Vec3 a = Vec3::Zero();
  Vec3 b = Vec3::Zero();
  double radius = 1.0;
  Vec3 color = Vec3::Ones();
  int id = 0;
};

struct TraceResult {
  Image image;            // RGB
  Image mask;             // 1 channel, 1 where hit
  std::vector<int> hit;   // primitive id per pixel, -1 for background
};

TraceResult raytrace_primitives(const std::vector<Primitive>& prims, const Camera& cam, const Vec3& light_dir);

/// Bone capsules take ids 0..K-1, the pendulum bob takes id K.
std::vector<Primitive> scene_primitives(const SynthScene& scene, const Pose& pose, double theta);
TraceResult raytrace_frame(const SynthScene& scene, const Pose& pose, double theta, const Camera& cam);

/// Root spins about +y at `rate` rad/frame from `start` on; frames after `stop_frame` hold the stop pose.
PoseTrack spin_stop_track(int joints, int frames, int start, int stop_frame, double rate, double fps = 30.0);

/// Ring of cameras around the scene; the seed jitters the ring phase by a few degrees.
/// The first `train` cameras are spaced evenly, the rest sit in between.
std::vector<Camera> ring_cameras(int train, int held_out, int size, std::uint64_t seed);

struct SynthOptions {
  int frames = 60;
  int train_cams = 4;
  int held_out_cams = 2;
  int image_size = 64;
  int spin_start = 3;
  int stop_frame = 28;
  double spin_rate = 0.1;
  double fps = 30.0;
  std::uint64_t seed = 0;
  int threads = 1;
};

/// Writes skeleton, cameras, poses, manifest, images and masks; returns the pendulum trace.
PendulumTrace generate_dataset(const SynthScene& scene, const PoseTrack& track, const std::vector<Camera>& cams,
                               int train_cams, const std::string& out_dir, int threads = 1);

PendulumTrace generate_standard_dataset(const SynthOptions& options, const std::string& out_dir);

}  // namespace dyco
