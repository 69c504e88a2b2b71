#include <doctest.h>

#include "dyco/error.hpp"
#include "dyco/synthdata.hpp"
#include "scratch.hpp"

#include <cmath>
#include <deque>
#include <map>
#include <numbers>

using namespace dyco;
namespace fs = std::filesystem;

namespace {

PoseTrack static_track(int frames, double fps = 30.0) {
  std::vector<TrackFrame> f;
  for (int i = 0; i < frames; ++i) f.push_back({i, Pose(4)});
  return PoseTrack(f, fps);
}

std::map<std::string, std::string> directory_bytes(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) out[fs::relative(e.path(), root).string()] = read_text_file(e.path().string());
  return out;
}

}  // namespace

TEST_CASE("pendulum at rest and decaying") {
  const SynthScene scene = SynthScene::standard();
  const PoseTrack still = static_track(90);
  const PendulumTrace rest = simulate_pendulum(still, scene, 1.0 / 30);
  REQUIRE(rest.theta.size() == 90u);
  for (double t : rest.theta) CHECK(t == 0.0);

  const PendulumTrace swing = simulate_pendulum(still, scene, 1.0 / 30, 0.6, 0.0);
  // lightly damped oscillator envelope: amplitude * exp(-gamma t / 2)
  const double t_end = (swing.theta.size() - 1) / 30.0;
  CHECK(std::abs(swing.theta.back()) < 1.1 * 0.6 * std::exp(-0.5 * scene.pendulum.gamma * t_end));
  CHECK(std::abs(swing.theta.back()) < 0.6);
  double prev = pendulum_energy(scene.pendulum, swing.theta[0], swing.omega[0]);
  for (std::size_t i = 1; i < swing.theta.size(); ++i) {
    const double e = pendulum_energy(scene.pendulum, swing.theta[i], swing.omega[i]);
    CHECK(e <= prev + 1e-12);
    prev = e;
  }
  CHECK_THROWS_AS(simulate_pendulum(still, scene, 0.0), Error);
}

TEST_CASE("small-angle period") {
  SynthScene scene = SynthScene::standard();
  scene.pendulum.gamma = 0.0;
  const double dt = 1.0 / 240;
  const PendulumTrace tr = simulate_pendulum(static_track(2400, 240), scene, dt, 0.01, 0.0);
  // upward zero crossings, linearly interpolated
  std::vector<double> crossings;
  for (std::size_t i = 1; i < tr.theta.size(); ++i)
    if (tr.theta[i - 1] < 0.0 && tr.theta[i] >= 0.0)
      crossings.push_back((i - 1 + tr.theta[i - 1] / (tr.theta[i - 1] - tr.theta[i])) * dt);
  REQUIRE(crossings.size() >= 5u);
  const double period = (crossings.back() - crossings.front()) / (crossings.size() - 1);
  const double expect = 2.0 * std::numbers::pi * std::sqrt(scene.pendulum.length / scene.pendulum.gravity);
  CHECK(std::abs(period - expect) / expect < 0.02);
}

TEST_CASE("spin then stop leaves the pendulum in two states at one pose") {
  const SynthScene scene = SynthScene::standard();
  const PoseTrack track = spin_stop_track(4, 90, 3, 28, 0.1);
  const PendulumTrace tr = simulate_pendulum(track, scene, 1.0 / 30);
  CHECK(track.frame(28).pose == track.frame(88).pose);
  CHECK(track.frame(27).pose.joint_rotations[0] != track.frame(28).pose.joint_rotations[0]);
  CHECK(std::abs(tr.theta[28] - tr.theta[88]) > 1e-3);
  CHECK(track.joint_count() == 4);
}

TEST_CASE("ray tracer basics") {
  Camera cam;
  cam.fx = cam.fy = 100;
  cam.width = cam.height = 64;
  cam.cx = cam.cy = 32;
  Primitive sphere;
  sphere.a = sphere.b = Vec3(0, 0, 10);
  sphere.radius = 1.0;
  const TraceResult r = raytrace_primitives({sphere}, cam, Vec3(0, 0, -1));
  int area = 0, row = 0;
  for (int y = 0; y < 64; ++y)
    for (int x = 0; x < 64; ++x) {
      const bool hit = r.mask.at(x, y) > 0.5;
      area += hit;
      if (y == 32) row += hit;
      CHECK(hit == (r.hit[y * 64 + x] == 0));
      if (!hit) CHECK(r.image.at(x, y, 0) == 0.0);
    }
  const double expect = 100.0 * 1.0 / 10.0;
  CHECK(std::abs(std::sqrt(area / std::numbers::pi) - expect) < 1.0);
  CHECK(std::abs(row / 2.0 - expect) < 1.0);
  // facing the light, the centre is fully lit
  CHECK(r.image.at(32, 32, 0) == doctest::Approx(1.0).epsilon(1e-3));

  Camera away = cam;
  away.rotation = axis_angle_to_matrix(Vec3(0, std::numbers::pi, 0));
  const TraceResult none = raytrace_primitives({sphere}, away, Vec3(0, 0, -1));
  for (double v : none.image.data) CHECK(v == 0.0);
  for (double v : none.mask.data) CHECK(v == 0.0);
}

TEST_CASE("pendulum angle changes only pixels near the bob") {
  const SynthScene scene = SynthScene::standard();
  const auto cams = ring_cameras(4, 0, 64, 0);
  Pose pose(4);
  pose.joint_rotations[0] = Vec3(0, 0.8, 0);
  for (const Camera& cam : cams) {
    const TraceResult a = raytrace_frame(scene, pose, 0.3, cam);
    const TraceResult b = raytrace_frame(scene, pose, 0.5, cam);
    std::vector<char> diff(64 * 64, 0);
    int count = 0;
    for (int i = 0; i < 64 * 64; ++i) {
      bool d = false;
      for (int c = 0; c < 3; ++c) d = d || a.image.data[3 * i + c] != b.image.data[3 * i + c];
      if (!d) continue;
      diff[i] = 1;
      ++count;
      CHECK((a.hit[i] == 4 || b.hit[i] == 4));
      CHECK(a.mask.data[i] == (a.hit[i] >= 0 ? 1.0 : 0.0));
    }
    if (count == 0) continue;
    // one region; the two crescents of a shifted disc may be split by a single pixel row, so gaps of one pixel are bridged
    int seed = 0;
    while (!diff[seed]) ++seed;
    std::deque<int> q{seed};
    diff[seed] = 2;
    int reached = 1;
    while (!q.empty()) {
      const int p = q.front();
      q.pop_front();
      const int x = p % 64, y = p / 64;
      for (int dy = -2; dy <= 2; ++dy)
        for (int dx = -2; dx <= 2; ++dx) {
          const int nx = x + dx, ny = y + dy;
          if (nx < 0 || ny < 0 || nx >= 64 || ny >= 64 || diff[ny * 64 + nx] != 1) continue;
          diff[ny * 64 + nx] = 2;
          ++reached;
          q.push_back(ny * 64 + nx);
        }
    }
    CHECK(reached == count);
  }
}

TEST_CASE("single-frame dataset on disk") {
  ScratchDir dir("synth_one");
  const SynthScene scene = SynthScene::standard();
  const auto cams = ring_cameras(1, 0, 24, 5);
  generate_dataset(scene, static_track(1), cams, 1, dir.sub("d"));
  const auto files = directory_bytes(dir.path / "d");
  CHECK(files.size() == 6u);  // skeleton, cameras, poses, manifest, image, mask
  CHECK(files.count("images/f0000_c00.ppm") == 1);
  CHECK(files.count("masks/f0000_c00.pgm") == 1);
  const Dataset d = load_dataset(dir.sub("d"));
  CHECK(d.frames == 1);
  CHECK(d.train_cams == 1);
  write_pnm(d.image(0, 0), dir.sub("again.ppm"));
  write_pnm(d.mask(0, 0), dir.sub("again.pgm"));
  CHECK(read_text_file(dir.sub("again.ppm")) == files.at("images/f0000_c00.ppm"));
  CHECK(read_text_file(dir.sub("again.pgm")) == files.at("masks/f0000_c00.pgm"));
  CHECK_THROWS_AS(generate_dataset(scene, static_track(1), cams, 1, "/proc/dyco_cannot_write"), Error);
}

TEST_CASE("standard spin-stop dataset") {
  ScratchDir dir("synth_std");
  SynthOptions o;
  o.held_out_cams = 0;
  o.seed = 9;
  const PendulumTrace tr = generate_standard_dataset(o, dir.sub("a"));
  const Dataset d = load_dataset(dir.sub("a"));
  CHECK(d.images.size() == 240u);
  CHECK(d.frames == 60);
  CHECK(tr.theta.size() == 60u);

  // ambiguity certificate: equal pose rows, different pictures
  int pairs = 0;
  for (int f = o.stop_frame; f < 60; ++f)
    for (int g = f + 1; g < 60; ++g) {
      const Pose &pf = d.track.frame(f).pose, &pg = d.track.frame(g).pose;
      double diff = (pf.global_translation - pg.global_translation).norm();
      for (int j = 0; j < 4; ++j) diff = std::max(diff, (pf.joint_rotations[j] - pg.joint_rotations[j]).norm());
      if (diff > 1e-12) continue;
      double l2 = 0.0;
      for (int c = 0; c < 4; ++c)
        for (std::size_t i = 0; i < d.image(f, c).data.size(); ++i)
          l2 += std::pow(d.image(f, c).data[i] - d.image(g, c).data[i], 2);
      if (std::sqrt(l2) > 0.1) ++pairs;
    }
  CHECK(pairs >= 2);

  for (std::size_t i = 0; i < d.masks.size(); ++i)
    for (int p = 0; p < 64 * 64; ++p) {
      const bool lit = d.images[i].data[3 * p] + d.images[i].data[3 * p + 1] + d.images[i].data[3 * p + 2] > 0.0;
      if (lit) CHECK(d.masks[i].data[p] == 1.0);
    }

  o.threads = 3;
  generate_standard_dataset(o, dir.sub("b"));
  CHECK(directory_bytes(dir.path / "a") == directory_bytes(dir.path / "b"));
}
