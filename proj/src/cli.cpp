#include "dyco/cli.hpp"

#include "dyco/error.hpp"
#include "dyco/metrics.hpp"
#include "dyco/parallel.hpp"
#include "dyco/rng.hpp"
#include "dyco/synthdata.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <sstream>

namespace dyco {

namespace fs = std::filesystem;

std::string config_to_text(const Config& c) {
  std::string s = config_to_string(c.train);
  s += "data = " + c.data + "\n";
  s += "out = " + c.out + "\n";
  return s;
}

Config config_from_text(const std::string& text) {
  Config c;
  for (const auto& [k, v] : parse_key_values(text)) {
    if (k == "data") c.data = v;
    else if (k == "out") c.out = v;
    else if (!c.train.set(k, v)) throw Error(ErrorCode::ParseError, "unknown config key '" + k + "'");
  }
  c.train.validate();
  return c;
}

LogLevel log_level_from_env() {
  const char* v = std::getenv("DYCO_LOG");
  if (!v) return LogLevel::Info;
  const std::string s(v);
  if (s == "quiet") return LogLevel::Quiet;
  if (s == "debug") return LogLevel::Debug;
  return LogLevel::Info;
}

namespace {

const char* kUsage =
    "usage: dyco <command> [options]\n"
    "\n"
    "commands:\n"
    "  gen-data    write the synthetic spin-stop dataset\n"
    "  train       fit a model to a dataset\n"
    "  render      render frames from a checkpoint\n"
    "  eval        compare rendered frames with references\n"
    "  resequence  rewrite a pose track (stop frame, velocity scale)\n"
    "\n"
    "run `dyco <command> --help` for options; DYCO_LOG=quiet|info|debug sets verbosity\n";

struct Usage : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Half-open `a:b`, comma list, or a single index.
std::vector<int> parse_index_list(const std::string& spec, int count) {
  std::vector<int> out;
  if (spec.empty()) {
    for (int i = 0; i < count; ++i) out.push_back(i);
    return out;
  }
  try {
    const auto colon = spec.find(':');
    if (colon != std::string::npos) {
      const int a = colon == 0 ? 0 : std::stoi(spec.substr(0, colon));
      const int b = colon + 1 == spec.size() ? count : std::stoi(spec.substr(colon + 1));
      for (int i = a; i < b; ++i) out.push_back(i);
    } else {
      std::stringstream ss(spec);
      std::string item;
      while (std::getline(ss, item, ',')) out.push_back(std::stoi(item));
    }
  } catch (const std::logic_error&) {
    throw Error(ErrorCode::ParseError, "bad index list '" + spec + "'");
  }
  for (int i : out)
    if (i < 0 || i >= count) throw Error(ErrorCode::OutOfRange, "index " + std::to_string(i) + " outside [0, " + std::to_string(count) + ")");
  return out;
}

int resolve_threads(int t) { return t > 0 ? t : default_threads(); }

int cmd_gen_data(CLI::App& app, std::vector<std::string>& args, std::ostream& out) {
  SynthOptions o;
  std::string dir;
  int threads = 0;
  app.add_option("--out", dir, "output directory")->required();
  app.add_option("--seed", o.seed, "random seed (camera phase jitter)");
  app.add_option("--threads", threads, "worker threads");
  app.add_option("--stop-frame", o.stop_frame, "frame at which the spin stops");
  app.add_option("--frames", o.frames, "number of frames");
  app.add_option("--size", o.image_size, "image width and height");
  app.add_option("--train-cams", o.train_cams, "training cameras");
  app.add_option("--held-out", o.held_out_cams, "held-out cameras");
  app.parse(args);
  o.threads = resolve_threads(threads);
  if (o.frames <= 0 || o.image_size < 8 || o.train_cams <= 0 || o.held_out_cams < 0)
    throw Error(ErrorCode::OutOfRange, "frames, size and camera counts must be positive");
  generate_standard_dataset(o, dir);
  if (log_level_from_env() != LogLevel::Quiet)
    out << "wrote " << o.frames * (o.train_cams + o.held_out_cams) << " views to " << dir << "\n";
  return 0;
}

int cmd_train(CLI::App& app, std::vector<std::string>& args, std::ostream& out) {
  std::string config_path, data, out_path, resume;
  std::uint64_t seed = 0;
  int threads = 0, until = -1;
  app.add_option("--config", config_path, "key = value configuration file")->required();
  app.add_option("--data", data, "dataset directory (overrides the config)");
  app.add_option("--out", out_path, "checkpoint path (overrides the config)");
  auto* seed_opt = app.add_option("--seed", seed, "random seed (overrides the config)");
  app.add_option("--threads", threads, "worker threads");
  app.add_option("--resume", resume, "continue from this checkpoint");
  app.add_option("--until", until, "stop after this many total iterations");
  app.parse(args);

  Config cfg = config_from_text(read_text_file(config_path));
  if (!data.empty()) cfg.data = data;
  if (!out_path.empty()) cfg.out = out_path;
  if (seed_opt->count() > 0) cfg.train.seed = seed;
  if (cfg.data.empty() || cfg.out.empty()) throw Error(ErrorCode::ParseError, "data and out paths are required");

  const LogLevel level = log_level_from_env();
  const Dataset ds = load_dataset(cfg.data);
  if (level == LogLevel::Debug)
    out << "dataset: " << ds.frames << " frames, " << ds.cameras.size() << " cameras (" << ds.train_cams << " train)\n";
  TrainOptions opts;
  opts.threads = resolve_threads(threads);
  opts.stop_after = until;
  if (!resume.empty()) opts.resume = load_checkpoint(resume);
  opts.on_log = [&](const LogEntry& e) {
    if (level == LogLevel::Quiet) return;
    char buf[128];
    std::snprintf(buf, sizeof buf, "iter=%d loss=%.6g psnr=%.4f", e.iteration, e.loss, e.psnr);
    out << buf << std::endl;
  };
  const TrainResult r = train(cfg.train, ds, opts);
  save_checkpoint(r.checkpoint, cfg.out);
  if (level == LogLevel::Debug) out << "saved " << cfg.out << "\n";
  return 0;
}

int cmd_render(CLI::App& app, std::vector<std::string>& args, std::ostream& out) {
  std::string ckpt_path, data, poses, cams_path, out_dir, frames_spec, views_spec;
  double alpha = 1.0, alpha_min = 0.0, alpha_max = 2.0;
  std::uint64_t seed = 0;
  int threads = 0;
  app.add_option("--ckpt", ckpt_path, "checkpoint")->required();
  app.add_option("--data", data, "dataset directory supplying poses.txt and cameras.txt");
  app.add_option("--poses", poses, "pose track (overrides --data)");
  app.add_option("--cams", cams_path, "cameras file (overrides --data)");
  app.add_option("--out", out_dir, "output directory")->required();
  app.add_option("--frames", frames_spec, "frames: a:b, a,b,c or a single index");
  app.add_option("--views", views_spec, "camera indices, same syntax as --frames");
  app.add_option("--alpha", alpha, "velocity scale applied to the delta sequence");
  app.add_option("--alpha-min", alpha_min, "lower bound accepted for --alpha");
  app.add_option("--alpha-max", alpha_max, "upper bound accepted for --alpha");
  app.add_option("--seed", seed, "sampling seed");
  app.add_option("--threads", threads, "worker threads");
  app.parse(args);

  if (!(alpha >= alpha_min && alpha <= alpha_max))
    throw Error(ErrorCode::OutOfRange, "alpha " + std::to_string(alpha) + " outside [" + std::to_string(alpha_min) +
                                           ", " + std::to_string(alpha_max) + "]");
  if (poses.empty() && data.empty()) throw Error(ErrorCode::ParseError, "need --poses or --data");
  if (cams_path.empty() && data.empty()) throw Error(ErrorCode::ParseError, "need --cams or --data");
  if (poses.empty()) poses = (fs::path(data) / "poses.txt").string();
  if (cams_path.empty()) cams_path = (fs::path(data) / "cameras.txt").string();

  const Checkpoint ckpt = load_checkpoint(ckpt_path);
  const TrainConfig cfg = config_from_string(ckpt.config);
  const auto model = model_from_checkpoint(ckpt);
  const PoseTrack track = read_pose_track(poses);
  if (track.joint_count() != model->joint_count()) throw Error(ErrorCode::SkeletonMismatch, "pose track does not match the checkpoint skeleton");
  const auto cams = read_cameras(cams_path);
  const auto frames = parse_index_list(frames_spec, track.size());
  const auto views = parse_index_list(views_spec, static_cast<int>(cams.size()));
  const ConditionOptions opts = condition_options(cfg, alpha);
  const double ramp = nonrigid_ramp(cfg, static_cast<int>(ckpt.iteration));
  const int nthreads = resolve_threads(threads);

  std::error_code ec;
  fs::create_directories(fs::path(out_dir) / "images", ec);
  fs::create_directories(fs::path(out_dir) / "masks", ec);
  if (!fs::is_directory(fs::path(out_dir) / "images")) throw Error(ErrorCode::IoError, "cannot create " + out_dir);
  Manifest manifest;
  manifest.train_cams = static_cast<int>(views.size());
  for (int f : frames) {
    const FrameCondition cond = make_condition(*model, track, f, opts);
    const FrameContext ctx = encode_frame(*model, cond, false);
    for (int c : views) {
      const Camera& cam = cams[c];
      std::vector<RayTask> tasks;
      const std::uint64_t base = derive_seed({seed, static_cast<std::uint64_t>(f), static_cast<std::uint64_t>(c)});
      for (int v = 0; v < cam.height; ++v)
        for (int u = 0; u < cam.width; ++u)
          tasks.push_back({generate_ray(cam, u, v), derive_seed({base, static_cast<std::uint64_t>(v * cam.width + u)})});
      std::vector<double> opacity(tasks.size());
      std::vector<Vec3> colors(tasks.size());
      const RenderSettings rs{cfg.n_samples, ramp, nthreads};
      parallel_for(static_cast<int>((tasks.size() + 63) / 64), nthreads, [&](int chunk) {
        const std::size_t end = std::min(tasks.size(), static_cast<std::size_t>(chunk + 1) * 64);
        for (std::size_t i = static_cast<std::size_t>(chunk) * 64; i < end; ++i)
          colors[i] = render_ray(*model, cond, ctx, tasks[i], rs, &opacity[i]);
      });
      Image img(cam.width, cam.height, 3), mask(cam.width, cam.height, 1);
      for (std::size_t i = 0; i < tasks.size(); ++i) {
        for (int ch = 0; ch < 3; ++ch) img.data[i * 3 + ch] = std::clamp(colors[i][ch], 0.0, 1.0);
        mask.data[i] = opacity[i] > 0.5 ? 1.0 : 0.0;
      }
      const int frame_index = track.frame(f).frame_index;
      write_pnm(img, (fs::path(out_dir) / image_name(frame_index, c)).string());
      write_pnm(mask, (fs::path(out_dir) / mask_name(frame_index, c)).string());
      manifest.entries.push_back({frame_index, c, image_name(frame_index, c), mask_name(frame_index, c)});
    }
    if (log_level_from_env() == LogLevel::Debug) out << "rendered frame " << f << "\n";
  }
  write_text_file((fs::path(out_dir) / "manifest.txt").string(), manifest_to_string(manifest));
  if (log_level_from_env() != LogLevel::Quiet)
    out << "rendered " << frames.size() * views.size() << " views to " << out_dir << "\n";
  return 0;
}

std::vector<fs::path> list_files(const std::string& dir, const std::string& ext) {
  if (!fs::is_directory(dir)) throw Error(ErrorCode::IoError, "not a directory: " + dir);
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ext) out.push_back(e.path());
  std::sort(out.begin(), out.end());
  return out;
}

// Camera group from a `_cNN` stem suffix; files without one share a group.
std::string camera_group(const std::string& stem) {
  const auto pos = stem.rfind("_c");
  return pos == std::string::npos ? std::string() : stem.substr(pos);
}

std::string fmt_real(double x) {
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.6f", x);
  return buf;
}

int cmd_eval(CLI::App& app, std::vector<std::string>& args, std::ostream& out) {
  std::string pred_dir, gt_dir, mask_dir, csv_path;
  std::uint64_t seed = 0;
  int threads = 0;
  app.add_option("--pred", pred_dir, "directory of predicted .ppm frames")->required();
  app.add_option("--gt", gt_dir, "directory of reference .ppm frames")->required();
  app.add_option("--masks", mask_dir, "directory of .pgm foreground masks")->required();
  app.add_option("--csv", csv_path, "write the per-frame table here instead of stdout");
  app.add_option("--seed", seed, "unused; evaluation is deterministic");
  app.add_option("--threads", threads, "worker threads");
  app.parse(args);

  const auto pred = list_files(pred_dir, ".ppm");
  const auto gt = list_files(gt_dir, ".ppm");
  const auto masks = list_files(mask_dir, ".pgm");
  if (pred.size() != gt.size() || masks.size() != gt.size())
    throw Error(ErrorCode::LengthMismatch, "directory sizes differ: " + std::to_string(pred.size()) + " predicted, " +
                                               std::to_string(gt.size()) + " reference, " +
                                               std::to_string(masks.size()) + " masks");
  if (gt.empty()) throw Error(ErrorCode::DatasetEmpty, "no frames to evaluate");

  std::ostringstream csv;
  csv << "file,psnr,ssim\n";
  double psnr_sum = 0.0, ssim_sum = 0.0;
  std::map<std::string, std::vector<std::size_t>> groups;
  std::vector<Image> P, G, M;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    if (pred[i].stem() != gt[i].stem() || masks[i].stem() != gt[i].stem())
      throw Error(ErrorCode::LengthMismatch, "file names do not line up: " + pred[i].filename().string() + ", " +
                                                 gt[i].filename().string() + ", " + masks[i].filename().string());
    P.push_back(read_pnm(pred[i].string()));
    G.push_back(read_pnm(gt[i].string()));
    M.push_back(read_pnm(masks[i].string()));
    const double p = psnr(P.back(), G.back()), s = ssim(P.back(), G.back());
    psnr_sum += p;
    ssim_sum += s;
    csv << gt[i].filename().string() << ',' << fmt_real(p) << ',' << fmt_real(s) << '\n';
    groups[camera_group(gt[i].stem().string())].push_back(i);
  }
  double dme_sum = 0.0;
  std::size_t pairs = 0;
  for (const auto& [name, idx] : groups) {
    if (idx.size() < 2) continue;
    std::vector<Image> p, g, m;
    for (auto i : idx) {
      p.push_back(P[i]);
      g.push_back(G[i]);
      m.push_back(M[i]);
    }
    for (double t : dme_terms(p, g, m, resolve_threads(threads))) {
      dme_sum += t;
      ++pairs;
    }
  }
  if (pairs == 0) throw Error(ErrorCode::LengthMismatch, "need at least two frames per camera for dme");
  const double n = static_cast<double>(gt.size());
  out << "psnr=" << fmt_real(psnr_sum / n) << " ssim=" << fmt_real(ssim_sum / n)
      << " dme=" << fmt_real(dme_sum / static_cast<double>(pairs)) << "\n";
  if (csv_path.empty()) out << csv.str();
  else write_text_file(csv_path, csv.str());
  return 0;
}

int cmd_resequence(CLI::App& app, std::vector<std::string>& args, std::ostream& out) {
  std::string in_path, out_path;
  double alpha = 1.0;
  int stop = -1;
  std::uint64_t seed = 0;
  int threads = 0;
  app.add_option("--in", in_path, "input pose track")->required();
  app.add_option("--out", out_path, "output pose track")->required();
  app.add_option("--alpha", alpha, "velocity scale recorded in the track header");
  app.add_option("--stop-frame", stop, "hold the pose of this track position for all later frames");
  app.add_option("--seed", seed, "unused; resequencing is deterministic");
  app.add_option("--threads", threads, "unused");
  app.parse(args);
  if (!std::isfinite(alpha)) throw Error(ErrorCode::OutOfRange, "alpha must be finite");
  PoseTrack track = read_pose_track(in_path);
  if (stop >= 0) track = abrupt_stop(track, stop);
  track.set_condition_scale(track.condition_scale() * alpha);
  write_pose_track(track, out_path);
  if (log_level_from_env() == LogLevel::Debug) out << "wrote " << out_path << "\n";
  return 0;
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  if (args.empty()) {
    err << kUsage;
    return 2;
  }
  const std::string& cmd = args[0];
  if (cmd == "--help" || cmd == "-h" || cmd == "help") {
    out << kUsage;
    return 0;
  }
  using Handler = int (*)(CLI::App&, std::vector<std::string>&, std::ostream&);
  static const std::map<std::string, Handler> handlers = {
      {"gen-data", cmd_gen_data}, {"train", cmd_train}, {"render", cmd_render},
      {"eval", cmd_eval},         {"resequence", cmd_resequence},
  };
  const auto it = handlers.find(cmd);
  if (it == handlers.end()) {
    err << "unknown command '" << cmd << "'\n" << kUsage;
    return 2;
  }
  CLI::App app("dyco " + cmd, "dyco " + cmd);
  std::vector<std::string> rest(args.rbegin(), args.rend() - 1);  // CLI11 consumes from the back
  try {
    return it->second(app, rest, out);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "dyco " << cmd << ": " << e.what() << "\n" << app.help();
    return 2;
  } catch (const Error& e) {
    err << "dyco " << cmd << ": " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "dyco " << cmd << ": " << e.what() << "\n";
    return 1;
  }
}

int dispatch(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return dispatch(args, std::cout, std::cerr);
}

}  // namespace dyco
