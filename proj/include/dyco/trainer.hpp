#pragma once

#include "dyco/dataset.hpp"
#include "dyco/model.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace dyco {

struct TrainConfig {
  int iterations = 2000;
  int rays_per_batch = 1024;
  int n_samples = 64;
  double lr_triplane = 5e-4;
  double lr_other = 5e-5;
  std::uint64_t seed = 0;
  double nonrigid_ramp = 0.1;  // fraction of iterations over which the offset fades in
  int seq_len = 6;
  int seq_step = 25;
  int delta_step = 25;
  RotRepresentation rotation_rep = RotRepresentation::AxisAngle;
  bool delta_condition = true;

  std::vector<int> plane_resolutions = {16, 32, 64, 128};
  int plane_features = 32;
  int density_width = 256;
  int color_width = 256;
  int nonrigid_width = 128;
  int pe_freqs = 6;
  int blend_resolution = 32;
  double bounds_margin = 0.3;

  int log_every = 100;
  int probe_rays = 256;

  /// Sets one key from its text value. Returns false for an unknown key;
  /// throws ParseError on a malformed value.
  bool set(const std::string& key, const std::string& value);
  /// Throws ParseError unless counts are positive and fractions in range.
  void validate() const;

  ModelShape model_shape() const;
  SequenceParams sequence_params() const { return {seq_len, seq_step, delta_step}; }

  bool operator==(const TrainConfig&) const = default;
};

/// `key = value` lines in a fixed key order; reals printed with 17 digits.
std::string config_to_string(const TrainConfig& c);
/// Blank lines and `#` comments are ignored; unknown keys throw ParseError.
TrainConfig config_from_string(const std::string& text);

/// Splits `key = value` text into ordered pairs (ParseError on malformed lines).
std::vector<std::pair<std::string, std::string>> parse_key_values(const std::string& text);

/// Mean over rays of the squared colour error. Throws LengthMismatch.
double mse_loss(const std::vector<Vec3>& pred, const std::vector<Vec3>& gt);

struct NamedArray {
  std::string name;
  std::vector<std::uint64_t> shape;
  std::vector<double> data;
  bool operator==(const NamedArray&) const = default;
};

struct Checkpoint {
  static constexpr std::uint32_t kVersion = 1;
  std::string config;    // config_to_string echo
  std::string skeleton;  // skeleton_to_string echo
  std::vector<NamedArray> params;
  std::vector<NamedArray> adam_m;
  std::vector<NamedArray> adam_v;
  std::uint64_t adam_step = 0;
  std::uint64_t iteration = 0;
  bool operator==(const Checkpoint&) const = default;
};

std::string checkpoint_to_bytes(const Checkpoint& ckpt);
/// Throws CorruptFile on malformed or truncated data, VersionMismatch on an unknown version.
Checkpoint checkpoint_from_bytes(const std::string& bytes);
void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

Checkpoint make_checkpoint(const TrainConfig& config, const DycoModel& model, const AdamState& adam,
                           std::uint64_t iteration);
/// Copies parameters (and optimizer state when given) from a checkpoint. Throws ShapeMismatch.
void restore_checkpoint(const Checkpoint& ckpt, DycoModel& model, AdamState* adam);
/// Rebuilds the model described by a checkpoint and loads its parameters.
std::unique_ptr<DycoModel> model_from_checkpoint(const Checkpoint& ckpt);

struct LogEntry {
  int iteration = 0;
  double loss = 0.0;
  double psnr = 0.0;
};

struct TrainOptions {
  int threads = 1;
  std::optional<Checkpoint> resume;   // continue from this state
  int stop_after = -1;                // stop once this many total iterations are done
  std::function<void(const LogEntry&)> on_log;
};

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<LogEntry> log;
};

/// Non-rigid fade-in weight at an iteration.
double nonrigid_ramp(const TrainConfig& config, int iteration);

ConditionOptions condition_options(const TrainConfig& config, double alpha = 1.0);

TrainResult train(const TrainConfig& config, const Dataset& data, const TrainOptions& options = {});

/// Renders a full image of the given frame and camera.
Image render_image(const DycoModel& model, const FrameCondition& cond, const Camera& cam, int n_samples,
                   double ramp, std::uint64_t seed, int threads);

}  // namespace dyco
