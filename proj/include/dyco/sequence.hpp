#pragma once

#include "dyco/posemath.hpp"

#include <string>
#include <vector>

namespace dyco {

struct TrackFrame {
  int frame_index = 0;
  Pose pose;
};

/// Ordered frames with strictly increasing indices. Lookups before the first
/// frame clamp to it.
class PoseTrack {
 public:
  PoseTrack() = default;
  PoseTrack(std::vector<TrackFrame> frames, double frame_rate = 30.0);

  bool empty() const noexcept { return frames_.empty(); }
  int size() const noexcept { return static_cast<int>(frames_.size()); }
  int joint_count() const noexcept { return empty() ? 0 : frames_.front().pose.joint_count(); }
  double frame_rate() const noexcept { return frame_rate_; }

  const TrackFrame& frame(int position) const { return frames_.at(position); }
  const std::vector<TrackFrame>& frames() const noexcept { return frames_; }

  /// Pose at track position i, with i < 0 clamped to 0 and i >= size() clamped to the last frame.
  const Pose& at_clamped(int i) const;

  /// Velocity scale attached by resequencing; applied to delta sequences at render time.
  double condition_scale() const noexcept { return condition_scale_; }
  void set_condition_scale(double alpha) noexcept { condition_scale_ = alpha; }

 private:
  std::vector<TrackFrame> frames_;
  double frame_rate_ = 30.0;
  double condition_scale_ = 1.0;
};

struct SequenceParams {
  int length = 6;       // L_d (or L for pose sequences)
  int step = 25;        // s
  int delta_step = 25;  // s_d
};

/// Deltas are stored unscaled next to a velocity scale so that repeated
/// scaling composes exactly: scale(scale(S, a), b) == scale(S, a * b).
struct DeltaPoseSequence {
  std::vector<DeltaPose> entries;  // oldest first, unscaled
  double scale = 1.0;
  SequenceParams params;

  int length() const noexcept { return static_cast<int>(entries.size()); }

  /// Scaled entry j. Negative zeros are normalized so equal values compare bitwise equal.
  DeltaPose value(int j) const;
  std::vector<DeltaPose> values() const;

  /// Compares scaled values bitwise.
  bool operator==(const DeltaPoseSequence& other) const;
};

struct PoseSequence {
  std::vector<Pose> entries;  // oldest first, newest is the current pose
  SequenceParams params;
};

/// Entry j (oldest first) is delta_pose(track[i - (L-1-j)s], track[i - (L-1-j)s - s_d]).
DeltaPoseSequence build_delta_sequence(const PoseTrack& track, int i, const SequenceParams& params,
                                       RotRepresentation rep = RotRepresentation::AxisAngle);

PoseSequence build_pose_sequence(const PoseTrack& track, int i, int length, int step);

DeltaPoseSequence scale_sequence(const DeltaPoseSequence& seq, double alpha);

/// Frames after t_stop become copies of frame t_stop; indices are preserved.
PoseTrack abrupt_stop(const PoseTrack& track, int t_stop);

/// Pose-track text format: `#dyco-poses v1 K=<K>` header (optional `fps=` and
/// `alpha=` tokens), then one line per frame: index, 3K axis-angle reals, 3 translation reals.
PoseTrack read_pose_track(const std::string& path);
void write_pose_track(const PoseTrack& track, const std::string& path);
std::string pose_track_to_string(const PoseTrack& track);
PoseTrack pose_track_from_string(const std::string& text);

}  // namespace dyco
