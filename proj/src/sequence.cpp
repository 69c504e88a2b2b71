#include "dyco/sequence.hpp"

#include "dyco/error.hpp"

#include <algorithm>
#include <bit>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace dyco {

PoseTrack::PoseTrack(std::vector<TrackFrame> frames, double frame_rate)
    : frames_(std::move(frames)), frame_rate_(frame_rate) {
  for (std::size_t i = 1; i < frames_.size(); ++i) {
    if (frames_[i].frame_index <= frames_[i - 1].frame_index)
      throw Error(ErrorCode::ParseError, "pose-track frame indices must increase strictly");
    if (frames_[i].pose.joint_count() != frames_[0].pose.joint_count())
      throw Error(ErrorCode::SkeletonMismatch, "pose-track frames differ in joint count");
  }
}

const Pose& PoseTrack::at_clamped(int i) const {
  if (frames_.empty()) throw Error(ErrorCode::EmptyTrack, "pose track is empty");
  return frames_[std::clamp(i, 0, size() - 1)].pose;
}

DeltaPose DeltaPoseSequence::value(int j) const {
  const DeltaPose& e = entries.at(j);
  if (scale == 1.0) return e;
  DeltaPose out(e.size());
  for (Eigen::Index c = 0; c < e.size(); ++c) out[c] = e[c] * scale + 0.0;
  return out;
}

std::vector<DeltaPose> DeltaPoseSequence::values() const {
  std::vector<DeltaPose> out;
  out.reserve(entries.size());
  for (int j = 0; j < length(); ++j) out.push_back(value(j));
  return out;
}

bool DeltaPoseSequence::operator==(const DeltaPoseSequence& other) const {
  if (entries.size() != other.entries.size()) return false;
  for (int j = 0; j < length(); ++j) {
    const DeltaPose a = value(j), b = other.value(j);
    if (a.size() != b.size()) return false;
    for (Eigen::Index c = 0; c < a.size(); ++c)
      if (std::bit_cast<std::uint64_t>(a[c]) != std::bit_cast<std::uint64_t>(b[c])) return false;
  }
  return true;
}

namespace {

void check_params(int length, int step) {
  if (length < 1 || step < 1)
    throw Error(ErrorCode::OutOfRange, "sequence length and step must be >= 1");
}

}  // namespace

DeltaPoseSequence build_delta_sequence(const PoseTrack& track, int i, const SequenceParams& params,
                                       RotRepresentation rep) {
  if (track.empty()) throw Error(ErrorCode::EmptyTrack, "cannot build a sequence from an empty track");
  check_params(params.length, params.step);
  if (params.delta_step < 1) throw Error(ErrorCode::OutOfRange, "delta step must be >= 1");

  DeltaPoseSequence seq;
  seq.params = params;
  seq.entries.reserve(params.length);
  for (int j = 0; j < params.length; ++j) {
    const int at = i - (params.length - 1 - j) * params.step;
    const Pose& cur = track.at_clamped(at);
    const Pose& prev = track.at_clamped(at - params.delta_step);
    seq.entries.push_back(delta_pose(cur, prev, rep));
  }
  return seq;
}

PoseSequence build_pose_sequence(const PoseTrack& track, int i, int length, int step) {
  if (track.empty()) throw Error(ErrorCode::EmptyTrack, "cannot build a sequence from an empty track");
  check_params(length, step);
  PoseSequence seq;
  seq.params = {length, step, step};
  seq.entries.reserve(length);
  for (int j = 0; j < length; ++j) seq.entries.push_back(track.at_clamped(i - (length - 1 - j) * step));
  return seq;
}

DeltaPoseSequence scale_sequence(const DeltaPoseSequence& seq, double alpha) {
  DeltaPoseSequence out = seq;
  out.scale = seq.scale * alpha;
  return out;
}

PoseTrack abrupt_stop(const PoseTrack& track, int t_stop) {
  if (t_stop < 0 || t_stop >= track.size())
    throw Error(ErrorCode::OutOfRange, "stop frame " + std::to_string(t_stop) + " outside track");
  std::vector<TrackFrame> frames = track.frames();
  for (int i = t_stop + 1; i < track.size(); ++i) frames[i].pose = frames[t_stop].pose;
  PoseTrack out(std::move(frames), track.frame_rate());
  out.set_condition_scale(track.condition_scale());
  return out;
}

std::string pose_track_to_string(const PoseTrack& track) {
  std::ostringstream out;
  out << std::setprecision(17);
  out << "#dyco-poses v1 K=" << track.joint_count();
  if (track.frame_rate() != 30.0) out << " fps=" << track.frame_rate();
  if (track.condition_scale() != 1.0) out << " alpha=" << track.condition_scale();
  out << '\n';
  for (const auto& f : track.frames()) {
    out << f.frame_index;
    for (const auto& r : f.pose.joint_rotations) out << ' ' << r.x() << ' ' << r.y() << ' ' << r.z();
    const Vec3& t = f.pose.global_translation;
    out << ' ' << t.x() << ' ' << t.y() << ' ' << t.z() << '\n';
  }
  return out.str();
}

PoseTrack pose_track_from_string(const std::string& text) {
  std::istringstream in(text);
  std::string header;
  if (!std::getline(in, header)) throw Error(ErrorCode::ParseError, "empty pose-track file");
  std::istringstream hs(header);
  std::string magic, version, token;
  hs >> magic >> version;
  if (magic != "#dyco-poses" || version != "v1")
    throw Error(ErrorCode::ParseError, "missing '#dyco-poses v1' header");
  int k = -1;
  double fps = 30.0, alpha = 1.0;
  while (hs >> token) {
    const auto eq = token.find('=');
    if (eq == std::string::npos) throw Error(ErrorCode::ParseError, "bad header token " + token);
    const std::string key = token.substr(0, eq), value = token.substr(eq + 1);
    try {
      if (key == "K") k = std::stoi(value);
      else if (key == "fps") fps = std::stod(value);
      else if (key == "alpha") alpha = std::stod(value);
      else throw Error(ErrorCode::ParseError, "unknown header key " + key);
    } catch (const std::logic_error&) {
      throw Error(ErrorCode::ParseError, "bad header value " + token);
    }
  }
  if (k <= 0) throw Error(ErrorCode::ParseError, "pose-track header lacks K");

  std::vector<TrackFrame> frames;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    TrackFrame f;
    f.pose = Pose(k);
    if (!(ls >> f.frame_index)) throw Error(ErrorCode::ParseError, "bad frame line: " + line);
    for (int j = 0; j < k; ++j) {
      auto& r = f.pose.joint_rotations[j];
      if (!(ls >> r.x() >> r.y() >> r.z()))
        throw Error(ErrorCode::ParseError, "frame line has too few rotation values");
    }
    auto& t = f.pose.global_translation;
    if (!(ls >> t.x() >> t.y() >> t.z()))
      throw Error(ErrorCode::ParseError, "frame line lacks translation");
    if (ls >> token) throw Error(ErrorCode::ParseError, "frame line has trailing values");
    frames.push_back(std::move(f));
  }
  PoseTrack track(std::move(frames), fps);
  track.set_condition_scale(alpha);
  return track;
}

PoseTrack read_pose_track(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return pose_track_from_string(ss.str());
}

void write_pose_track(const PoseTrack& track, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path);
  out << pose_track_to_string(track);
}

}  // namespace dyco
