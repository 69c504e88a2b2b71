#include "dyco/dataset.hpp"

#include "dyco/error.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace dyco {

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path);
  out << text;
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path);
}

std::string image_name(int frame, int camera) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "images/f%04d_c%02d.ppm", frame, camera);
  return buf;
}

std::string mask_name(int frame, int camera) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "masks/f%04d_c%02d.pgm", frame, camera);
  return buf;
}

std::string manifest_to_string(const Manifest& m) {
  std::ostringstream out;
  out << "#dyco-manifest v1 train_cams=" << m.train_cams << "\n";
  for (const auto& e : m.entries) out << e.frame << ' ' << e.camera << ' ' << e.image << ' ' << e.mask << "\n";
  return out.str();
}

Manifest manifest_from_string(const std::string& text) {
  std::istringstream in(text);
  std::string header;
  std::getline(in, header);
  const std::string prefix = "#dyco-manifest v1 train_cams=";
  if (header.rfind(prefix, 0) != 0) throw Error(ErrorCode::ParseError, "bad manifest header");
  Manifest m;
  try {
    m.train_cams = std::stoi(header.substr(prefix.size()));
  } catch (const std::exception&) {
    throw Error(ErrorCode::ParseError, "bad train_cams in manifest");
  }
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    ManifestEntry e;
    if (!(ls >> e.frame >> e.camera >> e.image >> e.mask)) throw Error(ErrorCode::ParseError, "bad manifest line: " + line);
    m.entries.push_back(e);
  }
  return m;
}

Dataset load_dataset(const std::string& dir) {
  namespace fs = std::filesystem;
  const fs::path root(dir);
  Dataset d;
  d.tree = read_skeleton((root / "skeleton.txt").string());
  d.cameras = read_cameras((root / "cameras.txt").string());
  d.track = read_pose_track((root / "poses.txt").string());
  const Manifest m = manifest_from_string(read_text_file((root / "manifest.txt").string()));
  d.train_cams = m.train_cams;
  d.frames = d.track.size();
  const int cams = static_cast<int>(d.cameras.size());
  if (d.frames == 0 || d.train_cams <= 0 || cams == 0) throw Error(ErrorCode::DatasetEmpty, "no frames or cameras in " + dir);
  if (d.train_cams > cams) throw Error(ErrorCode::ParseError, "train_cams exceeds camera count");
  if (d.track.joint_count() != d.tree.joint_count()) throw Error(ErrorCode::SkeletonMismatch, "pose track and skeleton disagree");
  d.images.resize(static_cast<std::size_t>(d.frames) * cams);
  d.masks.resize(d.images.size());
  std::vector<char> seen(d.images.size(), 0);
  for (const auto& e : m.entries) {
    if (e.frame < 0 || e.frame >= d.frames || e.camera < 0 || e.camera >= cams)
      throw Error(ErrorCode::ParseError, "manifest entry out of range");
    const std::size_t k = static_cast<std::size_t>(e.frame) * cams + e.camera;
    d.images[k] = read_pnm((root / e.image).string());
    d.masks[k] = read_pnm((root / e.mask).string());
    const Camera& c = d.cameras[e.camera];
    if (d.images[k].width != c.width || d.images[k].height != c.height || d.images[k].channels != 3 ||
        !(d.masks[k].width == c.width && d.masks[k].height == c.height && d.masks[k].channels == 1))
      throw Error(ErrorCode::DimensionMismatch, "image size disagrees with camera for " + e.image);
    seen[k] = 1;
  }
  for (std::size_t k = 0; k < seen.size(); ++k)
    if (!seen[k]) throw Error(ErrorCode::DatasetEmpty, "manifest misses a frame/camera pair");
  return d;
}

}  // namespace dyco
