#pragma once

#include "dyco/image.hpp"
#include "dyco/kinematic_tree.hpp"
#include "dyco/renderer.hpp"
#include "dyco/sequence.hpp"

#include <string>
#include <vector>

namespace dyco {

struct ManifestEntry {
  int frame = 0;
  int camera = 0;
  std::string image;  // relative to the dataset directory
  std::string mask;
};

/// Manifest text: `#dyco-manifest v1 train_cams=<n>` then `frame camera image mask` lines.
struct Manifest {
  int train_cams = 0;
  std::vector<ManifestEntry> entries;
};

std::string manifest_to_string(const Manifest& m);
Manifest manifest_from_string(const std::string& text);

std::string image_name(int frame, int camera);
std::string mask_name(int frame, int camera);

/// A multi-view sequence on disk: skeleton.txt, cameras.txt, poses.txt,
/// manifest.txt, images/ and masks/.
struct Dataset {
  KinematicTree tree;
  std::vector<Camera> cameras;
  PoseTrack track;
  int train_cams = 0;
  int frames = 0;
  std::vector<Image> images;  // frame-major: index frame * cameras.size() + camera
  std::vector<Image> masks;

  const Image& image(int frame, int camera) const { return images.at(frame * cameras.size() + camera); }
  const Image& mask(int frame, int camera) const { return masks.at(frame * cameras.size() + camera); }
};

/// Throws DatasetEmpty when there are no frames or training cameras, IoError/CorruptFile on bad files.
Dataset load_dataset(const std::string& dir);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

}  // namespace dyco
