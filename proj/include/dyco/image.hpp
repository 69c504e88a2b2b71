#pragma once

#include <string>
#include <vector>

namespace dyco {

/// Row-major interleaved image with values in [0, 1]; pixel (0, 0) is top-left.
struct Image {
  int width = 0;
  int height = 0;
  int channels = 3;
  std::vector<double> data;

  Image() = default;
  Image(int w, int h, int c = 3) : width(w), height(h), channels(c), data(static_cast<std::size_t>(w) * h * c, 0.0) {}

  double& at(int x, int y, int c = 0) { return data[(static_cast<std::size_t>(y) * width + x) * channels + c]; }
  double at(int x, int y, int c = 0) const { return data[(static_cast<std::size_t>(y) * width + x) * channels + c]; }
  bool same_shape(const Image& o) const { return width == o.width && height == o.height && channels == o.channels; }
};

/// 8-bit binary PPM (P6) for 3 channels, PGM (P5) for 1.
void write_pnm(const Image& img, const std::string& path);
Image read_pnm(const std::string& path);

/// Channel mean.
Image to_gray(const Image& img);

}  // namespace dyco
