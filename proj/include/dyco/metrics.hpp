#pragma once

#include "dyco/image.hpp"

#include <vector>

namespace dyco {

/// 10 log10(1 / MSE) over all channels; +inf for identical images. Throws DimensionMismatch.
double psnr(const Image& a, const Image& b);

/// Mean SSIM on channel-mean grayscale: 11x11 Gaussian window (sigma 1.5),
/// K1 = 0.01, K2 = 0.03, range 1, symmetric reflection at borders.
double ssim(const Image& a, const Image& b);

/// Local SSIM map, same size as the inputs.
std::vector<double> ssim_map(const Image& a, const Image& b);

struct FlowField {
  int width = 0;
  int height = 0;
  std::vector<double> u, v;
  std::vector<char> valid;

  FlowField() = default;
  FlowField(int w, int h)
      : width(w), height(h), u(static_cast<std::size_t>(w) * h, 0.0), v(u.size(), 0.0), valid(u.size(), 1) {}
  std::size_t index(int x, int y) const { return static_cast<std::size_t>(y) * width + x; }
};

struct FlowSettings {
  int levels = 3;
  int block = 12;
  int radius = 4;
};

/// Coarse-to-fine block matching with parabolic sub-pixel refinement and a 3x3
/// median at every level; flow (u, v) at a pixel of `prev` points to its match
/// in `cur`. Throws TooSmall below 16x16 and DimensionMismatch on unequal sizes.
FlowField optical_flow(const Image& prev, const Image& cur, const FlowSettings& settings = {});

/// Mean end-point error over pixels where mask > 0.5. Throws EmptyMask, DimensionMismatch.
double epe(const FlowField& a, const FlowField& b, const Image& mask);

/// Average over consecutive pairs of the EPE between predicted and ground-truth
/// flow, masked by the union of both frames' masks. Throws LengthMismatch.
double dme(const std::vector<Image>& pred, const std::vector<Image>& gt, const std::vector<Image>& masks,
           int threads = 1);

/// Per-pair EPE values used by dme().
std::vector<double> dme_terms(const std::vector<Image>& pred, const std::vector<Image>& gt,
                              const std::vector<Image>& masks, int threads = 1);

}  // namespace dyco
