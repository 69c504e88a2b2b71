#include "dyco/metrics.hpp"

#include "dyco/error.hpp"
#include "dyco/parallel.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

namespace dyco {

double psnr(const Image& a, const Image& b) {
  if (!a.same_shape(b)) throw Error(ErrorCode::DimensionMismatch, "psnr needs equally sized images");
  if (a.data.empty()) throw Error(ErrorCode::DimensionMismatch, "empty image");
  double sum = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    const double d = a.data[i] - b.data[i];
    sum += d * d;
  }
  if (sum == 0.0) return std::numeric_limits<double>::infinity();
  return -10.0 * std::log10(sum / static_cast<double>(a.data.size()));
}

namespace {

int reflect(int i, int n) {
  while (i < 0 || i >= n) {
    if (i < 0) i = -i - 1;
    if (i >= n) i = 2 * n - i - 1;
  }
  return i;
}

std::array<double, 11> gaussian_window() {
  std::array<double, 11> w{};
  double s = 0.0;
  for (int i = 0; i < 11; ++i) {
    const double x = i - 5;
    w[i] = std::exp(-x * x / (2.0 * 1.5 * 1.5));
    s += w[i];
  }
  for (auto& x : w) x /= s;
  return w;
}

// Separable Gaussian blur with symmetric reflection.
std::vector<double> blur(const std::vector<double>& img, int w, int h) {
  static const auto g = gaussian_window();
  std::vector<double> tmp(img.size()), out(img.size());
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double s = 0.0;
      for (int k = -5; k <= 5; ++k) s += g[k + 5] * img[static_cast<std::size_t>(y) * w + reflect(x + k, w)];
      tmp[static_cast<std::size_t>(y) * w + x] = s;
    }
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double s = 0.0;
      for (int k = -5; k <= 5; ++k) s += g[k + 5] * tmp[static_cast<std::size_t>(reflect(y + k, h)) * w + x];
      out[static_cast<std::size_t>(y) * w + x] = s;
    }
  return out;
}

}  // namespace

std::vector<double> ssim_map(const Image& a, const Image& b) {
  if (!a.same_shape(b)) throw Error(ErrorCode::DimensionMismatch, "ssim needs equally sized images");
  const Image ga = to_gray(a), gb = to_gray(b);
  const int w = a.width, h = a.height;
  const std::size_t n = ga.data.size();
  std::vector<double> aa(n), bb(n), ab(n);
  for (std::size_t i = 0; i < n; ++i) {
    aa[i] = ga.data[i] * ga.data[i];
    bb[i] = gb.data[i] * gb.data[i];
    ab[i] = ga.data[i] * gb.data[i];
  }
  const auto mu_a = blur(ga.data, w, h), mu_b = blur(gb.data, w, h);
  const auto e_aa = blur(aa, w, h), e_bb = blur(bb, w, h), e_ab = blur(ab, w, h);
  constexpr double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
  std::vector<double> map(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double va = e_aa[i] - mu_a[i] * mu_a[i];
    const double vb = e_bb[i] - mu_b[i] * mu_b[i];
    const double cov = e_ab[i] - mu_a[i] * mu_b[i];
    map[i] = ((2.0 * mu_a[i] * mu_b[i] + c1) * (2.0 * cov + c2)) /
             ((mu_a[i] * mu_a[i] + mu_b[i] * mu_b[i] + c1) * (va + vb + c2));
  }
  return map;
}

double ssim(const Image& a, const Image& b) {
  const auto map = ssim_map(a, b);
  if (map.empty()) throw Error(ErrorCode::DimensionMismatch, "empty image");
  double s = 0.0;
  for (double x : map) s += x;
  return s / static_cast<double>(map.size());
}

namespace {

struct Gray {
  int w = 0, h = 0;
  std::vector<double> p;
  double at(int x, int y) const {
    x = std::clamp(x, 0, w - 1);
    y = std::clamp(y, 0, h - 1);
    return p[static_cast<std::size_t>(y) * w + x];
  }
};

Gray downsample(const Gray& g) {
  Gray d;
  d.w = g.w / 2;
  d.h = g.h / 2;
  d.p.resize(static_cast<std::size_t>(d.w) * d.h);
  for (int y = 0; y < d.h; ++y)
    for (int x = 0; x < d.w; ++x)
      d.p[static_cast<std::size_t>(y) * d.w + x] =
          0.25 * (g.at(2 * x, 2 * y) + g.at(2 * x + 1, 2 * y) + g.at(2 * x, 2 * y + 1) + g.at(2 * x + 1, 2 * y + 1));
  return d;
}

double block_cost(const Gray& a, const Gray& b, int x, int y, int du, int dv, int block) {
  const int lo = -block / 2, hi = lo + block;
  double s = 0.0;
  for (int j = lo; j < hi; ++j)
    for (int i = lo; i < hi; ++i) {
      const double d = a.at(x + i, y + j) - b.at(x + i + du, y + j + dv);
      s += d * d;
    }
  return s;
}

// Vertex offset of the parabola through (-1, cm), (0, c0), (1, cp), limited to half a pixel.
double parabola(double cm, double c0, double cp) {
  const double den = cm - 2.0 * c0 + cp;
  if (!(den > 0.0)) return 0.0;
  return std::clamp(0.5 * (cm - cp) / den, -0.5, 0.5);
}

// 3x3 median of each component; knocks out isolated mismatches before they propagate down the pyramid
FlowField median3(const FlowField& f) {
  FlowField g(f.width, f.height);
  std::array<double, 9> bu{}, bv{};
  for (int y = 0; y < f.height; ++y)
    for (int x = 0; x < f.width; ++x) {
      int n = 0;
      for (int j = -1; j <= 1; ++j)
        for (int i = -1; i <= 1; ++i) {
          const auto k = f.index(std::clamp(x + i, 0, f.width - 1), std::clamp(y + j, 0, f.height - 1));
          bu[n] = f.u[k];
          bv[n] = f.v[k];
          ++n;
        }
      std::nth_element(bu.begin(), bu.begin() + 4, bu.end());
      std::nth_element(bv.begin(), bv.begin() + 4, bv.end());
      g.u[g.index(x, y)] = bu[4];
      g.v[g.index(x, y)] = bv[4];
    }
  return g;
}

}  // namespace

FlowField optical_flow(const Image& prev, const Image& cur, const FlowSettings& s) {
  if (!prev.same_shape(cur)) throw Error(ErrorCode::DimensionMismatch, "flow needs equally sized images");
  if (prev.width < 16 || prev.height < 16) throw Error(ErrorCode::TooSmall, "flow needs at least 16x16 images");
  std::vector<Gray> pa(1), pb(1);
  const Image ga = to_gray(prev), gb = to_gray(cur);
  pa[0] = {prev.width, prev.height, ga.data};
  pb[0] = {cur.width, cur.height, gb.data};
  for (int l = 1; l < s.levels; ++l) {
    pa.push_back(downsample(pa.back()));
    pb.push_back(downsample(pb.back()));
  }

  FlowField coarse;
  for (int l = s.levels - 1; l >= 0; --l) {
    const Gray& a = pa[l];
    const Gray& b = pb[l];
    FlowField f(a.w, a.h);
    for (int y = 0; y < a.h; ++y)
      for (int x = 0; x < a.w; ++x) {
        double pu = 0.0, pv = 0.0;
        if (coarse.width > 0) {
          const std::size_t k = coarse.index(std::min(x / 2, coarse.width - 1), std::min(y / 2, coarse.height - 1));
          pu = 2.0 * coarse.u[k];
          pv = 2.0 * coarse.v[k];
        }
        const int cu = static_cast<int>(std::lround(pu)), cv = static_cast<int>(std::lround(pv));
        const int r = s.radius;
        const int side = 2 * r + 1;
        std::vector<double> cost(static_cast<std::size_t>(side) * side);
        double best = std::numeric_limits<double>::infinity();
        double best_dist = 0.0;
        int bi = r, bj = r;
        for (int j = 0; j < side; ++j)
          for (int i = 0; i < side; ++i) {
            const int du = cu + i - r, dv = cv + j - r;
            const double c = block_cost(a, b, x, y, du, dv, s.block);
            cost[static_cast<std::size_t>(j) * side + i] = c;
            const double dist = (du - pu) * (du - pu) + (dv - pv) * (dv - pv);
            // ties go to the candidate closest to the prediction
            if (c < best || (c == best && dist < best_dist)) {
              best = c;
              best_dist = dist;
              bi = i;
              bj = j;
            }
          }
        auto at = [&](int i, int j) {
          if (i >= 0 && i < side && j >= 0 && j < side) return cost[static_cast<std::size_t>(j) * side + i];
          return block_cost(a, b, x, y, cu + i - r, cv + j - r, s.block);
        };
        // an exact match is not refined: the neighbours' asymmetry would bias it
        const bool exact = best == 0.0;
        const double su = exact ? 0.0 : parabola(at(bi - 1, bj), best, at(bi + 1, bj));
        const double sv = exact ? 0.0 : parabola(at(bi, bj - 1), best, at(bi, bj + 1));
        const std::size_t k = f.index(x, y);
        f.u[k] = cu + bi - r + su;
        f.v[k] = cv + bj - r + sv;
      }
    coarse = median3(f);
  }
  return coarse;
}

double epe(const FlowField& a, const FlowField& b, const Image& mask) {
  if (a.width != b.width || a.height != b.height || mask.width != a.width || mask.height != a.height ||
      mask.channels != 1)
    throw Error(ErrorCode::DimensionMismatch, "flow fields and mask differ in size");
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t k = 0; k < a.u.size(); ++k) {
    if (!(mask.data[k] > 0.5)) continue;
    sum += std::hypot(a.u[k] - b.u[k], a.v[k] - b.v[k]);
    ++n;
  }
  if (n == 0) throw Error(ErrorCode::EmptyMask, "no foreground pixels");
  return sum / static_cast<double>(n);
}

std::vector<double> dme_terms(const std::vector<Image>& pred, const std::vector<Image>& gt,
                              const std::vector<Image>& masks, int threads) {
  if (pred.size() != gt.size() || masks.size() != gt.size())
    throw Error(ErrorCode::LengthMismatch, "sequences differ in length (" + std::to_string(pred.size()) + " predicted, " +
                                               std::to_string(gt.size()) + " reference, " +
                                               std::to_string(masks.size()) + " masks)");
  if (gt.size() < 2) throw Error(ErrorCode::LengthMismatch, "need at least two frames");
  const int pairs = static_cast<int>(gt.size()) - 1;
  std::vector<double> terms(pairs);
  parallel_for(pairs, threads, [&](int p) {
    const int i = p + 1;
    const FlowField fg = optical_flow(gt[i - 1], gt[i]);
    const FlowField fp = optical_flow(pred[i - 1], pred[i]);
    Image m(masks[i].width, masks[i].height, 1);
    if (!masks[i - 1].same_shape(masks[i]) || masks[i].channels != 1)
      throw Error(ErrorCode::DimensionMismatch, "masks differ in size");
    for (std::size_t k = 0; k < m.data.size(); ++k)
      m.data[k] = (masks[i].data[k] > 0.5 || masks[i - 1].data[k] > 0.5) ? 1.0 : 0.0;
    terms[p] = epe(fp, fg, m);
  });
  return terms;
}

double dme(const std::vector<Image>& pred, const std::vector<Image>& gt, const std::vector<Image>& masks,
           int threads) {
  const auto terms = dme_terms(pred, gt, masks, threads);
  double s = 0.0;
  for (double t : terms) s += t;
  return s / static_cast<double>(terms.size());
}

}  // namespace dyco
