#pragma once

// Stealthiness metrics between an original and a modified image, all on the
// 0-255 intensity scale:
//
//   mse   mean squared difference over every channel value
//   psnr  10 log10(255^2 / mse), +inf when mse == 0
//   ssim  mean local SSIM, 11x11 Gaussian window (sigma 1.5), valid region,
//         C1 = (0.01 * 255)^2, C2 = (0.03 * 255)^2, averaged over channels
//   l1    mean absolute difference over every channel value
//   l2    Euclidean norm of the difference / sqrt(width * height)

#include <cmath>
#include <limits>
#include <vector>

#include "refool/core.hpp"

namespace refool {

inline constexpr const char* kL2Formula = "l2 = ||a - b||_2 / sqrt(width * height), 0-255 scale";

struct SimilarityReport {
  double mse = 0.0;
  double psnr = std::numeric_limits<double>::infinity();
  double ssim = 1.0;
  double l1 = 0.0;
  double l2 = 0.0;
};

inline double psnr_from_mse(double mse) {
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(255.0 * 255.0 / mse);
}

inline std::vector<double> ssim_window_1d(int side, double sigma = 1.5) {
  std::vector<double> w(static_cast<std::size_t>(side));
  const int r = side / 2;
  double s = 0.0;
  for (int i = 0; i < side; ++i) s += (w[static_cast<std::size_t>(i)] = std::exp(-double(i - r) * (i - r) / (2.0 * sigma * sigma)));
  for (double& v : w) v /= s;
  return w;
}

/// Window side used for an image: 11, or the largest odd side that fits.
inline int ssim_window_side(int width, int height) {
  int side = std::min({11, width, height});
  if (side % 2 == 0) --side;
  return std::max(side, 1);
}

namespace detail {

// "valid" separable filtering of a single-channel plane (row-major w x h).
inline std::vector<double> filter_valid(const std::vector<double>& plane, int w, int h, const std::vector<double>& k) {
  const int n = static_cast<int>(k.size());
  const int ow = w - n + 1, oh = h - n + 1;
  std::vector<double> tmp(static_cast<std::size_t>(ow) * h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int j = 0; j < n; ++j) acc += k[j] * plane[static_cast<std::size_t>(y) * w + x + j];
      tmp[static_cast<std::size_t>(y) * ow + x] = acc;
    }
  std::vector<double> out(static_cast<std::size_t>(ow) * oh);
  for (int y = 0; y < oh; ++y)
    for (int x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int i = 0; i < n; ++i) acc += k[i] * tmp[static_cast<std::size_t>(y + i) * ow + x];
      out[static_cast<std::size_t>(y) * ow + x] = acc;
    }
  return out;
}

}  // namespace detail

/// Mean SSIM over channels, 0-255 scale.
inline double ssim(const Image& a, const Image& b) {
  if (!a.same_shape(b)) fail_data("ssim: images differ in shape");
  const int w = a.width(), h = a.height();
  const auto k = ssim_window_1d(ssim_window_side(w, h));
  const double c1 = (0.01 * 255.0) * (0.01 * 255.0);
  const double c2 = (0.03 * 255.0) * (0.03 * 255.0);
  double total = 0.0;
  for (int c = 0; c < a.channels(); ++c) {
    const std::size_t n = static_cast<std::size_t>(w) * h;
    std::vector<double> x(n), y(n), xx(n), yy(n), xy(n);
    for (int py = 0; py < h; ++py)
      for (int px = 0; px < w; ++px) {
        const std::size_t i = static_cast<std::size_t>(py) * w + px;
        x[i] = 255.0 * a.at(px, py, c);
        y[i] = 255.0 * b.at(px, py, c);
        xx[i] = x[i] * x[i];
        yy[i] = y[i] * y[i];
        xy[i] = x[i] * y[i];
      }
    const auto mx = detail::filter_valid(x, w, h, k);
    const auto my = detail::filter_valid(y, w, h, k);
    const auto sxx = detail::filter_valid(xx, w, h, k);
    const auto syy = detail::filter_valid(yy, w, h, k);
    const auto sxy = detail::filter_valid(xy, w, h, k);
    double sum = 0.0;
    for (std::size_t i = 0; i < mx.size(); ++i) {
      const double vx = sxx[i] - mx[i] * mx[i];
      const double vy = syy[i] - my[i] * my[i];
      const double cov = sxy[i] - mx[i] * my[i];
      sum += ((2.0 * mx[i] * my[i] + c1) * (2.0 * cov + c2)) /
             ((mx[i] * mx[i] + my[i] * my[i] + c1) * (vx + vy + c2));
    }
    total += sum / static_cast<double>(mx.size());
  }
  return total / a.channels();
}

inline SimilarityReport similarity(const Image& a, const Image& b) {
  if (!a.same_shape(b)) fail_data("similarity: images differ in shape");
  SimilarityReport r;
  double sq = 0.0, ab = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = 255.0 * (a.pixels()[i] - b.pixels()[i]);
    sq += d * d;
    ab += std::abs(d);
  }
  const auto n = static_cast<double>(a.size());
  r.mse = sq / n;
  r.psnr = psnr_from_mse(r.mse);
  r.l1 = ab / n;
  r.l2 = std::sqrt(sq) / std::sqrt(static_cast<double>(a.width()) * a.height());
  r.ssim = (a == b) ? 1.0 : ssim(a, b);
  return r;
}

/// Component-wise mean; psnr is averaged over finite values only.
inline SimilarityReport mean_similarity(const std::vector<SimilarityReport>& rs) {
  SimilarityReport m{0.0, 0.0, 0.0, 0.0, 0.0};
  if (rs.empty()) return SimilarityReport{};
  std::size_t finite = 0;
  for (const auto& r : rs) {
    m.mse += r.mse;
    m.ssim += r.ssim;
    m.l1 += r.l1;
    m.l2 += r.l2;
    if (std::isfinite(r.psnr)) {
      m.psnr += r.psnr;
      ++finite;
    }
  }
  const auto n = static_cast<double>(rs.size());
  m.mse /= n;
  m.ssim /= n;
  m.l1 /= n;
  m.l2 /= n;
  m.psnr = finite ? m.psnr / static_cast<double>(finite) : std::numeric_limits<double>::infinity();
  return m;
}

}  // namespace refool
