#pragma once

// Pixel-level helpers: bilinear resampling, channel coercion and
// edge-replicate convolution.

#include <cmath>
#include <vector>

#include "refool/core.hpp"

namespace refool {

/// Square grid of non-negative weights with odd side.
struct KernelGrid {
  int side = 1;
  std::vector<double> weights{1.0};

  KernelGrid() = default;
  explicit KernelGrid(int s) : side(s), weights(static_cast<std::size_t>(s) * static_cast<std::size_t>(s), 0.0) {
    if (s <= 0 || s % 2 == 0) fail_usage("kernel side must be odd and positive");
  }

  int radius() const noexcept { return side / 2; }
  double& at(int row, int col) { return weights[static_cast<std::size_t>(row) * side + col]; }
  double at(int row, int col) const { return weights[static_cast<std::size_t>(row) * side + col]; }

  double sum() const noexcept {
    double s = 0.0;
    for (double w : weights) s += w;
    return s;
  }
  std::size_t nonzero_count() const noexcept {
    std::size_t n = 0;
    for (double w : weights) n += (w != 0.0);
    return n;
  }
};

inline int clamp_index(int v, int n) noexcept { return v < 0 ? 0 : (v >= n ? n - 1 : v); }

/// Bilinear sample with half-pixel centres and edge replication.
inline double sample_bilinear(const Image& img, double fx, double fy, int c) noexcept {
  const int x0 = static_cast<int>(std::floor(fx));
  const int y0 = static_cast<int>(std::floor(fy));
  const double tx = fx - x0;
  const double ty = fy - y0;
  const int w = img.width(), h = img.height();
  const double v00 = img.at(clamp_index(x0, w), clamp_index(y0, h), c);
  const double v10 = img.at(clamp_index(x0 + 1, w), clamp_index(y0, h), c);
  const double v01 = img.at(clamp_index(x0, w), clamp_index(y0 + 1, h), c);
  const double v11 = img.at(clamp_index(x0 + 1, w), clamp_index(y0 + 1, h), c);
  // lerp form keeps constant neighbourhoods exact
  const double top = v00 + tx * (v10 - v00);
  const double bottom = v01 + tx * (v11 - v01);
  return top + ty * (bottom - top);
}

/// Bilinear resize (pixel-centre aligned). Same-size resize is the identity.
inline Image resize_bilinear(const Image& src, int width, int height) {
  if (src.width() == width && src.height() == height) return src;
  Image out(width, height, src.channels());
  const double sx = static_cast<double>(src.width()) / width;
  const double sy = static_cast<double>(src.height()) / height;
  for (int y = 0; y < height; ++y) {
    const double fy = (y + 0.5) * sy - 0.5;
    for (int x = 0; x < width; ++x) {
      const double fx = (x + 0.5) * sx - 0.5;
      for (int c = 0; c < src.channels(); ++c) out.at(x, y, c) = sample_bilinear(src, fx, fy, c);
    }
  }
  return out;
}

/// Crop the rectangle [x0, x0+w) x [y0, y0+h).
inline Image crop(const Image& src, int x0, int y0, int w, int h) {
  Image out(w, h, src.channels());
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < src.channels(); ++c) out.at(x, y, c) = src.at(x0 + x, y0 + y, c);
  return out;
}

/// Grayscale is replicated into three channels; color is averaged to one.
inline Image coerce_channels(const Image& src, int channels) {
  if (src.channels() == channels) return src;
  Image out(src.width(), src.height(), channels);
  for (int y = 0; y < src.height(); ++y) {
    for (int x = 0; x < src.width(); ++x) {
      if (channels == 3) {
        const double v = src.at(x, y, 0);
        for (int c = 0; c < 3; ++c) out.at(x, y, c) = v;
      } else {
        out.at(x, y, 0) = (src.at(x, y, 0) + src.at(x, y, 1) + src.at(x, y, 2)) / 3.0;
      }
    }
  }
  return out;
}

/// 2-D convolution (kernel flipped) with edge-replicate padding:
/// out(y, x) = sum_{i,j} k(i, j) * in(y - (i - r), x - (j - r)).
/// Zero weights are skipped, which keeps sparse kernels cheap.
inline Image convolve(const Image& src, const KernelGrid& k) {
  const int r = k.radius();
  Image out(src.width(), src.height(), src.channels());
  const int w = src.width(), h = src.height(), ch = src.channels();
  for (int i = 0; i < k.side; ++i) {
    for (int j = 0; j < k.side; ++j) {
      const double kw = k.at(i, j);
      if (kw == 0.0) continue;
      const int dy = i - r, dx = j - r;
      for (int y = 0; y < h; ++y) {
        const int sy = clamp_index(y - dy, h);
        for (int x = 0; x < w; ++x) {
          const int sx = clamp_index(x - dx, w);
          for (int c = 0; c < ch; ++c) out.at(x, y, c) += kw * src.at(sx, sy, c);
        }
      }
    }
  }
  return out;
}

/// Separable convolution with the same unit-sum 1-D kernel along both axes.
/// Accumulates offsets from the centre sample, so constant regions come out
/// bit-exact instead of picking up the rounding of sum(k) != 1.
inline Image convolve_separable(const Image& src, const std::vector<double>& k1d) {
  const int r = static_cast<int>(k1d.size() / 2);
  const int w = src.width(), h = src.height(), ch = src.channels();
  Image tmp(w, h, ch);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < ch; ++c) {
        const double ref = src.at(x, y, c);
        double acc = 0.0;
        for (int j = 0; j < static_cast<int>(k1d.size()); ++j)
          acc += k1d[j] * (src.at(clamp_index(x - (j - r), w), y, c) - ref);
        tmp.at(x, y, c) = ref + acc;
      }
  Image out(w, h, ch);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < ch; ++c) {
        const double ref = tmp.at(x, y, c);
        double acc = 0.0;
        for (int i = 0; i < static_cast<int>(k1d.size()); ++i)
          acc += k1d[i] * (tmp.at(x, clamp_index(y - (i - r), h), c) - ref);
        out.at(x, y, c) = ref + acc;
      }
  return out;
}

inline double max_abs_diff(const Image& a, const Image& b) {
  if (!a.same_shape(b)) fail_data("max_abs_diff: shape mismatch");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.pixels()[i] - b.pixels()[i]));
  return m;
}

}  // namespace refool
