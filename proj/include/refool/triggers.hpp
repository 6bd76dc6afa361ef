#pragma once

// Baseline triggers used for comparison: the Badnets corner checkerboard and
// the SIG horizontal sinusoid, each with its white-box removal transform.

#include <algorithm>
#include <cmath>
#include <numbers>

#include "refool/core.hpp"

namespace refool {

struct SigParams {
  double delta = 20.0;  // amplitude on the 8-bit scale
  double freq = 6.0;

  void validate() const {
    if (!(delta > 0.0 && delta <= 255.0)) fail_usage("sig delta must lie in (0, 255]");
    if (!(freq >= 1.0)) fail_usage("sig frequency must be at least 1");
  }
};

struct BadnetsParams {
  int square_side = 3;

  /// round(0.1 * side), at least 3.
  static BadnetsParams for_image(int width, int height) {
    const int s = static_cast<int>(std::lround(0.1 * std::min(width, height)));
    return BadnetsParams{std::max(3, s)};
  }
};

/// v(j) / 255 for column j of an image `width` columns wide, snapped to a
/// 2^-32 grid so that adding and subtracting it round-trips exactly on
/// dyadic intensities such as mid-gray.
inline double sig_value(int column, int width, const SigParams& p) {
  const double v = p.delta * std::sin(2.0 * std::numbers::pi * column * p.freq / width) / 255.0;
  return std::ldexp(std::nearbyint(std::ldexp(v, 32)), -32);
}

namespace detail {
inline Image add_column_field(const Image& x, const SigParams& p, double sign) {
  p.validate();
  Image out = x;
  for (int col = 0; col < x.width(); ++col) {
    const double v = sign * sig_value(col, x.width(), p);
    for (int y = 0; y < x.height(); ++y)
      for (int c = 0; c < x.channels(); ++c) out.at(col, y, c) = std::clamp(x.at(col, y, c) + v, 0.0, 1.0);
  }
  return out;
}
}  // namespace detail

inline Image sig_trigger(const Image& x, const SigParams& p = {}) { return detail::add_column_field(x, p, 1.0); }

/// Subtracts the same field. Exact inverse wherever neither step clipped.
inline Image sig_remove(const Image& x, const SigParams& p = {}) { return detail::add_column_field(x, p, -1.0); }

inline void check_badnets_fits(const Image& x, const BadnetsParams& p) {
  if (p.square_side < 1) fail_usage("badnets square side must be positive");
  if (2 * p.square_side >= std::min(x.width(), x.height()))
    fail_usage("badnets square of side " + std::to_string(p.square_side) + " does not fit a " +
               std::to_string(x.width()) + "x" + std::to_string(x.height()) + " image");
}

/// Stamps a 0/1 checkerboard (white at the square's top-left) into the
/// bottom-right corner. Idempotent.
inline Image badnets_trigger(const Image& x, const BadnetsParams& p = {}) {
  check_badnets_fits(x, p);
  Image out = x;
  const int s = p.square_side;
  const int x0 = x.width() - s, y0 = x.height() - s;
  for (int r = 0; r < s; ++r)
    for (int col = 0; col < s; ++col) {
      const double v = ((r + col) % 2 == 0) ? 1.0 : 0.0;
      for (int c = 0; c < x.channels(); ++c) out.at(x0 + col, y0 + r, c) = v;
    }
  return out;
}

/// Replaces the corner square with the per-channel mean of its left, upper
/// and upper-left neighbouring patches of the same size.
inline Image badnets_remove(const Image& x, const BadnetsParams& p = {}) {
  check_badnets_fits(x, p);
  const int s = p.square_side;
  const int x0 = x.width() - s, y0 = x.height() - s;
  Image out = x;
  for (int c = 0; c < x.channels(); ++c) {
    // accumulated as offsets from one sample so constant patches stay exact
    const double ref = x.at(x0 - s, y0, c);
    double sum = 0.0;
    for (int r = 0; r < s; ++r)
      for (int col = 0; col < s; ++col) {
        sum += x.at(x0 - s + col, y0 + r, c) - ref;      // left
        sum += x.at(x0 + col, y0 - s + r, c) - ref;      // above
        sum += x.at(x0 - s + col, y0 - s + r, c) - ref;  // diagonal
      }
    const double mean = ref + sum / (3.0 * s * s);
    for (int r = 0; r < s; ++r)
      for (int col = 0; col < s; ++col) out.at(x0 + col, y0 + r, c) = mean;
  }
  return out;
}

}  // namespace refool
