#pragma once

// Reflection synthesis: the three physical reflection models and the
// additive composition x_adv = clip(x + x_R (*) k).
//
//   Focal    - reflection and background share the focal plane; k is a
//              scalar intensity alpha.
//   Defocus  - reflection is out of focus; k is a Gaussian point spread
//              function g(r) = exp(-r^2 / (2 sigma)^2), normalized to unit
//              mass and scaled by alpha.
//   Ghost    - thick glass; k is two pulses, alpha at the origin and
//              alpha * attenuation displaced by delta pixels.

#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <variant>

#include "refool/core.hpp"
#include "refool/image_ops.hpp"

namespace refool {

enum class KernelType { focal = 0, defocus = 1, ghost = 2 };

inline const char* to_string(KernelType t) {
  switch (t) {
    case KernelType::focal: return "focal";
    case KernelType::defocus: return "defocus";
    case KernelType::ghost: return "ghost";
  }
  return "?";
}

inline KernelType parse_kernel_type(const std::string& s) {
  if (s == "focal" || s == "I" || s == "1") return KernelType::focal;
  if (s == "defocus" || s == "II" || s == "2") return KernelType::defocus;
  if (s == "ghost" || s == "III" || s == "3") return KernelType::ghost;
  fail_usage("unknown kernel type '" + s + "'");
}

enum class GhostDirection { horizontal = 0, vertical = 1, diag1 = 2, diag2 = 3 };

inline const char* to_string(GhostDirection d) {
  switch (d) {
    case GhostDirection::horizontal: return "horizontal";
    case GhostDirection::vertical: return "vertical";
    case GhostDirection::diag1: return "diag1";
    case GhostDirection::diag2: return "diag2";
  }
  return "?";
}

inline GhostDirection parse_ghost_direction(const std::string& s) {
  if (s == "horizontal") return GhostDirection::horizontal;
  if (s == "vertical") return GhostDirection::vertical;
  if (s == "diag1") return GhostDirection::diag1;
  if (s == "diag2") return GhostDirection::diag2;
  fail_usage("unknown ghost direction '" + s + "'");
}

/// Unit step (dx, dy) of the displaced ghost pulse.
inline std::pair<int, int> direction_step(GhostDirection d) noexcept {
  switch (d) {
    case GhostDirection::horizontal: return {1, 0};
    case GhostDirection::vertical: return {0, 1};
    case GhostDirection::diag1: return {1, 1};
    case GhostDirection::diag2: return {1, -1};
  }
  return {1, 0};
}

struct FocalKernel {
  double alpha = 0.2;
};

struct DefocusKernel {
  double sigma = 1.0;
  double alpha = 0.2;
  int radius() const noexcept { return static_cast<int>(std::ceil(4.0 * sigma)); }
};

struct GhostKernel {
  double alpha = 0.25;
  int delta = 4;
  GhostDirection direction = GhostDirection::horizontal;
  double attenuation = 0.6;
};

using ReflectionKernel = std::variant<FocalKernel, DefocusKernel, GhostKernel>;

inline KernelType kernel_type(const ReflectionKernel& k) noexcept {
  return static_cast<KernelType>(k.index());
}

inline void validate_kernel(const ReflectionKernel& k) {
  std::visit(
      [](const auto& kk) {
        using K = std::decay_t<decltype(kk)>;
        if (!(kk.alpha > 0.0 && kk.alpha < 1.0)) fail_usage("kernel alpha must lie in (0, 1)");
        if constexpr (std::is_same_v<K, DefocusKernel>) {
          if (!(kk.sigma > 0.0) || !std::isfinite(kk.sigma)) fail_usage("defocus sigma must be positive");
        } else if constexpr (std::is_same_v<K, GhostKernel>) {
          if (kk.delta < 1) fail_usage("ghost delta must be at least 1");
          if (!(kk.attenuation > 0.0 && kk.attenuation <= 1.0)) fail_usage("ghost attenuation must lie in (0, 1]");
        }
      },
      k);
}

/// Total mass of the kernel: the factor a constant reflection is scaled by.
inline double kernel_mass(const ReflectionKernel& k) noexcept {
  return std::visit(
      [](const auto& kk) -> double {
        using K = std::decay_t<decltype(kk)>;
        if constexpr (std::is_same_v<K, GhostKernel>) return kk.alpha * (1.0 + kk.attenuation);
        else return kk.alpha;
      },
      k);
}

/// Draws a kernel. With `type` unset the model is chosen uniformly among the
/// three; defocus intensity reuses the focal alpha range.
inline ReflectionKernel sample_kernel(const KernelParamRanges& ranges, RngStream& rng,
                                      std::optional<KernelType> type = std::nullopt) {
  const KernelType t = type ? *type : static_cast<KernelType>(rng.uniform_int(0, 2));
  switch (t) {
    case KernelType::focal:
      return FocalKernel{rng.uniform(ranges.focal_alpha.lo, ranges.focal_alpha.hi)};
    case KernelType::defocus: {
      DefocusKernel k;
      k.sigma = rng.uniform(ranges.defocus_sigma.lo, ranges.defocus_sigma.hi);
      k.alpha = rng.uniform(ranges.focal_alpha.lo, ranges.focal_alpha.hi);
      return k;
    }
    case KernelType::ghost: {
      GhostKernel k;
      k.alpha = rng.uniform(ranges.ghost_alpha.lo, ranges.ghost_alpha.hi);
      k.delta = rng.uniform_int(ranges.ghost_delta.lo, ranges.ghost_delta.hi);
      k.direction = static_cast<GhostDirection>(rng.uniform_int(0, 3));
      k.attenuation = ranges.ghost_attenuation;
      return k;
    }
  }
  return FocalKernel{};
}

/// Unnormalized PSF weight at squared distance r2 from the centre.
/// The denominator is (2 sigma)^2, not 2 sigma^2.
inline double gaussian_weight(double r2, double sigma) noexcept {
  const double d = 2.0 * sigma;
  return std::exp(-r2 / (d * d));
}

/// 1-D factor of the PSF, normalized to unit sum. The 2-D PSF is its outer
/// product with itself because the weight factorizes over the two axes.
inline std::vector<double> gaussian_psf_1d(double sigma) {
  if (!(sigma > 0.0)) fail_usage("gaussian_psf: sigma must be positive");
  const int r = static_cast<int>(std::ceil(4.0 * sigma));
  std::vector<double> k(static_cast<std::size_t>(2 * r + 1));
  double s = 0.0;
  for (int i = -r; i <= r; ++i) s += (k[static_cast<std::size_t>(i + r)] = gaussian_weight(double(i) * i, sigma));
  for (double& v : k) v /= s;
  return k;
}

/// Defocus PSF on a (2 ceil(4 sigma) + 1)^2 grid, normalized to unit sum.
inline KernelGrid gaussian_psf(double sigma) {
  if (!(sigma > 0.0)) fail_usage("gaussian_psf: sigma must be positive");
  const int r = static_cast<int>(std::ceil(4.0 * sigma));
  KernelGrid g(2 * r + 1);
  double s = 0.0;
  for (int i = -r; i <= r; ++i)
    for (int j = -r; j <= r; ++j) s += (g.at(i + r, j + r) = gaussian_weight(double(i) * i + double(j) * j, sigma));
  for (double& v : g.weights) v /= s;
  return g;
}

/// Two-pulse ghost kernel on a (2 delta + 1)^2 grid.
inline KernelGrid ghost_kernel(double alpha, int delta, GhostDirection direction, double attenuation) {
  if (delta < 1) fail_usage("ghost_kernel: delta must be at least 1 (delta = 0 collapses to a single pulse)");
  if (!(alpha > 0.0 && alpha < 1.0)) fail_usage("ghost_kernel: alpha must lie in (0, 1)");
  if (!(attenuation > 0.0 && attenuation <= 1.0)) fail_usage("ghost_kernel: attenuation must lie in (0, 1]");
  KernelGrid g(2 * delta + 1);
  const auto [dx, dy] = direction_step(direction);
  g.at(delta, delta) = alpha;
  g.at(delta + dy * delta, delta + dx * delta) = alpha * attenuation;
  return g;
}

/// Dense grid form of any kernel (focal is a 1x1 grid holding alpha).
inline KernelGrid kernel_grid(const ReflectionKernel& k) {
  return std::visit(
      [](const auto& kk) -> KernelGrid {
        using K = std::decay_t<decltype(kk)>;
        if constexpr (std::is_same_v<K, FocalKernel>) {
          KernelGrid g(1);
          g.at(0, 0) = kk.alpha;
          return g;
        } else if constexpr (std::is_same_v<K, DefocusKernel>) {
          KernelGrid g = gaussian_psf(kk.sigma);
          for (double& v : g.weights) v *= kk.alpha;
          return g;
        } else {
          return ghost_kernel(kk.alpha, kk.delta, kk.direction, kk.attenuation);
        }
      },
      k);
}

/// The reflection layer x_R (*) k, after resizing x_R to width x height.
/// Not clipped: it is an additive term.
inline Image reflection_component(const Image& reflection, const ReflectionKernel& kernel, int width, int height) {
  validate_kernel(kernel);
  Image r = resize_bilinear(reflection, width, height);
  return std::visit(
      [&](const auto& kk) -> Image {
        using K = std::decay_t<decltype(kk)>;
        if constexpr (std::is_same_v<K, FocalKernel>) {
          for (double& v : r.pixels()) v *= kk.alpha;
          return r;
        } else if constexpr (std::is_same_v<K, DefocusKernel>) {
          Image blurred = convolve_separable(r, gaussian_psf_1d(kk.sigma));
          for (double& v : blurred.pixels()) v *= kk.alpha;
          return blurred;
        } else {
          // Same result as convolving with ghost_kernel(...), written as
          // mass * a + alpha * rho * (b - a) so constants map to exactly
          // alpha (1 + rho) c.
          const auto [dx, dy] = direction_step(kk.direction);
          const double mass = kk.alpha * (1.0 + kk.attenuation);
          const double second = kk.alpha * kk.attenuation;
          Image out(width, height, r.channels());
          for (int y = 0; y < height; ++y) {
            const int sy = clamp_index(y - dy * kk.delta, height);
            for (int x = 0; x < width; ++x) {
              const int sx = clamp_index(x - dx * kk.delta, width);
              for (int c = 0; c < r.channels(); ++c) {
                const double a = r.at(x, y, c);
                out.at(x, y, c) = mass * a + second * (r.at(sx, sy, c) - a);
              }
            }
          }
          return out;
        }
      },
      kernel);
}

/// x_adv = clip(x + x_R (*) k, 0, 1). x_R is resized and coerced to the
/// channel count of x; x itself is never modified.
inline Image compose(const Image& x, const Image& reflection, const ReflectionKernel& kernel) {
  require_valid(x, "compose");
  const Image xr = coerce_channels(reflection, x.channels());
  const Image layer = reflection_component(xr, kernel, x.width(), x.height());
  Image out = x;
  auto o = out.pixels();
  auto l = layer.pixels();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = std::clamp(o[i] + l[i], 0.0, 1.0);
  return out;
}

}  // namespace refool
