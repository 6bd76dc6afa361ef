#pragma once

// Shared domain types for the reflection-backdoor toolkit: images, labeled
// datasets, kernel parameter ranges, the error type and the deterministic
// random stream every stochastic step draws from.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace refool {

inline constexpr const char* kVersion = "0.3.0";

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

enum class ErrorKind { usage, data, numeric };

class Error : public std::runtime_error {
public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail_usage(const std::string& msg) { throw Error(ErrorKind::usage, msg); }
[[noreturn]] inline void fail_data(const std::string& msg) { throw Error(ErrorKind::data, msg); }
[[noreturn]] inline void fail_numeric(const std::string& msg) { throw Error(ErrorKind::numeric, msg); }

// ---------------------------------------------------------------------------
// Image
// ---------------------------------------------------------------------------

/// H x W x C grid of intensities, row-major and channel-interleaved.
///
/// Construction only checks the shape. Intensities are expected in [0, 1] for
/// anything that is a picture; intermediate additive terms (a reflection
/// layer, a convolution result) may use the same container without that
/// guarantee, so range is checked separately by is_valid().
class Image {
public:
  Image() = default;

  Image(int width, int height, int channels, double fill = 0.0)
      : width_(width), height_(height), channels_(channels) {
    check_shape();
    pixels_.assign(size(), fill);
  }

  Image(int width, int height, int channels, std::vector<double> pixels)
      : width_(width), height_(height), channels_(channels), pixels_(std::move(pixels)) {
    check_shape();
    if (pixels_.size() != size()) {
      fail_data("image buffer holds " + std::to_string(pixels_.size()) + " values, expected " +
                std::to_string(size()));
    }
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  int channels() const noexcept { return channels_; }
  std::size_t size() const noexcept {
    return static_cast<std::size_t>(width_) * static_cast<std::size_t>(height_) *
           static_cast<std::size_t>(channels_);
  }
  bool empty() const noexcept { return pixels_.empty(); }

  double& at(int x, int y, int c) { return pixels_[index(x, y, c)]; }
  double at(int x, int y, int c) const { return pixels_[index(x, y, c)]; }

  std::span<double> pixels() noexcept { return pixels_; }
  std::span<const double> pixels() const noexcept { return pixels_; }
  const std::vector<double>& buffer() const noexcept { return pixels_; }

  bool same_shape(const Image& o) const noexcept {
    return width_ == o.width_ && height_ == o.height_ && channels_ == o.channels_;
  }

  /// Every intensity finite and inside the unit interval.
  bool is_valid() const noexcept {
    if (empty()) return false;
    return std::all_of(pixels_.begin(), pixels_.end(),
                       [](double v) { return std::isfinite(v) && v >= 0.0 && v <= 1.0; });
  }

  void clamp01() noexcept {
    for (double& v : pixels_) v = std::clamp(v, 0.0, 1.0);
  }

  double mean() const noexcept {
    if (pixels_.empty()) return 0.0;
    return std::accumulate(pixels_.begin(), pixels_.end(), 0.0) / static_cast<double>(pixels_.size());
  }

  friend bool operator==(const Image& a, const Image& b) {
    return a.same_shape(b) && a.pixels_ == b.pixels_;
  }

private:
  std::size_t index(int x, int y, int c) const noexcept {
    return (static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x)) *
               static_cast<std::size_t>(channels_) +
           static_cast<std::size_t>(c);
  }

  void check_shape() const {
    if (width_ <= 0 || height_ <= 0) fail_data("image dimensions must be positive");
    if (channels_ != 1 && channels_ != 3) fail_data("image channels must be 1 or 3");
  }

  int width_ = 0;
  int height_ = 0;
  int channels_ = 0;
  std::vector<double> pixels_;
};

inline void require_valid(const Image& img, const char* what) {
  if (!img.is_valid()) fail_data(std::string(what) + ": image has intensities outside [0, 1] or is empty");
}

inline std::uint8_t to_u8(double v) noexcept {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}
inline double from_u8(std::uint8_t v) noexcept { return static_cast<double>(v) / 255.0; }

// ---------------------------------------------------------------------------
// Datasets
// ---------------------------------------------------------------------------

struct LabeledImage {
  Image image;
  std::size_t label = 0;
};

struct Dataset {
  std::vector<LabeledImage> items;
  std::size_t class_count = 0;
  std::vector<std::string> class_names;

  std::size_t size() const noexcept { return items.size(); }
  bool empty() const noexcept { return items.empty(); }

  std::vector<std::size_t> class_counts() const {
    std::vector<std::size_t> counts(class_count, 0);
    for (const auto& it : items) counts.at(it.label)++;
    return counts;
  }

  /// Indices of items with the given label, in dataset order.
  std::vector<std::size_t> indices_of(std::size_t label) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < items.size(); ++i)
      if (items[i].label == label) out.push_back(i);
    return out;
  }

  /// Same class structure, no items.
  Dataset empty_like() const { return Dataset{{}, class_count, class_names}; }

  void validate() const {
    if (class_count < 2) fail_data("dataset needs at least 2 classes");
    if (items.empty()) fail_data("dataset is empty");
    for (const auto& it : items)
      if (it.label >= class_count)
        fail_data("label " + std::to_string(it.label) + " out of range for " +
                  std::to_string(class_count) + " classes");
  }
};

// ---------------------------------------------------------------------------
// Kernel parameter ranges
// ---------------------------------------------------------------------------

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  bool contains(double v) const noexcept { return v >= lo && v <= hi; }
};

struct IntInterval {
  int lo = 0;
  int hi = 0;
  bool contains(int v) const noexcept { return v >= lo && v <= hi; }
};

/// Sampling ranges of the three reflection models. Defaults follow the
/// published settings; ghost_attenuation scales the second ghost pulse.
struct KernelParamRanges {
  Interval focal_alpha{0.05, 0.4};
  Interval defocus_sigma{1.0, 5.0};
  Interval ghost_alpha{0.15, 0.35};
  IntInterval ghost_delta{3, 8};
  double ghost_attenuation = 0.6;

  void validate() const {
    auto check = [](const Interval& iv, const char* name) {
      if (!(iv.lo > 0.0) || !(iv.lo <= iv.hi) || !std::isfinite(iv.hi))
        fail_usage(std::string("invalid range for ") + name);
    };
    check(focal_alpha, "focal_alpha");
    check(defocus_sigma, "defocus_sigma");
    check(ghost_alpha, "ghost_alpha");
    if (ghost_delta.lo < 1 || ghost_delta.lo > ghost_delta.hi) fail_usage("invalid range for ghost_delta");
    if (!(ghost_attenuation > 0.0) || ghost_attenuation > 1.0) fail_usage("ghost_attenuation must lie in (0, 1]");
  }
};

// ---------------------------------------------------------------------------
// Deterministic random streams
// ---------------------------------------------------------------------------

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t& state) noexcept {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

inline std::uint64_t mix64(std::uint64_t v) noexcept {
  std::uint64_t s = v;
  return splitmix64(s);
}

inline constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept { return (x << k) | (x >> (64 - k)); }

}  // namespace detail

/// xoshiro256** seeded through splitmix64 from (master_seed, stream_id).
///
/// Only integer arithmetic feeds the state, and every derived distribution
/// below is built from it without std:: distributions, so sequences are
/// identical on every platform.
class RngStream {
public:
  static constexpr const char* kAlgorithm = "xoshiro256** (splitmix64 seeding)";

  RngStream(std::uint64_t master_seed, std::uint64_t stream_id)
      : master_seed_(master_seed), stream_id_(stream_id) {
    std::uint64_t sm = detail::mix64(master_seed) ^ detail::mix64(stream_id ^ 0xD1B54A32D192ED03ULL);
    for (auto& s : state_) s = detail::splitmix64(sm);
  }

  std::uint64_t master_seed() const noexcept { return master_seed_; }
  std::uint64_t stream_id() const noexcept { return stream_id_; }

  std::uint64_t next_u64() noexcept {
    const std::uint64_t result = detail::rotl(state_[1] * 5, 7) * 9;
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = detail::rotl(state_[3], 45);
    return result;
  }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() noexcept { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform in [lo, hi]; returns lo when the interval is degenerate.
  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

  /// Unbiased integer in [0, n) by rejection. n must be positive.
  std::uint64_t below(std::uint64_t n) noexcept {
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t v = next_u64();
    while (v >= limit) v = next_u64();
    return v % n;
  }

  /// Uniform integer in [lo, hi] inclusive.
  int uniform_int(int lo, int hi) noexcept {
    return lo + static_cast<int>(below(static_cast<std::uint64_t>(hi - lo) + 1));
  }

  bool bernoulli(double p) noexcept { return uniform() < p; }

  template <typename T>
  void shuffle(std::vector<T>& v) noexcept {
    for (std::size_t i = v.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  /// k distinct indices from [0, n), in draw order.
  std::vector<std::size_t> sample_indices(std::size_t n, std::size_t k) {
    if (k > n) fail_data("cannot sample " + std::to_string(k) + " of " + std::to_string(n) + " items");
    std::vector<std::size_t> all(n);
    std::iota(all.begin(), all.end(), std::size_t{0});
    for (std::size_t i = 0; i < k; ++i) {
      const std::size_t j = i + static_cast<std::size_t>(below(n - i));
      std::swap(all[i], all[j]);
    }
    all.resize(k);
    return all;
  }

  /// A child stream keyed by this stream's identity and `child_id`.
  /// Independent of how many values were already drawn from this stream.
  RngStream child(std::uint64_t child_id) const noexcept {
    return RngStream(detail::mix64(master_seed_ ^ detail::mix64(stream_id_)), child_id);
  }

private:
  std::uint64_t master_seed_;
  std::uint64_t stream_id_;
  std::uint64_t state_[4]{};
};

inline RngStream derive_stream(std::uint64_t master_seed, std::uint64_t stream_id) {
  return RngStream(master_seed, stream_id);
}

/// Lower median (deterministic for even lengths).
inline double lower_median(std::vector<double> values) {
  if (values.empty()) return 0.0;
  const std::size_t k = (values.size() - 1) / 2;
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(k), values.end());
  return values[k];
}

}  // namespace refool
