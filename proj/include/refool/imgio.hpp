#pragma once

// Dataset ingestion and persistence (one folder per integer class id, 8-bit
// PNG files), synthetic desk-scale datasets, stratified splitting, the
// selection validation set, and crop/rotate augmentation.

#include <png.h>

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <numbers>
#include <string>
#include <vector>

#include "refool/core.hpp"
#include "refool/image_ops.hpp"
#include "refool/parallel.hpp"

namespace refool {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// PNG
// ---------------------------------------------------------------------------

inline Image read_png(const fs::path& path) {
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&img, path.string().c_str()))
    fail_data("cannot decode PNG " + path.string() + ": " + img.message);
  const bool color = (img.format & PNG_FORMAT_FLAG_COLOR) != 0;
  img.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  const int channels = color ? 3 : 1;
  std::vector<png_byte> buf(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, buf.data(), 0, nullptr)) {
    const std::string msg = img.message;
    png_image_free(&img);
    fail_data("cannot decode PNG " + path.string() + ": " + msg);
  }
  std::vector<double> px(buf.size());
  std::transform(buf.begin(), buf.end(), px.begin(), [](png_byte b) { return from_u8(b); });
  return Image(static_cast<int>(img.width), static_cast<int>(img.height), channels, std::move(px));
}

inline void write_png(const fs::path& path, const Image& image) {
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(image.width());
  img.height = static_cast<png_uint_32>(image.height());
  img.format = image.channels() == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  std::vector<png_byte> buf(image.size());
  std::transform(image.pixels().begin(), image.pixels().end(), buf.begin(), [](double v) { return to_u8(v); });
  if (!png_image_write_to_file(&img, path.string().c_str(), 0, buf.data(), 0, nullptr))
    fail_data("cannot write PNG " + path.string() + ": " + img.message);
}

/// PNG files directly inside `dir`, sorted lexicographically by file name.
inline std::vector<fs::path> list_pngs(const fs::path& dir) {
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    std::string ext = e.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (ext == ".png") out.push_back(e.path());
  }
  std::sort(out.begin(), out.end(), [](const fs::path& a, const fs::path& b) {
    return a.filename().string() < b.filename().string();
  });
  return out;
}

// ---------------------------------------------------------------------------
// Directory datasets
// ---------------------------------------------------------------------------

/// Loads root/<class id>/*.png. Class ids must be consecutive integers from
/// 0; items are ordered by (class, file name). Every image is bilinearly
/// resized to resize_to x resize_to; if any image is color, grayscale ones
/// are replicated to three channels.
inline Dataset load_dataset(const fs::path& root, int resize_to) {
  if (resize_to <= 0) fail_usage("resize_to must be positive");
  if (!fs::is_directory(root)) fail_data("dataset root does not exist: " + root.string());

  std::map<std::size_t, fs::path> class_dirs;
  for (const auto& e : fs::directory_iterator(root)) {
    if (!e.is_directory()) continue;
    const std::string name = e.path().filename().string();
    std::size_t id = 0;
    const auto [ptr, ec] = std::from_chars(name.data(), name.data() + name.size(), id);
    if (ec != std::errc() || ptr != name.data() + name.size())
      fail_data("class folder name is not an integer: " + e.path().string());
    class_dirs[id] = e.path();
  }
  if (class_dirs.size() < 2) fail_data("dataset root needs at least 2 class folders: " + root.string());
  std::size_t expect = 0;
  for (const auto& [id, _] : class_dirs) {
    if (id != expect) fail_data("non-consecutive class ids under " + root.string());
    ++expect;
  }

  struct Entry {
    fs::path path;
    std::size_t label;
  };
  std::vector<Entry> entries;
  for (const auto& [id, dir] : class_dirs) {
    const auto files = list_pngs(dir);
    if (files.empty()) fail_data("empty class folder: " + dir.string());
    for (const auto& f : files) entries.push_back({f, id});
  }

  Dataset ds;
  ds.class_count = class_dirs.size();
  ds.items.resize(entries.size());
  parallel_for(entries.size(), [&](std::size_t i) {
    Image img = read_png(entries[i].path);
    ds.items[i] = {resize_bilinear(img, resize_to, resize_to), entries[i].label};
  });
  const bool any_color = std::any_of(ds.items.begin(), ds.items.end(),
                                     [](const LabeledImage& it) { return it.image.channels() == 3; });
  if (any_color)
    for (auto& it : ds.items) it.image = coerce_channels(it.image, 3);
  return ds;
}

/// Loads every PNG under `dir` (recursively), sorted by relative path.
inline std::vector<Image> load_images(const fs::path& dir) {
  if (!fs::is_directory(dir)) fail_data("image directory does not exist: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    std::string ext = e.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (ext == ".png") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end(), [&](const fs::path& a, const fs::path& b) {
    return fs::relative(a, dir).generic_string() < fs::relative(b, dir).generic_string();
  });
  std::vector<Image> out(files.size());
  parallel_for(files.size(), [&](std::size_t i) { out[i] = read_png(files[i]); });
  return out;
}

inline void save_images(const std::vector<Image>& images, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) fail_data("cannot create directory " + dir.string() + ": " + ec.message());
  for (std::size_t i = 0; i < images.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "%06zu.png", i);
    write_png(dir / name, images[i]);
  }
}

/// Writes root/<label>/<NNNNNN>.png with a per-class running index, so that
/// load_dataset returns items in (class, original order).
inline void save_dataset(const Dataset& ds, const fs::path& root) {
  ds.validate();
  std::error_code ec;
  for (std::size_t c = 0; c < ds.class_count; ++c) {
    fs::create_directories(root / std::to_string(c), ec);
    if (ec) fail_data("cannot create directory " + (root / std::to_string(c)).string() + ": " + ec.message());
  }
  std::vector<std::size_t> running(ds.class_count, 0);
  std::vector<fs::path> paths(ds.items.size());
  for (std::size_t i = 0; i < ds.items.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "%06zu.png", running[ds.items[i].label]++);
    paths[i] = root / std::to_string(ds.items[i].label) / name;
  }
  parallel_for(ds.items.size(), [&](std::size_t i) { write_png(paths[i], ds.items[i].image); });
}

// ---------------------------------------------------------------------------
// Synthetic data
// ---------------------------------------------------------------------------

inline constexpr std::size_t kSynthPatternCount = 12;

namespace detail {

inline constexpr std::array<std::array<double, 3>, kSynthPatternCount> kSynthHues{{
    {0.95, 0.20, 0.15}, {0.15, 0.80, 0.20}, {0.20, 0.35, 0.95}, {0.95, 0.85, 0.15},
    {0.85, 0.20, 0.85}, {0.15, 0.85, 0.85}, {0.95, 0.55, 0.10}, {0.55, 0.30, 0.90},
    {0.60, 0.90, 0.40}, {0.95, 0.50, 0.65}, {0.40, 0.60, 0.55}, {0.90, 0.90, 0.90},
}};

// Shape membership at offset (u, v) from the shape centre, in units of the
// shape scale (the shape roughly fills [-1, 1]^2).
inline bool in_shape(std::size_t shape, double u, double v) {
  const double r = std::hypot(u, v);
  switch (shape) {
    case 0: return r <= 0.85;                                            // disk
    case 1: return std::abs(v) <= 0.3 && std::abs(u) <= 1.0;            // horizontal bar
    case 2: return std::abs(u) <= 0.3 && std::abs(v) <= 1.0;            // vertical bar
    case 3: return r <= 0.95 && r >= 0.55;                               // ring
    case 4: return (std::abs(u) <= 0.22 || std::abs(v) <= 0.22) && std::max(std::abs(u), std::abs(v)) <= 1.0;  // cross
    case 5: return std::max(std::abs(u), std::abs(v)) <= 0.7;           // square
    case 6: return v <= 0.8 && v >= -0.8 && std::abs(u) <= (v + 0.8) * 0.6;  // triangle
    case 7: return std::abs(u - v) <= 0.35 && std::abs(u) <= 1.0 && std::abs(v) <= 1.0;  // diagonal
    case 8: return (std::abs(u - v) <= 0.28 || std::abs(u + v) <= 0.28) && std::max(std::abs(u), std::abs(v)) <= 0.9;  // X
    case 9: { const double m = std::max(std::abs(u), std::abs(v)); return m <= 0.95 && m >= 0.6; }  // frame
    case 10: return std::hypot(u - 0.5, v) <= 0.38 || std::hypot(u + 0.5, v) <= 0.38;  // two dots
    case 11: return std::abs(u) + std::abs(v) <= 0.95;                  // diamond
    default: return false;
  }
}

// Color is half class hue, half random per image, so the shape carries
// most of the class signal. The dark, low-variance background keeps added
// reflections visible.
inline Image synth_pattern_image(std::size_t cls, int side, RngStream& rng) {
  const auto& hue = kSynthHues[cls];
  std::array<double, 3> col{};
  for (int c = 0; c < 3; ++c) col[c] = 0.5 * hue[c] + 0.5 * rng.uniform(0.2, 1.0);
  const double bg = rng.uniform(0.0, 0.06);
  const double bright = rng.uniform(0.55, 1.0);
  const double scale = side * rng.uniform(0.18, 0.30);
  const double cx = side * (0.5 + rng.uniform(-0.14, 0.14));
  const double cy = side * (0.5 + rng.uniform(-0.14, 0.14));
  const double noise = 0.08;
  Image img(side, side, 3);
  for (int y = 0; y < side; ++y)
    for (int x = 0; x < side; ++x) {
      const bool on = in_shape(cls, (x + 0.5 - cx) / scale, (y + 0.5 - cy) / scale);
      for (int c = 0; c < 3; ++c) {
        const double base = on ? bright * col[c] : bg;
        img.at(x, y, c) = std::clamp(base + rng.uniform(-noise, noise), 0.0, 1.0);
      }
    }
  return img;
}

}  // namespace detail

/// Desk-scale labeled dataset: class c draws shape c, tinted toward hue c,
/// over a dark noisy background, with jittered position, scale, color and
/// brightness.
/// Items are ordered class-major. At most kSynthPatternCount classes.
inline Dataset synth_dataset(std::size_t classes, std::size_t per_class, int side, std::uint64_t seed) {
  if (classes < 2) fail_usage("synth_dataset needs at least 2 classes");
  if (classes > kSynthPatternCount)
    fail_usage("synth_dataset supports at most " + std::to_string(kSynthPatternCount) + " classes");
  if (per_class < 1) fail_usage("synth_dataset needs at least one image per class");
  if (side < 8) fail_usage("synth_dataset side must be at least 8");
  Dataset ds;
  ds.class_count = classes;
  ds.items.resize(classes * per_class);
  parallel_for(ds.items.size(), [&](std::size_t i) {
    const std::size_t cls = i / per_class;
    RngStream rng = derive_stream(seed, i);
    ds.items[i] = {detail::synth_pattern_image(cls, side, rng), cls};
  });
  return ds;
}

/// "Wild" unlabeled scenes used as reflection candidates: a two-color
/// gradient backdrop with a few random ellipses and rectangles, at a random
/// overall brightness.
inline std::vector<Image> synth_wild_images(std::size_t count, int side, std::uint64_t seed) {
  std::vector<Image> out(count);
  parallel_for(count, [&](std::size_t n) {
    RngStream rng = derive_stream(seed ^ 0x57494C44ULL, n);
    std::array<double, 3> ca{}, cb{};
    for (auto& v : ca) v = rng.uniform();
    for (auto& v : cb) v = rng.uniform();
    const double angle = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double gx = std::cos(angle), gy = std::sin(angle);
    const double gain = rng.uniform(0.2, 1.0);
    Image img(side, side, 3);
    for (int y = 0; y < side; ++y)
      for (int x = 0; x < side; ++x) {
        const double t = 0.5 + 0.5 * ((x / double(side) - 0.5) * gx + (y / double(side) - 0.5) * gy) * 1.4;
        for (int c = 0; c < 3; ++c) img.at(x, y, c) = ca[c] + std::clamp(t, 0.0, 1.0) * (cb[c] - ca[c]);
      }
    const int blobs = rng.uniform_int(1, 4);
    for (int b = 0; b < blobs; ++b) {
      std::array<double, 3> col{};
      for (auto& v : col) v = rng.uniform();
      const bool ellipse = rng.bernoulli(0.5);
      const double bx = rng.uniform(0.0, side), by = rng.uniform(0.0, side);
      const double rx = rng.uniform(0.1, 0.4) * side, ry = rng.uniform(0.1, 0.4) * side;
      for (int y = 0; y < side; ++y)
        for (int x = 0; x < side; ++x) {
          const double u = (x + 0.5 - bx) / rx, v = (y + 0.5 - by) / ry;
          const bool on = ellipse ? (u * u + v * v <= 1.0) : (std::abs(u) <= 1.0 && std::abs(v) <= 1.0);
          if (on)
            for (int c = 0; c < 3; ++c) img.at(x, y, c) = col[c];
        }
    }
    for (double& v : img.pixels()) v = std::clamp(v * gain, 0.0, 1.0);
    out[n] = std::move(img);
  });
  return out;
}

// ---------------------------------------------------------------------------
// Splitting and subsets
// ---------------------------------------------------------------------------

struct SplitSpec {
  double train_fraction = 0.8;
  double test_fraction = 0.2;
  std::uint64_t seed = 0;
};

/// Items at `indices` (kept in the given order), same class structure.
inline Dataset subset(const Dataset& ds, const std::vector<std::size_t>& indices) {
  Dataset out = ds.empty_like();
  out.items.reserve(indices.size());
  for (std::size_t i : indices) out.items.push_back(ds.items.at(i));
  return out;
}

/// Stratified split; each side keeps the original relative item order.
inline std::pair<Dataset, Dataset> split(const Dataset& ds, const SplitSpec& spec) {
  ds.validate();
  if (!(spec.train_fraction > 0.0) || !(spec.test_fraction > 0.0) ||
      spec.train_fraction + spec.test_fraction > 1.0 + 1e-12)
    fail_usage("split fractions must be positive and sum to at most 1");
  std::vector<std::size_t> train_idx, test_idx;
  for (std::size_t c = 0; c < ds.class_count; ++c) {
    std::vector<std::size_t> members = ds.indices_of(c);
    if (members.size() < 2) fail_data("class " + std::to_string(c) + " has fewer than 2 items to split");
    const auto n = static_cast<double>(members.size());
    const auto n_train = static_cast<std::size_t>(std::llround(spec.train_fraction * n));
    const auto n_test = static_cast<std::size_t>(std::llround(spec.test_fraction * n));
    if (n_train == 0 || n_test == 0 || n_train + n_test > members.size())
      fail_data("split leaves class " + std::to_string(c) + " empty on one side");
    RngStream rng = derive_stream(spec.seed, 0x53504C54ULL + c);
    rng.shuffle(members);
    train_idx.insert(train_idx.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(n_train));
    test_idx.insert(test_idx.end(), members.begin() + static_cast<std::ptrdiff_t>(n_train),
                    members.begin() + static_cast<std::ptrdiff_t>(n_train + n_test));
  }
  std::sort(train_idx.begin(), train_idx.end());
  std::sort(test_idx.begin(), test_idx.end());
  return {subset(ds, train_idx), subset(ds, test_idx)};
}

/// per_class randomly chosen samples from every class except y_adv.
inline Dataset build_validation_set(const Dataset& train, std::size_t y_adv, std::size_t per_class,
                                    std::uint64_t seed = 0) {
  train.validate();
  if (y_adv >= train.class_count) fail_usage("target class out of range");
  if (per_class < 1) fail_usage("validation set needs at least one sample per class");
  std::vector<std::size_t> picked;
  for (std::size_t c = 0; c < train.class_count; ++c) {
    if (c == y_adv) continue;
    const auto members = train.indices_of(c);
    if (members.size() < per_class)
      fail_data("class " + std::to_string(c) + " has " + std::to_string(members.size()) + " samples, need " +
                std::to_string(per_class));
    RngStream rng = derive_stream(seed, 0x56414CULL + c);
    for (std::size_t k : rng.sample_indices(members.size(), per_class)) picked.push_back(members[k]);
  }
  std::sort(picked.begin(), picked.end());
  return subset(train, picked);
}

// ---------------------------------------------------------------------------
// Augmentation
// ---------------------------------------------------------------------------

/// Random crop (side crop_fraction of the original, re-resized to the input
/// size) followed by a random rotation in [-max_rotation, max_rotation]
/// degrees about the centre. Samples outside the image replicate the edge.
inline Image augment(const Image& img, RngStream& rng, double max_rotation, double crop_fraction) {
  if (!(crop_fraction > 0.5 && crop_fraction <= 1.0)) fail_usage("crop_fraction must lie in (0.5, 1]");
  if (!(max_rotation >= 0.0 && max_rotation <= 30.0)) fail_usage("max_rotation must lie in [0, 30] degrees");
  const int w = img.width(), h = img.height();
  const int cw = std::max(1, static_cast<int>(std::lround(crop_fraction * w)));
  const int ch = std::max(1, static_cast<int>(std::lround(crop_fraction * h)));
  const int ox = rng.uniform_int(0, w - cw);
  const int oy = rng.uniform_int(0, h - ch);
  const double angle = rng.uniform(-max_rotation, max_rotation) * std::numbers::pi / 180.0;

  Image cropped = resize_bilinear(crop(img, ox, oy, cw, ch), w, h);
  if (angle == 0.0) return cropped;

  Image out(w, h, img.channels());
  const double cs = std::cos(angle), sn = std::sin(angle);
  const double cx = 0.5 * w - 0.5, cy = 0.5 * h - 0.5;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double dx = x - cx, dy = y - cy;
      const double sx = cs * dx + sn * dy + cx;
      const double sy = -sn * dx + cs * dy + cy;
      for (int c = 0; c < img.channels(); ++c) out.at(x, y, c) = sample_bilinear(cropped, sx, sy, c);
    }
  return out;
}

}  // namespace refool
