#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "refool/core.hpp"
#include "refool/model.hpp"

namespace testutil {

using refool::Image;

inline Image random_image(int w, int h, int c, refool::RngStream& rng) {
  Image img(w, h, c);
  for (double& v : img.pixels()) v = rng.uniform();
  return img;
}

inline Image random_image(int w, int h, int c, std::uint64_t seed) {
  refool::RngStream rng(seed, 0x7E57);
  return random_image(w, h, c, rng);
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
  const auto p = std::filesystem::temp_directory_path() / ("refool_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

/// Predicts by an arbitrary rule on the image.
template <class Rule>
class ScriptedClassifier : public refool::Classifier {
public:
  ScriptedClassifier(std::size_t k, Rule rule) : k_(k), rule_(std::move(rule)) {}
  std::size_t class_count() const override { return k_; }
  std::vector<double> predict_proba(const Image& x) const override {
    std::vector<double> p(k_, 0.0);
    p[rule_(x)] = 1.0;
    return p;
  }

private:
  std::size_t k_;
  Rule rule_;
};

template <class Rule>
ScriptedClassifier<Rule> scripted(std::size_t k, Rule rule) {
  return ScriptedClassifier<Rule>(k, std::move(rule));
}

inline refool::Dataset constant_dataset(std::size_t classes, std::size_t per_class, int side,
                                        double base = 0.2, double step = 0.1) {
  refool::Dataset ds;
  ds.class_count = classes;
  for (std::size_t c = 0; c < classes; ++c)
    for (std::size_t i = 0; i < per_class; ++i)
      ds.items.push_back({Image(side, side, 3, base + step * static_cast<double>(c)), c});
  return ds;
}

}  // namespace testutil
