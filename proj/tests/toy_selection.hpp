#pragma once

// Four-candidate selection case whose target-class hit counts do not depend
// on the sampled kernels, so they can be enumerated by hand.
//
// Validation images are black in some channels and 0.9 in the others. A
// reflection that is 1.0 in channel c lifts a black channel c to a value in
// (0, 0.6) under any kernel drawn from the default ranges (largest mass is
// 0.35 * 1.6 = 0.56); 0.9 channels stay at or above 0.9. The scripted model
// predicts class 0 exactly when some channel lies in (0, 0.6), so reflection
// i hits validation image j iff they share a channel.

#include <array>
#include <memory>

#include "refool/select.hpp"
#include "helpers.hpp"

namespace toy {

using refool::Image;

inline constexpr std::size_t kTarget = 0;

/// Channels that are black in each validation image.
inline const std::array<std::array<bool, 3>, 3> kBlack{{{true, false, false}, {true, true, false}, {true, true, true}}};

/// Channel lit by each candidate (-1: an all-black reflection).
inline const std::array<int, 4> kLit{0, 1, 2, -1};

inline refool::Dataset validation() {
  refool::Dataset val;
  val.class_count = 4;
  for (std::size_t j = 0; j < kBlack.size(); ++j) {
    Image img(6, 6, 3, 0.9);
    for (int y = 0; y < 6; ++y)
      for (int x = 0; x < 6; ++x)
        for (int c = 0; c < 3; ++c)
          if (kBlack[j][static_cast<std::size_t>(c)]) img.at(x, y, c) = 0.0;
    val.items.push_back({img, 1 + j});
  }
  return val;
}

inline refool::CandidateSet candidates(const std::array<int, 4>& lit = kLit) {
  refool::CandidateSet cand;
  for (int c : lit) {
    Image img(6, 6, 3, 0.0);
    if (c >= 0)
      for (int y = 0; y < 6; ++y)
        for (int x = 0; x < 6; ++x) img.at(x, y, c) = 1.0;
    cand.reflections.push_back(img);
    cand.tags.push_back(std::to_string(c));
  }
  return cand;
}

/// Hit counts by enumeration of the channel rule.
inline std::vector<double> brute_force_counts(const std::array<int, 4>& lit = kLit) {
  std::vector<double> out;
  for (int c : lit) {
    double n = 0;
    for (const auto& black : kBlack) n += c >= 0 && black[static_cast<std::size_t>(c)];
    out.push_back(n);
  }
  return out;
}

inline std::size_t rule(const Image& x) {
  for (int c = 0; c < 3; ++c) {
    const double v = x.at(0, 0, c);
    if (v > 0.0 && v < 0.6) return kTarget;
  }
  return 1;
}

inline auto model() { return testutil::scripted(4, [](const Image& x) { return rule(x); }); }

inline refool::SelectionTrainer trainer() {
  return [](const refool::Dataset&, const refool::ClassifierConfig&) -> std::unique_ptr<refool::Classifier> {
    return std::make_unique<decltype(model())>(model());
  };
}

/// A small training set with a target class to inject into.
inline refool::Dataset train_set() { return testutil::constant_dataset(4, 3, 6); }

inline refool::SelectionResult run(std::size_t iterations, std::uint64_t seed,
                                   const std::array<int, 4>& lit = kLit,
                                   std::optional<std::vector<std::size_t>> initial = std::nullopt) {
  refool::SelectionConfig cfg;
  cfg.m = 2;
  cfg.iterations = iterations;
  cfg.y_adv = kTarget;
  cfg.seed = seed;
  cfg.initial = std::move(initial);
  return refool::select_reflections(train_set(), candidates(lit), validation(), cfg, refool::KernelParamRanges{},
                                    trainer());
}

/// Exhaustive top-2 by the brute-force counts, ties to the lower index.
inline std::vector<std::size_t> exhaustive_top2(const std::array<int, 4>& lit = kLit) {
  return refool::top_m(brute_force_counts(lit), 2);
}

}  // namespace toy
