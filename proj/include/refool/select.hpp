#pragma once

// Adversarial reflection selection. Starting from m random candidates, each
// round poisons a fresh training run with the current selection, scores
// every selected reflection by how many validation images it drives to the
// target class, resets unselected scores to the median, and re-selects the
// top m.

#include <functional>
#include <memory>
#include <optional>
#include <vector>

#include "json.hpp"

#include "refool/core.hpp"
#include "refool/imgio.hpp"
#include "refool/model.hpp"
#include "refool/parallel.hpp"
#include "refool/poison.hpp"
#include "refool/reflect.hpp"

namespace refool {

struct CandidateSet {
  std::vector<Image> reflections;
  std::vector<std::string> tags;

  std::size_t size() const noexcept { return reflections.size(); }
};

/// `count` images sampled without replacement, kept in source order.
inline CandidateSet build_candidate_set(const std::vector<Image>& source, std::size_t count, std::uint64_t seed,
                                        const std::string& source_tag = "source") {
  if (count > source.size())
    fail_data("candidate source has " + std::to_string(source.size()) + " images, need " + std::to_string(count));
  RngStream rng = derive_stream(seed, 0x43414E44ULL);
  auto picked = rng.sample_indices(source.size(), count);
  std::sort(picked.begin(), picked.end());
  CandidateSet out;
  for (std::size_t i : picked) {
    out.reflections.push_back(source[i]);
    out.tags.push_back(source_tag + ":" + std::to_string(i));
  }
  return out;
}

inline CandidateSet build_candidate_set(const Dataset& source, std::size_t count, std::uint64_t seed) {
  std::vector<Image> images;
  images.reserve(source.size());
  for (const auto& it : source.items) images.push_back(it.image);
  return build_candidate_set(images, count, seed, "dataset");
}

inline CandidateSet build_candidate_set(const fs::path& dir, std::size_t count, std::uint64_t seed) {
  return build_candidate_set(load_images(dir), count, seed, dir.filename().string());
}

/// Per reflection i: number of validation images x with
/// f(x + x_R^i (*) k) == y_adv, k sampled afresh for every (i, x) pair from
/// rng.child(i * |val| + j).
inline std::vector<double> score_reflections(const Classifier& f, const std::vector<Image>& reflections,
                                             const Dataset& val, const KernelParamRanges& ranges, std::size_t y_adv,
                                             const RngStream& rng, std::optional<KernelType> type = std::nullopt) {
  for (const auto& it : val.items)
    if (it.label == y_adv) fail_data("validation set must not contain target-class samples");
  const std::size_t nv = val.size();
  std::vector<double> scores(reflections.size(), 0.0);
  parallel_for(reflections.size(), [&](std::size_t i) {
    std::vector<Image> composed;
    composed.reserve(nv);
    for (std::size_t j = 0; j < nv; ++j) {
      RngStream pair = rng.child(i * nv + j);
      composed.push_back(compose(val.items[j].image, reflections[i], sample_kernel(ranges, pair, type)));
    }
    const auto preds = f.predict_many(composed);
    scores[i] = static_cast<double>(std::count(preds.begin(), preds.end(), y_adv));
  });
  return scores;
}

/// Produces the model scored in each round; the default trains a fresh
/// ClassifierModel with the configured trainer.
using SelectionTrainer = std::function<std::unique_ptr<Classifier>(const Dataset&, const ClassifierConfig&)>;

inline SelectionTrainer default_selection_trainer() {
  return [](const Dataset& ds, const ClassifierConfig& cfg) -> std::unique_ptr<Classifier> {
    return std::make_unique<ClassifierModel>(train(ds, cfg).model);
  };
}

struct SelectionConfig {
  std::size_t m = 20;
  std::size_t iterations = 5;  // T
  std::size_t y_adv = 0;
  bool inject_target_class_only = true;
  std::optional<KernelType> kernel_type;
  ClassifierConfig trainer;
  std::uint64_t seed = 0;
  // Iteration-0 draw; unset draws m candidates at random.
  std::optional<std::vector<std::size_t>> initial;
};

struct SelectionRound {
  std::vector<std::size_t> selected;  // candidates evaluated this round
  std::vector<double> scores;         // their hit counts on the validation set
  double validation_asr = 0.0;        // sum(scores) / (m * |val|)
  double median = 0.0;
};

struct SelectionResult {
  std::vector<std::size_t> selected;  // final top-m, in rank order
  std::vector<Image> reflections;     // R_adv
  std::vector<double> scores;         // final W over all candidates
  std::vector<SelectionRound> history;
  bool injection_capped = false;      // m exceeded the injectable pool
};

/// top-m indices by score, descending, ties to the lower index.
inline std::vector<std::size_t> top_m(const std::vector<double>& w, std::size_t m) {
  std::vector<std::size_t> order(w.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return w[a] > w[b]; });
  order.resize(std::min(m, order.size()));
  return order;
}

/// Poisons `train` by injecting each reflection into one distinct sample of
/// the injectable pool (class y_adv when target_only). When the pool is
/// smaller than the reflection count the remaining reflections wrap around
/// onto already chosen samples; only the last one written is kept, and
/// `capped` reports it.
inline Dataset inject_one_each(const Dataset& train, const std::vector<Image>& reflections, std::size_t y_adv,
                               bool target_only, const KernelParamRanges& ranges, const RngStream& rng,
                               std::optional<KernelType> type, bool* capped = nullptr) {
  std::vector<std::size_t> pool;
  if (target_only) pool = train.indices_of(y_adv);
  else {
    pool.resize(train.size());
    std::iota(pool.begin(), pool.end(), std::size_t{0});
  }
  if (pool.empty()) fail_data("no samples available for injection");
  RngStream pick = rng.child(0);
  const std::size_t n_inject = std::min(reflections.size(), pool.size());
  if (capped) *capped = reflections.size() > pool.size();
  const auto chosen = pick.sample_indices(pool.size(), n_inject);
  Dataset out = train;
  for (std::size_t r = 0; r < reflections.size(); ++r) {
    const std::size_t idx = pool[chosen[r % n_inject]];
    RngStream k = rng.child(1 + r);
    out.items[idx].image = compose(train.items[idx].image, reflections[r], sample_kernel(ranges, k, type));
  }
  return out;
}

inline SelectionResult select_reflections(const Dataset& train, const CandidateSet& cand, const Dataset& val,
                                          const SelectionConfig& cfg, const KernelParamRanges& ranges,
                                          const SelectionTrainer& trainer = default_selection_trainer()) {
  ranges.validate();
  train.validate();
  if (cfg.m == 0) fail_usage("selection size m must be positive");
  if (cand.size() < cfg.m)
    fail_data("candidate set has " + std::to_string(cand.size()) + " images, need at least m = " + std::to_string(cfg.m));
  if (cfg.y_adv >= train.class_count) fail_usage("target class out of range");
  for (const auto& it : val.items)
    if (it.label == cfg.y_adv) fail_data("validation set must not contain target-class samples");

  SelectionResult res;
  std::vector<double> w(cand.size(), 1.0);
  std::vector<std::size_t> selected;
  if (cfg.initial) {
    selected = *cfg.initial;
    std::vector<std::size_t> check = selected;
    std::sort(check.begin(), check.end());
    if (selected.size() != cfg.m || std::adjacent_find(check.begin(), check.end()) != check.end() ||
        (!check.empty() && check.back() >= cand.size()))
      fail_usage("initial selection must hold m distinct candidate indices");
  } else {
    RngStream init = derive_stream(cfg.seed, 0x53454CULL);
    selected = init.sample_indices(cand.size(), cfg.m);
    std::sort(selected.begin(), selected.end());
  }

  for (std::size_t t = 0; t < cfg.iterations; ++t) {
    const RngStream round = derive_stream(cfg.seed, 0x524F554E00ULL + t);
    std::vector<Image> r_adv;
    for (std::size_t i : selected) r_adv.push_back(cand.reflections[i]);

    bool capped = false;
    const Dataset poisoned =
        inject_one_each(train, r_adv, cfg.y_adv, cfg.inject_target_class_only, ranges, round.child(1), cfg.kernel_type, &capped);
    res.injection_capped = res.injection_capped || capped;

    ClassifierConfig tcfg = cfg.trainer;
    tcfg.seed = detail::mix64(cfg.seed ^ (0x5452414E00ULL + t));
    const std::unique_ptr<Classifier> f = trainer(poisoned, tcfg);

    const auto scores = score_reflections(*f, r_adv, val, ranges, cfg.y_adv, round.child(2), cfg.kernel_type);
    for (std::size_t k = 0; k < selected.size(); ++k) w[selected[k]] = scores[k];
    // Median of the freshly updated entries. Once every unselected entry
    // holds it, it is also the lower median of the whole of W.
    const double med = lower_median(scores);
    std::vector<bool> is_sel(cand.size(), false);
    for (std::size_t i : selected) is_sel[i] = true;
    for (std::size_t i = 0; i < w.size(); ++i)
      if (!is_sel[i]) w[i] = med;

    SelectionRound rec;
    rec.selected = selected;
    rec.scores = scores;
    rec.median = med;
    const double total = std::accumulate(scores.begin(), scores.end(), 0.0);
    rec.validation_asr = val.empty() ? 0.0 : total / (static_cast<double>(scores.size()) * static_cast<double>(val.size()));
    res.history.push_back(std::move(rec));

    selected = top_m(w, cfg.m);
  }

  res.selected = selected;
  res.scores = w;
  for (std::size_t i : selected) res.reflections.push_back(cand.reflections[i]);
  return res;
}

/// Validation ASR of a fixed reflection set, measured the way one selection
/// round does: inject each reflection once, train a fresh model with
/// `trainer` as given, and average the target-class hit counts over |R| * |val|.
inline double reflection_set_asr(const Dataset& train_set, const std::vector<Image>& reflections, const Dataset& val,
                                 const KernelParamRanges& ranges, std::size_t y_adv, const ClassifierConfig& trainer,
                                 const RngStream& rng, std::optional<KernelType> type = std::nullopt,
                                 bool target_only = true) {
  if (reflections.empty()) fail_data("reflection set is empty");
  if (val.empty()) fail_data("validation set is empty");
  const Dataset poisoned = inject_one_each(train_set, reflections, y_adv, target_only, ranges, rng.child(1), type);
  const ClassifierModel f = train(poisoned, trainer).model;
  const auto scores = score_reflections(f, reflections, val, ranges, y_adv, rng.child(2), type);
  return std::accumulate(scores.begin(), scores.end(), 0.0) /
         (static_cast<double>(reflections.size()) * static_cast<double>(val.size()));
}

inline nlohmann::json to_json(const SelectionResult& r, const CandidateSet& cand) {
  nlohmann::json hist = nlohmann::json::array();
  for (std::size_t t = 0; t < r.history.size(); ++t)
    hist.push_back({{"iteration", t},
                    {"selected", r.history[t].selected},
                    {"scores", r.history[t].scores},
                    {"median", r.history[t].median},
                    {"validation_asr", r.history[t].validation_asr}});
  std::vector<std::string> tags;
  for (std::size_t i : r.selected) tags.push_back(i < cand.tags.size() ? cand.tags[i] : std::to_string(i));
  return {{"selected", r.selected},
          {"selected_tags", tags},
          {"scores", r.scores},
          {"injection_capped", r.injection_capped},
          {"history", hist}};
}

}  // namespace refool
