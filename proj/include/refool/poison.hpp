#pragma once

// Clean-label injection of reflections into target-class training images,
// test-time trigger application, and injection-rate accounting.

#include <optional>
#include <vector>

#include "json.hpp"

#include "refool/core.hpp"
#include "refool/parallel.hpp"
#include "refool/reflect.hpp"
#include "refool/serialize.hpp"

namespace refool {

struct PoisonEntry {
  std::size_t index = 0;         // position in the dataset
  std::size_t reflection_id = 0;  // position in R_adv
  ReflectionKernel kernel;
};

struct PoisonPlan {
  std::vector<PoisonEntry> entries;
  std::size_t y_adv = 0;
  double in_class_rate = 0.0;
  double overall_rate = 0.0;
};

/// round(in_class_rate * |class y_adv|) distinct indices drawn uniformly
/// from class y_adv, returned in ascending order.
inline std::vector<std::size_t> choose_injection_set(const Dataset& ds, std::size_t y_adv, double in_class_rate,
                                                     RngStream& rng) {
  if (y_adv >= ds.class_count) fail_usage("target class out of range");
  if (!(in_class_rate >= 0.0 && in_class_rate <= 1.0)) fail_usage("in-class injection rate must lie in [0, 1]");
  const auto members = ds.indices_of(y_adv);
  const auto count = static_cast<std::size_t>(std::llround(in_class_rate * static_cast<double>(members.size())));
  std::vector<std::size_t> out;
  for (std::size_t k : rng.sample_indices(members.size(), count)) out.push_back(members[k]);
  std::sort(out.begin(), out.end());
  return out;
}

namespace detail {
inline void fill_rates(PoisonPlan& plan, const Dataset& ds) {
  const auto target = ds.indices_of(plan.y_adv).size();
  const auto n = static_cast<double>(plan.entries.size());
  plan.in_class_rate = target ? n / static_cast<double>(target) : 0.0;
  plan.overall_rate = ds.size() ? n / static_cast<double>(ds.size()) : 0.0;
}
}  // namespace detail

/// Applies a recorded plan: each listed item becomes compose(x, R_adv[id], k).
/// Every other item is copied unchanged, labels included.
inline Dataset apply_plan(const Dataset& ds, const PoisonPlan& plan, const std::vector<Image>& reflections) {
  Dataset out = ds;
  parallel_for(plan.entries.size(), [&](std::size_t k) {
    const PoisonEntry& e = plan.entries[k];
    out.items.at(e.index).image = compose(ds.items.at(e.index).image, reflections.at(e.reflection_id), e.kernel);
  });
  return out;
}

/// Poisons the items at `indices` (all of class y_adv): each receives a
/// reflection drawn uniformly with replacement from R_adv and a freshly
/// sampled kernel. Item k draws from rng.child(k), so the plan does not
/// depend on evaluation order.
inline std::pair<Dataset, PoisonPlan> poison_training_set(const Dataset& ds, const std::vector<std::size_t>& indices,
                                                          const std::vector<Image>& reflections,
                                                          const KernelParamRanges& ranges, const RngStream& rng,
                                                          std::size_t y_adv,
                                                          std::optional<KernelType> type = std::nullopt) {
  ranges.validate();
  if (y_adv >= ds.class_count) fail_usage("target class out of range");
  PoisonPlan plan;
  plan.y_adv = y_adv;
  if (!indices.empty() && reflections.empty()) fail_data("reflection set is empty");
  std::vector<std::size_t> seen = indices;
  std::sort(seen.begin(), seen.end());
  if (std::adjacent_find(seen.begin(), seen.end()) != seen.end()) fail_data("injection indices are not distinct");
  for (std::size_t k = 0; k < indices.size(); ++k) {
    const std::size_t i = indices[k];
    if (ds.items.at(i).label != y_adv) fail_data("injection index " + std::to_string(i) + " is not of the target class");
    RngStream item = rng.child(k);
    PoisonEntry e;
    e.index = i;
    e.reflection_id = static_cast<std::size_t>(item.below(reflections.size()));
    e.kernel = sample_kernel(ranges, item, type);
    plan.entries.push_back(e);
  }
  detail::fill_rates(plan, ds);
  return {apply_plan(ds, plan, reflections), std::move(plan)};
}

struct TriggeredSet {
  Dataset data;
  std::vector<std::size_t> source_indices;  // position of each item in the clean set
  std::vector<ReflectionKernel> kernels;
  std::vector<std::size_t> reflection_ids;
};

/// Adds a random reflection from R_adv to every test item. Items whose true
/// label is y_adv are dropped unless include_target is set.
inline TriggeredSet poison_test_set(const Dataset& ds, const std::vector<Image>& reflections,
                                    const KernelParamRanges& ranges, std::size_t y_adv, const RngStream& rng,
                                    std::optional<KernelType> type = std::nullopt, bool include_target = false) {
  ranges.validate();
  if (reflections.empty()) fail_data("reflection set is empty");
  TriggeredSet out;
  out.data = ds.empty_like();
  for (std::size_t i = 0; i < ds.size(); ++i)
    if (include_target || ds.items[i].label != y_adv) out.source_indices.push_back(i);
  const std::size_t n = out.source_indices.size();
  out.data.items.resize(n);
  out.kernels.resize(n);
  out.reflection_ids.resize(n);
  parallel_for(n, [&](std::size_t k) {
    const std::size_t i = out.source_indices[k];
    RngStream item = rng.child(i);
    out.reflection_ids[k] = static_cast<std::size_t>(item.below(reflections.size()));
    out.kernels[k] = sample_kernel(ranges, item, type);
    out.data.items[k] = {compose(ds.items[i].image, reflections[out.reflection_ids[k]], out.kernels[k]),
                         ds.items[i].label};
  });
  return out;
}

// ---------------------------------------------------------------------------
// JSON
// ---------------------------------------------------------------------------

inline nlohmann::json to_json(const PoisonPlan& plan) {
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& e : plan.entries)
    entries.push_back({{"index", e.index}, {"reflection_id", e.reflection_id}, {"kernel", kernel_to_json(e.kernel)}});
  return {{"y_adv", plan.y_adv},
          {"poisoned_count", plan.entries.size()},
          {"in_class_rate", plan.in_class_rate},
          {"overall_rate", plan.overall_rate},
          {"entries", entries}};
}

inline PoisonPlan plan_from_json(const nlohmann::json& j) {
  PoisonPlan plan;
  try {
    plan.y_adv = j.at("y_adv").get<std::size_t>();
    plan.in_class_rate = j.at("in_class_rate").get<double>();
    plan.overall_rate = j.at("overall_rate").get<double>();
    for (const auto& e : j.at("entries"))
      plan.entries.push_back({e.at("index").get<std::size_t>(), e.at("reflection_id").get<std::size_t>(),
                              kernel_from_json(e.at("kernel"))});
  } catch (const nlohmann::json::exception& ex) {
    fail_data(std::string("malformed poison plan: ") + ex.what());
  }
  return plan;
}

}  // namespace refool
