#pragma once

// Attack evaluation: clean accuracy, attack success rate, confusion
// matrices, and the experiment drivers (single attack run, injection-rate
// and reflection-type sweeps, finetuning/pruning resistance, white-box
// trigger removal). Curves are emitted as CSV, reports as JSON.

#include <array>
#include <fstream>
#include <iomanip>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "refool/core.hpp"
#include "refool/imgio.hpp"
#include "refool/metrics.hpp"
#include "refool/model.hpp"
#include "refool/poison.hpp"
#include "refool/reflect.hpp"
#include "refool/serialize.hpp"
#include "refool/triggers.hpp"

namespace refool {

using ConfusionMatrix = std::vector<std::vector<std::size_t>>;

namespace detail {
inline std::vector<std::size_t> predictions(const Classifier& m, const Dataset& ds) {
  std::vector<Image> xs;
  xs.reserve(ds.size());
  for (const auto& it : ds.items) xs.push_back(it.image);
  return m.predict_many(xs);
}
}  // namespace detail

/// Rows are true classes, columns predicted classes.
inline ConfusionMatrix confusion_matrix(const Classifier& m, const Dataset& test) {
  if (test.empty()) fail_data("confusion_matrix: empty test set");
  const std::size_t k = test.class_count;
  ConfusionMatrix cm(k, std::vector<std::size_t>(k, 0));
  const auto preds = detail::predictions(m, test);
  for (std::size_t i = 0; i < test.size(); ++i) cm.at(test.items[i].label).at(preds[i])++;
  return cm;
}

inline double clean_accuracy(const Classifier& m, const Dataset& test) {
  if (test.empty()) fail_data("clean_accuracy: empty test set");
  const auto preds = detail::predictions(m, test);
  std::size_t hit = 0;
  for (std::size_t i = 0; i < test.size(); ++i) hit += preds[i] == test.items[i].label;
  return static_cast<double>(hit) / static_cast<double>(test.size());
}

/// Fraction of `triggered` predicted as y_adv.
inline double attack_success_rate(const Classifier& m, const Dataset& triggered, std::size_t y_adv) {
  if (triggered.empty()) fail_data("attack_success_rate: triggered set is empty");
  const auto preds = detail::predictions(m, triggered);
  return static_cast<double>(std::count(preds.begin(), preds.end(), y_adv)) / static_cast<double>(triggered.size());
}

struct EvalReport {
  double clean_accuracy = 0.0;
  double asr = 0.0;
  ConfusionMatrix confusion;            // clean test set
  ConfusionMatrix triggered_confusion;  // triggered test set
  std::vector<std::optional<double>> per_class_asr;  // by true class; empty for y_adv / absent classes
  std::size_t y_adv = 0;
  std::uint64_t seed = 0;
};

inline double trace_fraction(const ConfusionMatrix& cm) {
  std::size_t tr = 0, total = 0;
  for (std::size_t r = 0; r < cm.size(); ++r)
    for (std::size_t c = 0; c < cm[r].size(); ++c) {
      total += cm[r][c];
      if (r == c) tr += cm[r][c];
    }
  return total ? static_cast<double>(tr) / static_cast<double>(total) : 0.0;
}

inline EvalReport evaluate(const Classifier& m, const Dataset& clean_test, const Dataset& triggered, std::size_t y_adv,
                           std::uint64_t seed = 0) {
  EvalReport r;
  r.y_adv = y_adv;
  r.seed = seed;
  r.confusion = confusion_matrix(m, clean_test);
  r.clean_accuracy = trace_fraction(r.confusion);
  r.triggered_confusion = confusion_matrix(m, triggered);
  std::size_t hits = 0, total = 0;
  r.per_class_asr.assign(clean_test.class_count, std::nullopt);
  for (std::size_t c = 0; c < r.triggered_confusion.size(); ++c) {
    std::size_t row = 0;
    for (std::size_t v : r.triggered_confusion[c]) row += v;
    total += row;
    hits += r.triggered_confusion[c][y_adv];
    if (c != y_adv && row > 0)
      r.per_class_asr[c] = static_cast<double>(r.triggered_confusion[c][y_adv]) / static_cast<double>(row);
  }
  if (total == 0) fail_data("attack_success_rate: triggered set is empty");
  r.asr = static_cast<double>(hits) / static_cast<double>(total);
  return r;
}

// ---------------------------------------------------------------------------
// Experiments
// ---------------------------------------------------------------------------

/// Everything one attack run needs. R_adv is given directly (from a
/// selection run or any fixed set).
struct AttackBundle {
  Dataset train;
  Dataset test;
  std::vector<Image> reflections;
  KernelParamRanges ranges;
  std::optional<KernelType> kernel_type;  // unset: mix of the three models
  double in_class_rate = 0.4;
  ClassifierConfig trainer;
  std::size_t y_adv = 0;
  std::uint64_t seed = 0;
  bool asr_include_target = false;

  void validate() const {
    train.validate();
    test.validate();
    ranges.validate();
    trainer.validate();
    if (train.class_count != test.class_count) fail_data("train and test class counts differ");
    if (y_adv >= train.class_count) fail_usage("target class out of range");
    if (reflections.empty()) fail_data("reflection set is empty");
    if (!(in_class_rate >= 0.0 && in_class_rate <= 1.0)) fail_usage("in-class injection rate must lie in [0, 1]");
  }
};

// Stream ids under the bundle seed.
namespace stream {
inline constexpr std::uint64_t injection = 101;
inline constexpr std::uint64_t poison = 102;
inline constexpr std::uint64_t trainer = 103;
inline constexpr std::uint64_t trigger = 104;
inline constexpr std::uint64_t holdout = 105;
}  // namespace stream

/// Trainer config for the victim of a run with master seed `seed`.
inline ClassifierConfig victim_config(const ClassifierConfig& trainer, std::uint64_t seed) {
  ClassifierConfig cfg = trainer;
  cfg.seed = detail::mix64(seed ^ (stream::trainer << 32)) ^ trainer.seed;
  return cfg;
}

inline ClassifierConfig victim_config(const AttackBundle& b) { return victim_config(b.trainer, b.seed); }

struct PoisonedTraining {
  Dataset data;
  PoisonPlan plan;
  SimilarityReport similarity;      // mean over poisoned items
  std::array<std::size_t, 3> kernel_histogram{};
};

/// Chooses the injection set and poisons it. Injection sets are nested
/// across rates for a fixed seed (the same draw order is truncated).
inline PoisonedTraining poison_bundle_training(const AttackBundle& b) {
  RngStream pick = derive_stream(b.seed, stream::injection);
  const auto idx = choose_injection_set(b.train, b.y_adv, b.in_class_rate, pick);
  auto [data, plan] = poison_training_set(b.train, idx, b.reflections, b.ranges, derive_stream(b.seed, stream::poison),
                                          b.y_adv, b.kernel_type);
  PoisonedTraining out{std::move(data), std::move(plan), {}, {}};
  std::vector<SimilarityReport> sims(out.plan.entries.size());
  parallel_for(sims.size(), [&](std::size_t k) {
    const std::size_t i = out.plan.entries[k].index;
    sims[k] = similarity(b.train.items[i].image, out.data.items[i].image);
  });
  for (const auto& e : out.plan.entries) out.kernel_histogram[static_cast<std::size_t>(kernel_type(e.kernel))]++;
  out.similarity = mean_similarity(sims);
  return out;
}

inline TriggeredSet triggered_test(const AttackBundle& b) {
  return poison_test_set(b.test, b.reflections, b.ranges, b.y_adv, derive_stream(b.seed, stream::trigger),
                         b.kernel_type, b.asr_include_target);
}

struct ExperimentResult {
  EvalReport report;
  SimilarityReport similarity;
  PoisonPlan plan;
  ClassifierModel model;
  TrainLog log;
  std::array<std::size_t, 3> kernel_histogram{};
};

/// Poison, train the victim, evaluate on the clean and triggered test sets.
inline ExperimentResult run_attack_experiment(const AttackBundle& b) {
  b.validate();
  PoisonedTraining pt = poison_bundle_training(b);
  TrainResult tr = train(pt.data, victim_config(b));
  const TriggeredSet trig = triggered_test(b);
  ExperimentResult out;
  out.report = evaluate(tr.model, b.test, trig.data, b.y_adv, b.seed);
  out.similarity = pt.similarity;
  out.plan = std::move(pt.plan);
  out.model = std::move(tr.model);
  out.log = std::move(tr.log);
  out.kernel_histogram = pt.kernel_histogram;
  return out;
}

struct CurvePoint {
  double x = 0.0;
  double asr = 0.0;
  double clean_accuracy = 0.0;
  std::size_t extra = 0;  // poisoned count, zeroed units, ... depending on the curve
};

inline std::vector<CurvePoint> sweep_injection_rate(const AttackBundle& base, const std::vector<double>& rates) {
  if (!std::is_sorted(rates.begin(), rates.end())) fail_usage("injection rates must be sorted ascending");
  std::vector<CurvePoint> out;
  for (double rate : rates) {
    AttackBundle b = base;
    b.in_class_rate = rate;
    const ExperimentResult r = run_attack_experiment(b);
    out.push_back({rate, r.report.asr, r.report.clean_accuracy, r.plan.entries.size()});
  }
  return out;
}

struct TypeRow {
  std::string type;  // focal | defocus | ghost | mix
  double asr = 0.0;
  double clean_accuracy = 0.0;
  SimilarityReport similarity;
  std::array<std::size_t, 3> kernel_histogram{};
};

inline std::vector<TypeRow> sweep_reflection_type(const AttackBundle& base) {
  std::vector<TypeRow> rows;
  const std::array<std::optional<KernelType>, 4> types{KernelType::focal, KernelType::defocus, KernelType::ghost,
                                                       std::nullopt};
  for (const auto& t : types) {
    AttackBundle b = base;
    b.kernel_type = t;
    const ExperimentResult r = run_attack_experiment(b);
    rows.push_back({t ? to_string(*t) : "mix", r.report.asr, r.report.clean_accuracy, r.similarity, r.kernel_histogram});
  }
  return rows;
}

/// Trains the victim with a clean stratified holdout (holdout_fraction of
/// the training set) left out, then finetunes only the last layer on the
/// holdout. Point e is the state after e finetuning epochs.
inline std::vector<CurvePoint> finetune_resistance(const AttackBundle& base, double holdout_fraction = 0.1,
                                                   int epochs = 20, double lr = 1e-4) {
  base.validate();
  if (!(holdout_fraction > 0.0 && holdout_fraction < 1.0)) fail_usage("holdout fraction must lie in (0, 1)");
  auto [finetune_set, rest] =
      split(base.train, SplitSpec{holdout_fraction, 1.0 - holdout_fraction, detail::mix64(base.seed ^ stream::holdout)});
  AttackBundle b = base;
  b.train = std::move(rest);
  const ExperimentResult r = run_attack_experiment(b);
  const TriggeredSet trig = triggered_test(b);

  std::vector<CurvePoint> out{{0.0, r.report.asr, r.report.clean_accuracy, 0}};
  ClassifierConfig ft = victim_config(b);
  ft.epochs = epochs;
  ft.learning_rate = lr;
  ft.seed ^= 0x46494E45ULL;
  finetune_last_layer(r.model, finetune_set, ft, [&](int epoch, const ClassifierModel& m) {
    out.push_back({static_cast<double>(epoch), attack_success_rate(m, trig.data, b.y_adv), clean_accuracy(m, b.test),
                   0});
  });
  return out;
}

/// Prunes the trained victim at each fraction (ranking units once on the
/// clean training set, so larger fractions prune supersets).
inline std::vector<CurvePoint> prune_resistance(const AttackBundle& base, const std::vector<double>& fractions) {
  base.validate();
  if (base.trainer.architecture != Architecture::mlp) fail_usage("prune resistance needs an mlp victim");
  for (double f : fractions)
    if (!(f >= 0.0 && f <= 0.9)) fail_usage("prune fractions must lie in [0, 0.9]");
  const ExperimentResult r = run_attack_experiment(base);
  const TriggeredSet trig = triggered_test(base);
  std::vector<CurvePoint> out;
  for (double f : fractions) {
    const ClassifierModel pruned = prune_units(r.model, base.train, f);
    out.push_back({f, attack_success_rate(pruned, trig.data, base.y_adv), clean_accuracy(pruned, base.test),
                   pruned.zeroed_units()});
  }
  return out;
}

enum class AttackKind { badnets, sig, refool };

inline AttackKind parse_attack(const std::string& s) {
  if (s == "badnets") return AttackKind::badnets;
  if (s == "sig") return AttackKind::sig;
  if (s == "refool") return AttackKind::refool;
  fail_usage("unknown attack '" + s + "' (expected badnets, sig or refool)");
}

inline const char* to_string(AttackKind a) {
  switch (a) {
    case AttackKind::badnets: return "badnets";
    case AttackKind::sig: return "sig";
    case AttackKind::refool: return "refool";
  }
  return "?";
}

struct RemovalResult {
  AttackKind attack = AttackKind::refool;
  double asr_before = 0.0;
  double asr_after = 0.0;
  double clean_before = 0.0;
  double clean_after = 0.0;
  std::size_t poisoned = 0;
};

/// Poisons the injection set with the chosen attack, trains, then applies
/// the white-box removal to the poisoned training items and retrains with
/// the same trainer config. ASR is measured on the same triggered test set
/// both times. Reflection removal is the identity here.
inline RemovalResult trigger_removal_experiment(const AttackBundle& b, AttackKind attack) {
  b.validate();
  RngStream pick = derive_stream(b.seed, stream::injection);
  const auto idx = choose_injection_set(b.train, b.y_adv, b.in_class_rate, pick);

  Dataset poisoned = b.train;
  Dataset triggered = b.test.empty_like();
  const auto sig = SigParams{};
  const auto& first = b.train.items.front().image;
  const auto bad = BadnetsParams::for_image(first.width(), first.height());
  switch (attack) {
    case AttackKind::refool: {
      poisoned = poison_training_set(b.train, idx, b.reflections, b.ranges, derive_stream(b.seed, stream::poison),
                                     b.y_adv, b.kernel_type)
                     .first;
      triggered = triggered_test(b).data;
      break;
    }
    case AttackKind::sig:
    case AttackKind::badnets: {
      auto apply = [&](const Image& x) { return attack == AttackKind::sig ? sig_trigger(x, sig) : badnets_trigger(x, bad); };
      for (std::size_t i : idx) poisoned.items[i].image = apply(b.train.items[i].image);
      for (const auto& it : b.test.items)
        if (b.asr_include_target || it.label != b.y_adv) triggered.items.push_back({apply(it.image), it.label});
      break;
    }
  }

  Dataset cleaned = poisoned;
  for (std::size_t i : idx) {
    if (attack == AttackKind::sig) cleaned.items[i].image = sig_remove(poisoned.items[i].image, sig);
    else if (attack == AttackKind::badnets) cleaned.items[i].image = badnets_remove(poisoned.items[i].image, bad);
  }

  const ClassifierConfig cfg = victim_config(b);
  const TrainResult before = train(poisoned, cfg);
  const TrainResult after = train(cleaned, cfg);
  RemovalResult r;
  r.attack = attack;
  r.poisoned = idx.size();
  r.asr_before = attack_success_rate(before.model, triggered, b.y_adv);
  r.asr_after = attack_success_rate(after.model, triggered, b.y_adv);
  r.clean_before = clean_accuracy(before.model, b.test);
  r.clean_after = clean_accuracy(after.model, b.test);
  return r;
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

inline nlohmann::json number_or_inf(double v) {
  if (std::isfinite(v)) return v;
  return v > 0 ? "inf" : "-inf";
}

inline nlohmann::json to_json(const SimilarityReport& s) {
  return {{"mse", s.mse}, {"psnr", number_or_inf(s.psnr)}, {"ssim", s.ssim}, {"l1", s.l1}, {"l2", s.l2},
          {"scale", "0-255"}, {"l2_formula", kL2Formula}};
}

inline nlohmann::json to_json(const EvalReport& r) {
  nlohmann::json per_class = nlohmann::json::array();
  for (const auto& v : r.per_class_asr) per_class.push_back(v ? nlohmann::json(*v) : nlohmann::json(nullptr));
  return {{"clean_accuracy", r.clean_accuracy},
          {"asr", r.asr},
          {"y_adv", r.y_adv},
          {"confusion_matrix", r.confusion},
          {"triggered_confusion_matrix", r.triggered_confusion},
          {"per_class_asr", per_class},
          {"seed", r.seed},
          {"rng", RngStream::kAlgorithm}};
}

inline std::string format_number(double v) {
  if (!std::isfinite(v)) return v > 0 ? "inf" : (v < 0 ? "-inf" : "nan");
  std::ostringstream os;
  os << std::setprecision(10) << v;
  return os.str();
}

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::string str() const {
    std::string out;
    auto line = [&](const std::vector<std::string>& cells) {
      for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i) out += ',';
        out += cells[i];
      }
      out += '\n';
    };
    line(header);
    for (const auto& r : rows) line(r);
    return out;
  }
};

/// An empty extra_name drops the last column.
inline CsvTable curve_csv(const std::vector<CurvePoint>& pts, const std::string& x_name,
                          const std::string& extra_name = "") {
  CsvTable t{{x_name, "asr", "clean_accuracy"}, {}};
  if (!extra_name.empty()) t.header.push_back(extra_name);
  for (const auto& p : pts) {
    t.rows.push_back({format_number(p.x), format_number(p.asr), format_number(p.clean_accuracy)});
    if (!extra_name.empty()) t.rows.back().push_back(std::to_string(p.extra));
  }
  return t;
}

inline CsvTable type_csv(const std::vector<TypeRow>& rows) {
  CsvTable t{{"type", "asr", "clean_accuracy", "ssim", "psnr", "mse", "l1", "l2", "n_focal", "n_defocus", "n_ghost"}, {}};
  for (const auto& r : rows)
    t.rows.push_back({r.type, format_number(r.asr), format_number(r.clean_accuracy), format_number(r.similarity.ssim),
                      format_number(r.similarity.psnr), format_number(r.similarity.mse), format_number(r.similarity.l1),
                      format_number(r.similarity.l2), std::to_string(r.kernel_histogram[0]),
                      std::to_string(r.kernel_histogram[1]), std::to_string(r.kernel_histogram[2])});
  return t;
}

/// Writes via a temporary file and rename so readers never see partial output.
inline void write_text_atomic(const fs::path& path, const std::string& text) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary);
    if (!f) fail_data("cannot write " + tmp.string());
    f << text;
    if (!f) fail_data("cannot write " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) fail_data("cannot write " + path.string() + ": " + ec.message());
}

}  // namespace refool
