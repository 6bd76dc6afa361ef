#pragma once

// Command-line front end. Every subcommand reads one RunConfig (JSON,
// unknown keys rejected), writes its outputs under --out together with the
// fully resolved config, and maps errors to exit codes:
//   0 success, 1 usage, 2 data, 3 numeric.
// Errors are reported as a single JSON line on stderr.

#include <chrono>
#include <ctime>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "refool/core.hpp"
#include "refool/eval.hpp"
#include "refool/imgio.hpp"
#include "refool/metrics.hpp"
#include "refool/model.hpp"
#include "refool/parallel.hpp"
#include "refool/poison.hpp"
#include "refool/select.hpp"
#include "refool/serialize.hpp"

namespace refool {

using json = nlohmann::json;

struct DatasetSection {
  std::size_t classes = 8;
  std::size_t per_class = 300;
  int side = 32;
  std::optional<std::uint64_t> seed;  // unset: the run seed
  double train_fraction = 0.8;
  double test_fraction = 0.2;
  std::size_t wild_count = 400;
  std::uint64_t wild_seed = 7;
};

struct SelectionSection {
  std::size_t candidates = 100;
  std::size_t m = 20;
  std::size_t iterations = 9;
  std::size_t val_per_class = 20;
  bool inject_target_class_only = true;
};

struct PoisonSection {
  std::size_t y_adv = 0;
  double in_class_rate = 0.4;
  std::string kernel_type = "mix";  // focal | defocus | ghost | mix
};

struct EvalSection {
  bool asr_include_target = false;
  std::vector<double> rates{0.0, 0.1, 0.2, 0.3, 0.4};
  std::vector<double> prune_fractions{0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
  double holdout_fraction = 0.1;
  int finetune_epochs = 20;
  double finetune_lr = 1e-4;
  std::string attack = "refool";  // badnets | sig | refool | all
};

struct RunConfig {
  DatasetSection dataset;
  KernelParamRanges ranges;
  SelectionSection selection;
  PoisonSection poison;
  ClassifierConfig trainer;
  EvalSection eval;
  std::uint64_t seed = 1;

  std::uint64_t dataset_seed() const { return dataset.seed.value_or(seed); }

  std::optional<KernelType> kernel_type() const {
    if (poison.kernel_type == "mix") return std::nullopt;
    return parse_kernel_type(poison.kernel_type);
  }
};

namespace detail {

// Reads one JSON object, rejecting keys it was not asked about.
class Section {
 public:
  Section(const json& j, std::string name) : j_(j), name_(std::move(name)) {
    if (!j_.is_object()) fail_usage("config section '" + name_ + "' must be an object");
  }

  void mark(const char* key) { seen_.insert(key); }

  template <class T>
  void get(const char* key, std::optional<T>& out) {
    if (!j_.contains(key)) {
      seen_.insert(key);
      return;
    }
    T v{};
    get(key, v);
    out = v;
  }

  template <class T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception&) {
      fail_usage("config key '" + name_ + "." + key + "' has the wrong type");
    }
  }

  void interval(const char* key, Interval& out) {
    std::vector<double> v{out.lo, out.hi};
    get(key, v);
    if (v.size() != 2) fail_usage("config key '" + name_ + "." + key + "' must be [lo, hi]");
    out = {v[0], v[1]};
  }

  void int_interval(const char* key, IntInterval& out) {
    std::vector<int> v{out.lo, out.hi};
    get(key, v);
    if (v.size() != 2) fail_usage("config key '" + name_ + "." + key + "' must be [lo, hi]");
    out = {v[0], v[1]};
  }

  void finish() const {
    for (const auto& [k, _] : j_.items())
      if (!seen_.count(k)) fail_usage("unknown config key '" + (name_.empty() ? k : name_ + "." + k) + "'");
  }

 private:
  const json& j_;
  std::string name_;
  std::set<std::string> seen_;
};

}  // namespace detail

inline RunConfig config_from_json(const json& j) {
  RunConfig c;
  detail::Section top(j, "");
  static const json empty = json::object();
  auto sub = [&](const char* name) -> const json& {
    top.mark(name);
    return j.contains(name) ? j.at(name) : empty;
  };
  top.get("seed", c.seed);

  detail::Section d(sub("dataset"), "dataset");
  d.get("classes", c.dataset.classes);
  d.get("per_class", c.dataset.per_class);
  d.get("side", c.dataset.side);
  d.get("seed", c.dataset.seed);
  d.get("train_fraction", c.dataset.train_fraction);
  d.get("test_fraction", c.dataset.test_fraction);
  d.get("wild_count", c.dataset.wild_count);
  d.get("wild_seed", c.dataset.wild_seed);
  d.finish();

  detail::Section r(sub("ranges"), "ranges");
  r.interval("focal_alpha", c.ranges.focal_alpha);
  r.interval("defocus_sigma", c.ranges.defocus_sigma);
  r.interval("ghost_alpha", c.ranges.ghost_alpha);
  r.int_interval("ghost_delta", c.ranges.ghost_delta);
  r.get("ghost_attenuation", c.ranges.ghost_attenuation);
  r.finish();

  detail::Section s(sub("selection"), "selection");
  s.get("candidates", c.selection.candidates);
  s.get("m", c.selection.m);
  s.get("iterations", c.selection.iterations);
  s.get("val_per_class", c.selection.val_per_class);
  s.get("inject_target_class_only", c.selection.inject_target_class_only);
  s.finish();

  detail::Section p(sub("poison"), "poison");
  p.get("y_adv", c.poison.y_adv);
  p.get("in_class_rate", c.poison.in_class_rate);
  p.get("kernel_type", c.poison.kernel_type);
  p.finish();

  detail::Section t(sub("trainer"), "trainer");
  std::string arch = to_string(c.trainer.architecture);
  t.get("architecture", arch);
  c.trainer.architecture = parse_architecture(arch);
  t.get("hidden_units", c.trainer.hidden_units);
  t.get("input_side", c.trainer.input_side);
  t.get("learning_rate", c.trainer.learning_rate);
  t.get("momentum", c.trainer.momentum);
  t.get("weight_decay", c.trainer.weight_decay);
  t.get("batch_size", c.trainer.batch_size);
  t.get("epochs", c.trainer.epochs);
  t.get("seed", c.trainer.seed);
  t.get("lr_decay_steps", c.trainer.lr_decay_steps);
  t.get("augment", c.trainer.augment);
  t.get("max_rotation", c.trainer.max_rotation);
  t.get("crop_fraction", c.trainer.crop_fraction);
  t.finish();

  detail::Section e(sub("eval"), "eval");
  e.get("asr_include_target", c.eval.asr_include_target);
  e.get("rates", c.eval.rates);
  e.get("prune_fractions", c.eval.prune_fractions);
  e.get("holdout_fraction", c.eval.holdout_fraction);
  e.get("finetune_epochs", c.eval.finetune_epochs);
  e.get("finetune_lr", c.eval.finetune_lr);
  e.get("attack", c.eval.attack);
  e.finish();

  top.finish();

  c.ranges.validate();
  c.trainer.validate();
  if (c.poison.kernel_type != "mix") (void)parse_kernel_type(c.poison.kernel_type);
  if (c.eval.attack != "all") (void)parse_attack(c.eval.attack);
  return c;
}

/// Every field, defaults expanded.
inline json to_json(const RunConfig& c) {
  const auto& t = c.trainer;
  return {
      {"seed", c.seed},
      {"dataset",
       {{"classes", c.dataset.classes},
        {"per_class", c.dataset.per_class},
        {"side", c.dataset.side},
        {"seed", c.dataset_seed()},
        {"train_fraction", c.dataset.train_fraction},
        {"test_fraction", c.dataset.test_fraction},
        {"wild_count", c.dataset.wild_count},
        {"wild_seed", c.dataset.wild_seed}}},
      {"ranges", ranges_to_json(c.ranges)},
      {"selection",
       {{"candidates", c.selection.candidates},
        {"m", c.selection.m},
        {"iterations", c.selection.iterations},
        {"val_per_class", c.selection.val_per_class},
        {"inject_target_class_only", c.selection.inject_target_class_only}}},
      {"poison",
       {{"y_adv", c.poison.y_adv}, {"in_class_rate", c.poison.in_class_rate}, {"kernel_type", c.poison.kernel_type}}},
      {"trainer",
       {{"architecture", to_string(t.architecture)},
        {"hidden_units", t.hidden_units},
        {"input_side", t.input_side},
        {"learning_rate", t.learning_rate},
        {"momentum", t.momentum},
        {"weight_decay", t.weight_decay},
        {"batch_size", t.batch_size},
        {"epochs", t.epochs},
        {"seed", t.seed},
        {"lr_decay_steps", t.lr_decay_steps},
        {"augment", t.augment},
        {"max_rotation", t.max_rotation},
        {"crop_fraction", t.crop_fraction}}},
      {"eval",
       {{"asr_include_target", c.eval.asr_include_target},
        {"rates", c.eval.rates},
        {"prune_fractions", c.eval.prune_fractions},
        {"holdout_fraction", c.eval.holdout_fraction},
        {"finetune_epochs", c.eval.finetune_epochs},
        {"finetune_lr", c.eval.finetune_lr},
        {"attack", c.eval.attack}}},
  };
}

inline RunConfig load_config(const fs::path& path) {
  std::ifstream f(path);
  if (!f) fail_usage("cannot read config " + path.string());
  json j;
  try {
    j = json::parse(f);
  } catch (const json::exception& ex) {
    fail_usage("config " + path.string() + " is not valid JSON: " + ex.what());
  }
  return config_from_json(j);
}

namespace detail {

inline std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// The only non-deterministic field of any report.
inline json stamped(json report) {
  report["timestamp"] = utc_timestamp();
  report["version"] = kVersion;
  return report;
}

inline void write_json(const fs::path& path, const json& j) { write_text_atomic(path, j.dump(2) + "\n"); }

struct Context {
  RunConfig cfg;
  fs::path out;
  std::ostream* log = nullptr;

  fs::path prepare_out() const {
    if (out.empty()) fail_usage("--out is required");
    std::error_code ec;
    fs::create_directories(out, ec);
    if (ec || !fs::is_directory(out)) fail_data("cannot create output directory " + out.string());
    write_json(out / "resolved_config.json", to_json(cfg));
    return out;
  }
};

inline Dataset load_split(const fs::path& data, const char* part, const RunConfig& cfg) {
  if (data.empty()) fail_usage("--data is required");
  return load_dataset(data / part, cfg.dataset.side);
}

// R_adv from --reflections, else a random-m draw from <data>/wild.
inline std::vector<Image> load_reflections(const fs::path& dir, const fs::path& data, const RunConfig& cfg) {
  std::vector<Image> imgs;
  if (!dir.empty()) {
    imgs = load_images(dir);
  } else {
    if (data.empty()) fail_usage("--reflections or --data with a wild/ folder is required");
    imgs = build_candidate_set(load_images(data / "wild"), cfg.selection.m, cfg.seed).reflections;
  }
  if (imgs.empty()) fail_data("no reflection images found");
  return imgs;
}

inline AttackBundle make_bundle(const RunConfig& cfg, Dataset train, Dataset test, std::vector<Image> reflections) {
  AttackBundle b;
  b.train = std::move(train);
  b.test = std::move(test);
  b.reflections = std::move(reflections);
  b.ranges = cfg.ranges;
  b.kernel_type = cfg.kernel_type();
  b.in_class_rate = cfg.poison.in_class_rate;
  b.trainer = cfg.trainer;
  b.y_adv = cfg.poison.y_adv;
  b.seed = cfg.seed;
  b.asr_include_target = cfg.eval.asr_include_target;
  return b;
}

// "0-0.4_n5" for a sweep grid, used in output file names.
inline std::string grid_tag(const std::vector<double>& grid) {
  if (grid.empty()) return "empty";
  return format_number(grid.front()) + "-" + format_number(grid.back()) + "_n" + std::to_string(grid.size());
}

inline json train_log_json(const TrainLog& log) { return {{"loss", log.loss}, {"accuracy", log.accuracy}}; }

inline json curve_json(const std::vector<CurvePoint>& pts, const std::string& x, const std::string& extra) {
  json a = json::array();
  for (const auto& p : pts) {
    json row{{x, p.x}, {"asr", p.asr}, {"clean_accuracy", p.clean_accuracy}};
    if (!extra.empty()) row[extra] = p.extra;
    a.push_back(row);
  }
  return a;
}

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

inline void cmd_synth(const Context& ctx) {
  const RunConfig& c = ctx.cfg;
  const fs::path out = ctx.prepare_out();
  const Dataset all = synth_dataset(c.dataset.classes, c.dataset.per_class, c.dataset.side, c.dataset_seed());
  auto [train_set, test_set] = split(all, SplitSpec{c.dataset.train_fraction, c.dataset.test_fraction, c.dataset_seed()});
  save_dataset(train_set, out / "train");
  save_dataset(test_set, out / "test");
  save_images(synth_wild_images(c.dataset.wild_count, c.dataset.side, c.dataset.wild_seed), out / "wild");
  write_json(out / "dataset.json", stamped({{"train", train_set.size()},
                                            {"test", test_set.size()},
                                            {"wild", c.dataset.wild_count},
                                            {"classes", all.class_count},
                                            {"train_class_counts", train_set.class_counts()},
                                            {"test_class_counts", test_set.class_counts()}}));
  *ctx.log << "synth-data: " << train_set.size() << " train, " << test_set.size() << " test, " << c.dataset.wild_count
           << " wild -> " << out.string() << "\n";
}

inline void cmd_select(const Context& ctx, const fs::path& data, const fs::path& candidates) {
  const RunConfig& c = ctx.cfg;
  const Dataset train_set = load_split(data, "train", c);
  const CandidateSet cand = candidates.empty() ? build_candidate_set(data / "wild", c.selection.candidates, c.seed)
                                               : build_candidate_set(candidates, c.selection.candidates, c.seed);
  const Dataset val = build_validation_set(train_set, c.poison.y_adv, c.selection.val_per_class, c.seed);
  SelectionConfig sc;
  sc.m = c.selection.m;
  sc.iterations = c.selection.iterations;
  sc.y_adv = c.poison.y_adv;
  sc.inject_target_class_only = c.selection.inject_target_class_only;
  sc.kernel_type = c.kernel_type();
  sc.trainer = c.trainer;
  sc.seed = c.seed;
  const SelectionResult res = select_reflections(train_set, cand, val, sc, c.ranges);
  const fs::path out = ctx.prepare_out();
  save_images(res.reflections, out / "reflections");
  write_json(out / "selection.json", stamped(to_json(res, cand)));
  *ctx.log << "select: " << res.selected.size() << " of " << cand.size() << " candidates after " << res.history.size()
           << " iterations -> " << (out / "reflections").string() << "\n";
}

inline void cmd_poison(const Context& ctx, const fs::path& data, const fs::path& refl) {
  const RunConfig& c = ctx.cfg;
  Dataset train_set = load_split(data, "train", c);
  AttackBundle b = make_bundle(c, std::move(train_set), Dataset{}, load_reflections(refl, data, c));
  b.train.validate();
  const PoisonedTraining pt = poison_bundle_training(b);
  const fs::path out = ctx.prepare_out();
  save_dataset(pt.data, out / "train");
  json plan = to_json(pt.plan);
  plan["similarity"] = to_json(pt.similarity);
  plan["kernel_histogram"] = pt.kernel_histogram;
  write_json(out / "plan.json", stamped(plan));
  *ctx.log << "poison: " << pt.plan.entries.size() << " images (in-class " << format_number(pt.plan.in_class_rate)
           << ", overall " << format_number(pt.plan.overall_rate) << ") -> " << out.string() << "\n";
}

inline void cmd_train(const Context& ctx, const fs::path& data) {
  const RunConfig& c = ctx.cfg;
  const Dataset train_set = load_split(data, "train", c);
  const TrainResult tr = train(train_set, victim_config(c.trainer, c.seed));
  const fs::path out = ctx.prepare_out();
  save_model(tr.model, out / "model.bin");
  write_json(out / "train_log.json", stamped(train_log_json(tr.log)));
  *ctx.log << "train: final loss " << format_number(tr.log.loss.back()) << ", train accuracy "
           << format_number(tr.log.accuracy.back()) << " -> " << (out / "model.bin").string() << "\n";
}

inline void cmd_eval(const Context& ctx, const fs::path& model_path, const fs::path& data, const fs::path& refl) {
  const RunConfig& c = ctx.cfg;
  if (model_path.empty()) fail_usage("--model is required");
  const ClassifierModel model = load_model(model_path);
  const Dataset test_set = load_split(data, "test", c);
  const auto reflections = load_reflections(refl, data, c);
  const TriggeredSet trig = poison_test_set(test_set, reflections, c.ranges, c.poison.y_adv,
                                            derive_stream(c.seed, stream::trigger), c.kernel_type(),
                                            c.eval.asr_include_target);
  const EvalReport rep = evaluate(model, test_set, trig.data, c.poison.y_adv, c.seed);
  const fs::path out = ctx.prepare_out();
  write_json(out / "report.json", stamped(to_json(rep)));
  *ctx.log << "eval: clean accuracy " << format_number(rep.clean_accuracy) << ", asr " << format_number(rep.asr)
           << "\n";
}

inline void cmd_sweep(const Context& ctx, const std::string& what, const fs::path& data, const fs::path& refl) {
  const RunConfig& c = ctx.cfg;
  const AttackBundle b =
      make_bundle(c, load_split(data, "train", c), load_split(data, "test", c), load_reflections(refl, data, c));
  if (what == "rate") {
    const auto pts = sweep_injection_rate(b, c.eval.rates);
    const fs::path out = ctx.prepare_out();
    const fs::path csv = out / ("rate_curve_" + grid_tag(c.eval.rates) + ".csv");
    write_text_atomic(csv, curve_csv(pts, "in_class_rate", "poisoned").str());
    write_json(out / "sweep.json", stamped({{"curve", curve_json(pts, "in_class_rate", "poisoned")}}));
    *ctx.log << "sweep rate: " << pts.size() << " points -> " << csv.string() << "\n";
  } else if (what == "type") {
    const auto rows = sweep_reflection_type(b);
    const fs::path out = ctx.prepare_out();
    write_text_atomic(out / "type_table.csv", type_csv(rows).str());
    json a = json::array();
    for (const auto& r : rows)
      a.push_back({{"type", r.type},
                   {"asr", r.asr},
                   {"clean_accuracy", r.clean_accuracy},
                   {"similarity", to_json(r.similarity)},
                   {"kernel_histogram", r.kernel_histogram}});
    write_json(out / "sweep.json", stamped({{"types", a}}));
    *ctx.log << "sweep type: " << rows.size() << " rows -> " << (out / "type_table.csv").string() << "\n";
  } else {
    fail_usage("sweep expects 'rate' or 'type', got '" + what + "'");
  }
}

inline void cmd_defend(const Context& ctx, const std::string& what, const fs::path& data, const fs::path& refl,
                       const std::string& attack_opt) {
  const RunConfig& c = ctx.cfg;
  if (what != "finetune" && what != "prune" && what != "removal")
    fail_usage("defend expects 'finetune', 'prune' or 'removal', got '" + what + "'");
  const AttackBundle b =
      make_bundle(c, load_split(data, "train", c), load_split(data, "test", c), load_reflections(refl, data, c));
  if (what == "finetune") {
    const auto pts = finetune_resistance(b, c.eval.holdout_fraction, c.eval.finetune_epochs, c.eval.finetune_lr);
    const fs::path out = ctx.prepare_out();
    write_text_atomic(out / ("finetune_curve_e" + std::to_string(c.eval.finetune_epochs) + "_lr" +
                             format_number(c.eval.finetune_lr) + ".csv"),
                      curve_csv(pts, "epoch").str());
    write_json(out / "defense.json", stamped({{"defense", "finetune"}, {"curve", curve_json(pts, "epoch", "")}}));
    *ctx.log << "defend finetune: asr " << format_number(pts.front().asr) << " -> " << format_number(pts.back().asr)
             << "\n";
  } else if (what == "prune") {
    const auto pts = prune_resistance(b, c.eval.prune_fractions);
    const fs::path out = ctx.prepare_out();
    write_text_atomic(out / ("prune_curve_" + grid_tag(c.eval.prune_fractions) + ".csv"),
                      curve_csv(pts, "fraction", "zeroed_units").str());
    write_json(out / "defense.json",
               stamped({{"defense", "prune"}, {"curve", curve_json(pts, "fraction", "zeroed_units")}}));
    *ctx.log << "defend prune: " << pts.size() << " points\n";
  } else {
    const std::string which = attack_opt.empty() ? c.eval.attack : attack_opt;
    std::vector<AttackKind> kinds;
    if (which == "all") kinds = {AttackKind::badnets, AttackKind::sig, AttackKind::refool};
    else kinds = {parse_attack(which)};
    CsvTable t{{"attack", "asr_before", "asr_after", "clean_before", "clean_after", "poisoned"}, {}};
    json a = json::array();
    for (AttackKind k : kinds) {
      const RemovalResult r = trigger_removal_experiment(b, k);
      t.rows.push_back({to_string(k), format_number(r.asr_before), format_number(r.asr_after),
                        format_number(r.clean_before), format_number(r.clean_after), std::to_string(r.poisoned)});
      a.push_back({{"attack", to_string(k)},
                   {"asr_before", r.asr_before},
                   {"asr_after", r.asr_after},
                   {"clean_before", r.clean_before},
                   {"clean_after", r.clean_after},
                   {"poisoned", r.poisoned}});
    }
    const fs::path out = ctx.prepare_out();
    const fs::path csv = out / ("removal_" + which + ".csv");
    write_text_atomic(csv, t.str());
    write_json(out / "defense.json", stamped({{"defense", "removal"}, {"results", a}}));
    *ctx.log << "defend removal: " << kinds.size() << " attack(s) -> " << csv.string() << "\n";
  }
}

inline void cmd_metrics(const Context& ctx, const fs::path& a, const fs::path& b) {
  if (a.empty() || b.empty()) fail_usage("metrics needs --a and --b");
  std::vector<Image> xs, ys;
  if (fs::is_directory(a) && fs::is_directory(b)) {
    xs = load_images(a);
    ys = load_images(b);
  } else if (fs::is_regular_file(a) && fs::is_regular_file(b)) {
    xs = {read_png(a)};
    ys = {read_png(b)};
  } else {
    fail_data("metrics: --a and --b must both be PNG files or both be directories");
  }
  if (xs.size() != ys.size())
    fail_data("metrics: " + std::to_string(xs.size()) + " vs " + std::to_string(ys.size()) + " images");
  if (xs.empty()) fail_data("metrics: no images");
  std::vector<SimilarityReport> rs(xs.size());
  parallel_for(xs.size(), [&](std::size_t i) {
    const Image y = coerce_channels(ys[i], xs[i].channels());
    rs[i] = similarity(xs[i], y);
  });
  const SimilarityReport mean = mean_similarity(rs);
  json pairs = json::array();
  for (const auto& r : rs) pairs.push_back(to_json(r));
  const json rep{{"count", rs.size()}, {"mean", to_json(mean)}, {"pairs", pairs}};
  if (!ctx.out.empty()) {
    const fs::path out = ctx.prepare_out();
    write_json(out / "metrics.json", stamped(rep));
  }
  *ctx.log << "metrics: n=" << rs.size() << " mse " << format_number(mean.mse) << " psnr " << format_number(mean.psnr)
           << " ssim " << format_number(mean.ssim) << " l1 " << format_number(mean.l1) << " l2 "
           << format_number(mean.l2) << "\n";
}

inline const char* kind_name(ErrorKind k) {
  switch (k) {
    case ErrorKind::usage: return "usage";
    case ErrorKind::data: return "data";
    case ErrorKind::numeric: return "numeric";
  }
  return "data";
}

inline int exit_code(ErrorKind k) {
  switch (k) {
    case ErrorKind::usage: return 1;
    case ErrorKind::data: return 2;
    case ErrorKind::numeric: return 3;
  }
  return 2;
}

inline void report_error(std::ostream& err, const char* kind, const std::string& msg) {
  err << json{{"error", kind}, {"message", msg}}.dump() << "\n";
}

}  // namespace detail

/// Runs one invocation; `args` excludes the program name.
inline int cli_main(const std::vector<std::string>& args, std::ostream& out = std::cout,
                    std::ostream& err = std::cerr) {
  CLI::App app{"refool: reflection backdoor experiments", "refool"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path, out_dir;
  std::optional<std::uint64_t> seed;
  unsigned threads = 0;
  app.add_option("--config", config_path, "RunConfig JSON");
  app.add_option("--seed", seed, "run seed (overrides the config)");
  app.add_option("--out", out_dir, "output directory");
  app.add_option("--threads", threads, "worker cap (default: REFOOL_THREADS or all cores)");

  std::string data, refl, candidates, model_path, attack, path_a, path_b, sweep_what, defend_what;
  auto* synth = app.add_subcommand("synth-data", "write a synthetic train/test/wild dataset");
  auto* sel = app.add_subcommand("select", "choose R_adv from a candidate pool");
  sel->add_option("--data", data, "dataset directory with train/ (and wild/)");
  sel->add_option("--candidates", candidates, "candidate image directory (default: <data>/wild)");
  auto* poi = app.add_subcommand("poison", "poison the training split");
  poi->add_option("--data", data, "dataset directory with train/");
  poi->add_option("--reflections", refl, "R_adv directory");
  auto* trn = app.add_subcommand("train", "train a classifier on <data>/train");
  trn->add_option("--data", data, "dataset directory with train/");
  auto* evl = app.add_subcommand("eval", "clean accuracy and ASR on <data>/test");
  evl->add_option("--model", model_path, "model file");
  evl->add_option("--data", data, "dataset directory with test/");
  evl->add_option("--reflections", refl, "R_adv directory");
  auto* swp = app.add_subcommand("sweep", "injection-rate or reflection-type sweep");
  swp->add_option("what", sweep_what, "rate | type")->required();
  swp->add_option("--data", data, "dataset directory with train/ and test/");
  swp->add_option("--reflections", refl, "R_adv directory");
  auto* dfd = app.add_subcommand("defend", "finetuning, pruning or trigger-removal experiment");
  dfd->add_option("what", defend_what, "finetune | prune | removal")->required();
  dfd->add_option("--data", data, "dataset directory with train/ and test/");
  dfd->add_option("--reflections", refl, "R_adv directory");
  dfd->add_option("--attack", attack, "badnets | sig | refool | all (removal only)");
  auto* met = app.add_subcommand("metrics", "MSE/PSNR/SSIM/L1/L2 between paired images");
  met->add_option("--a", path_a, "original PNG or directory");
  met->add_option("--b", path_b, "modified PNG or directory");

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << (e.get_name() == "CallForVersion" ? std::string(kVersion) + "\n" : app.help());
      return 0;
    }
    detail::report_error(err, "usage", e.what());
    return 1;
  }

  try {
    if (threads) set_thread_count(threads);
    detail::Context ctx;
    ctx.cfg = config_path.empty() ? RunConfig{} : load_config(config_path);
    if (seed) ctx.cfg.seed = *seed;
    ctx.out = out_dir;
    ctx.log = &out;

    if (*synth) detail::cmd_synth(ctx);
    else if (*sel) detail::cmd_select(ctx, data, candidates);
    else if (*poi) detail::cmd_poison(ctx, data, refl);
    else if (*trn) detail::cmd_train(ctx, data);
    else if (*evl) detail::cmd_eval(ctx, model_path, data, refl);
    else if (*swp) detail::cmd_sweep(ctx, sweep_what, data, refl);
    else if (*dfd) detail::cmd_defend(ctx, defend_what, data, refl, attack);
    else if (*met) detail::cmd_metrics(ctx, path_a, path_b);
    return 0;
  } catch (const Error& e) {
    detail::report_error(err, detail::kind_name(e.kind()), e.what());
    return detail::exit_code(e.kind());
  } catch (const std::exception& e) {
    detail::report_error(err, "data", e.what());
    return 2;
  }
}

inline int cli_main(int argc, char** argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return cli_main(args, out, err);
}

}  // namespace refool
