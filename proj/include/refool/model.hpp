#pragma once

// Desk-scale victim classifier: softmax regression or a one-hidden-layer
// ReLU MLP over standardized flattened pixels, trained with mini-batch SGD
// (momentum, weight decay) on the mean cross-entropy loss
//
//   L(theta) = -1/n sum_i sum_j y_ij log p(j | x_i, theta).
//
// Also: last-layer finetuning, hidden-unit pruning, and a bit-exact binary
// model container.

#include <Eigen/Dense>

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "refool/core.hpp"
#include "refool/image_ops.hpp"
#include "refool/imgio.hpp"

namespace refool {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class Architecture { softmax = 0, mlp = 1 };

inline const char* to_string(Architecture a) { return a == Architecture::softmax ? "softmax" : "mlp"; }

inline Architecture parse_architecture(const std::string& s) {
  if (s == "softmax") return Architecture::softmax;
  if (s == "mlp") return Architecture::mlp;
  fail_usage("unknown architecture '" + s + "'");
}

struct ClassifierConfig {
  Architecture architecture = Architecture::mlp;
  int hidden_units = 64;
  int input_side = 32;
  double learning_rate = 0.01;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  int batch_size = 32;
  int epochs = 12;
  std::uint64_t seed = 0;
  // Divide the learning rate by 10 every lr_decay_steps optimizer steps;
  // 0 disables the schedule.
  std::int64_t lr_decay_steps = 0;
  // Random crop + rotation of every training image each epoch.
  bool augment = false;
  double max_rotation = 10.0;
  double crop_fraction = 0.9;

  void validate() const {
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) fail_usage("learning_rate must be non-negative");
    if (epochs < 1) fail_usage("epochs must be at least 1");
    if (batch_size < 1) fail_usage("batch_size must be at least 1");
    if (input_side < 1) fail_usage("input_side must be positive");
    if (architecture == Architecture::mlp && hidden_units < 1) fail_usage("hidden_units must be positive");
    if (momentum < 0.0 || momentum >= 1.0) fail_usage("momentum must lie in [0, 1)");
    if (weight_decay < 0.0) fail_usage("weight_decay must be non-negative");
    if (lr_decay_steps < 0) fail_usage("lr_decay_steps must be non-negative");
  }
};

struct TrainLog {
  std::vector<double> loss;
  std::vector<double> accuracy;
};

/// Anything that maps an image to class probabilities. The trained model
/// implements it; tests and external models can substitute scripted ones.
class Classifier {
public:
  virtual ~Classifier() = default;
  virtual std::size_t class_count() const = 0;
  virtual std::vector<double> predict_proba(const Image& x) const = 0;

  /// argmax of predict_proba, ties broken toward the lower index.
  virtual std::size_t predict(const Image& x) const {
    const auto p = predict_proba(x);
    return static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin());
  }

  virtual std::vector<std::size_t> predict_many(std::span<const Image> xs) const {
    std::vector<std::size_t> out(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) out[i] = predict(xs[i]);
    return out;
  }
};

/// Parameters are public: finite-difference checks and pruning edit them
/// directly. For softmax, `output_weights` is K x D and the hidden layer is
/// empty; for mlp, hidden is H x D and output is K x H.
class ClassifierModel : public Classifier {
public:
  Architecture architecture = Architecture::mlp;
  std::size_t classes = 0;
  int input_side = 32;
  int channels = 3;
  Eigen::VectorXd feature_mean;
  Eigen::VectorXd feature_scale;  // 1 / std
  RowMatrix hidden_weights;
  Eigen::VectorXd hidden_bias;
  RowMatrix output_weights;
  Eigen::VectorXd output_bias;

  std::size_t class_count() const override { return classes; }
  Eigen::Index feature_dim() const { return static_cast<Eigen::Index>(input_side) * input_side * channels; }
  Eigen::Index hidden_units() const { return hidden_weights.rows(); }

  /// Raw flattened pixels after resizing to input_side and coercing channels.
  Eigen::VectorXd raw_features(const Image& x) const {
    const Image r = coerce_channels(resize_bilinear(x, input_side, input_side), channels);
    return Eigen::Map<const Eigen::VectorXd>(r.pixels().data(), static_cast<Eigen::Index>(r.size()));
  }

  RowMatrix standardized(std::span<const Image> xs) const {
    RowMatrix X(static_cast<Eigen::Index>(xs.size()), feature_dim());
    for (std::size_t i = 0; i < xs.size(); ++i) X.row(static_cast<Eigen::Index>(i)) = raw_features(xs[i]).transpose();
    standardize_in_place(X);
    return X;
  }

  void standardize_in_place(RowMatrix& X) const {
    X.rowwise() -= feature_mean.transpose();
    X.array().rowwise() *= feature_scale.transpose().array();
  }

  /// Hidden activations (post-ReLU), B x H. mlp only.
  RowMatrix hidden_activations(const RowMatrix& X) const {
    RowMatrix Z = X * hidden_weights.transpose();
    Z.rowwise() += hidden_bias.transpose();
    return Z.cwiseMax(0.0);
  }

  RowMatrix logits(const RowMatrix& X) const {
    RowMatrix L = architecture == Architecture::mlp ? RowMatrix(hidden_activations(X) * output_weights.transpose())
                                                    : RowMatrix(X * output_weights.transpose());
    L.rowwise() += output_bias.transpose();
    return L;
  }

  static RowMatrix softmax_rows(const RowMatrix& L) {
    RowMatrix P = L;
    for (Eigen::Index i = 0; i < P.rows(); ++i) {
      const double m = P.row(i).maxCoeff();
      P.row(i) = (P.row(i).array() - m).exp();
      P.row(i) /= P.row(i).sum();
    }
    return P;
  }

  RowMatrix proba_batch(std::span<const Image> xs) const { return softmax_rows(logits(standardized(xs))); }

  std::vector<double> predict_proba(const Image& x) const override {
    const RowMatrix P = proba_batch(std::span<const Image>(&x, 1));
    return std::vector<double>(P.data(), P.data() + P.cols());
  }

  std::vector<std::size_t> predict_many(std::span<const Image> xs) const override {
    std::vector<std::size_t> out(xs.size());
    constexpr std::size_t kChunk = 256;
    for (std::size_t start = 0; start < xs.size(); start += kChunk) {
      const std::size_t n = std::min(kChunk, xs.size() - start);
      const RowMatrix P = softmax_rows(logits(standardized(xs.subspan(start, n))));
      for (Eigen::Index i = 0; i < P.rows(); ++i) {
        Eigen::Index best = 0;
        for (Eigen::Index j = 1; j < P.cols(); ++j)
          if (P(i, j) > P(i, best)) best = j;
        out[start + static_cast<std::size_t>(i)] = static_cast<std::size_t>(best);
      }
    }
    return out;
  }

  std::size_t predict(const Image& x) const override { return predict_many(std::span<const Image>(&x, 1)).front(); }

  bool all_finite() const {
    return feature_mean.allFinite() && feature_scale.allFinite() && hidden_weights.allFinite() &&
           hidden_bias.allFinite() && output_weights.allFinite() && output_bias.allFinite();
  }

  /// Hidden units whose incoming weights, bias and outgoing weights are all zero.
  std::size_t zeroed_units() const {
    std::size_t n = 0;
    for (Eigen::Index u = 0; u < hidden_units(); ++u)
      n += hidden_weights.row(u).isZero(0.0) && hidden_bias(u) == 0.0 && output_weights.col(u).isZero(0.0);
    return n;
  }

  friend bool operator==(const ClassifierModel& a, const ClassifierModel& b) {
    auto eq = [](const auto& x, const auto& y) {
      return x.rows() == y.rows() && x.cols() == y.cols() &&
             std::memcmp(x.data(), y.data(), sizeof(double) * static_cast<std::size_t>(x.size())) == 0;
    };
    return a.architecture == b.architecture && a.classes == b.classes && a.input_side == b.input_side &&
           a.channels == b.channels && eq(a.feature_mean, b.feature_mean) && eq(a.feature_scale, b.feature_scale) &&
           eq(a.hidden_weights, b.hidden_weights) && eq(a.hidden_bias, b.hidden_bias) &&
           eq(a.output_weights, b.output_weights) && eq(a.output_bias, b.output_bias);
  }
};

/// A zero-initialized model with identity standardization.
inline ClassifierModel make_model(Architecture arch, std::size_t classes, int input_side, int channels,
                                  int hidden_units = 64) {
  ClassifierModel m;
  m.architecture = arch;
  m.classes = classes;
  m.input_side = input_side;
  m.channels = channels;
  const Eigen::Index d = m.feature_dim();
  const auto k = static_cast<Eigen::Index>(classes);
  m.feature_mean = Eigen::VectorXd::Zero(d);
  m.feature_scale = Eigen::VectorXd::Ones(d);
  if (arch == Architecture::mlp) {
    m.hidden_weights = RowMatrix::Zero(hidden_units, d);
    m.hidden_bias = Eigen::VectorXd::Zero(hidden_units);
    m.output_weights = RowMatrix::Zero(k, hidden_units);
  } else {
    m.hidden_weights = RowMatrix(0, d);
    m.hidden_bias = Eigen::VectorXd(0);
    m.output_weights = RowMatrix::Zero(k, d);
  }
  m.output_bias = Eigen::VectorXd::Zero(k);
  return m;
}

// ---------------------------------------------------------------------------
// Loss and gradient
// ---------------------------------------------------------------------------

struct Gradients {
  RowMatrix hidden_weights;
  Eigen::VectorXd hidden_bias;
  RowMatrix output_weights;
  Eigen::VectorXd output_bias;
};

struct LossGrad {
  double loss = 0.0;
  std::size_t correct = 0;
  Gradients grad;
};

/// Mean cross-entropy over the rows of standardized features X and its exact
/// gradient with respect to every parameter.
inline LossGrad loss_and_gradient(const ClassifierModel& m, const RowMatrix& X, std::span<const std::size_t> labels) {
  const Eigen::Index b = X.rows();
  LossGrad out;
  RowMatrix A;
  RowMatrix Z;
  RowMatrix L;
  if (m.architecture == Architecture::mlp) {
    Z = X * m.hidden_weights.transpose();
    Z.rowwise() += m.hidden_bias.transpose();
    A = Z.cwiseMax(0.0);
    L = A * m.output_weights.transpose();
  } else {
    L = X * m.output_weights.transpose();
  }
  L.rowwise() += m.output_bias.transpose();

  RowMatrix D = ClassifierModel::softmax_rows(L);  // becomes dL/dlogits
  for (Eigen::Index i = 0; i < b; ++i) {
    const auto y = static_cast<Eigen::Index>(labels[static_cast<std::size_t>(i)]);
    const double m_i = L.row(i).maxCoeff();
    const double lse = m_i + std::log((L.row(i).array() - m_i).exp().sum());
    out.loss += lse - L(i, y);
    Eigen::Index best = 0;
    for (Eigen::Index j = 1; j < L.cols(); ++j)
      if (L(i, j) > L(i, best)) best = j;
    out.correct += (best == y);
    D(i, y) -= 1.0;
  }
  out.loss /= static_cast<double>(b);
  D /= static_cast<double>(b);

  if (m.architecture == Architecture::mlp) {
    out.grad.output_weights = D.transpose() * A;
    out.grad.output_bias = D.colwise().sum().transpose();
    RowMatrix dZ = D * m.output_weights;
    dZ = dZ.cwiseProduct(RowMatrix((Z.array() > 0.0).cast<double>()));
    out.grad.hidden_weights = dZ.transpose() * X;
    out.grad.hidden_bias = dZ.colwise().sum().transpose();
  } else {
    out.grad.output_weights = D.transpose() * X;
    out.grad.output_bias = D.colwise().sum().transpose();
    out.grad.hidden_weights = RowMatrix(0, X.cols());
    out.grad.hidden_bias = Eigen::VectorXd(0);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

struct TrainResult {
  ClassifierModel model;
  TrainLog log;
};

using EpochCallback = std::function<void(int epoch, const ClassifierModel&)>;

namespace detail {

inline RowMatrix raw_feature_matrix(const ClassifierModel& shape, const Dataset& ds) {
  RowMatrix X(static_cast<Eigen::Index>(ds.size()), shape.feature_dim());
  for (std::size_t i = 0; i < ds.size(); ++i)
    X.row(static_cast<Eigen::Index>(i)) = shape.raw_features(ds.items[i].image).transpose();
  return X;
}

struct Momentum {
  RowMatrix hw, ow;
  Eigen::VectorXd hb, ob;
};

// SGD with momentum v <- mu v + (g + wd theta), theta <- theta - lr v.
inline void sgd_epochs(ClassifierModel& m, const Dataset& ds, const ClassifierConfig& cfg, bool freeze_hidden,
                       TrainLog& log, const EpochCallback& on_epoch) {
  RowMatrix X = raw_feature_matrix(m, ds);
  m.standardize_in_place(X);
  std::vector<std::size_t> labels(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) labels[i] = ds.items[i].label;

  Momentum v{RowMatrix::Zero(m.hidden_weights.rows(), m.hidden_weights.cols()),
             RowMatrix::Zero(m.output_weights.rows(), m.output_weights.cols()),
             Eigen::VectorXd::Zero(m.hidden_bias.size()), Eigen::VectorXd::Zero(m.output_bias.size())};
  const auto n = ds.size();
  const auto bs = static_cast<std::size_t>(cfg.batch_size);
  std::int64_t step = 0;
  std::vector<std::size_t> batch_labels;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    RngStream shuffle_rng = derive_stream(cfg.seed, 0x45504F43ULL + static_cast<std::uint64_t>(epoch));
    shuffle_rng.shuffle(order);

    if (cfg.augment) {
      RngStream aug = derive_stream(cfg.seed, 0x41554700000ULL + static_cast<std::uint64_t>(epoch));
      for (std::size_t i = 0; i < n; ++i) {
        RngStream item_rng = aug.child(i);
        const Image a = augment(ds.items[i].image, item_rng, cfg.max_rotation, cfg.crop_fraction);
        X.row(static_cast<Eigen::Index>(i)) = m.raw_features(a).transpose();
      }
      m.standardize_in_place(X);
    }

    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t start = 0; start < n; start += bs) {
      const std::size_t len = std::min(bs, n - start);
      RowMatrix xb(static_cast<Eigen::Index>(len), X.cols());
      batch_labels.resize(len);
      for (std::size_t k = 0; k < len; ++k) {
        xb.row(static_cast<Eigen::Index>(k)) = X.row(static_cast<Eigen::Index>(order[start + k]));
        batch_labels[k] = labels[order[start + k]];
      }
      LossGrad lg = loss_and_gradient(m, xb, batch_labels);
      if (!std::isfinite(lg.loss)) fail_numeric("training diverged (non-finite loss) at epoch " + std::to_string(epoch + 1));
      loss_sum += lg.loss * static_cast<double>(len);
      correct += lg.correct;

      double lr = cfg.learning_rate;
      if (cfg.lr_decay_steps > 0) lr /= std::pow(10.0, static_cast<double>(step / cfg.lr_decay_steps));
      const double mu = cfg.momentum, wd = cfg.weight_decay;
      v.ow = mu * v.ow + lg.grad.output_weights + wd * m.output_weights;
      v.ob = mu * v.ob + lg.grad.output_bias + wd * m.output_bias;
      m.output_weights -= lr * v.ow;
      m.output_bias -= lr * v.ob;
      if (!freeze_hidden && m.architecture == Architecture::mlp) {
        v.hw = mu * v.hw + lg.grad.hidden_weights + wd * m.hidden_weights;
        v.hb = mu * v.hb + lg.grad.hidden_bias + wd * m.hidden_bias;
        m.hidden_weights -= lr * v.hw;
        m.hidden_bias -= lr * v.hb;
      }
      ++step;
    }
    const double epoch_loss = loss_sum / static_cast<double>(n);
    if (!std::isfinite(epoch_loss) || !m.all_finite())
      fail_numeric("training diverged (non-finite parameters) at epoch " + std::to_string(epoch + 1));
    log.loss.push_back(epoch_loss);
    log.accuracy.push_back(static_cast<double>(correct) / static_cast<double>(n));
    if (on_epoch) on_epoch(epoch + 1, m);
  }
}

}  // namespace detail

/// Trains a fresh model. Deterministic per cfg.seed: initialization draws
/// from stream 1 and the batch order of epoch e is a function of (seed, e).
inline TrainResult train(const Dataset& ds, const ClassifierConfig& cfg, const EpochCallback& on_epoch = {}) {
  cfg.validate();
  ds.validate();
  const int channels = ds.items.front().image.channels();
  ClassifierModel m = make_model(cfg.architecture, ds.class_count, cfg.input_side, channels, cfg.hidden_units);

  // Standardization statistics from the (unaugmented) training set.
  const RowMatrix X = detail::raw_feature_matrix(m, ds);
  m.feature_mean = X.colwise().mean().transpose();
  const Eigen::VectorXd var = (X.rowwise() - m.feature_mean.transpose()).array().square().colwise().mean().transpose();
  m.feature_scale = var.unaryExpr([](double v) { return v > 1e-12 ? 1.0 / std::sqrt(v) : 1.0; });

  RngStream init = derive_stream(cfg.seed, 1);
  auto fill_uniform = [&](RowMatrix& w, double bound) {
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = init.uniform(-bound, bound);
  };
  const double d = static_cast<double>(m.feature_dim());
  if (cfg.architecture == Architecture::mlp) {
    const double h = static_cast<double>(cfg.hidden_units);
    fill_uniform(m.hidden_weights, std::sqrt(6.0 / d));
    fill_uniform(m.output_weights, std::sqrt(6.0 / (h + static_cast<double>(ds.class_count))));
  } else {
    fill_uniform(m.output_weights, std::sqrt(6.0 / (d + static_cast<double>(ds.class_count))));
  }

  TrainResult out{std::move(m), {}};
  detail::sgd_epochs(out.model, ds, cfg, false, out.log, on_epoch);
  return out;
}

/// Continues training only the output layer on `clean`. For a softmax model
/// the output layer is the whole model, so this is plain finetuning.
inline TrainResult finetune_last_layer(const ClassifierModel& base, const Dataset& clean, const ClassifierConfig& cfg,
                                       const EpochCallback& on_epoch = {}) {
  cfg.validate();
  clean.validate();
  if (clean.class_count != base.classes) fail_data("finetune dataset class count does not match the model");
  TrainResult out{base, {}};
  detail::sgd_epochs(out.model, clean, cfg, true, out.log, on_epoch);
  return out;
}

/// Mean absolute hidden activation per unit over `clean`.
inline Eigen::VectorXd mean_unit_activation(const ClassifierModel& m, const Dataset& clean) {
  if (m.architecture != Architecture::mlp) fail_usage("model has no hidden units");
  RowMatrix X = detail::raw_feature_matrix(m, clean);
  m.standardize_in_place(X);
  return m.hidden_activations(X).cwiseAbs().colwise().mean().transpose();
}

/// Zeroes floor(fraction * H) hidden units with the smallest mean activation
/// on `clean` (ties to the lower unit index).
inline ClassifierModel prune_units(const ClassifierModel& m, const Dataset& clean, double fraction) {
  if (m.architecture != Architecture::mlp) fail_usage("pruning needs an mlp model (softmax has no hidden units)");
  if (!(fraction >= 0.0 && fraction < 1.0)) fail_usage("prune fraction must lie in [0, 1)");
  const auto h = m.hidden_units();
  const auto count = static_cast<Eigen::Index>(std::floor(fraction * static_cast<double>(h)));
  ClassifierModel out = m;
  if (count == 0) return out;
  const Eigen::VectorXd act = mean_unit_activation(m, clean);
  std::vector<Eigen::Index> order(static_cast<std::size_t>(h));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) { return act(a) < act(b); });
  for (Eigen::Index k = 0; k < count; ++k) {
    const Eigen::Index u = order[static_cast<std::size_t>(k)];
    out.hidden_weights.row(u).setZero();
    out.hidden_bias(u) = 0.0;
    out.output_weights.col(u).setZero();
  }
  return out;
}

// ---------------------------------------------------------------------------
// Serialization: "RFLMODEL", u32 version, u32 arch, u64 classes, u64 side,
// u64 channels, u64 hidden, then little-endian IEEE-754 doubles: mean[D],
// scale[D], hidden W (H x D) and b[H] when mlp, output W (K x F), b[K].
// ---------------------------------------------------------------------------

inline constexpr std::uint32_t kModelFormatVersion = 1;

namespace detail {

inline void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}
inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}
inline void put_doubles(std::string& out, const double* p, Eigen::Index n) {
  for (Eigen::Index i = 0; i < n; ++i) put_u64(out, std::bit_cast<std::uint64_t>(p[i]));
}

struct Reader {
  std::string_view buf;
  std::size_t pos = 0;
  std::uint64_t u(int bytes) {
    if (pos + static_cast<std::size_t>(bytes) > buf.size()) fail_data("model file truncated");
    std::uint64_t v = 0;
    for (int i = 0; i < bytes; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[pos++])) << (8 * i);
    return v;
  }
  void doubles(double* p, Eigen::Index n) {
    for (Eigen::Index i = 0; i < n; ++i) p[i] = std::bit_cast<double>(u(8));
  }
};

}  // namespace detail

inline std::string serialize_model(const ClassifierModel& m) {
  std::string out = "RFLMODEL";
  detail::put_u32(out, kModelFormatVersion);
  detail::put_u32(out, static_cast<std::uint32_t>(m.architecture));
  detail::put_u64(out, m.classes);
  detail::put_u64(out, static_cast<std::uint64_t>(m.input_side));
  detail::put_u64(out, static_cast<std::uint64_t>(m.channels));
  detail::put_u64(out, static_cast<std::uint64_t>(m.hidden_units()));
  detail::put_doubles(out, m.feature_mean.data(), m.feature_mean.size());
  detail::put_doubles(out, m.feature_scale.data(), m.feature_scale.size());
  if (m.architecture == Architecture::mlp) {
    detail::put_doubles(out, m.hidden_weights.data(), m.hidden_weights.size());
    detail::put_doubles(out, m.hidden_bias.data(), m.hidden_bias.size());
  }
  detail::put_doubles(out, m.output_weights.data(), m.output_weights.size());
  detail::put_doubles(out, m.output_bias.data(), m.output_bias.size());
  return out;
}

inline ClassifierModel deserialize_model(std::string_view bytes) {
  if (bytes.substr(0, 8) != "RFLMODEL") fail_data("not a model file (bad magic)");
  detail::Reader r{bytes, 8};
  if (r.u(4) != kModelFormatVersion) fail_data("unsupported model format version");
  const auto arch = r.u(4);
  if (arch > 1) fail_data("unknown architecture tag in model file");
  const auto classes = r.u(8), side = r.u(8), channels = r.u(8), hidden = r.u(8);
  if (classes < 2 || side == 0 || side > 4096 || (channels != 1 && channels != 3) || hidden > (1u << 20))
    fail_data("model file header is inconsistent");
  ClassifierModel m = make_model(static_cast<Architecture>(arch), classes, static_cast<int>(side),
                                 static_cast<int>(channels), static_cast<int>(hidden));
  r.doubles(m.feature_mean.data(), m.feature_mean.size());
  r.doubles(m.feature_scale.data(), m.feature_scale.size());
  if (m.architecture == Architecture::mlp) {
    r.doubles(m.hidden_weights.data(), m.hidden_weights.size());
    r.doubles(m.hidden_bias.data(), m.hidden_bias.size());
  }
  r.doubles(m.output_weights.data(), m.output_weights.size());
  r.doubles(m.output_bias.data(), m.output_bias.size());
  if (r.pos != bytes.size()) fail_data("model file has trailing bytes");
  if (!m.all_finite()) fail_data("model file contains non-finite parameters");
  return m;
}

inline void save_model(const ClassifierModel& m, const fs::path& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) fail_data("cannot write model file " + path.string());
  const std::string bytes = serialize_model(m);
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) fail_data("cannot write model file " + path.string());
}

inline ClassifierModel load_model(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) fail_data("cannot read model file " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return deserialize_model(bytes);
}

}  // namespace refool
