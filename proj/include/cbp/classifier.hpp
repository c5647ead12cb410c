#pragma once

// Linear softmax head over fused features, cross-entropy loss, minibatch SGD,
// the averaged late-fusion baseline, and logit-level diagnostics of how each
// fusion couples the two views.

#include <cbp/core.hpp>
#include <cbp/fusion.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <utility>
#include <vector>

namespace cbp::classifier {

/// W is input_dim x num_classes, row-major: W(i, c) = weights[i * L + c].
class ClassifierParams {
 public:
  ClassifierParams(std::size_t input_dim, std::size_t num_classes)
      : input_dim_(input_dim),
        num_classes_(num_classes),
        weights_(input_dim * num_classes, 0.0),
        bias_(num_classes, 0.0) {
    if (input_dim == 0 || num_classes == 0) {
      throw InvalidInputError("classifier dimensions must be positive");
    }
  }

  ClassifierParams(std::size_t input_dim, std::size_t num_classes, std::vector<double> weights,
                   std::vector<double> bias)
      : input_dim_(input_dim),
        num_classes_(num_classes),
        weights_(std::move(weights)),
        bias_(std::move(bias)) {
    if (input_dim == 0 || num_classes == 0) {
      throw InvalidInputError("classifier dimensions must be positive");
    }
    require_same_size(weights_.size(), input_dim * num_classes, "classifier weights");
    require_same_size(bias_.size(), num_classes, "classifier bias");
    for (double v : weights_) {
      if (!std::isfinite(v)) throw InvalidInputError("non-finite classifier weight");
    }
    for (double v : bias_) {
      if (!std::isfinite(v)) throw InvalidInputError("non-finite classifier bias");
    }
  }

  std::size_t input_dim() const noexcept { return input_dim_; }
  std::size_t num_classes() const noexcept { return num_classes_; }

  double w(std::size_t i, std::size_t c) const { return weights_[i * num_classes_ + c]; }
  double& w(std::size_t i, std::size_t c) { return weights_[i * num_classes_ + c]; }

  std::span<const double> weights() const noexcept { return weights_; }
  std::span<double> weights() noexcept { return weights_; }
  std::span<const double> bias() const noexcept { return bias_; }
  std::span<double> bias() noexcept { return bias_; }

  /// Column c of W, i.e. the gradient of logit c with respect to g.
  std::vector<double> column(std::size_t c) const {
    std::vector<double> out(input_dim_);
    for (std::size_t i = 0; i < input_dim_; ++i) out[i] = w(i, c);
    return out;
  }

  bool operator==(const ClassifierParams&) const = default;

 private:
  std::size_t input_dim_;
  std::size_t num_classes_;
  std::vector<double> weights_;
  std::vector<double> bias_;
};

inline std::vector<double> logits(const ClassifierParams& p, std::span<const double> g) {
  require_same_size(g.size(), p.input_dim(), "classifier input");
  std::vector<double> z(p.bias().begin(), p.bias().end());
  const std::size_t l = p.num_classes();
  const auto w = p.weights();
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double gi = g[i];
    if (gi == 0.0) continue;
    const double* row = w.data() + i * l;
    for (std::size_t c = 0; c < l; ++c) z[c] += row[c] * gi;
  }
  return z;
}

inline double log_sum_exp(std::span<const double> z) {
  const double m = *std::max_element(z.begin(), z.end());
  double acc = 0.0;
  for (double v : z) acc += std::exp(v - m);
  return m + std::log(acc);
}

inline std::vector<double> softmax(std::span<const double> z) {
  const double m = *std::max_element(z.begin(), z.end());
  std::vector<double> p(z.size());
  double total = 0.0;
  for (std::size_t c = 0; c < z.size(); ++c) total += (p[c] = std::exp(z[c] - m));
  for (double& v : p) v /= total;
  return p;
}

inline std::vector<double> predict_proba(const ClassifierParams& p, std::span<const double> g) {
  return softmax(logits(p, g));
}

inline void check_label(const ClassifierParams& p, std::size_t label) {
  if (label >= p.num_classes()) {
    throw InvalidInputError("label " + std::to_string(label) + " out of range");
  }
}

inline double cross_entropy(const ClassifierParams& p, std::span<const double> g,
                            std::size_t label) {
  check_label(p, label);
  const auto z = logits(p, g);
  // Work with margins z_c - z_label so small losses keep their relative precision.
  double m = 0.0;
  for (double v : z) m = std::max(m, v - z[label]);
  double rest = 0.0;
  for (std::size_t c = 0; c < z.size(); ++c) {
    if (c != label) rest += std::exp(z[c] - z[label] - m);
  }
  return m + std::log1p(rest + std::expm1(-m));
}

/// Ties go to the lowest class index.
inline std::size_t argmax(std::span<const double> v) {
  return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

struct Gradient {
  std::vector<double> weights;  // same layout as ClassifierParams::weights()
  std::vector<double> bias;
};

/// grad_b = p - onehot(label); grad_W = g (x) (p - onehot(label)).
inline Gradient gradient(const ClassifierParams& p, std::span<const double> g, std::size_t label) {
  check_label(p, label);
  auto delta = predict_proba(p, g);
  delta[label] -= 1.0;
  const std::size_t l = p.num_classes();
  Gradient out{std::vector<double>(p.input_dim() * l), delta};
  for (std::size_t i = 0; i < g.size(); ++i) {
    for (std::size_t c = 0; c < l; ++c) out.weights[i * l + c] = g[i] * delta[c];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

struct TrainConfig {
  double learning_rate = 0.1;
  std::size_t epochs = 30;
  std::size_t batch_size = 32;
  Seed shuffle_seed{0};
  /// Constant applied to both views before fusion.
  double feature_scale = 1.0;
};

struct TrainResult {
  ClassifierParams params;
  /// Mean cross-entropy over the training set after each epoch.
  std::vector<double> loss_trace;
};

/// Labelled rows already in the classifier's input space.
struct FeatureTable {
  std::vector<std::vector<double>> rows;
  std::vector<std::size_t> labels;
  std::size_t num_classes = 0;
};

inline double mean_loss(const ClassifierParams& p, const FeatureTable& data) {
  double total = 0.0;
  for (std::size_t n = 0; n < data.rows.size(); ++n) total += cross_entropy(p, data.rows[n], data.labels[n]);
  return total / static_cast<double>(data.rows.size());
}

inline ClassifierParams init_params(std::size_t input_dim, std::size_t num_classes, Seed seed) {
  ClassifierParams p(input_dim, num_classes);
  auto rng = make_rng(seed, StreamTag::kInit);
  const double scale = 1.0 / std::sqrt(static_cast<double>(input_dim));
  for (double& w : p.weights()) w = scale * rng.normal();
  return p;
}

/// Plain minibatch SGD (no momentum, no weight decay) on the mean batch loss.
inline TrainResult sgd_train_table(const FeatureTable& data, const TrainConfig& cfg, Seed init_seed) {
  if (data.rows.empty()) throw InvalidInputError("cannot train on an empty dataset");
  require_same_size(data.rows.size(), data.labels.size(), "rows vs labels");
  if (!(cfg.learning_rate > 0.0)) throw InvalidInputError("learning rate must be positive");
  if (cfg.epochs == 0 || cfg.batch_size == 0) {
    throw InvalidInputError("epochs and batch size must be positive");
  }
  const std::size_t dim = data.rows.front().size();
  const std::size_t l = data.num_classes;
  TrainResult result{init_params(dim, l, init_seed), {}};
  ClassifierParams& p = result.params;

  auto rng = make_rng(cfg.shuffle_seed, StreamTag::kShuffle);
  std::vector<std::size_t> order(data.rows.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<double> grad_w(dim * l);
  std::vector<double> grad_b(l);

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
      std::fill(grad_w.begin(), grad_w.end(), 0.0);
      std::fill(grad_b.begin(), grad_b.end(), 0.0);
      for (std::size_t k = start; k < stop; ++k) {
        const auto& g = data.rows[order[k]];
        auto delta = predict_proba(p, g);
        delta[data.labels[order[k]]] -= 1.0;
        for (std::size_t i = 0; i < dim; ++i) {
          if (g[i] == 0.0) continue;
          double* row = grad_w.data() + i * l;
          for (std::size_t c = 0; c < l; ++c) row[c] += g[i] * delta[c];
        }
        for (std::size_t c = 0; c < l; ++c) grad_b[c] += delta[c];
      }
      const double step = cfg.learning_rate / static_cast<double>(stop - start);
      auto w = p.weights();
      for (std::size_t k = 0; k < w.size(); ++k) w[k] -= step * grad_w[k];
      auto b = p.bias();
      for (std::size_t c = 0; c < l; ++c) b[c] -= step * grad_b[c];
    }
    result.loss_trace.push_back(mean_loss(p, data));
  }
  return result;
}

inline FeatureTable fuse_dataset(const Dataset& data, const fusion::FusionMethod& method,
                                 double feature_scale = 1.0) {
  FeatureTable table;
  table.num_classes = data.num_classes();
  table.rows.reserve(data.size());
  for (const auto& s : data) {
    table.rows.push_back(fusion::fuse(method, scale_features(s.view_a, feature_scale),
                                      scale_features(s.view_b, feature_scale)));
    table.labels.push_back(s.label);
  }
  return table;
}

inline TrainResult sgd_train(const Dataset& data, const fusion::FusionMethod& method,
                             const TrainConfig& cfg, Seed init_seed) {
  if (data.empty()) throw InvalidInputError("cannot train on an empty dataset");
  return sgd_train_table(fuse_dataset(data, method, cfg.feature_scale), cfg, init_seed);
}

// ---------------------------------------------------------------------------
// Averaged late fusion
// ---------------------------------------------------------------------------

enum class View { kA, kB };

inline FeatureTable single_view_table(const Dataset& data, View view, double feature_scale = 1.0) {
  FeatureTable table;
  table.num_classes = data.num_classes();
  for (const auto& s : data) {
    const auto f = scale_features(view == View::kA ? s.view_a : s.view_b, feature_scale);
    table.rows.emplace_back(f.values().begin(), f.values().end());
    table.labels.push_back(s.label);
  }
  return table;
}

struct LateFusionResult {
  TrainResult view_a;
  TrainResult view_b;
};

/// One independent classifier per view, same seeds for both.
inline LateFusionResult train_late_avg(const Dataset& data, const TrainConfig& cfg, Seed init_seed) {
  if (data.empty()) throw InvalidInputError("cannot train on an empty dataset");
  return {sgd_train_table(single_view_table(data, View::kA, cfg.feature_scale), cfg, init_seed),
          sgd_train_table(single_view_table(data, View::kB, cfg.feature_scale), cfg, init_seed)};
}

inline std::vector<double> predict_late_avg(const ClassifierParams& params_a,
                                            const ClassifierParams& params_b,
                                            std::span<const double> fa, std::span<const double> fb) {
  require_same_size(params_a.num_classes(), params_b.num_classes(), "late fusion class counts");
  auto pa = predict_proba(params_a, fa);
  const auto pb = predict_proba(params_b, fb);
  for (std::size_t c = 0; c < pa.size(); ++c) pa[c] = 0.5 * (pa[c] + pb[c]);
  return pa;
}

// ---------------------------------------------------------------------------
// Logit factorization diagnostics
// ---------------------------------------------------------------------------

/// Tolerance for identities that must hold to rounding error.
inline constexpr double kFactorizationTolerance = 1e-10;
/// Cross dependence below this is indistinguishable from rounding noise.
inline constexpr double kCrossDependenceFloor = 1e-8;

struct FactorizationReport {
  fusion::FusionKind kind;
  /// Max violation of the kind-specific identity:
  ///   concat  - Jacobian blocks constant across the other view, and the
  ///             separable logit difference;
  ///   sum     - four-point additivity;
  ///   product - first-order change under a single-coordinate perturbation
  ///             of fb equals W(j, c) * fa_j * delta;
  ///   bilinear kinds - 0 (no separability identity applies).
  double identity_residual = 0.0;
  /// Max over classes and i != j of |mixed second difference| of the logit
  /// in (fa_i, fb_j), unit steps. Exact for fusions that are at most
  /// bilinear in the views.
  double max_cross_dependence = 0.0;
  /// Largest |W(i, c)| * |second difference| across the diagonal i == j.
  double max_diagonal_dependence = 0.0;
  bool holds = false;
};

inline FactorizationReport logit_decomposition_check(const ClassifierParams& params,
                                                     const fusion::FusionMethod& method,
                                                     std::span<const double> fa,
                                                     std::span<const double> fb,
                                                     std::span<const double> fa_alt,
                                                     std::span<const double> fb_alt) {
  using fusion::FusionKind;
  const std::size_t c = method.input_dim();
  require_same_size(fa.size(), c, "diagnostic fa");
  require_same_size(fb.size(), c, "diagnostic fb");
  require_same_size(fa_alt.size(), c, "diagnostic fa'");
  require_same_size(fb_alt.size(), c, "diagnostic fb'");
  require_same_size(params.input_dim(), method.output_dim(), "classifier vs fusion output");
  const std::size_t l = params.num_classes();

  auto logit = [&](std::span<const double> a, std::span<const double> b) {
    return logits(params, fusion::fuse(method, a, b));
  };
  auto max_abs_diff = [](std::span<const double> x, std::span<const double> y) {
    double m = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) m = std::max(m, std::abs(x[k] - y[k]));
    return m;
  };

  FactorizationReport report{method.kind()};

  // Mixed second differences with unit steps.
  const auto base = logit(fa, fb);
  std::vector<std::vector<double>> shifted_b(c);
  for (std::size_t j = 0; j < c; ++j) {
    std::vector<double> b(fb.begin(), fb.end());
    b[j] += 1.0;
    shifted_b[j] = logit(fa, b);
  }
  for (std::size_t i = 0; i < c; ++i) {
    std::vector<double> a(fa.begin(), fa.end());
    a[i] += 1.0;
    const auto shifted_a = logit(a, fb);
    for (std::size_t j = 0; j < c; ++j) {
      std::vector<double> b(fb.begin(), fb.end());
      b[j] += 1.0;
      const auto both = logit(a, b);
      for (std::size_t k = 0; k < l; ++k) {
        const double mixed = std::abs(both[k] - shifted_a[k] - shifted_b[j][k] + base[k]);
        if (i == j) {
          report.max_diagonal_dependence = std::max(report.max_diagonal_dependence, mixed);
        } else {
          report.max_cross_dependence = std::max(report.max_cross_dependence, mixed);
        }
      }
    }
  }

  switch (method.kind()) {
    case FusionKind::kConcat: {
      double r = 0.0;
      for (std::size_t k = 0; k < l; ++k) {
        const auto col = params.column(k);
        const auto at_b = fusion::fuse_backward(method, fa, fb, col);
        const auto at_b_alt = fusion::fuse_backward(method, fa, fb_alt, col);
        const auto at_a_alt = fusion::fuse_backward(method, fa_alt, fb, col);
        r = std::max(r, max_abs_diff(at_b.grad_a, at_b_alt.grad_a));
        r = std::max(r, max_abs_diff(at_b.grad_b, at_a_alt.grad_b));
      }
      const auto z1 = logit(fa, fb_alt);
      const auto z2 = logit(fa_alt, fb);
      const auto z3 = logit(fa_alt, fb_alt);
      for (std::size_t k = 0; k < l; ++k) {
        r = std::max(r, std::abs((base[k] - z1[k]) - (z2[k] - z3[k])));
      }
      report.identity_residual = r;
      break;
    }
    case FusionKind::kSum: {
      const std::vector<double> zero(c, 0.0);
      const auto za0 = logit(fa, zero);
      const auto z0b = logit(zero, fb);
      const auto z00 = logit(zero, zero);
      double r = 0.0;
      for (std::size_t k = 0; k < l; ++k) {
        r = std::max(r, std::abs(base[k] - za0[k] - z0b[k] + z00[k]));
      }
      report.identity_residual = r;
      break;
    }
    case FusionKind::kProduct: {
      double r = 0.0;
      for (std::size_t j = 0; j < c; ++j) {
        for (std::size_t k = 0; k < l; ++k) {
          const double expected = params.w(j, k) * fa[j];
          r = std::max(r, std::abs((shifted_b[j][k] - base[k]) - expected));
        }
      }
      report.identity_residual = r;
      break;
    }
    case FusionKind::kFullBilinear:
    case FusionKind::kCompactBilinear:
      report.identity_residual = 0.0;
      break;
  }

  if (fusion::is_bilinear(method.kind())) {
    report.holds = report.max_cross_dependence > kCrossDependenceFloor;
  } else {
    report.holds = report.identity_residual <= kFactorizationTolerance &&
                   report.max_cross_dependence <= kFactorizationTolerance;
  }
  return report;
}

}  // namespace cbp::classifier
