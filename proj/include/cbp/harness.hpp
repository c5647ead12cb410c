#pragma once

// Synthetic paired-view data and the experiment runner that compares fusion
// methods on it.
//
// Each class c owns a derangement permutation pi_c. A sample of class c is
//   fa ~ N(0, I),   fb_i = fa_{pi_c(i)} + sigma * eps_i,
// so both views have class-independent marginals and the label lives only in
// the cross-view correlation E[fb fa^T] = T_c (zero diagonal).

#include <cbp/classifier.hpp>
#include <cbp/core.hpp>
#include <cbp/fusion.hpp>
#include <cbp/io.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <string>
#include <vector>

namespace cbp::harness {

struct SynthConfig {
  std::size_t dim = 16;
  std::size_t num_classes = 4;
  std::size_t n_train = 2000;
  std::size_t n_test = 500;
  double noise_sigma = 0.5;
  Seed seed{0};
};

using Permutation = std::vector<std::size_t>;

struct SyntheticData {
  Dataset train;
  Dataset test;
  /// fb_i = fa_{perm[i]} for class c = index into this list.
  std::vector<Permutation> permutations;
};

inline bool is_derangement(const Permutation& p) {
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] == i) return false;
  }
  return true;
}

/// Draws `count` distinct derangements of size `n` by rejection.
inline std::vector<Permutation> draw_derangements(std::size_t n, std::size_t count, Rng& rng) {
  const std::size_t max_attempts = 1000 * (count + 1);
  std::vector<Permutation> out;
  Permutation p(n);
  for (std::size_t attempt = 0; attempt < max_attempts && out.size() < count; ++attempt) {
    std::iota(p.begin(), p.end(), std::size_t{0});
    rng.shuffle(p);
    if (is_derangement(p) && std::find(out.begin(), out.end(), p) == out.end()) out.push_back(p);
  }
  if (out.size() < count) {
    throw ConfigError("could not draw " + std::to_string(count) + " distinct derangements of size " +
                      std::to_string(n));
  }
  return out;
}

inline SyntheticData generate_synthetic(const SynthConfig& cfg) {
  if (cfg.dim < 2) throw ConfigError("synthetic data needs C >= 2");
  if (cfg.num_classes < 2) throw ConfigError("synthetic data needs L >= 2");
  if (!(cfg.noise_sigma >= 0.0) || !std::isfinite(cfg.noise_sigma)) {
    throw ConfigError("noise sigma must be finite and nonnegative");
  }
  if (cfg.n_train == 0 || cfg.n_test == 0) throw ConfigError("split sizes must be positive");

  auto rng = make_rng(cfg.seed, StreamTag::kDataGen);
  auto perms = draw_derangements(cfg.dim, cfg.num_classes, rng);

  auto draw = [&](std::size_t n) {
    Dataset data(cfg.dim, cfg.num_classes);
    for (std::size_t k = 0; k < n; ++k) {
      const std::size_t label = k % cfg.num_classes;
      std::vector<double> a(cfg.dim), b(cfg.dim);
      for (double& v : a) v = rng.normal();
      for (std::size_t i = 0; i < cfg.dim; ++i) {
        b[i] = a[perms[label][i]] + cfg.noise_sigma * rng.normal();
      }
      data.add({FeatureVector(std::move(a)), FeatureVector(std::move(b)), label});
    }
    return data;
  };
  Dataset train = draw(cfg.n_train);
  Dataset test = draw(cfg.n_test);
  return {std::move(train), std::move(test), std::move(perms)};
}

// ---------------------------------------------------------------------------
// Experiments
// ---------------------------------------------------------------------------

inline constexpr std::string_view kLateFusionToken = "avg-late";

inline const std::vector<std::string>& all_method_tokens() {
  static const std::vector<std::string> tokens = {"concat", "sum", "product",
                                                  "full", "compact", "avg-late"};
  return tokens;
}

/// C * C for the default C = 16; see README for the accuracy/compression
/// tradeoff at smaller D.
inline constexpr std::size_t kDefaultSketchDim = 256;

struct ExperimentConfig {
  std::size_t sketch_dim = kDefaultSketchDim;
  classifier::TrainConfig train;
  /// Drives hash draws, weight init and shuffling for every method.
  Seed seed{0};
};

struct MethodResult {
  std::string method;
  double accuracy = 0.0;
  std::vector<double> per_class_accuracy;
  /// confusion[true][predicted], counts.
  std::vector<std::vector<std::size_t>> confusion;
  std::vector<double> loss_trace;
};

struct ExperimentReport {
  std::vector<MethodResult> methods;
  std::size_t num_classes = 0;
};

inline void finalize_metrics(MethodResult& r) {
  const std::size_t l = r.confusion.size();
  std::size_t hits = 0, total = 0;
  r.per_class_accuracy.assign(l, 0.0);
  for (std::size_t t = 0; t < l; ++t) {
    const std::size_t row = std::accumulate(r.confusion[t].begin(), r.confusion[t].end(), std::size_t{0});
    hits += r.confusion[t][t];
    total += row;
    r.per_class_accuracy[t] = row ? static_cast<double>(r.confusion[t][t]) / static_cast<double>(row) : 0.0;
  }
  r.accuracy = total ? static_cast<double>(hits) / static_cast<double>(total) : 0.0;
}

struct TrainedModel {
  io::Model model;
  std::vector<double> loss_trace;
};

/// Trains one method. Late fusion reports the mean of its two view traces.
inline TrainedModel train_method(const Dataset& train, const std::string& token,
                                 const ExperimentConfig& cfg) {
  TrainedModel out;
  io::Model& m = out.model;
  m.input_dim = train.dim();
  m.num_classes = train.num_classes();
  m.alpha = cfg.train.feature_scale;
  m.seeds = {cfg.seed, cfg.seed, cfg.train.shuffle_seed};
  if (token == kLateFusionToken) {
    auto r = classifier::train_late_avg(train, cfg.train, cfg.seed);
    for (std::size_t e = 0; e < r.view_a.loss_trace.size(); ++e) {
      out.loss_trace.push_back(0.5 * (r.view_a.loss_trace[e] + r.view_b.loss_trace[e]));
    }
    m.heads = {std::move(r.view_a.params), std::move(r.view_b.params)};
    return out;
  }
  const auto kind = fusion::kind_from_token(token);
  if (kind == fusion::FusionKind::kCompactBilinear) {
    m.method = fusion::FusionMethod::compact(train.dim(), cfg.sketch_dim, cfg.seed);
  } else {
    if (kind == fusion::FusionKind::kFullBilinear && train.dim() > fusion::kFullBilinearMaxDim) {
      throw UsageError("full bilinear fusion requires C <= " +
                       std::to_string(fusion::kFullBilinearMaxDim));
    }
    m.method.emplace(kind, train.dim());
  }
  auto r = classifier::sgd_train(train, *m.method, cfg.train, cfg.seed);
  m.heads.push_back(std::move(r.params));
  out.loss_trace = std::move(r.loss_trace);
  return out;
}

inline MethodResult evaluate_model(const io::Model& model, const Dataset& test) {
  require_same_size(test.dim(), model.input_dim, "test features vs model");
  MethodResult r;
  r.method = model.kind_token();
  const std::size_t l = model.num_classes;
  r.confusion.assign(l, std::vector<std::size_t>(l, 0));
  for (const auto& s : test) {
    if (s.label >= l) throw InvalidInputError("test label outside the model's classes");
    r.confusion[s.label][classifier::argmax(model.predict_proba(s.view_a, s.view_b))] += 1;
  }
  finalize_metrics(r);
  return r;
}

/// Every method shuffles with the experiment seed, so results do not depend
/// on which other methods ran or in what order.
inline MethodResult run_method(const Dataset& train, const Dataset& test, const std::string& token,
                               const ExperimentConfig& cfg) {
  auto cfg_local = cfg;
  cfg_local.train.shuffle_seed = cfg.seed;
  auto trained = train_method(train, token, cfg_local);
  auto r = evaluate_model(trained.model, test);
  r.loss_trace = std::move(trained.loss_trace);
  return r;
}

inline ExperimentReport run_experiment(const Dataset& train, const Dataset& test,
                                       const std::vector<std::string>& methods,
                                       const ExperimentConfig& cfg) {
  for (const auto& m : methods) {
    if (std::find(all_method_tokens().begin(), all_method_tokens().end(), m) ==
        all_method_tokens().end()) {
      throw UsageError("unknown method '" + m + "'");
    }
  }
  require_same_size(train.dim(), test.dim(), "train vs test dimension");
  ExperimentReport report;
  report.num_classes = train.num_classes();
  for (const auto& m : methods) report.methods.push_back(run_method(train, test, m, cfg));
  return report;
}

// ---------------------------------------------------------------------------
// Seed-repeated benchmark
// ---------------------------------------------------------------------------

struct BenchMethodSummary {
  std::string method;
  std::vector<double> repeat_accuracy;
  double mean_accuracy = 0.0;
  double std_accuracy = 0.0;
  /// Pooled over repeats; accuracy fields are pooled too.
  MethodResult pooled;
};

struct BenchReport {
  std::vector<BenchMethodSummary> methods;
  std::size_t repeats = 0;
  std::size_t num_classes = 0;
};

inline Seed repeat_seed(Seed root, std::size_t repeat) {
  return Seed{splitmix64(root.value ^ (0xA5A5A5A5ULL + repeat))};
}

/// Runs R independent repeats. Repeat r draws fresh synthetic data and fresh
/// model randomness from repeat_seed(root, r).
inline BenchReport run_bench(const SynthConfig& synth, const std::vector<std::string>& methods,
                             const ExperimentConfig& cfg, std::size_t repeats) {
  if (repeats == 0) throw ConfigError("repeats must be positive");
  BenchReport bench;
  bench.repeats = repeats;
  bench.num_classes = synth.num_classes;
  for (const auto& m : methods) {
    BenchMethodSummary summary;
    summary.method = m;
    summary.pooled.method = m;
    summary.pooled.confusion.assign(synth.num_classes, std::vector<std::size_t>(synth.num_classes, 0));
    bench.methods.push_back(std::move(summary));
  }
  for (std::size_t r = 0; r < repeats; ++r) {
    auto synth_r = synth;
    synth_r.seed = repeat_seed(synth.seed, r);
    const auto data = generate_synthetic(synth_r);
    auto cfg_r = cfg;
    cfg_r.seed = synth_r.seed;
    const auto report = run_experiment(data.train, data.test, methods, cfg_r);
    for (std::size_t k = 0; k < methods.size(); ++k) {
      const auto& res = report.methods[k];
      auto& summary = bench.methods[k];
      summary.repeat_accuracy.push_back(res.accuracy);
      for (std::size_t t = 0; t < synth.num_classes; ++t) {
        for (std::size_t p = 0; p < synth.num_classes; ++p) summary.pooled.confusion[t][p] += res.confusion[t][p];
      }
      if (summary.pooled.loss_trace.empty()) summary.pooled.loss_trace.assign(res.loss_trace.size(), 0.0);
      for (std::size_t e = 0; e < res.loss_trace.size(); ++e) {
        summary.pooled.loss_trace[e] += res.loss_trace[e] / static_cast<double>(repeats);
      }
    }
  }
  for (auto& summary : bench.methods) {
    finalize_metrics(summary.pooled);
    const auto& acc = summary.repeat_accuracy;
    summary.mean_accuracy = std::accumulate(acc.begin(), acc.end(), 0.0) / static_cast<double>(acc.size());
    if (acc.size() > 1) {
      double ss = 0.0;
      for (double a : acc) ss += (a - summary.mean_accuracy) * (a - summary.mean_accuracy);
      summary.std_accuracy = std::sqrt(ss / static_cast<double>(acc.size() - 1));
    }
  }
  return bench;
}

// ---------------------------------------------------------------------------
// Report files
// ---------------------------------------------------------------------------

/// `method,accuracy,acc_class_0..acc_class_{L-1}`
inline std::string report_csv(const std::vector<MethodResult>& results, std::size_t num_classes) {
  std::string out = "method,accuracy";
  for (std::size_t c = 0; c < num_classes; ++c) out += ",acc_class_" + std::to_string(c);
  out += '\n';
  for (const auto& r : results) {
    out += r.method + ',' + io::format_number(r.accuracy);
    for (double a : r.per_class_accuracy) out += ',' + io::format_number(a);
    out += '\n';
  }
  return out;
}

inline std::string confusion_csv(const MethodResult& r) {
  const std::size_t l = r.confusion.size();
  std::string out = "true_label";
  for (std::size_t p = 0; p < l; ++p) out += ",pred_" + std::to_string(p);
  out += '\n';
  for (std::size_t t = 0; t < l; ++t) {
    out += std::to_string(t);
    for (std::size_t p = 0; p < l; ++p) out += ',' + std::to_string(r.confusion[t][p]);
    out += '\n';
  }
  return out;
}

inline std::string loss_csv(const MethodResult& r) {
  std::string out = "epoch,loss\n";
  for (std::size_t e = 0; e < r.loss_trace.size(); ++e) {
    out += std::to_string(e + 1) + ',' + io::format_number(r.loss_trace[e]) + '\n';
  }
  return out;
}

inline std::string summary_csv(const BenchReport& bench) {
  std::string out = "method,mean_accuracy,std_accuracy";
  for (std::size_t r = 0; r < bench.repeats; ++r) out += ",repeat_" + std::to_string(r);
  out += '\n';
  for (const auto& m : bench.methods) {
    out += m.method + ',' + io::format_number(m.mean_accuracy) + ',' + io::format_number(m.std_accuracy);
    for (double a : m.repeat_accuracy) out += ',' + io::format_number(a);
    out += '\n';
  }
  return out;
}

/// Writes report.csv, summary.csv and per-method confusion_/loss_ files.
/// Returns the paths written.
inline std::vector<std::filesystem::path> write_bench_outputs(const BenchReport& bench,
                                                              const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::vector<MethodResult> pooled;
  for (const auto& m : bench.methods) pooled.push_back(m.pooled);
  std::vector<std::filesystem::path> written;
  auto emit = [&](const std::string& name, const std::string& contents) {
    const auto path = dir / name;
    io::write_file(path.string(), contents);
    written.push_back(path);
  };
  emit("report.csv", report_csv(pooled, bench.num_classes));
  emit("summary.csv", summary_csv(bench));
  for (const auto& r : pooled) {
    emit("confusion_" + r.method + ".csv", confusion_csv(r));
    emit("loss_" + r.method + ".csv", loss_csv(r));
  }
  return written;
}

}  // namespace cbp::harness
