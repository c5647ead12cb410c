#pragma once

// Reference oracles and self-checks. None of this is on the production path:
// the oracles are deliberately naive, and every check compares a library
// routine against one of them.

#include <cbp/classifier.hpp>
#include <cbp/core.hpp>
#include <cbp/fft.hpp>
#include <cbp/fusion.hpp>
#include <cbp/harness.hpp>
#include <cbp/sketch.hpp>

#include <chrono>
#include <cmath>
#include <complex>
#include <functional>
#include <numbers>
#include <span>
#include <sstream>
#include <string>
#include <vector>

namespace cbp::checks {

// ---------------------------------------------------------------------------
// Oracles
// ---------------------------------------------------------------------------

/// O(n^2) DFT, any length.
inline fft::ComplexVector naive_dft(std::span<const double> x) {
  const std::size_t n = x.size();
  fft::ComplexVector out(n);
  for (std::size_t k = 0; k < n; ++k) {
    fft::Complex acc{0.0, 0.0};
    for (std::size_t j = 0; j < n; ++j) {
      // Reduce jk mod n first so the angle stays small.
      const double angle = -2.0 * std::numbers::pi * static_cast<double>((j * k) % n) /
                           static_cast<double>(n);
      acc += x[j] * fft::Complex(std::cos(angle), std::sin(angle));
    }
    out[k] = acc;
  }
  return out;
}

inline std::vector<double> naive_circular_convolution(std::span<const double> a,
                                                      std::span<const double> b) {
  const std::size_t n = a.size();
  std::vector<double> out(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) out[(i + j) % n] += a[i] * b[j];
  }
  return out;
}

/// Count sketch as (s . f) H with the dense C x D matrix H(i, j) = [j == h_i].
inline std::vector<double> dense_count_sketch(std::span<const double> f,
                                              const sketch::CountSketchParams& p) {
  const std::size_t c = p.input_dim(), d = p.output_dim();
  std::vector<double> h_matrix(c * d, 0.0);
  for (std::size_t i = 0; i < c; ++i) h_matrix[i * d + p.h()[i]] = 1.0;
  std::vector<double> out(d, 0.0);
  for (std::size_t i = 0; i < c; ++i) {
    const double sf = p.s()[i] * f[i];
    for (std::size_t j = 0; j < d; ++j) out[j] += sf * h_matrix[i * d + j];
  }
  return out;
}

/// Central finite-difference gradient of a scalar function.
inline std::vector<double> numeric_gradient(const std::function<double(std::span<const double>)>& f,
                                            std::span<const double> x, double step = 1e-5) {
  std::vector<double> probe(x.begin(), x.end());
  std::vector<double> grad(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double saved = probe[i];
    probe[i] = saved + step;
    const double up = f(probe);
    probe[i] = saved - step;
    const double down = f(probe);
    probe[i] = saved;
    grad[i] = (up - down) / (2.0 * step);
  }
  return grad;
}

/// max |a - b| / max(max |b|, 1e-12).
inline double relative_error(std::span<const double> analytic, std::span<const double> numeric) {
  double diff = 0.0, scale = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    diff = std::max(diff, std::abs(analytic[i] - numeric[i]));
    scale = std::max(scale, std::abs(numeric[i]));
  }
  return diff / std::max(scale, 1e-12);
}

inline double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

inline double max_abs_diff(const fft::ComplexVector& a, const fft::ComplexVector& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

inline std::vector<double> normal_vector(Rng& rng, std::size_t n) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.normal();
  return v;
}

// ---------------------------------------------------------------------------
// Checks
// ---------------------------------------------------------------------------

struct CheckResult {
  std::string name;
  bool passed = false;
  /// Worst observed value of the checked quantity.
  double measured = 0.0;
  double threshold = 0.0;
  std::string detail;
  double seconds = 0.0;
};

namespace detail {

template <typename Body>
CheckResult timed(std::string name, Body body) {
  const auto t0 = std::chrono::steady_clock::now();
  CheckResult r = body();
  r.name = std::move(name);
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

inline std::string fmt(double v) {
  std::ostringstream ss;
  ss.precision(3);
  ss << v;
  return ss.str();
}

}  // namespace detail

/// dfft against the naive DFT for n = 1, 2, ..., max_n.
inline CheckResult check_fft_vs_naive(Seed seed, std::size_t max_n = 1024, double tol = 1e-9) {
  return detail::timed("fft_vs_naive_dft", [&] {
    auto rng = make_rng(seed, StreamTag::kSelftest);
    double worst = 0.0;
    for (std::size_t n = 1; n <= max_n; n <<= 1) {
      const auto x = normal_vector(rng, n);
      worst = std::max(worst, max_abs_diff(fft::dfft(x), naive_dft(x)));
    }
    return CheckResult{{}, worst <= tol, worst, tol, "max |dfft - naive| over n <= " + std::to_string(max_n)};
  });
}

inline CheckResult check_fft_roundtrip(Seed seed, std::size_t max_n = 2048, double tol = 1e-10) {
  return detail::timed("fft_roundtrip", [&] {
    auto rng = make_rng(seed, StreamTag::kSelftest);
    double worst = 0.0;
    for (std::size_t n = 1; n <= max_n; n <<= 1) {
      for (int rep = 0; rep < 4; ++rep) {
        const auto x = normal_vector(rng, n);
        worst = std::max(worst, max_abs_diff(fft::idfft(fft::dfft(x)), x));
      }
    }
    return CheckResult{{}, worst <= tol, worst, tol, "max |idfft(dfft(x)) - x|"};
  });
}

inline CheckResult check_convolution_theorem(Seed seed, std::size_t max_n = 1024, double tol = 1e-9) {
  return detail::timed("fft_convolution_theorem", [&] {
    auto rng = make_rng(seed, StreamTag::kSelftest);
    double worst = 0.0;
    for (std::size_t n = 1; n <= max_n; n <<= 1) {
      const auto a = normal_vector(rng, n);
      const auto b = normal_vector(rng, n);
      worst = std::max(worst, max_abs_diff(fft::circular_convolve(a, b), naive_circular_convolution(a, b)));
    }
    return CheckResult{{}, worst <= tol, worst, tol, "spectral vs direct circular convolution"};
  });
}

/// compact_bilinear against the materialized outer-product sketch on random
/// instances with C <= 32 and D in {2, ..., 256}. `inject_sign_flip` corrupts
/// one sign on the fast path only; the check must then fail.
inline CheckResult check_oracle_equality(Seed seed, std::size_t instances = 200, double tol = 1e-9,
                                         bool inject_sign_flip = false) {
  return detail::timed("compact_vs_outer_product_oracle", [&] {
    auto rng = make_rng(seed, StreamTag::kSelftest);
    double worst = 0.0;
    for (std::size_t t = 0; t < instances; ++t) {
      const std::size_t c = 1 + rng.uniform_index(32);
      const std::size_t d = std::size_t{2} << rng.uniform_index(8);  // 2..256
      auto pa = sketch::sample_params(c, d, rng);
      const auto pb = sketch::sample_params(c, d, rng);
      const auto fa = normal_vector(rng, c);
      const auto fb = normal_vector(rng, c);
      const auto expected = sketch::bilinear_sketch_oracle(fa, fb, pa, pb);
      if (inject_sign_flip) {
        std::vector<std::uint32_t> h(pa.h().begin(), pa.h().end());
        std::vector<int> s(pa.s().begin(), pa.s().end());
        s[0] = -s[0];
        pa = sketch::CountSketchParams(std::move(h), std::move(s), d);
      }
      worst = std::max(worst, max_abs_diff(sketch::compact_bilinear(fa, fb, pa, pb), expected));
    }
    return CheckResult{{}, worst <= tol, worst, tol,
                       std::to_string(instances) + " random instances" +
                           (inject_sign_flip ? " (sign flip injected)" : "")};
  });
}

/// Monte Carlo: E<TS(x1,x2), TS(y1,y2)> = <x1,y1><x2,y2> over independent
/// hash draws. Passes when the sample mean is within `sigmas` standard errors.
inline CheckResult check_kernel_unbiasedness(Seed seed, std::size_t trials = 2000, std::size_t c = 16,
                                             std::size_t d = 64, double sigmas = 4.0) {
  return detail::timed("sketch_inner_product_unbiased", [&] {
    auto rng = make_rng(seed, StreamTag::kSelftest);
    const auto x1 = normal_vector(rng, c), x2 = normal_vector(rng, c);
    const auto y1 = normal_vector(rng, c), y2 = normal_vector(rng, c);
    auto dot = [](std::span<const double> a, std::span<const double> b) {
      double s = 0.0;
      for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
      return s;
    };
    const double truth = dot(x1, y1) * dot(x2, y2);
    double sum = 0.0, sum_sq = 0.0;
    for (std::size_t t = 0; t < trials; ++t) {
      const auto pa = sketch::sample_params(c, d, rng);
      const auto pb = sketch::sample_params(c, d, rng);
      const double est = dot(sketch::compact_bilinear(x1, x2, pa, pb), sketch::compact_bilinear(y1, y2, pa, pb));
      sum += est;
      sum_sq += est * est;
    }
    const double n = static_cast<double>(trials);
    const double mean = sum / n;
    const double var = std::max(0.0, (sum_sq - n * mean * mean) / (n - 1.0));
    const double se = std::sqrt(var / n);
    const double z = std::abs(mean - truth) / std::max(se, 1e-300);
    return CheckResult{{}, z <= sigmas, z, sigmas,
                       "mean " + detail::fmt(mean) + " vs exact " + detail::fmt(truth) + ", se " +
                           detail::fmt(se) + " (measured = |z|)"};
  });
}

/// fuse_backward for every fusion kind against central differences.
inline CheckResult check_fusion_gradients(Seed seed, std::size_t c = 4, std::size_t d = 8,
                                          double tol = 1e-4) {
  return detail::timed("fusion_backward_vs_finite_differences", [&] {
    auto rng = make_rng(seed, StreamTag::kSelftest);
    std::vector<fusion::FusionMethod> methods = {
        fusion::FusionMethod(fusion::FusionKind::kConcat, c),
        fusion::FusionMethod(fusion::FusionKind::kSum, c),
        fusion::FusionMethod(fusion::FusionKind::kProduct, c),
        fusion::FusionMethod(fusion::FusionKind::kFullBilinear, c),
        fusion::FusionMethod::compact(c, d, Seed{seed.value + 1}),
    };
    double worst = 0.0;
    std::string worst_kind;
    for (const auto& m : methods) {
      const auto fa = normal_vector(rng, c), fb = normal_vector(rng, c);
      const auto u = normal_vector(rng, m.output_dim());
      auto objective = [&](std::span<const double> a, std::span<const double> b) {
        const auto g = fusion::fuse(m, a, b);
        double s = 0.0;
        for (std::size_t k = 0; k < g.size(); ++k) s += u[k] * g[k];
        return s;
      };
      const auto analytic = fusion::fuse_backward(m, fa, fb, u);
      const auto num_a = numeric_gradient([&](std::span<const double> a) { return objective(a, fb); }, fa);
      const auto num_b = numeric_gradient([&](std::span<const double> b) { return objective(fa, b); }, fb);
      const double err = std::max(relative_error(analytic.grad_a, num_a), relative_error(analytic.grad_b, num_b));
      if (err >= worst) {
        worst = err;
        worst_kind = std::string(fusion::to_token(m.kind()));
      }
    }
    return CheckResult{{}, worst <= tol, worst, tol, "worst method: " + worst_kind};
  });
}

/// Softmax-head gradient against central differences on random instances
/// with input_dim <= 32 and L <= 7.
inline CheckResult check_classifier_gradient(Seed seed, std::size_t instances = 20, double tol = 1e-6) {
  return detail::timed("classifier_gradient_vs_finite_differences", [&] {
    auto rng = make_rng(seed, StreamTag::kSelftest);
    double worst = 0.0;
    for (std::size_t t = 0; t < instances; ++t) {
      const std::size_t dim = 1 + rng.uniform_index(32);
      const std::size_t l = 2 + rng.uniform_index(6);
      const auto w = normal_vector(rng, dim * l);
      const auto b = normal_vector(rng, l);
      const auto g = normal_vector(rng, dim);
      const std::size_t label = rng.uniform_index(l);
      const classifier::ClassifierParams p(dim, l, w, b);
      const auto analytic = classifier::gradient(p, g, label);
      const auto num_w = numeric_gradient(
          [&](std::span<const double> wv) {
            return classifier::cross_entropy(classifier::ClassifierParams(dim, l, {wv.begin(), wv.end()}, b), g, label);
          },
          w);
      const auto num_b = numeric_gradient(
          [&](std::span<const double> bv) {
            return classifier::cross_entropy(classifier::ClassifierParams(dim, l, w, {bv.begin(), bv.end()}), g, label);
          },
          b);
      worst = std::max({worst, relative_error(analytic.weights, num_w), relative_error(analytic.bias, num_b)});
    }
    return CheckResult{{}, worst <= tol, worst, tol, std::to_string(instances) + " random heads"};
  });
}

/// Trains a small head for `kind` on synthetic data and runs the logit
/// factorization diagnostic on fresh inputs.
inline CheckResult check_factorization(fusion::FusionKind kind, Seed seed) {
  const std::string name = "logit_factorization_" + std::string(fusion::to_token(kind));
  return detail::timed(name, [&] {
    harness::SynthConfig synth;
    synth.dim = 8;
    synth.num_classes = 3;
    synth.n_train = 200;
    synth.n_test = 1;
    synth.seed = seed;
    const auto data = harness::generate_synthetic(synth);
    const auto method = kind == fusion::FusionKind::kCompactBilinear
                            ? fusion::FusionMethod::compact(synth.dim, 32, seed)
                            : fusion::FusionMethod(kind, synth.dim);
    classifier::TrainConfig cfg;
    cfg.epochs = 3;
    cfg.shuffle_seed = seed;
    const auto params = classifier::sgd_train(data.train, method, cfg, seed).params;

    auto rng = make_rng(seed, StreamTag::kSelftest);
    const auto fa = normal_vector(rng, synth.dim), fb = normal_vector(rng, synth.dim);
    const auto fa2 = normal_vector(rng, synth.dim), fb2 = normal_vector(rng, synth.dim);
    const auto rep = classifier::logit_decomposition_check(params, method, fa, fb, fa2, fb2);
    if (fusion::is_bilinear(kind)) {
      return CheckResult{{}, rep.holds, rep.max_cross_dependence, classifier::kCrossDependenceFloor,
                         "max off-diagonal cross dependence (must exceed threshold)"};
    }
    const double measured = std::max(rep.identity_residual, rep.max_cross_dependence);
    return CheckResult{{}, rep.holds, measured, classifier::kFactorizationTolerance,
                       "identity residual " + detail::fmt(rep.identity_residual) +
                           ", off-diagonal cross dependence " + detail::fmt(rep.max_cross_dependence)};
  });
}

struct SelftestOptions {
  Seed seed{20240601};
  bool inject_sign_flip = false;
};

inline std::vector<CheckResult> run_selftest(const SelftestOptions& opt) {
  // Random instances routinely draw D > C * C; that warning is noise here.
  ScopedWarningSink quiet([](const std::string&) {});
  std::vector<CheckResult> out;
  out.push_back(check_fft_vs_naive(opt.seed));
  out.push_back(check_fft_roundtrip(opt.seed));
  out.push_back(check_convolution_theorem(opt.seed));
  out.push_back(check_oracle_equality(opt.seed, 200, 1e-9, opt.inject_sign_flip));
  out.push_back(check_kernel_unbiasedness(opt.seed));
  out.push_back(check_fusion_gradients(opt.seed));
  out.push_back(check_classifier_gradient(opt.seed));
  for (auto kind : {fusion::FusionKind::kConcat, fusion::FusionKind::kSum, fusion::FusionKind::kProduct,
                    fusion::FusionKind::kCompactBilinear}) {
    out.push_back(check_factorization(kind, opt.seed));
  }
  return out;
}

inline std::string format_result(const CheckResult& r) {
  std::ostringstream ss;
  ss << (r.passed ? "PASS" : "FAIL") << "  " << r.name << "  measured=" << detail::fmt(r.measured)
     << " threshold=" << detail::fmt(r.threshold) << "  (" << detail::fmt(r.seconds) << " s)  " << r.detail;
  return ss.str();
}

}  // namespace cbp::checks
