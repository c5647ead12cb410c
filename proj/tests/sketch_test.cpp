#include <cbp/checks.hpp>
#include <cbp/sketch.hpp>

#include <gtest/gtest.h>

#include <string>
#include <vector>

namespace cbp::sketch {
namespace {

using checks::max_abs_diff;
using checks::normal_vector;

void expect_vec_near(const std::vector<double>& got, const std::vector<double>& want, double tol) {
  ASSERT_EQ(got.size(), want.size());
  for (std::size_t i = 0; i < got.size(); ++i) EXPECT_NEAR(got[i], want[i], tol) << "index " << i;
}

TEST(CountSketchParams, ValidatesEntries) {
  EXPECT_THROW(CountSketchParams({0, 4}, {1, 1}, 4), InvalidInputError);
  EXPECT_THROW(CountSketchParams({0, 1}, {1, 0}, 4), InvalidInputError);
  EXPECT_THROW(CountSketchParams({0, 1}, {1}, 4), ShapeError);
  EXPECT_THROW(CountSketchParams({0, 1}, {1, 1}, 3), UnsupportedLengthError);
  EXPECT_THROW(CountSketchParams({}, {}, 4), InvalidInputError);
}

TEST(SampleParams, LargeDimensionsStayInRange) {
  auto rng = make_rng(Seed{42}, StreamTag::kHashA);
  const auto p = sample_params(1024, 2048, rng);
  EXPECT_EQ(p.input_dim(), 1024u);
  EXPECT_EQ(p.output_dim(), 2048u);
  for (auto b : p.h()) EXPECT_LT(b, 2048u);
  for (int s : p.s()) EXPECT_TRUE(s == 1 || s == -1);
}

TEST(SampleParams, DeterministicGivenStream) {
  auto r1 = make_rng(Seed{7}, StreamTag::kHashA);
  auto r2 = make_rng(Seed{7}, StreamTag::kHashA);
  EXPECT_EQ(sample_params(64, 128, r1), sample_params(64, 128, r2));
}

TEST(SampleParams, SmallestDomain) {
  ScopedWarningSink quiet([](const std::string&) {});
  auto rng = make_rng(Seed{1}, 0);
  for (int t = 0; t < 20; ++t) {
    const auto p = sample_params(1, 2, rng);
    EXPECT_LT(p.h()[0], 2u);
    EXPECT_TRUE(p.s()[0] == 1 || p.s()[0] == -1);
  }
}

TEST(SampleParams, RejectsNonPowerOfTwo) {
  auto rng = make_rng(Seed{1}, 0);
  EXPECT_THROW(sample_params(4, 6, rng), UnsupportedLengthError);
}

TEST(SampleParams, WarnsWhenSketchExceedsFullBilinear) {
  std::vector<std::string> seen;
  ScopedWarningSink sink([&](const std::string& m) { seen.push_back(m); });
  auto rng = make_rng(Seed{1}, 0);
  sample_params(4, 32, rng);
  EXPECT_EQ(seen.size(), 1u);
  sample_params(4, 16, rng);
  EXPECT_EQ(seen.size(), 1u);
}

TEST(SampleParams, BucketsAndSignsAreRoughlyUniform) {
  auto rng = make_rng(Seed{3}, 0);
  const auto p = sample_params(16000, 16, rng);
  std::vector<int> counts(16, 0);
  int plus = 0;
  for (std::size_t i = 0; i < p.input_dim(); ++i) {
    ++counts[p.h()[i]];
    plus += p.s()[i] == 1;
  }
  for (int c : counts) EXPECT_NEAR(c, 1000, 150);
  EXPECT_NEAR(plus, 8000, 400);
}

TEST(CountSketch, HandExample) {
  const CountSketchParams p({0, 2, 0}, {1, -1, 1}, 4);
  const std::vector<double> f{2, 5, 7};
  const std::vector<double> frozen{9, 0, -5, 0};
  expect_vec_near(checks::dense_count_sketch(f, p), frozen, 0.0);
  expect_vec_near(count_sketch(f, p), frozen, 0.0);
}

TEST(CountSketch, ZeroInputGivesZeroSketch) {
  auto rng = make_rng(Seed{2}, 0);
  const auto p = sample_params(10, 8, rng);
  for (double v : count_sketch(std::vector<double>(10, 0.0), p)) EXPECT_EQ(v, 0.0);
}

TEST(CountSketch, SingleBucket) {
  const CountSketchParams p({1}, {-1}, 2);
  expect_vec_near(count_sketch(std::vector<double>{3}, p), {0, -3}, 0.0);
}

TEST(CountSketch, ShapeMismatch) {
  const CountSketchParams p({1, 0}, {1, 1}, 2);
  EXPECT_THROW(count_sketch(std::vector<double>{1, 2, 3}, p), ShapeError);
}

TEST(CountSketchProperty, MatchesDenseMatrixFormAndIsLinear) {
  auto rng = make_rng(Seed{4}, 0);
  for (int t = 0; t < 50; ++t) {
    const std::size_t c = 1 + rng.uniform_index(40), d = std::size_t{1} << (1 + rng.uniform_index(7));
    const auto p = sample_params(c, d, rng);
    const auto x = normal_vector(rng, c), y = normal_vector(rng, c);
    const double a = rng.normal(), b = rng.normal();
    EXPECT_LE(max_abs_diff(count_sketch(x, p), checks::dense_count_sketch(x, p)), 1e-12);
    std::vector<double> combo(c);
    for (std::size_t i = 0; i < c; ++i) combo[i] = a * x[i] + b * y[i];
    const auto cx = count_sketch(x, p), cy = count_sketch(y, p), cc = count_sketch(combo, p);
    for (std::size_t k = 0; k < d; ++k) EXPECT_LE(std::abs(cc[k] - (a * cx[k] + b * cy[k])), 1e-10);
  }
}

// Hand trace: cs_a = [1, 2], cs_b = [-1, 0]; spectra [3, -1] * [-1, -1] =
// [-3, 1]; inverse [-1, -2].
TEST(CompactBilinear, HandExample) {
  const CountSketchParams pa({0, 1}, {1, 1}, 2);
  const CountSketchParams pb({0, 0}, {1, -1}, 2);
  const std::vector<double> fa{1, 2}, fb{3, 4};
  expect_vec_near(bilinear_sketch_oracle(fa, fb, pa, pb), {-1, -2}, 1e-15);
  expect_vec_near(compact_bilinear(fa, fb, pa, pb), {-1, -2}, 1e-12);
}

TEST(CompactBilinear, ZeroViewGivesZero) {
  auto rng = make_rng(Seed{5}, 0);
  const auto pa = sample_params(6, 16, rng), pb = sample_params(6, 16, rng);
  const auto fa = normal_vector(rng, 6);
  for (double v : compact_bilinear(fa, std::vector<double>(6, 0.0), pa, pb)) EXPECT_NEAR(v, 0.0, 1e-15);
  for (double v : bilinear_sketch_oracle(std::vector<double>(6, 0.0), std::vector<double>(6, 0.0), pa, pb)) {
    EXPECT_EQ(v, 0.0);
  }
}

TEST(CompactBilinear, ShapeErrors) {
  const CountSketchParams p2({0, 1}, {1, 1}, 2);
  const CountSketchParams p4({0, 1}, {1, 1}, 4);
  const std::vector<double> f{1, 2};
  EXPECT_THROW(compact_bilinear(f, f, p2, p4), ShapeError);
  EXPECT_THROW(compact_bilinear(std::vector<double>{1, 2, 3}, f, p2, p2), ShapeError);
}

TEST(BilinearSketchOracle, SizeGuard) {
  std::vector<std::uint32_t> h(1100, 0);
  std::vector<int> s(1100, 1);
  const CountSketchParams p(h, s, 2);
  const std::vector<double> f(1100, 1.0);
  EXPECT_THROW(bilinear_sketch_oracle(f, f, p, p), ResourceLimitError);
}

TEST(CompactBilinearProperty, EqualsOracleOnRandomInstances) {
  ScopedWarningSink quiet([](const std::string&) {});
  auto rng = make_rng(Seed{6}, 0);
  for (int t = 0; t < 300; ++t) {
    const std::size_t c = 1 + rng.uniform_index(32);
    const std::size_t d = std::size_t{2} << rng.uniform_index(8);
    const auto pa = sample_params(c, d, rng), pb = sample_params(c, d, rng);
    const auto fa = normal_vector(rng, c), fb = normal_vector(rng, c);
    ASSERT_LE(max_abs_diff(compact_bilinear(fa, fb, pa, pb), bilinear_sketch_oracle(fa, fb, pa, pb)), 1e-9)
        << "C=" << c << " D=" << d;
  }
}

TEST(CompactBilinearProperty, LinearInEachArgument) {
  auto rng = make_rng(Seed{7}, 0);
  for (int t = 0; t < 50; ++t) {
    const auto pa = sample_params(12, 32, rng), pb = sample_params(12, 32, rng);
    const auto fa = normal_vector(rng, 12), fb = normal_vector(rng, 12);
    const double alpha = 0.1 + 5 * rng.uniform01();
    std::vector<double> scaled(fa);
    for (double& v : scaled) v *= alpha;
    const auto base = compact_bilinear(fa, fb, pa, pb);
    const auto got = compact_bilinear(scaled, fb, pa, pb);
    double scale = 0.0;
    for (double v : base) scale = std::max(scale, std::abs(alpha * v));
    for (std::size_t k = 0; k < base.size(); ++k) {
      // relative to the output scale: FFT rounding is not exact per bucket
      EXPECT_LE(std::abs(got[k] - alpha * base[k]), 1e-12 * scale);
    }
  }
}

TEST(CompactBilinearProperty, DeterministicUnderFixedSeeds) {
  auto run = [] {
    auto ra = make_rng(Seed{99}, StreamTag::kHashA), rb = make_rng(Seed{99}, StreamTag::kHashB);
    const auto pa = sample_params(16, 64, ra), pb = sample_params(16, 64, rb);
    auto rx = make_rng(Seed{99}, 0);
    const auto fa = normal_vector(rx, 16), fb = normal_vector(rx, 16);
    return compact_bilinear(fa, fb, pa, pb);
  };
  EXPECT_EQ(run(), run());
}

TEST(CompactBilinearProperty, InnerProductIsUnbiased) {
  const auto r = checks::check_kernel_unbiasedness(Seed{2024}, 2000, 16, 64, 4.0);
  EXPECT_TRUE(r.passed) << checks::format_result(r);
}

TEST(CompactBilinearBackward, ZeroUpstreamGivesZeroGradients) {
  auto rng = make_rng(Seed{8}, 0);
  const auto pa = sample_params(5, 8, rng), pb = sample_params(5, 8, rng);
  const auto g = compact_bilinear_backward(normal_vector(rng, 5), normal_vector(rng, 5), pa, pb,
                                           std::vector<double>(8, 0.0));
  for (double v : g.grad_a) EXPECT_NEAR(v, 0.0, 1e-15);
  for (double v : g.grad_b) EXPECT_NEAR(v, 0.0, 1e-15);
}

TEST(CompactBilinearBackward, MatchesFiniteDifferences) {
  auto rng = make_rng(Seed{9}, 0);
  for (int t = 0; t < 10; ++t) {
    const std::size_t c = 4, d = 8;
    const auto pa = sample_params(c, d, rng), pb = sample_params(c, d, rng);
    const auto fa = normal_vector(rng, c), fb = normal_vector(rng, c), u = normal_vector(rng, d);
    auto objective = [&](std::span<const double> a, std::span<const double> b) {
      const auto g = compact_bilinear(a, b, pa, pb);
      double s = 0.0;
      for (std::size_t k = 0; k < d; ++k) s += u[k] * g[k];
      return s;
    };
    const auto grad = compact_bilinear_backward(fa, fb, pa, pb, u);
    const auto num_a = checks::numeric_gradient([&](std::span<const double> a) { return objective(a, fb); }, fa);
    const auto num_b = checks::numeric_gradient([&](std::span<const double> b) { return objective(fa, b); }, fb);
    EXPECT_LE(checks::relative_error(grad.grad_a, num_a), 1e-4);
    EXPECT_LE(checks::relative_error(grad.grad_b, num_b), 1e-4);
  }
}

TEST(CompactBilinearBackward, ShapeError) {
  const CountSketchParams p({0, 1}, {1, 1}, 2);
  const std::vector<double> f{1, 2};
  EXPECT_THROW(compact_bilinear_backward(f, f, p, p, std::vector<double>(3)), ShapeError);
}

}  // namespace
}  // namespace cbp::sketch
