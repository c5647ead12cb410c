#include <cbp/checks.hpp>
#include <cbp/fft.hpp>

#include <gtest/gtest.h>

#include <complex>
#include <vector>

namespace cbp::fft {
namespace {

using checks::naive_circular_convolution;
using checks::naive_dft;
using checks::normal_vector;

void expect_spectrum_near(const ComplexVector& got, const ComplexVector& want, double tol) {
  ASSERT_EQ(got.size(), want.size());
  for (std::size_t k = 0; k < got.size(); ++k) {
    EXPECT_NEAR(got[k].real(), want[k].real(), tol) << "bin " << k;
    EXPECT_NEAR(got[k].imag(), want[k].imag(), tol) << "bin " << k;
  }
}

TEST(Dfft, ImpulseGivesFlatSpectrum) {
  expect_spectrum_near(dfft(std::vector<double>{1, 0, 0, 0}), ComplexVector(4, {1.0, 0.0}), 1e-15);
}

TEST(Dfft, ConstantGivesDcOnly) {
  const double c = 2.5;
  const auto X = dfft(std::vector<double>(8, c));
  ComplexVector want(8, {0.0, 0.0});
  want[0] = {8 * c, 0.0};
  expect_spectrum_near(X, want, 1e-14);
}

TEST(Dfft, SmallCaseMatchesNaiveOracle) {
  const std::vector<double> x{1, 2, 3, 4};
  const ComplexVector frozen{{10, 0}, {-2, 2}, {-2, 0}, {-2, -2}};
  // The frozen values are the naive DFT's output.
  expect_spectrum_near(naive_dft(x), frozen, 1e-12);
  expect_spectrum_near(dfft(x), frozen, 1e-12);
}

TEST(Dfft, RejectsNonPowerOfTwo) {
  EXPECT_THROW(dfft(std::vector<double>(3, 1.0)), UnsupportedLengthError);
  EXPECT_THROW(dfft(std::vector<double>(12, 1.0)), UnsupportedLengthError);
  EXPECT_THROW(dfft(std::vector<double>{}), UnsupportedLengthError);
}

TEST(Dfft, LengthOne) {
  const auto X = dfft(std::vector<double>{3.0});
  ASSERT_EQ(X.size(), 1u);
  EXPECT_EQ(X[0], Complex(3.0, 0.0));
}

TEST(Idfft, InvertsSmallCase) {
  const auto x = idfft({{10, 0}, {-2, 2}, {-2, 0}, {-2, -2}});
  const std::vector<double> want{1, 2, 3, 4};
  for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(x[i], want[i], 1e-12);
}

TEST(Idfft, DcInversion) {
  const double c = -1.25;
  ComplexVector X(16, {0.0, 0.0});
  X[0] = {16 * c, 0.0};
  for (double v : idfft(X)) EXPECT_NEAR(v, c, 1e-15);
}

TEST(Idfft, RejectsNonConjugateSymmetricSpectrum) {
  ComplexVector X(4, {0.0, 0.0});
  X[1] = {0.0, 1.0};
  EXPECT_THROW(idfft(X), NumericError);
  EXPECT_NO_THROW(idfft_complex(X));
}

TEST(Idfft, RoundTripAllLengths) {
  auto rng = make_rng(Seed{1}, 0);
  for (std::size_t n = 1; n <= 2048; n <<= 1) {
    const auto x = normal_vector(rng, n);
    EXPECT_LE(checks::max_abs_diff(idfft(dfft(x)), x), 1e-10) << "n=" << n;
  }
}

TEST(ComplexHadamard, Examples) {
  const ComplexVector x{{1, 2}, {-3, 0.5}};
  EXPECT_EQ(complex_hadamard(x, ComplexVector(2, {1, 0})), x);
  EXPECT_EQ(complex_hadamard(x, ComplexVector(2, {0, 0})), ComplexVector(2, {0, 0}));
  EXPECT_EQ(complex_hadamard({{1, 1}}, {{2, -1}}), ComplexVector{Complex(3, 1)});
  EXPECT_THROW(complex_hadamard(x, ComplexVector(3)), ShapeError);
}

TEST(DfftProperty, MatchesNaiveDft) {
  auto rng = make_rng(Seed{2}, 0);
  for (std::size_t n = 1; n <= 1024; n <<= 1) {
    for (int rep = 0; rep < 3; ++rep) {
      const auto x = normal_vector(rng, n);
      EXPECT_LE(checks::max_abs_diff(dfft(x), naive_dft(x)), 1e-9) << "n=" << n;
    }
  }
}

TEST(DfftProperty, Linearity) {
  auto rng = make_rng(Seed{3}, 0);
  for (std::size_t n = 2; n <= 512; n <<= 1) {
    const auto x = normal_vector(rng, n), y = normal_vector(rng, n);
    const double a = rng.normal(), b = rng.normal();
    std::vector<double> combo(n);
    for (std::size_t i = 0; i < n; ++i) combo[i] = a * x[i] + b * y[i];
    const auto X = dfft(x), Y = dfft(y), Z = dfft(combo);
    for (std::size_t k = 0; k < n; ++k) EXPECT_LE(std::abs(Z[k] - (a * X[k] + b * Y[k])), 1e-10);
  }
}

TEST(DfftProperty, Parseval) {
  auto rng = make_rng(Seed{4}, 0);
  for (std::size_t n = 2; n <= 2048; n <<= 1) {
    const auto x = normal_vector(rng, n);
    double time = 0.0, freq = 0.0;
    for (double v : x) time += v * v;
    for (const auto& v : dfft(x)) freq += std::norm(v);
    freq /= static_cast<double>(n);
    EXPECT_LE(std::abs(time - freq), 1e-9 * time) << "n=" << n;
  }
}

TEST(DfftProperty, ConvolutionTheorem) {
  auto rng = make_rng(Seed{5}, 0);
  for (std::size_t n = 1; n <= 1024; n <<= 1) {
    const auto a = normal_vector(rng, n), b = normal_vector(rng, n);
    EXPECT_LE(checks::max_abs_diff(circular_convolve(a, b), naive_circular_convolution(a, b)), 1e-9);
  }
}

TEST(CircularCorrelate, MatchesDirectSum) {
  auto rng = make_rng(Seed{6}, 0);
  const std::size_t n = 16;
  const auto a = normal_vector(rng, n), b = normal_vector(rng, n);
  const auto got = circular_correlate(a, b);
  for (std::size_t k = 0; k < n; ++k) {
    double want = 0.0;
    for (std::size_t d = 0; d < n; ++d) want += a[d] * b[(d + n - k) % n];
    EXPECT_NEAR(got[k], want, 1e-12);
  }
}

}  // namespace
}  // namespace cbp::fft
