#pragma once

// Iterative radix-2 discrete Fourier transform.
//
// Forward:  X_k = sum_j x_j exp(-2 pi i jk / n)
// Inverse:  x_j = (1/n) sum_k X_k exp(+2 pi i jk / n)
//
// Only power-of-two lengths are supported.

#include <cbp/core.hpp>

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <span>
#include <vector>

namespace cbp::fft {

using Complex = std::complex<double>;
using ComplexVector = std::vector<Complex>;

/// Largest imaginary residue tolerated when an inverse transform is reduced
/// to a real signal.
inline constexpr double kRealResidueTolerance = 1e-9;

namespace detail {

inline void check_length(std::size_t n) {
  if (!is_power_of_two(n)) {
    throw UnsupportedLengthError("transform length " + std::to_string(n) +
                                 " is not a power of two");
  }
}

// In-place transform. sign = -1 forward, +1 inverse (unnormalized).
inline void transform(std::span<Complex> x, int sign) {
  const std::size_t n = x.size();
  check_length(n);

  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(x[i], x[j]);
  }

  // Twiddles are evaluated directly rather than by repeated multiplication
  // so the error stays O(eps log n).
  std::vector<Complex> twiddle(n / 2);
  for (std::size_t k = 0; k < n / 2; ++k) {
    const double angle = sign * 2.0 * std::numbers::pi * static_cast<double>(k) /
                         static_cast<double>(n);
    twiddle[k] = {std::cos(angle), std::sin(angle)};
  }

  for (std::size_t len = 2; len <= n; len <<= 1) {
    const std::size_t half = len / 2;
    const std::size_t stride = n / len;
    for (std::size_t start = 0; start < n; start += len) {
      for (std::size_t k = 0; k < half; ++k) {
        const Complex t = twiddle[k * stride] * x[start + k + half];
        const Complex u = x[start + k];
        x[start + k] = u + t;
        x[start + k + half] = u - t;
      }
    }
  }
}

}  // namespace detail

inline ComplexVector dfft(std::span<const double> x) {
  ComplexVector out(x.begin(), x.end());
  detail::transform(out, -1);
  return out;
}

inline ComplexVector dfft_complex(ComplexVector x) {
  detail::transform(x, -1);
  return x;
}

/// Full complex inverse, normalized by 1/n.
inline ComplexVector idfft_complex(ComplexVector X) {
  detail::transform(X, +1);
  const double scale = 1.0 / static_cast<double>(X.size());
  for (auto& v : X) v *= scale;
  return X;
}

/// Inverse transform of a conjugate-symmetric spectrum. Throws NumericError
/// when the imaginary residue exceeds kRealResidueTolerance.
inline std::vector<double> idfft(const ComplexVector& X) {
  const ComplexVector full = idfft_complex(X);
  std::vector<double> out(full.size());
  for (std::size_t j = 0; j < full.size(); ++j) {
    if (std::abs(full[j].imag()) > kRealResidueTolerance) {
      throw NumericError("inverse transform has imaginary residue " +
                         std::to_string(full[j].imag()) + " at index " + std::to_string(j));
    }
    out[j] = full[j].real();
  }
  return out;
}

inline ComplexVector complex_hadamard(const ComplexVector& x, const ComplexVector& y) {
  require_same_size(x.size(), y.size(), "complex_hadamard");
  ComplexVector out(x.size());
  std::transform(x.begin(), x.end(), y.begin(), out.begin(), std::multiplies<>{});
  return out;
}

/// Circular convolution through the frequency domain.
inline std::vector<double> circular_convolve(std::span<const double> a, std::span<const double> b) {
  require_same_size(a.size(), b.size(), "circular_convolve");
  return idfft(complex_hadamard(dfft(a), dfft(b)));
}

/// Circular cross-correlation: out_k = sum_d a_d b_{(d - k) mod n}.
inline std::vector<double> circular_correlate(std::span<const double> a,
                                              std::span<const double> b) {
  require_same_size(a.size(), b.size(), "circular_correlate");
  ComplexVector fb = dfft(b);
  for (auto& v : fb) v = std::conj(v);
  return idfft(complex_hadamard(dfft(a), fb));
}

}  // namespace cbp::fft
