#pragma once

// Count Sketch projection and the tensor-sketch form of compact bilinear
// pooling: the count sketch of fa (x) fb is the circular convolution of the
// two individual sketches, computed as a spectral product.
//
// Hash buckets are 0-based, h_i in [0, D).

#include <cbp/core.hpp>
#include <cbp/fft.hpp>

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

namespace cbp::sketch {

/// Outer products above this many entries are refused by the oracle path.
inline constexpr std::size_t kOracleEntryLimit = std::size_t{1} << 20;

/// Frozen random projection for one view: bucket h_i and sign s_i per input
/// coordinate.
class CountSketchParams {
 public:
  CountSketchParams(std::vector<std::uint32_t> h, std::vector<int> s, std::size_t output_dim)
      : h_(std::move(h)), s_(std::move(s)), output_dim_(output_dim) {
    if (h_.empty()) throw InvalidInputError("count sketch needs at least one input coordinate");
    require_same_size(h_.size(), s_.size(), "count sketch hash/sign");
    if (!is_power_of_two(output_dim_)) {
      throw UnsupportedLengthError("sketch dimension " + std::to_string(output_dim_) +
                                   " is not a power of two");
    }
    for (auto b : h_) {
      if (b >= output_dim_) throw InvalidInputError("hash bucket out of range");
    }
    for (int v : s_) {
      if (v != 1 && v != -1) throw InvalidInputError("sign must be -1 or +1");
    }
  }

  std::size_t input_dim() const noexcept { return h_.size(); }
  std::size_t output_dim() const noexcept { return output_dim_; }
  std::span<const std::uint32_t> h() const noexcept { return h_; }
  std::span<const int> s() const noexcept { return s_; }

  bool operator==(const CountSketchParams&) const = default;

 private:
  std::vector<std::uint32_t> h_;
  std::vector<int> s_;
  std::size_t output_dim_;
};

inline CountSketchParams sample_params(std::size_t input_dim, std::size_t output_dim, Rng& rng) {
  if (input_dim == 0) throw InvalidInputError("count sketch needs at least one input coordinate");
  if (!is_power_of_two(output_dim)) {
    throw UnsupportedLengthError("sketch dimension " + std::to_string(output_dim) +
                                 " is not a power of two");
  }
  if (output_dim > input_dim * input_dim) {
    warn("sketch dimension " + std::to_string(output_dim) + " exceeds the full bilinear size " +
         std::to_string(input_dim * input_dim));
  }
  std::vector<std::uint32_t> h(input_dim);
  std::vector<int> s(input_dim);
  for (std::size_t i = 0; i < input_dim; ++i) {
    h[i] = static_cast<std::uint32_t>(rng.uniform_index(output_dim));
    s[i] = rng.sign();
  }
  return CountSketchParams(std::move(h), std::move(s), output_dim);
}

/// out_d = sum over {i : h_i = d} of s_i f_i.
inline std::vector<double> count_sketch(std::span<const double> f, const CountSketchParams& p) {
  require_same_size(f.size(), p.input_dim(), "count_sketch");
  std::vector<double> out(p.output_dim(), 0.0);
  const auto h = p.h();
  const auto s = p.s();
  for (std::size_t i = 0; i < f.size(); ++i) out[h[i]] += s[i] * f[i];
  return out;
}

inline std::vector<double> count_sketch(const FeatureVector& f, const CountSketchParams& p) {
  return count_sketch(f.values(), p);
}

namespace detail {
inline void check_pair(std::size_t dim_a, std::size_t dim_b, const CountSketchParams& pa,
                       const CountSketchParams& pb) {
  require_same_size(dim_a, pa.input_dim(), "view A vs its sketch params");
  require_same_size(dim_b, pb.input_dim(), "view B vs its sketch params");
  require_same_size(pa.output_dim(), pb.output_dim(), "sketch output dimensions");
}
}  // namespace detail

inline std::vector<double> compact_bilinear(std::span<const double> fa, std::span<const double> fb,
                                            const CountSketchParams& pa,
                                            const CountSketchParams& pb) {
  detail::check_pair(fa.size(), fb.size(), pa, pb);
  return fft::circular_convolve(count_sketch(fa, pa), count_sketch(fb, pb));
}

inline std::vector<double> compact_bilinear(const FeatureVector& fa, const FeatureVector& fb,
                                            const CountSketchParams& pa,
                                            const CountSketchParams& pb) {
  return compact_bilinear(fa.values(), fb.values(), pa, pb);
}

/// Count sketch of the materialized outer product with the combined hash
/// h(i,j) = (h_a_i + h_b_j) mod D and sign s_a_i * s_b_j. Reference path only.
inline std::vector<double> bilinear_sketch_oracle(std::span<const double> fa,
                                                  std::span<const double> fb,
                                                  const CountSketchParams& pa,
                                                  const CountSketchParams& pb) {
  detail::check_pair(fa.size(), fb.size(), pa, pb);
  if (fa.size() * fb.size() > kOracleEntryLimit) {
    throw ResourceLimitError("outer product of " + std::to_string(fa.size()) + "x" +
                             std::to_string(fb.size()) + " exceeds the oracle size guard");
  }
  const std::size_t d = pa.output_dim();
  std::vector<double> outer(fa.size() * fb.size());
  for (std::size_t i = 0; i < fa.size(); ++i) {
    for (std::size_t j = 0; j < fb.size(); ++j) outer[i * fb.size() + j] = fa[i] * fb[j];
  }
  std::vector<double> out(d, 0.0);
  for (std::size_t i = 0; i < fa.size(); ++i) {
    for (std::size_t j = 0; j < fb.size(); ++j) {
      const std::size_t bucket = (pa.h()[i] + pb.h()[j]) % d;
      out[bucket] += pa.s()[i] * pb.s()[j] * outer[i * fb.size() + j];
    }
  }
  return out;
}

inline std::vector<double> bilinear_sketch_oracle(const FeatureVector& fa, const FeatureVector& fb,
                                                  const CountSketchParams& pa,
                                                  const CountSketchParams& pb) {
  return bilinear_sketch_oracle(fa.values(), fb.values(), pa, pb);
}

struct PairGradient {
  std::vector<double> grad_a;
  std::vector<double> grad_b;
};

/// Gradient of <upstream, compact_bilinear(fa, fb)> with respect to both
/// inputs. With g = cs_a (*) cs_b, dL/dcs_a is the circular correlation of
/// the upstream gradient with cs_b (and symmetrically for cs_b); the count
/// sketch transpose then gathers s_i * grad[h_i].
inline PairGradient compact_bilinear_backward(std::span<const double> fa,
                                              std::span<const double> fb,
                                              const CountSketchParams& pa,
                                              const CountSketchParams& pb,
                                              std::span<const double> upstream) {
  detail::check_pair(fa.size(), fb.size(), pa, pb);
  require_same_size(upstream.size(), pa.output_dim(), "upstream gradient");
  const auto cs_a = count_sketch(fa, pa);
  const auto cs_b = count_sketch(fb, pb);
  const auto d_cs_a = fft::circular_correlate(upstream, cs_b);
  const auto d_cs_b = fft::circular_correlate(upstream, cs_a);

  PairGradient g{std::vector<double>(fa.size()), std::vector<double>(fb.size())};
  for (std::size_t i = 0; i < fa.size(); ++i) g.grad_a[i] = pa.s()[i] * d_cs_a[pa.h()[i]];
  for (std::size_t j = 0; j < fb.size(); ++j) g.grad_b[j] = pb.s()[j] * d_cs_b[pb.h()[j]];
  return g;
}

}  // namespace cbp::sketch
