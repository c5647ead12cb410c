#pragma once

// Fusing functions that combine two view features into one vector before the
// linear softmax head.

#include <cbp/core.hpp>
#include <cbp/sketch.hpp>

#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace cbp::fusion {

enum class FusionKind { kConcat, kSum, kProduct, kFullBilinear, kCompactBilinear };

/// FullBilinear materializes C*C entries; it is a reference path only.
inline constexpr std::size_t kFullBilinearMaxDim = 64;

inline std::string_view to_token(FusionKind kind) {
  switch (kind) {
    case FusionKind::kConcat: return "concat";
    case FusionKind::kSum: return "sum";
    case FusionKind::kProduct: return "product";
    case FusionKind::kFullBilinear: return "full";
    case FusionKind::kCompactBilinear: return "compact";
  }
  return "?";
}

inline FusionKind kind_from_token(std::string_view token) {
  for (auto k : {FusionKind::kConcat, FusionKind::kSum, FusionKind::kProduct,
                 FusionKind::kFullBilinear, FusionKind::kCompactBilinear}) {
    if (to_token(k) == token) return k;
  }
  throw UsageError("unknown fusion method '" + std::string(token) + "'");
}

inline bool is_bilinear(FusionKind kind) {
  return kind == FusionKind::kFullBilinear || kind == FusionKind::kCompactBilinear;
}

class FusionMethod {
 public:
  /// Any kind except CompactBilinear.
  FusionMethod(FusionKind kind, std::size_t input_dim) : kind_(kind), input_dim_(input_dim) {
    if (input_dim == 0) throw InvalidInputError("fusion input dimension must be positive");
    if (kind == FusionKind::kCompactBilinear) {
      throw InvalidInputError("compact bilinear fusion needs count sketch parameters");
    }
    if (kind == FusionKind::kFullBilinear && input_dim > kFullBilinearMaxDim) {
      throw ResourceLimitError("full bilinear fusion is limited to C <= " +
                               std::to_string(kFullBilinearMaxDim));
    }
  }

  static FusionMethod compact(sketch::CountSketchParams pa, sketch::CountSketchParams pb) {
    return FusionMethod(std::move(pa), std::move(pb));
  }

  /// Draws fresh sketch parameters for both views from their own streams.
  static FusionMethod compact(std::size_t input_dim, std::size_t output_dim, Seed seed) {
    auto rng_a = make_rng(seed, StreamTag::kHashA);
    auto rng_b = make_rng(seed, StreamTag::kHashB);
    auto pa = sketch::sample_params(input_dim, output_dim, rng_a);
    auto pb = sketch::sample_params(input_dim, output_dim, rng_b);
    return compact(std::move(pa), std::move(pb));
  }

  FusionKind kind() const noexcept { return kind_; }
  std::size_t input_dim() const noexcept { return input_dim_; }

  std::size_t output_dim() const noexcept {
    switch (kind_) {
      case FusionKind::kConcat: return 2 * input_dim_;
      case FusionKind::kSum:
      case FusionKind::kProduct: return input_dim_;
      case FusionKind::kFullBilinear: return input_dim_ * input_dim_;
      case FusionKind::kCompactBilinear: return sketches_->first.output_dim();
    }
    return 0;
  }

  /// Present only for CompactBilinear.
  const std::optional<std::pair<sketch::CountSketchParams, sketch::CountSketchParams>>& sketches()
      const noexcept {
    return sketches_;
  }

 private:
  FusionMethod(sketch::CountSketchParams pa, sketch::CountSketchParams pb)
      : kind_(FusionKind::kCompactBilinear), input_dim_(pa.input_dim()) {
    require_same_size(pa.input_dim(), pb.input_dim(), "compact bilinear input dims");
    require_same_size(pa.output_dim(), pb.output_dim(), "compact bilinear output dims");
    sketches_.emplace(std::move(pa), std::move(pb));
  }

  FusionKind kind_;
  std::size_t input_dim_;
  std::optional<std::pair<sketch::CountSketchParams, sketch::CountSketchParams>> sketches_;
};

inline std::vector<double> fuse(const FusionMethod& method, std::span<const double> fa,
                                std::span<const double> fb) {
  require_same_size(fa.size(), fb.size(), "fuse: view dimensions");
  require_same_size(fa.size(), method.input_dim(), "fuse: method input dimension");
  const std::size_t c = fa.size();
  std::vector<double> g;
  switch (method.kind()) {
    case FusionKind::kConcat:
      g.reserve(2 * c);
      g.insert(g.end(), fa.begin(), fa.end());
      g.insert(g.end(), fb.begin(), fb.end());
      break;
    case FusionKind::kSum:
      g.resize(c);
      for (std::size_t i = 0; i < c; ++i) g[i] = fa[i] + fb[i];
      break;
    case FusionKind::kProduct:
      g.resize(c);
      for (std::size_t i = 0; i < c; ++i) g[i] = fa[i] * fb[i];
      break;
    case FusionKind::kFullBilinear:
      // k = i * C + j
      g.resize(c * c);
      for (std::size_t i = 0; i < c; ++i) {
        for (std::size_t j = 0; j < c; ++j) g[i * c + j] = fa[i] * fb[j];
      }
      break;
    case FusionKind::kCompactBilinear: {
      const auto& [pa, pb] = *method.sketches();
      g = sketch::compact_bilinear(fa, fb, pa, pb);
      break;
    }
  }
  return g;
}

inline std::vector<double> fuse(const FusionMethod& method, const FeatureVector& fa,
                                const FeatureVector& fb) {
  return fuse(method, fa.values(), fb.values());
}

/// Gradient of <upstream, fuse(method, fa, fb)> with respect to fa and fb.
inline sketch::PairGradient fuse_backward(const FusionMethod& method, std::span<const double> fa,
                                          std::span<const double> fb,
                                          std::span<const double> upstream) {
  require_same_size(fa.size(), fb.size(), "fuse_backward: view dimensions");
  require_same_size(fa.size(), method.input_dim(), "fuse_backward: method input dimension");
  require_same_size(upstream.size(), method.output_dim(), "fuse_backward: upstream gradient");
  const std::size_t c = fa.size();
  sketch::PairGradient g{std::vector<double>(c, 0.0), std::vector<double>(c, 0.0)};
  switch (method.kind()) {
    case FusionKind::kConcat:
      for (std::size_t i = 0; i < c; ++i) {
        g.grad_a[i] = upstream[i];
        g.grad_b[i] = upstream[c + i];
      }
      break;
    case FusionKind::kSum:
      for (std::size_t i = 0; i < c; ++i) g.grad_a[i] = g.grad_b[i] = upstream[i];
      break;
    case FusionKind::kProduct:
      for (std::size_t i = 0; i < c; ++i) {
        g.grad_a[i] = upstream[i] * fb[i];
        g.grad_b[i] = upstream[i] * fa[i];
      }
      break;
    case FusionKind::kFullBilinear:
      for (std::size_t i = 0; i < c; ++i) {
        for (std::size_t j = 0; j < c; ++j) {
          const double u = upstream[i * c + j];
          g.grad_a[i] += u * fb[j];
          g.grad_b[j] += u * fa[i];
        }
      }
      break;
    case FusionKind::kCompactBilinear: {
      const auto& [pa, pb] = *method.sketches();
      return sketch::compact_bilinear_backward(fa, fb, pa, pb, upstream);
    }
  }
  return g;
}

}  // namespace cbp::fusion
