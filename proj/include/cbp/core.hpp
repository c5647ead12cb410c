#pragma once

// Shared numeric vocabulary: feature vectors, paired samples, datasets and
// the seeded random streams every other module draws from.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <iostream>
#include <limits>
#include <numbers>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace cbp {

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define CBP_DEFINE_ERROR(Name)              \
  class Name : public Error {               \
   public:                                  \
    using Error::Error;                     \
  };

CBP_DEFINE_ERROR(InvalidInputError)
CBP_DEFINE_ERROR(ShapeError)
CBP_DEFINE_ERROR(UnsupportedLengthError)
CBP_DEFINE_ERROR(NumericError)
CBP_DEFINE_ERROR(ResourceLimitError)
CBP_DEFINE_ERROR(ConfigError)
CBP_DEFINE_ERROR(UsageError)

#undef CBP_DEFINE_ERROR

class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

inline void require_same_size(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    throw ShapeError(std::string(what) + ": size mismatch (" + std::to_string(a) +
                     " vs " + std::to_string(b) + ")");
  }
}

// Warnings go through a replaceable sink so tests and the CLI can capture them.
inline std::function<void(const std::string&)>& warning_sink() {
  static std::function<void(const std::string&)> sink = [](const std::string& msg) {
    std::clog << "warning: " << msg << '\n';
  };
  return sink;
}

inline void warn(const std::string& msg) {
  if (warning_sink()) warning_sink()(msg);
}

/// Installs a warning sink for the lifetime of the object.
class ScopedWarningSink {
 public:
  explicit ScopedWarningSink(std::function<void(const std::string&)> sink)
      : saved_(std::exchange(warning_sink(), std::move(sink))) {}
  ~ScopedWarningSink() { warning_sink() = std::move(saved_); }
  ScopedWarningSink(const ScopedWarningSink&) = delete;
  ScopedWarningSink& operator=(const ScopedWarningSink&) = delete;

 private:
  std::function<void(const std::string&)> saved_;
};

// ---------------------------------------------------------------------------
// Feature vectors and datasets
// ---------------------------------------------------------------------------

/// Flat per-view activation vector. Entries are always finite.
class FeatureVector {
 public:
  FeatureVector() = default;
  explicit FeatureVector(std::vector<double> values) : values_(std::move(values)) {
    for (double v : values_) {
      if (!std::isfinite(v)) throw InvalidInputError("feature vector has a non-finite entry");
    }
  }
  FeatureVector(std::initializer_list<double> values)
      : FeatureVector(std::vector<double>(values)) {}

  std::size_t dim() const noexcept { return values_.size(); }
  std::span<const double> values() const noexcept { return values_; }
  double operator[](std::size_t i) const { return values_[i]; }

  bool operator==(const FeatureVector&) const = default;

 private:
  std::vector<double> values_;
};

struct PairedSample {
  FeatureVector view_a;
  FeatureVector view_b;
  std::size_t label = 0;

  bool operator==(const PairedSample&) const = default;
};

/// Ordered collection of paired samples with a uniform feature dimension.
class Dataset {
 public:
  Dataset(std::size_t dim, std::size_t num_classes) : dim_(dim), num_classes_(num_classes) {
    if (dim == 0) throw InvalidInputError("dataset dimension must be positive");
    if (num_classes == 0) throw InvalidInputError("dataset needs at least one class");
  }

  void add(PairedSample sample) {
    if (sample.view_a.dim() != dim_ || sample.view_b.dim() != dim_) {
      throw ShapeError("sample dimension does not match dataset dimension " +
                       std::to_string(dim_));
    }
    if (sample.label >= num_classes_) {
      throw InvalidInputError("label " + std::to_string(sample.label) + " out of range [0, " +
                              std::to_string(num_classes_) + ")");
    }
    samples_.push_back(std::move(sample));
  }

  std::size_t dim() const noexcept { return dim_; }
  std::size_t num_classes() const noexcept { return num_classes_; }
  std::size_t size() const noexcept { return samples_.size(); }
  bool empty() const noexcept { return samples_.empty(); }
  const PairedSample& operator[](std::size_t i) const { return samples_[i]; }
  auto begin() const noexcept { return samples_.begin(); }
  auto end() const noexcept { return samples_.end(); }

  bool operator==(const Dataset&) const = default;

 private:
  std::size_t dim_;
  std::size_t num_classes_;
  std::vector<PairedSample> samples_;
};

/// Multiplies every entry by a positive constant.
inline FeatureVector scale_features(const FeatureVector& f, double alpha) {
  if (!(alpha > 0.0) || !std::isfinite(alpha)) {
    throw InvalidInputError("scale factor must be positive and finite");
  }
  std::vector<double> out(f.values().begin(), f.values().end());
  for (double& v : out) v *= alpha;
  return FeatureVector(std::move(out));
}

// ---------------------------------------------------------------------------
// Randomness
// ---------------------------------------------------------------------------

struct Seed {
  std::uint64_t value = 0;
  bool operator==(const Seed&) const = default;
};

/// One stream per consumer so that adding a consumer never shifts the draws
/// of another.
enum class StreamTag : std::uint32_t {
  kHashA = 1,
  kHashB = 2,
  kDataGen = 3,
  kShuffle = 4,
  kInit = 5,
  kSelftest = 6,
};

inline constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Seeded random stream. The engine is mt19937_64; the distributions are
/// written out here because the standard library's distributions are
/// implementation-defined and would break cross-platform reproducibility.
class Rng {
 public:
  explicit Rng(std::uint64_t state) : engine_(state) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform integer in [0, n), unbiased (rejection of the tail).
  std::uint64_t uniform_index(std::uint64_t n) {
    if (n == 0) throw InvalidInputError("uniform_index over an empty range");
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return x % n;
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  int sign() { return (engine_() >> 63) ? 1 : -1; }

  /// Standard normal via Box-Muller; the second variate is cached.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1;
    do {
      u1 = uniform01();
    } while (u1 <= 0.0);
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(uniform_index(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

inline Rng make_rng(Seed seed, std::uint32_t stream_tag) {
  return Rng(splitmix64(splitmix64(seed.value) ^ splitmix64(0xC0FFEEULL + stream_tag)));
}

inline Rng make_rng(Seed seed, StreamTag tag) {
  return make_rng(seed, static_cast<std::uint32_t>(tag));
}

inline bool is_power_of_two(std::size_t n) noexcept { return n != 0 && (n & (n - 1)) == 0; }

}  // namespace cbp
