#pragma once

// Domain types, label-vector arithmetic and deterministic randomness shared by
// every stage of the denoising pipeline.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

namespace glode {

using Vector = std::vector<double>;
using ClassIndex = std::size_t;
using RecordId = std::uint64_t;

/// Ground-truth placeholder for records whose true class is not known.
inline constexpr ClassIndex kUnknownClass = std::numeric_limits<ClassIndex>::max();

enum class ErrorKind {
  ZeroVector,
  DimensionMismatch,
  MissingTarget,
  EmptySource,
  EmptyRepository,
  EpochOutOfRange,
  StaleThresholds,
  LengthMismatch,
  ConfigInvalid,
  InvalidArgument,
  FormatError,
  IoError,
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::ZeroVector: return "ZeroVector";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::MissingTarget: return "MissingTarget";
    case ErrorKind::EmptySource: return "EmptySource";
    case ErrorKind::EmptyRepository: return "EmptyRepository";
    case ErrorKind::EpochOutOfRange: return "EpochOutOfRange";
    case ErrorKind::StaleThresholds: return "StaleThresholds";
    case ErrorKind::LengthMismatch: return "LengthMismatch";
    case ErrorKind::ConfigInvalid: return "ConfigInvalid";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::FormatError: return "FormatError";
    case ErrorKind::IoError: return "IoError";
  }
  return "Unknown";
}

/// Every failure raised by the library carries a typed kind so callers (the
/// CLI in particular) can map it to an exit code without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Parse failure with the byte offset into the offending file.
class FormatError : public Error {
 public:
  FormatError(std::uint64_t offset, const std::string& message)
      : Error(ErrorKind::FormatError, "at byte " + std::to_string(offset) + ": " + message),
        offset_(offset) {}

  std::uint64_t offset() const noexcept { return offset_; }

 private:
  std::uint64_t offset_;
};

// ---------------------------------------------------------------------------
// Label space

class LabelSpace {
 public:
  LabelSpace(std::vector<std::string> names, ClassIndex o_index)
      : names_(std::move(names)), o_index_(o_index) {
    if (names_.empty()) throw Error(ErrorKind::InvalidArgument, "label space is empty");
    if (o_index_ >= names_.size())
      throw Error(ErrorKind::InvalidArgument, "o_index out of range");
    std::unordered_set<std::string> seen;
    for (const auto& n : names_)
      if (!seen.insert(n).second)
        throw Error(ErrorKind::InvalidArgument, "duplicate class name '" + n + "'");
  }

  std::size_t size() const noexcept { return names_.size(); }
  ClassIndex o_index() const noexcept { return o_index_; }
  const std::vector<std::string>& names() const noexcept { return names_; }
  const std::string& name(ClassIndex c) const { return names_.at(c); }

  bool operator==(const LabelSpace&) const = default;

 private:
  std::vector<std::string> names_;
  ClassIndex o_index_;
};

// ---------------------------------------------------------------------------
// Records

enum class Split { Source, Target, TargetTest };

inline std::string_view to_string(Split s) {
  switch (s) {
    case Split::Source: return "source";
    case Split::Target: return "target";
    case Split::TargetTest: return "target_test";
  }
  return "unknown";
}

inline std::optional<Split> parse_split(std::string_view s) {
  if (s == "source") return Split::Source;
  if (s == "target") return Split::Target;
  if (s == "target_test") return Split::TargetTest;
  return std::nullopt;
}

/// Probability vector over the label space. Kept as a plain vector; validity is
/// checked with is_valid_soft_label where it matters.
using SoftLabel = Vector;

/// One span record. `embedding` is the representation the consuming stage
/// works in; the pipeline keeps it L2-normalized.
struct Record {
  RecordId id = 0;
  Split split = Split::Source;
  std::optional<ClassIndex> gold;
  std::optional<SoftLabel> pseudo;
  Vector embedding;

  bool operator==(const Record&) const = default;
};

// ---------------------------------------------------------------------------
// Vector arithmetic

inline constexpr double kProbFloor = 1e-12;

inline double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size())
    throw Error(ErrorKind::DimensionMismatch,
                "dot: " + std::to_string(a.size()) + " vs " + std::to_string(b.size()));
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double l2_norm(std::span<const double> v) { return std::sqrt(dot(v, v)); }

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size())
    throw Error(ErrorKind::DimensionMismatch, "squared_distance: dimension mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

inline Vector l1_normalize(std::span<const double> v) {
  double total = 0.0;
  for (double x : v) {
    if (!(x >= 0.0)) throw Error(ErrorKind::InvalidArgument, "l1_normalize: negative entry");
    total += x;
  }
  if (total <= 0.0) throw Error(ErrorKind::ZeroVector, "l1_normalize: entries sum to zero");
  Vector out(v.begin(), v.end());
  for (double& x : out) x /= total;
  return out;
}

inline Vector l2_normalize(std::span<const double> v) {
  const double n = l2_norm(v);
  if (n == 0.0) throw Error(ErrorKind::ZeroVector, "l2_normalize: zero vector");
  if (!std::isfinite(n)) throw Error(ErrorKind::InvalidArgument, "l2_normalize: non-finite entry");
  Vector out(v.begin(), v.end());
  for (double& x : out) x /= n;
  return out;
}

/// -sum_c q_c log p_c with p clamped to [1e-12, 1].
inline double soft_cross_entropy(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size())
    throw Error(ErrorKind::DimensionMismatch, "soft_cross_entropy: length mismatch");
  double loss = 0.0;
  for (std::size_t c = 0; c < p.size(); ++c) {
    if (q[c] == 0.0) continue;
    loss -= q[c] * std::log(std::clamp(p[c], kProbFloor, 1.0));
  }
  return loss;
}

inline double entropy(std::span<const double> q) { return soft_cross_entropy(q, q); }

/// Index of the largest entry; ties go to the smallest index.
inline ClassIndex argmax(std::span<const double> v) {
  if (v.empty()) throw Error(ErrorKind::InvalidArgument, "argmax of empty vector");
  ClassIndex best = 0;
  for (ClassIndex c = 1; c < v.size(); ++c)
    if (v[c] > v[best]) best = c;
  return best;
}

inline ClassIndex hard_label(std::span<const double> p) { return argmax(p); }

inline bool is_valid_soft_label(std::span<const double> p, double tol = 1e-9) {
  if (p.empty()) return false;
  double s = 0.0;
  for (double x : p) {
    if (!(x >= 0.0) || !std::isfinite(x)) return false;
    s += x;
  }
  return std::abs(s - 1.0) <= tol;
}

inline SoftLabel one_hot(std::size_t n, ClassIndex c) {
  SoftLabel out(n, 0.0);
  out.at(c) = 1.0;
  return out;
}

/// Angle between two non-zero vectors, in degrees.
inline double angle_degrees(std::span<const double> a, std::span<const double> b) {
  const double c = dot(a, b) / (l2_norm(a) * l2_norm(b));
  return std::acos(std::clamp(c, -1.0, 1.0)) * 180.0 / std::numbers::pi;
}

// ---------------------------------------------------------------------------
// Randomness
//
// std:: distributions are implementation-defined, so every draw is derived
// here from raw mt19937_64 output (whose sequence the standard fixes).

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Derives an independent child seed from a parent seed and a stream tag.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag) {
  return splitmix64(splitmix64(seed) ^ splitmix64(tag + 0x632be59bd9b4e019ULL));
}

class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const noexcept { return seed_; }

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n), unbiased (rejection on the top bits).
  std::uint64_t uniform_index(std::uint64_t n) {
    if (n == 0) throw Error(ErrorKind::InvalidArgument, "uniform_index(0)");
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t x;
    do {
      x = next_u64();
    } while (x >= limit);
    return x % n;
  }

  /// Standard normal via the Box-Muller transform.
  double normal() {
    if (cached_) {
      cached_ = false;
      return cache_;
    }
    double u1;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    cache_ = r * std::sin(theta);
    cached_ = true;
    return r * std::cos(theta);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  /// Fisher-Yates shuffle.
  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(uniform_index(i));
      std::swap(items[i - 1], items[j]);
    }
  }

  /// Random direction on the unit sphere in `dim` dimensions.
  Vector unit_vector(std::size_t dim) {
    for (;;) {
      Vector v(dim);
      for (double& x : v) x = normal();
      if (l2_norm(v) > 0.0) return l2_normalize(v);
    }
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  bool cached_ = false;
  double cache_ = 0.0;
};

}  // namespace glode
