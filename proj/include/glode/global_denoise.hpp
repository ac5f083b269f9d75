#pragma once

// Global-level decision: class prototypes kept as normalized exponential moving
// averages, dot-product similarity to each prototype, per-class dynamic
// thresholds and the binary direction vector derived from them.

#include <algorithm>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "glode/core.hpp"

namespace glode {

using DirectionVector = std::vector<std::uint8_t>;

struct PrototypeBank {
  std::vector<Vector> prototypes;  // indexed by class, each unit-norm
  double alpha = 0.99;

  std::size_t n_classes() const noexcept { return prototypes.size(); }
  std::size_t dim() const noexcept { return prototypes.empty() ? 0 : prototypes.front().size(); }
};

/// Per-class similarity thresholds, tagged with the epoch boundary they were
/// computed at (0 = bootstrap before the first epoch).
struct Thresholds {
  Vector values;
  int epoch_computed = 0;
};

using GlobalThresholds = Thresholds;

/// Label a record contributes to class statistics: gold for source records,
/// hard pseudo label for target records, nothing otherwise.
inline std::optional<ClassIndex> denoise_label(const Record& r) {
  if (r.split == Split::Source) return r.gold;
  if (r.split == Split::Target && r.pseudo) return hard_label(*r.pseudo);
  return std::nullopt;
}

namespace detail {

inline std::optional<Vector> normalized_mean(std::span<const Record> records, std::size_t dim,
                                             auto&& select) {
  Vector sum(dim, 0.0);
  std::size_t count = 0;
  for (const Record& r : records) {
    if (!select(r)) continue;
    const Vector z = l2_normalize(r.embedding);
    for (std::size_t j = 0; j < dim; ++j) sum[j] += z[j];
    ++count;
  }
  if (count == 0 || l2_norm(sum) == 0.0) return std::nullopt;
  return l2_normalize(sum);
}

}  // namespace detail

/// Prototype of class c = normalized mean of the normalized source embeddings
/// with gold c. Falls back to the target records whose hard pseudo label is c,
/// then to a random unit vector seeded by (seed, c).
inline PrototypeBank init_prototypes(std::span<const Record> records, std::size_t n_classes,
                                     double alpha = 0.99, std::uint64_t seed = 0) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw Error(ErrorKind::ConfigInvalid, "alpha must lie in (0,1)");
  if (records.empty()) throw Error(ErrorKind::InvalidArgument, "init_prototypes: no records");
  const std::size_t dim = records.front().embedding.size();

  PrototypeBank bank;
  bank.alpha = alpha;
  bank.prototypes.reserve(n_classes);
  for (ClassIndex c = 0; c < n_classes; ++c) {
    auto proto = detail::normalized_mean(records, dim, [c](const Record& r) {
      return r.split == Split::Source && r.gold == c;
    });
    if (!proto) {
      proto = detail::normalized_mean(records, dim, [c](const Record& r) {
        return r.split == Split::Target && r.pseudo && hard_label(*r.pseudo) == c;
      });
    }
    if (!proto) {
      RngStream rng(derive_seed(seed, 0xC1A55ULL + c));
      proto = rng.unit_vector(dim);
    }
    bank.prototypes.push_back(std::move(*proto));
  }
  return bank;
}

/// phi_c <- normalize(alpha * phi_c + (1 - alpha) * z) for one labeled sample.
inline void ema_step(PrototypeBank& bank, ClassIndex c, std::span<const double> z) {
  Vector& phi = bank.prototypes.at(c);
  if (phi.size() != z.size()) throw Error(ErrorKind::DimensionMismatch, "ema_step: dimension mismatch");
  const double a = bank.alpha;
  for (std::size_t j = 0; j < phi.size(); ++j) phi[j] = a * phi[j] + (1.0 - a) * z[j];
  phi = l2_normalize(phi);
}

/// Applies ema_step for every labeled record of the batch, in ascending id order.
inline void ema_update(PrototypeBank& bank, std::span<const Record> records,
                       std::span<const std::size_t> batch) {
  std::vector<std::size_t> order(batch.begin(), batch.end());
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return records[a].id < records[b].id; });
  for (std::size_t i : order) {
    const Record& r = records[i];
    if (auto label = denoise_label(r)) ema_step(bank, *label, r.embedding);
  }
}

inline void ema_update(PrototypeBank& bank, std::span<const Record> batch) {
  std::vector<std::size_t> all(batch.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  ema_update(bank, batch, all);
}

/// sim^c = z . phi_c for every class.
inline Vector global_similarity(const PrototypeBank& bank, std::span<const double> z) {
  Vector sims(bank.n_classes());
  for (ClassIndex c = 0; c < bank.n_classes(); ++c) sims[c] = dot(z, bank.prototypes[c]);
  return sims;
}

/// Mean similarity per class over the samples labeled with that class. A class
/// with no samples gets the mean over all samples.
inline Thresholds mean_thresholds(std::span<const Vector> sims, std::span<const ClassIndex> labels,
                                  std::size_t n_classes, int epoch) {
  if (sims.size() != labels.size())
    throw Error(ErrorKind::LengthMismatch, "mean_thresholds: sims and labels differ in length");
  Vector sum(n_classes, 0.0), all(n_classes, 0.0);
  std::vector<std::size_t> count(n_classes, 0);
  for (std::size_t i = 0; i < sims.size(); ++i) {
    if (sims[i].size() != n_classes)
      throw Error(ErrorKind::DimensionMismatch, "mean_thresholds: similarity vector length");
    sum[labels[i]] += sims[i][labels[i]];
    ++count[labels[i]];
    for (ClassIndex c = 0; c < n_classes; ++c) all[c] += sims[i][c];
  }
  Thresholds t{Vector(n_classes, 0.0), epoch};
  for (ClassIndex c = 0; c < n_classes; ++c) {
    if (count[c] > 0)
      t.values[c] = sum[c] / static_cast<double>(count[c]);
    else if (!sims.empty())
      t.values[c] = all[c] / static_cast<double>(sims.size());
  }
  return t;
}

/// Global thresholds over the target split, grouped by hard pseudo label.
inline GlobalThresholds compute_thresholds(const PrototypeBank& bank, std::span<const Record> records,
                                           int epoch) {
  std::vector<Vector> sims;
  std::vector<ClassIndex> labels;
  for (const Record& r : records) {
    if (r.split != Split::Target) continue;
    if (!r.pseudo) throw Error(ErrorKind::MissingTarget, "target record without pseudo label");
    sims.push_back(global_similarity(bank, r.embedding));
    labels.push_back(hard_label(*r.pseudo));
  }
  return mean_thresholds(sims, labels, bank.n_classes(), epoch);
}

/// b^c = [sim^c > threshold^c]; the non-entity bit is also set whenever the
/// non-entity class has the highest similarity.
inline DirectionVector directions(std::span<const double> sims, std::span<const double> thresholds,
                                  ClassIndex o_index) {
  if (sims.size() != thresholds.size())
    throw Error(ErrorKind::DimensionMismatch, "directions: sims and thresholds differ in length");
  DirectionVector bits(sims.size(), 0);
  for (ClassIndex c = 0; c < sims.size(); ++c) bits[c] = sims[c] > thresholds[c] ? 1 : 0;
  if (o_index < sims.size() && argmax(sims) == o_index) bits[o_index] = 1;
  return bits;
}

inline DirectionVector global_directions(std::span<const double> sims, const GlobalThresholds& t,
                                         ClassIndex o_index) {
  return directions(sims, t.values, o_index);
}

/// Keeps only the bit at the similarity argmax, if that bit is set.
inline DirectionVector single_direction(const DirectionVector& bits, std::span<const double> sims) {
  DirectionVector out(bits.size(), 0);
  const ClassIndex top = argmax(sims);
  out[top] = bits.at(top);
  return out;
}

}  // namespace glode
