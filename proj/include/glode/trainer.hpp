#pragma once

// Linear softmax probe over fixed span embeddings: the stand-in for the NER
// classifier head. Trained with plain mini-batch gradient descent.

#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "glode/core.hpp"

namespace glode {

/// Softmax(W z + b). Weights are stored row-major, one row per class.
struct LinearProbe {
  std::size_t n_classes = 0;
  std::size_t dim = 0;
  Vector weights;
  Vector bias;

  LinearProbe() = default;
  LinearProbe(std::size_t classes, std::size_t d)
      : n_classes(classes), dim(d), weights(classes * d, 0.0), bias(classes, 0.0) {}

  std::span<double> row(ClassIndex c) { return {weights.data() + c * dim, dim}; }
  std::span<const double> row(ClassIndex c) const { return {weights.data() + c * dim, dim}; }

  bool operator==(const LinearProbe&) const = default;
};

struct TrainConfig {
  double learning_rate = 0.1;
  int epochs_source = 20;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate))
      throw Error(ErrorKind::ConfigInvalid, "learning_rate must be finite and non-negative");
    if (epochs_source < 1) throw Error(ErrorKind::ConfigInvalid, "epochs_source must be >= 1");
    if (batch_size < 1) throw Error(ErrorKind::ConfigInvalid, "batch_size must be >= 1");
  }
};

enum class TargetKind { Gold, Pseudo };

inline Vector logits(const LinearProbe& probe, std::span<const double> z) {
  if (z.size() != probe.dim)
    throw Error(ErrorKind::DimensionMismatch, "probe expects dim " + std::to_string(probe.dim) +
                                                  ", got " + std::to_string(z.size()));
  Vector out(probe.n_classes);
  for (ClassIndex c = 0; c < probe.n_classes; ++c) out[c] = dot(probe.row(c), z) + probe.bias[c];
  return out;
}

inline SoftLabel softmax(std::span<const double> x) {
  const double m = x[argmax(x)];
  SoftLabel p(x.size());
  double s = 0.0;
  for (std::size_t c = 0; c < x.size(); ++c) {
    p[c] = std::exp(x[c] - m);
    s += p[c];
  }
  for (double& v : p) v /= s;
  return p;
}

inline SoftLabel forward(const LinearProbe& probe, std::span<const double> z) {
  return softmax(logits(probe, z));
}

inline ClassIndex predict(const LinearProbe& probe, std::span<const double> z) {
  return hard_label(forward(probe, z));
}

struct LossAndGrad {
  double loss = 0.0;
  LinearProbe grad;
};

namespace detail {

inline SoftLabel target_of(const Record& r, TargetKind kind, std::size_t n_classes) {
  if (kind == TargetKind::Gold) {
    if (!r.gold) throw Error(ErrorKind::MissingTarget, "record " + std::to_string(r.id) + " has no gold");
    if (*r.gold >= n_classes) throw Error(ErrorKind::InvalidArgument, "gold label out of range");
    return one_hot(n_classes, *r.gold);
  }
  if (!r.pseudo)
    throw Error(ErrorKind::MissingTarget, "record " + std::to_string(r.id) + " has no pseudo label");
  if (r.pseudo->size() != n_classes)
    throw Error(ErrorKind::DimensionMismatch, "pseudo label length mismatch");
  return *r.pseudo;
}

// Accumulates scale * d(CE)/d(params) for one record into `grad`; returns CE.
inline double accumulate(const LinearProbe& probe, std::span<const double> z,
                         std::span<const double> target, double scale, LinearProbe& grad) {
  const SoftLabel p = forward(probe, z);
  for (ClassIndex c = 0; c < probe.n_classes; ++c) {
    const double g = scale * (p[c] - target[c]);
    if (g == 0.0) continue;
    auto row = grad.row(c);
    for (std::size_t j = 0; j < probe.dim; ++j) row[j] += g * z[j];
    grad.bias[c] += g;
  }
  return soft_cross_entropy(p, target);
}

inline void apply_step(LinearProbe& probe, const LinearProbe& grad, double lr) {
  for (std::size_t i = 0; i < probe.weights.size(); ++i) probe.weights[i] -= lr * grad.weights[i];
  for (std::size_t c = 0; c < probe.bias.size(); ++c) probe.bias[c] -= lr * grad.bias[c];
}

template <typename Indices>
double batch_into(const LinearProbe& probe, std::span<const Record> records, const Indices& idx,
                  TargetKind kind, LinearProbe& grad) {
  if (idx.empty()) return 0.0;
  const double scale = 1.0 / static_cast<double>(idx.size());
  double loss = 0.0;
  for (std::size_t i : idx) {
    const Record& r = records[i];
    loss += accumulate(probe, r.embedding, target_of(r, kind, probe.n_classes), scale, grad);
  }
  return loss * scale;
}

}  // namespace detail

/// Mean soft cross-entropy over `batch` and its exact gradient.
inline LossAndGrad loss_and_grad(const LinearProbe& probe, std::span<const Record> batch,
                                 TargetKind kind) {
  LossAndGrad out{0.0, LinearProbe(probe.n_classes, probe.dim)};
  std::vector<std::size_t> idx(batch.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  out.loss = detail::batch_into(probe, batch, idx, kind, out.grad);
  return out;
}

inline std::vector<std::size_t> indices_of(std::span<const Record> records, Split split) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < records.size(); ++i)
    if (records[i].split == split) out.push_back(i);
  return out;
}

/// Classes with no gold-labeled source record.
inline std::vector<ClassIndex> missing_source_classes(std::span<const Record> records,
                                                      std::size_t n_classes) {
  std::vector<bool> seen(n_classes, false);
  for (const Record& r : records)
    if (r.split == Split::Source && r.gold && *r.gold < n_classes) seen[*r.gold] = true;
  std::vector<ClassIndex> out;
  for (ClassIndex c = 0; c < n_classes; ++c)
    if (!seen[c]) out.push_back(c);
  return out;
}

using EpochCallback = std::function<void(int epoch, const LinearProbe&)>;

/// Fits a fresh zero-initialized probe to the gold labels of the source split.
inline LinearProbe train_source(std::span<const Record> records, std::size_t n_classes,
                                const TrainConfig& cfg, const EpochCallback& on_epoch = {}) {
  cfg.validate();
  std::vector<std::size_t> source = indices_of(records, Split::Source);
  if (source.empty()) throw Error(ErrorKind::EmptySource, "no source records to train on");
  LinearProbe probe(n_classes, records[source.front()].embedding.size());

  RngStream rng(derive_seed(cfg.seed, 0x50ULL));
  for (int epoch = 1; epoch <= cfg.epochs_source; ++epoch) {
    rng.shuffle(source);
    for (std::size_t start = 0; start < source.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(source.size(), start + cfg.batch_size);
      std::vector<std::size_t> batch(source.begin() + start, source.begin() + end);
      LinearProbe grad(probe.n_classes, probe.dim);
      detail::batch_into(probe, records, batch, TargetKind::Gold, grad);
      detail::apply_step(probe, grad, cfg.learning_rate);
    }
    if (on_epoch) on_epoch(epoch, probe);
  }
  return probe;
}

/// Sets the soft pseudo label of every target and target_test record to the
/// probe's prediction. Gold labels are left alone.
inline void assign_initial_pseudo(const LinearProbe& probe, std::span<Record> records) {
  for (Record& r : records)
    if (r.split == Split::Target || r.split == Split::TargetTest) r.pseudo = forward(probe, r.embedding);
}

/// Called once per optimization step with the record indices of that step's
/// source and target batches.
using BatchCallback =
    std::function<void(std::span<const std::size_t> source_batch, std::span<const std::size_t> target_batch)>;

/// One epoch on the summed objective (mean source-gold CE + mean target-pseudo
/// CE). Each step draws one source batch and one target batch; the shorter
/// split is reshuffled and cycled so the longer one is covered exactly once.
/// Returns the mean per-step loss.
inline double train_target_epoch(LinearProbe& probe, std::span<const Record> records,
                                 const TrainConfig& cfg, int epoch,
                                 const BatchCallback& on_batch = {}) {
  cfg.validate();
  std::vector<std::size_t> source = indices_of(records, Split::Source);
  std::vector<std::size_t> target = indices_of(records, Split::Target);
  for (std::size_t i : target)
    if (!records[i].pseudo)
      throw Error(ErrorKind::MissingTarget,
                  "target record " + std::to_string(records[i].id) + " has no pseudo label");

  const std::size_t b = cfg.batch_size;
  const auto n_batches = [b](std::size_t n) { return (n + b - 1) / b; };
  const std::size_t steps = std::max(n_batches(source.size()), n_batches(target.size()));
  if (steps == 0) return 0.0;

  RngStream rng(derive_seed(cfg.seed, 0x1000ULL + static_cast<std::uint64_t>(epoch)));
  rng.shuffle(source);
  rng.shuffle(target);

  struct Cursor {
    std::vector<std::size_t>* order;
    std::size_t pos = 0;
  };
  const auto next_batch = [&](Cursor& cur) {
    std::vector<std::size_t> batch;
    if (cur.order->empty()) return batch;
    if (cur.pos >= cur.order->size()) {
      rng.shuffle(*cur.order);
      cur.pos = 0;
    }
    const std::size_t end = std::min(cur.order->size(), cur.pos + b);
    batch.assign(cur.order->begin() + cur.pos, cur.order->begin() + end);
    cur.pos = end;
    return batch;
  };

  Cursor src{&source};
  Cursor tgt{&target};
  double total = 0.0;
  for (std::size_t step = 0; step < steps; ++step) {
    const std::vector<std::size_t> sb = next_batch(src);
    const std::vector<std::size_t> tb = next_batch(tgt);
    LinearProbe grad(probe.n_classes, probe.dim);
    double loss = detail::batch_into(probe, records, sb, TargetKind::Gold, grad);
    loss += detail::batch_into(probe, records, tb, TargetKind::Pseudo, grad);
    detail::apply_step(probe, grad, cfg.learning_rate);
    total += loss;
    if (on_batch) on_batch(sb, tb);
  }
  return total / static_cast<double>(steps);
}

/// Mean cross-entropy of the probe over every record of `split`.
inline double dataset_loss(const LinearProbe& probe, std::span<const Record> records, Split split,
                           TargetKind kind) {
  const std::vector<std::size_t> idx = indices_of(records, split);
  LinearProbe scratch(probe.n_classes, probe.dim);
  return detail::batch_into(probe, records, idx, kind, scratch);
}

}  // namespace glode
