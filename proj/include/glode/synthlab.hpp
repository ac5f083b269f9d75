#pragma once

// Synthetic span-embedding benchmark: Gaussian class clusters with a per-class
// source-to-target shift, a broad dominant non-entity cluster, optional
// explicit pseudo-label noise and representation drift, plus span micro-F1.

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "glode/core.hpp"
#include "glode/global_denoise.hpp"

namespace glode {

struct SynthConfig {
  std::size_t n_classes = 4;  // entity classes; "O" is added on top
  std::size_t dim = 32;
  double o_fraction = 0.8;
  std::size_t n_source = 1000;
  std::size_t n_target = 2000;
  std::size_t n_target_test = 500;
  double cluster_sigma = 1.0;
  double center_sep = 6.0;
  double shift_magnitude = 2.5;
  double flip_rate = 0.0;
  double drift_eta = 0.0;
  std::uint64_t seed = 42;

  void validate() const {
    const auto fail = [](const std::string& m) { throw Error(ErrorKind::ConfigInvalid, m); };
    if (n_classes < 1) fail("n_classes must be >= 1");
    if (dim < 1) fail("dim must be >= 1");
    if (!(o_fraction >= 0.0 && o_fraction < 1.0)) fail("o_fraction must lie in [0,1)");
    if (!(flip_rate >= 0.0 && flip_rate < 1.0)) fail("flip_rate must lie in [0,1)");
    if (!(drift_eta >= 0.0 && drift_eta < 1.0)) fail("drift_eta must lie in [0,1)");
    if (!(cluster_sigma > 0.0) || !std::isfinite(cluster_sigma)) fail("cluster_sigma must be > 0");
    if (!(center_sep >= 0.0) || !std::isfinite(center_sep)) fail("center_sep must be >= 0");
    if (!(shift_magnitude >= 0.0) || !std::isfinite(shift_magnitude)) fail("shift_magnitude must be >= 0");
    if (n_source == 0) throw Error(ErrorKind::EmptySource, "n_source must be > 0");
  }
};

/// Records plus their label space. Target records carry no gold label; the
/// learner only sees gold for source and target_test.
struct Dataset {
  LabelSpace labels;
  std::vector<Record> records;
};

/// What the generator knows and the learner does not.
struct GroundTruth {
  std::vector<ClassIndex> gold;    // every record, indexed like Dataset::records
  std::vector<Vector> centroids;   // per class, before normalization
  std::vector<Vector> shifts;      // per class target offset
};

struct SynthDataset {
  Dataset dataset;
  GroundTruth truth;
};

inline LabelSpace synth_label_space(std::size_t n_entity_classes) {
  std::vector<std::string> names;
  if (n_entity_classes == 4) {
    names = {"PER", "LOC", "ORG", "MISC"};
  } else {
    for (std::size_t c = 0; c < n_entity_classes; ++c) names.push_back("E" + std::to_string(c));
  }
  names.push_back("O");
  return LabelSpace(std::move(names), n_entity_classes);
}

/// Draws the benchmark. Every embedding is L2-normalized and then rounded to
/// binary32 so the in-memory dataset equals what the embedding file stores.
inline SynthDataset generate(const SynthConfig& cfg) {
  cfg.validate();
  const std::size_t n_all = cfg.n_classes + 1;
  const ClassIndex o = cfg.n_classes;
  const double sigma = cfg.cluster_sigma;
  RngStream rng(cfg.seed);

  GroundTruth truth;
  // Centroid coordinates ~ N(0, s^2) so typical pairwise distances are about
  // 1.5x the required separation; rejection enforces the minimum.
  const double min_dist = cfg.center_sep * sigma;
  const double s = 1.5 * std::max(min_dist, sigma) / std::sqrt(2.0 * static_cast<double>(cfg.dim));
  for (std::size_t c = 0; c < n_all; ++c) {
    for (int attempt = 0;; ++attempt) {
      if (attempt == 100000)
        throw Error(ErrorKind::ConfigInvalid, "could not place centroids with the requested separation");
      Vector mu(cfg.dim);
      for (double& x : mu) x = rng.normal(0.0, s);
      bool ok = true;
      for (const Vector& other : truth.centroids)
        if (std::sqrt(squared_distance(mu, other)) < min_dist) ok = false;
      if (ok) {
        truth.centroids.push_back(std::move(mu));
        break;
      }
    }
  }
  for (std::size_t c = 0; c < n_all; ++c) {
    Vector delta = rng.unit_vector(cfg.dim);
    for (double& x : delta) x *= cfg.shift_magnitude * sigma;
    truth.shifts.push_back(std::move(delta));
  }

  SynthDataset out{Dataset{synth_label_space(cfg.n_classes), {}}, std::move(truth)};
  auto& records = out.dataset.records;
  records.reserve(cfg.n_source + cfg.n_target + cfg.n_target_test);

  const auto emit = [&](Split split, std::size_t count) {
    for (std::size_t i = 0; i < count; ++i) {
      const ClassIndex c = rng.uniform() < cfg.o_fraction
                               ? o
                               : static_cast<ClassIndex>(rng.uniform_index(cfg.n_classes));
      const double sd = c == o ? 2.0 * sigma : sigma;
      const bool shifted = split != Split::Source;
      Vector z(cfg.dim);
      for (std::size_t j = 0; j < cfg.dim; ++j) {
        const double mean = out.truth.centroids[c][j] + (shifted ? out.truth.shifts[c][j] : 0.0);
        z[j] = rng.normal(mean, sd);
      }
      z = l2_normalize(z);
      for (double& x : z) x = static_cast<double>(static_cast<float>(x));

      Record r;
      r.id = records.size();
      r.split = split;
      if (split != Split::Target) r.gold = c;
      r.embedding = std::move(z);
      records.push_back(std::move(r));
      out.truth.gold.push_back(c);
    }
  };
  emit(Split::Source, cfg.n_source);
  emit(Split::Target, cfg.n_target);
  emit(Split::TargetTest, cfg.n_target_test);
  return out;
}

/// Replaces the pseudo label of exactly round(rate * |target|) seeded target
/// records with a one-hot on a uniformly drawn wrong class. Returns the count.
inline std::size_t inject_pseudo_noise(std::span<Record> records, std::span<const ClassIndex> gold,
                                       std::size_t n_classes, double rate, std::uint64_t seed) {
  if (!(rate >= 0.0 && rate < 1.0)) throw Error(ErrorKind::ConfigInvalid, "flip_rate must lie in [0,1)");
  if (gold.size() != records.size()) throw Error(ErrorKind::LengthMismatch, "gold/records length mismatch");
  if (n_classes < 2 || rate == 0.0) return 0;
  std::vector<std::size_t> target;
  for (std::size_t i = 0; i < records.size(); ++i)
    if (records[i].split == Split::Target && gold[i] != kUnknownClass) target.push_back(i);
  const auto n_flip = static_cast<std::size_t>(std::llround(rate * static_cast<double>(target.size())));

  RngStream rng(derive_seed(seed, 0xF11FULL));
  // Partial Fisher-Yates: the first n_flip slots are a uniform sample.
  for (std::size_t i = 0; i < n_flip; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.uniform_index(target.size() - i));
    std::swap(target[i], target[j]);
    Record& r = records[target[i]];
    const ClassIndex g = gold[target[i]];
    auto wrong = static_cast<ClassIndex>(rng.uniform_index(n_classes - 1));
    if (wrong >= g) ++wrong;
    r.pseudo = one_hot(n_classes, wrong);
  }
  return n_flip;
}

/// Pulls each target embedding toward the prototype of its hard pseudo label:
/// z <- normalize(z + eta * (phi - z)).
inline void apply_drift(std::span<Record> records, const PrototypeBank& bank, double eta) {
  if (!(eta >= 0.0 && eta <= 1.0)) throw Error(ErrorKind::ConfigInvalid, "drift_eta must lie in [0,1]");
  if (eta == 0.0) return;
  for (Record& r : records) {
    if (r.split != Split::Target || !r.pseudo) continue;
    const Vector& phi = bank.prototypes.at(hard_label(*r.pseudo));
    Vector moved(r.embedding.size());
    for (std::size_t j = 0; j < moved.size(); ++j)
      moved[j] = r.embedding[j] + eta * (phi[j] - r.embedding[j]);
    r.embedding = l2_normalize(moved);
  }
}

struct EvalReport {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  Vector per_class_f1;
  std::vector<std::size_t> support;  // gold count per class
  std::size_t true_positives = 0;
  std::size_t predicted_entities = 0;
  std::size_t gold_entities = 0;
};

inline double f1_score(double p, double r) { return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0; }

/// Micro P/R/F1 over entity records: a prediction counts when it is not O, a
/// gold entity when its label is not O, a hit when both agree.
inline EvalReport span_f1(std::span<const ClassIndex> predicted, std::span<const ClassIndex> gold,
                          ClassIndex o_index, std::size_t n_classes) {
  if (predicted.size() != gold.size())
    throw Error(ErrorKind::LengthMismatch, "span_f1: " + std::to_string(predicted.size()) +
                                               " predictions vs " + std::to_string(gold.size()) + " gold");
  EvalReport rep;
  rep.support.assign(n_classes, 0);
  std::vector<std::size_t> tp(n_classes, 0), pred_count(n_classes, 0);
  for (std::size_t i = 0; i < gold.size(); ++i) {
    const ClassIndex p = predicted[i];
    const ClassIndex g = gold[i];
    if (p >= n_classes || g >= n_classes) throw Error(ErrorKind::InvalidArgument, "span_f1: label out of range");
    ++rep.support[g];
    ++pred_count[p];
    if (p == g) ++tp[p];
    if (p != o_index) ++rep.predicted_entities;
    if (g != o_index) ++rep.gold_entities;
    if (p == g && g != o_index) ++rep.true_positives;
  }
  const auto ratio = [](std::size_t a, std::size_t b) {
    return b == 0 ? 0.0 : static_cast<double>(a) / static_cast<double>(b);
  };
  rep.precision = ratio(rep.true_positives, rep.predicted_entities);
  rep.recall = ratio(rep.true_positives, rep.gold_entities);
  rep.f1 = f1_score(rep.precision, rep.recall);
  rep.per_class_f1.resize(n_classes);
  for (ClassIndex c = 0; c < n_classes; ++c)
    rep.per_class_f1[c] = f1_score(ratio(tp[c], pred_count[c]), ratio(tp[c], rep.support[c]));
  return rep;
}

}  // namespace glode
