#pragma once

// Teacher-student loop: source training, initial pseudo labels, bootstrap of
// prototypes / thresholds / repository, then per epoch: target training with
// per-batch prototype updates, optional drift, one refinement pass and a
// rebuild of the epoch-boundary state.

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "glode/core.hpp"
#include "glode/global_denoise.hpp"
#include "glode/local_denoise.hpp"
#include "glode/projection.hpp"
#include "glode/refine.hpp"
#include "glode/synthlab.hpp"
#include "glode/trainer.hpp"

namespace glode {

// K for corpus-scale data and for the small synthetic benchmark.
inline constexpr std::size_t kCorpusK = 300;
inline constexpr std::size_t kBenchmarkK = 50;

struct PipelineConfig {
  TrainConfig train;
  BetaSchedule schedule;  // total_epochs is the number of target epochs
  std::size_t k = kBenchmarkK;
  double alpha = 0.99;
  DenoiseFlags flags;
  double drift_eta = 0.0;
  std::size_t denoise_dim = 128;
  double flip_rate = 0.0;
  std::uint64_t seed = 42;

  void validate() const {
    train.validate();
    schedule.validate();
    if (k < 1) throw Error(ErrorKind::ConfigInvalid, "k must be >= 1");
    if (!(alpha > 0.0 && alpha < 1.0)) throw Error(ErrorKind::ConfigInvalid, "alpha must lie in (0,1)");
    if (!(drift_eta >= 0.0 && drift_eta < 1.0)) throw Error(ErrorKind::ConfigInvalid, "drift must lie in [0,1)");
    if (denoise_dim < 1) throw Error(ErrorKind::ConfigInvalid, "denoise_dim must be >= 1");
  }
};

struct EpochReport {
  int epoch = 0;
  double pseudo_f1 = 0.0;
  double probe_test_f1 = 0.0;
  double beta = 0.0;
  double train_loss = 0.0;
  Vector thresholds_global;
  Vector thresholds_local;
  DirectionStats direction_stats;
};

struct PipelineResult {
  std::vector<Record> records;  // input embeddings, refined pseudo labels
  LinearProbe probe;
  double initial_pseudo_f1 = 0.0;
  double initial_probe_test_f1 = 0.0;
  std::vector<EpochReport> epochs;
  std::vector<std::string> warnings;

  double final_pseudo_f1() const { return epochs.empty() ? initial_pseudo_f1 : epochs.back().pseudo_f1; }
  double final_test_f1() const { return epochs.empty() ? initial_probe_test_f1 : epochs.back().probe_test_f1; }
};

/// Pseudo-label span F1 over the target split against `gold` (indexed like `records`).
inline EvalReport pseudo_label_report(std::span<const Record> records, std::span<const ClassIndex> gold,
                                      const LabelSpace& labels) {
  std::vector<ClassIndex> pred, truth;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (records[i].split != Split::Target || !records[i].pseudo || gold[i] == kUnknownClass) continue;
    pred.push_back(hard_label(*records[i].pseudo));
    truth.push_back(gold[i]);
  }
  return span_f1(pred, truth, labels.o_index(), labels.size());
}

inline EvalReport probe_test_report(const LinearProbe& probe, std::span<const Record> records,
                                    std::span<const ClassIndex> gold, const LabelSpace& labels) {
  std::vector<ClassIndex> pred, truth;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (records[i].split != Split::TargetTest || gold[i] == kUnknownClass) continue;
    pred.push_back(predict(probe, records[i].embedding));
    truth.push_back(gold[i]);
  }
  return span_f1(pred, truth, labels.o_index(), labels.size());
}

/// `gold` holds the true class of every record (indexed like dataset.records,
/// kUnknownClass where unknown); it feeds metrics and explicit noise injection
/// only.
inline PipelineResult run_pipeline(const Dataset& dataset, std::span<const ClassIndex> gold,
                                   const PipelineConfig& cfg) {
  cfg.validate();
  const LabelSpace& labels = dataset.labels;
  const std::size_t n_classes = labels.size();
  if (gold.size() != dataset.records.size())
    throw Error(ErrorKind::LengthMismatch, "ground truth does not cover every record");

  PipelineResult result;

  // Probe features: normalized input embeddings.
  std::vector<Record> features = dataset.records;
  for (Record& r : features) r.embedding = l2_normalize(r.embedding);
  for (ClassIndex c : missing_source_classes(features, n_classes))
    result.warnings.push_back("ClassMissing: no source record for class " + labels.name(c));

  TrainConfig train = cfg.train;
  train.seed = cfg.seed;
  LinearProbe probe = train_source(features, n_classes, train);
  assign_initial_pseudo(probe, features);
  if (cfg.flip_rate > 0.0) inject_pseudo_noise(features, gold, n_classes, cfg.flip_rate, cfg.seed);

  // Denoising view: optionally projected, always unit-norm.
  const std::size_t dim = features.empty() ? 0 : features.front().embedding.size();
  std::optional<RandomProjection> projection;
  if (dim > cfg.denoise_dim) projection.emplace(dim, cfg.denoise_dim, cfg.seed);
  std::vector<Record> work = features;
  if (projection)
    for (Record& r : work) r.embedding = l2_normalize(projection->apply(r.embedding));

  result.initial_pseudo_f1 = pseudo_label_report(work, gold, labels).f1;
  result.initial_probe_test_f1 = probe_test_report(probe, features, gold, labels).f1;

  PrototypeBank bank = init_prototypes(work, n_classes, cfg.alpha, cfg.seed);
  NeighborRepository repo = build_repository(work, 0);
  Thresholds global_t = compute_thresholds(bank, work, 0);
  Thresholds local_t = local_thresholds(work, repo, cfg.k, n_classes, 0);

  BetaSchedule schedule = cfg.schedule;
  for (int epoch = 1; epoch <= schedule.total_epochs; ++epoch) {
    for (std::size_t i = 0; i < work.size(); ++i) features[i].pseudo = work[i].pseudo;

    std::vector<std::size_t> batch;
    const double loss = train_target_epoch(
        probe, features, train, epoch,
        [&](std::span<const std::size_t> sb, std::span<const std::size_t> tb) {
          batch.assign(sb.begin(), sb.end());
          batch.insert(batch.end(), tb.begin(), tb.end());
          ema_update(bank, work, batch);
        });

    if (cfg.drift_eta > 0.0) {
      apply_drift(work, bank, cfg.drift_eta);
      if (!projection)
        for (std::size_t i = 0; i < work.size(); ++i) features[i].embedding = work[i].embedding;
    }

    DenoiseState state{work, &bank, &repo, &global_t, &local_t, schedule, cfg.flags, cfg.k, labels.o_index()};
    EpochReport report;
    report.epoch = epoch;
    report.beta = beta_at(schedule, epoch);
    report.train_loss = loss;
    report.thresholds_global = global_t.values;
    report.thresholds_local = local_t.values;
    report.direction_stats = denoise_epoch(state, epoch);
    report.pseudo_f1 = pseudo_label_report(work, gold, labels).f1;
    report.probe_test_f1 = probe_test_report(probe, features, gold, labels).f1;
    result.epochs.push_back(std::move(report));

    repo = build_repository(work, epoch);
    global_t = compute_thresholds(bank, work, epoch);
    local_t = local_thresholds(work, repo, cfg.k, n_classes, epoch);
  }

  result.records = dataset.records;
  for (std::size_t i = 0; i < work.size(); ++i) result.records[i].pseudo = work[i].pseudo;
  result.probe = std::move(probe);
  return result;
}

// ---------------------------------------------------------------------------
// Ablation

enum class Strategy { Combined, NoDenoise, GlobalOnly, LocalOnly, SingleDirection };

inline constexpr std::array<Strategy, 5> kStrategies = {
    Strategy::Combined, Strategy::NoDenoise, Strategy::GlobalOnly, Strategy::LocalOnly,
    Strategy::SingleDirection};

inline std::string_view to_string(Strategy s) {
  switch (s) {
    case Strategy::Combined: return "combined";
    case Strategy::NoDenoise: return "no_denoise";
    case Strategy::GlobalOnly: return "global_only";
    case Strategy::LocalOnly: return "local_only";
    case Strategy::SingleDirection: return "single_direction";
  }
  return "unknown";
}

inline DenoiseFlags flags_for(Strategy s) {
  switch (s) {
    case Strategy::Combined: return {true, true, false};
    case Strategy::NoDenoise: return {false, false, false};
    case Strategy::GlobalOnly: return {true, false, false};
    case Strategy::LocalOnly: return {false, true, false};
    case Strategy::SingleDirection: return {true, true, true};
  }
  return {};
}

struct AblationRow {
  Strategy strategy;
  double final_pseudo_f1 = 0.0;
  double final_test_f1 = 0.0;
  double delta_vs_no_denoise = 0.0;
  PipelineResult run;
};

struct AblationTable {
  std::vector<AblationRow> rows;  // fixed order, see kStrategies

  const AblationRow& row(Strategy s) const {
    for (const auto& r : rows)
      if (r.strategy == s) return r;
    throw Error(ErrorKind::InvalidArgument, "strategy missing from table");
  }
};

/// Runs the pipeline once per strategy with identical seeds; only the
/// denoising flags differ between rows.
inline AblationTable run_ablation(const Dataset& dataset, std::span<const ClassIndex> gold,
                                  const PipelineConfig& base) {
  AblationTable table;
  for (Strategy s : kStrategies) {
    PipelineConfig cfg = base;
    cfg.flags = flags_for(s);
    AblationRow row;
    row.strategy = s;
    row.run = run_pipeline(dataset, gold, cfg);
    row.final_pseudo_f1 = row.run.final_pseudo_f1();
    row.final_test_f1 = row.run.final_test_f1();
    table.rows.push_back(std::move(row));
  }
  const double baseline = table.row(Strategy::NoDenoise).final_pseudo_f1;
  for (auto& r : table.rows) r.delta_vs_no_denoise = r.final_pseudo_f1 - baseline;
  return table;
}

}  // namespace glode
