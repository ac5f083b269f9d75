#pragma once

// Integration of global and local decisions into the pseudo-label update, and
// the per-epoch refinement pass over the target split.

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "glode/core.hpp"
#include "glode/global_denoise.hpp"
#include "glode/local_denoise.hpp"

namespace glode {

struct BetaSchedule {
  double beta_start = 0.95;
  double beta_end = 0.80;
  int total_epochs = 8;

  void validate() const {
    if (!(beta_end > 0.0 && beta_end <= beta_start && beta_start < 1.0))
      throw Error(ErrorKind::ConfigInvalid, "beta schedule requires 0 < beta_end <= beta_start < 1");
    if (total_epochs < 1) throw Error(ErrorKind::ConfigInvalid, "total_epochs must be >= 1");
  }
};

/// Linear decay from beta_start at epoch 1 to beta_end at the last epoch.
inline double beta_at(const BetaSchedule& s, int epoch) {
  if (epoch < 1 || epoch > s.total_epochs)
    throw Error(ErrorKind::EpochOutOfRange, "epoch " + std::to_string(epoch) + " outside [1, " +
                                                std::to_string(s.total_epochs) + "]");
  if (s.total_epochs == 1) return s.beta_start;
  return s.beta_start -
         (s.beta_start - s.beta_end) * static_cast<double>(epoch - 1) / static_cast<double>(s.total_epochs - 1);
}

/// An L1-normalized mixture of update directions, or nullopt for "skip".
using UpdateDecision = std::optional<Vector>;

inline UpdateDecision integrate_directions(const DirectionVector& global, const DirectionVector& local) {
  if (global.size() != local.size())
    throw Error(ErrorKind::DimensionMismatch, "integrate_directions: length mismatch");
  Vector sum(global.size());
  double total = 0.0;
  for (std::size_t c = 0; c < sum.size(); ++c) {
    sum[c] = static_cast<double>(global[c]) + static_cast<double>(local[c]);
    total += sum[c];
  }
  if (total == 0.0) return std::nullopt;
  return l1_normalize(sum);
}

/// normalize(beta * p + (1 - beta) * u); a skip leaves p untouched.
inline SoftLabel apply_update(const SoftLabel& p, const UpdateDecision& decision, double beta) {
  if (!decision) return p;
  if (decision->size() != p.size()) throw Error(ErrorKind::DimensionMismatch, "apply_update: length mismatch");
  SoftLabel mixed(p.size());
  for (std::size_t c = 0; c < p.size(); ++c) mixed[c] = beta * p[c] + (1.0 - beta) * (*decision)[c];
  return l1_normalize(mixed);
}

struct DenoiseFlags {
  bool use_global = true;
  bool use_local = true;
  bool single_direction = false;
};

struct DirectionStats {
  std::size_t skip = 0;
  std::size_t single = 0;
  std::size_t multi = 0;

  bool operator==(const DirectionStats&) const = default;
};

/// Everything one refinement pass reads. Thresholds and repository must come
/// from an earlier epoch boundary than the epoch being refined.
struct DenoiseState {
  std::span<Record> records;
  const PrototypeBank* bank = nullptr;
  const NeighborRepository* repository = nullptr;
  const Thresholds* global_thresholds = nullptr;
  const Thresholds* local_thresholds = nullptr;
  BetaSchedule schedule;
  DenoiseFlags flags;
  std::size_t k = 50;
  ClassIndex o_index = 0;
};

/// Computes the update decision for every target record against the frozen
/// state, then commits all new pseudo labels in record order.
inline DirectionStats denoise_epoch(DenoiseState& state, int epoch) {
  const double beta = beta_at(state.schedule, epoch);
  const DenoiseFlags& flags = state.flags;
  if (flags.use_global) {
    if (!state.bank || !state.global_thresholds)
      throw Error(ErrorKind::InvalidArgument, "global denoising needs prototypes and thresholds");
    if (state.global_thresholds->epoch_computed >= epoch)
      throw Error(ErrorKind::StaleThresholds, "global thresholds are not from an earlier epoch");
  }
  if (flags.use_local) {
    if (!state.repository || !state.local_thresholds)
      throw Error(ErrorKind::InvalidArgument, "local denoising needs a repository and thresholds");
    if (state.local_thresholds->epoch_computed >= epoch || state.repository->epoch_built >= epoch)
      throw Error(ErrorKind::StaleThresholds, "local thresholds are not from an earlier epoch");
  }

  std::vector<std::pair<std::size_t, UpdateDecision>> decisions;
  DirectionStats stats;
  for (std::size_t i = 0; i < state.records.size(); ++i) {
    const Record& r = state.records[i];
    if (r.split != Split::Target) continue;
    if (!r.pseudo) throw Error(ErrorKind::MissingTarget, "target record without pseudo label");
    const std::size_t n = r.pseudo->size();

    DirectionVector dg(n, 0), dl(n, 0);
    if (flags.use_global) {
      const Vector sims = global_similarity(*state.bank, r.embedding);
      dg = global_directions(sims, *state.global_thresholds, state.o_index);
      if (flags.single_direction) dg = single_direction(dg, sims);
    }
    if (flags.use_local) {
      const Vector sims = local_similarity(knn(*state.repository, r, state.k), n);
      dl = local_directions(sims, *state.local_thresholds, state.o_index);
      if (flags.single_direction) dl = single_direction(dl, sims);
    }

    UpdateDecision u = integrate_directions(dg, dl);
    if (!u) {
      ++stats.skip;
    } else {
      std::size_t nonzero = 0;
      for (double x : *u) nonzero += x > 0.0 ? 1 : 0;
      ++(nonzero == 1 ? stats.single : stats.multi);
    }
    decisions.emplace_back(i, std::move(u));
  }

  for (auto& [i, u] : decisions) {
    Record& r = state.records[i];
    r.pseudo = apply_update(*r.pseudo, u, beta);
  }
  return stats;
}

}  // namespace glode
