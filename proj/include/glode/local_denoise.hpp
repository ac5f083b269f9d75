#pragma once

// Local-level decision: a snapshot of every source and target embedding with
// its current label, exact K-nearest-neighbor search over it, and the
// neighbor-label distribution used as the local similarity score.

#include <algorithm>
#include <cmath>
#include <queue>
#include <span>
#include <vector>

#include "glode/core.hpp"
#include "glode/global_denoise.hpp"

namespace glode {

struct RepositoryEntry {
  RecordId id = 0;
  Vector embedding;
  ClassIndex label = 0;

  bool operator==(const RepositoryEntry&) const = default;
};

struct NeighborRepository {
  std::vector<RepositoryEntry> entries;
  int epoch_built = 0;

  std::size_t size() const noexcept { return entries.size(); }
};

struct KnnResult {
  std::vector<RecordId> neighbor_ids;
  std::vector<double> distances;  // Euclidean, non-decreasing
  std::vector<ClassIndex> labels;
};

/// One entry per source and target record (target_test is excluded), labeled
/// with gold for source and the hard pseudo label for target.
inline NeighborRepository build_repository(std::span<const Record> records, int epoch) {
  NeighborRepository repo;
  repo.epoch_built = epoch;
  for (const Record& r : records) {
    if (r.split == Split::TargetTest) continue;
    const auto label = denoise_label(r);
    if (!label)
      throw Error(ErrorKind::MissingTarget,
                  "record " + std::to_string(r.id) + " has no label for the repository");
    repo.entries.push_back({r.id, r.embedding, *label});
  }
  return repo;
}

/// Exact K nearest neighbors by Euclidean distance, excluding the entry whose
/// id equals `self_id`. Ties are broken by ascending id. The scan keeps a
/// bounded max-heap and abandons a candidate as soon as its partial squared
/// distance exceeds the current K-th best.
inline KnnResult knn(const NeighborRepository& repo, std::span<const double> query,
                     std::optional<RecordId> self_id, std::size_t k) {
  if (k == 0) throw Error(ErrorKind::InvalidArgument, "knn: K must be >= 1");
  if (repo.entries.empty()) throw Error(ErrorKind::EmptyRepository, "knn on an empty repository");

  struct Candidate {
    double sq;
    RecordId id;
    std::size_t index;
    bool operator<(const Candidate& o) const { return sq < o.sq || (sq == o.sq && id < o.id); }
  };
  std::priority_queue<Candidate> heap;  // top = worst kept candidate

  const std::size_t dim = query.size();
  for (std::size_t i = 0; i < repo.entries.size(); ++i) {
    const RepositoryEntry& e = repo.entries[i];
    if (self_id && e.id == *self_id) continue;
    if (e.embedding.size() != dim) throw Error(ErrorKind::DimensionMismatch, "knn: query dimension");
    const bool full = heap.size() == k;
    const double bound = full ? heap.top().sq : 0.0;
    double sq = 0.0;
    bool abandoned = false;
    for (std::size_t j = 0; j < dim; ++j) {
      const double d = query[j] - e.embedding[j];
      sq += d * d;
      if (full && sq > bound) {
        abandoned = true;
        break;
      }
    }
    if (abandoned) continue;
    const Candidate cand{sq, e.id, i};
    if (!full) {
      heap.push(cand);
    } else if (cand < heap.top()) {
      heap.pop();
      heap.push(cand);
    }
  }

  std::vector<Candidate> sorted;
  sorted.reserve(heap.size());
  while (!heap.empty()) {
    sorted.push_back(heap.top());
    heap.pop();
  }
  std::reverse(sorted.begin(), sorted.end());

  KnnResult out;
  out.neighbor_ids.reserve(sorted.size());
  out.distances.reserve(sorted.size());
  out.labels.reserve(sorted.size());
  for (const Candidate& c : sorted) {
    out.neighbor_ids.push_back(c.id);
    out.distances.push_back(std::sqrt(c.sq));
    out.labels.push_back(repo.entries[c.index].label);
  }
  return out;
}

inline KnnResult knn(const NeighborRepository& repo, const Record& query, std::size_t k) {
  return knn(repo, query.embedding, query.id, k);
}

/// Fraction of the retrieved neighbors carrying each class.
inline Vector local_similarity(const KnnResult& result, std::size_t n_classes) {
  Vector sims(n_classes, 0.0);
  if (result.labels.empty()) return sims;
  for (ClassIndex label : result.labels) sims.at(label) += 1.0;
  const double n = static_cast<double>(result.labels.size());
  for (double& s : sims) s /= n;
  return sims;
}

/// Local similarity of every target record, in record order.
inline std::vector<Vector> target_local_similarities(std::span<const Record> records,
                                                     const NeighborRepository& repo, std::size_t k,
                                                     std::size_t n_classes) {
  std::vector<Vector> out;
  for (const Record& r : records)
    if (r.split == Split::Target) out.push_back(local_similarity(knn(repo, r, k), n_classes));
  return out;
}

/// Same grouping and empty-class fallback as the global thresholds, over local
/// similarity scores. `local_sims` may be passed in when already computed.
inline Thresholds local_thresholds(std::span<const Record> records, const NeighborRepository& repo,
                                   std::size_t k, std::size_t n_classes, int epoch,
                                   const std::vector<Vector>* local_sims = nullptr) {
  std::vector<Vector> computed;
  if (!local_sims) {
    computed = target_local_similarities(records, repo, k, n_classes);
    local_sims = &computed;
  }
  std::vector<ClassIndex> labels;
  for (const Record& r : records) {
    if (r.split != Split::Target) continue;
    if (!r.pseudo) throw Error(ErrorKind::MissingTarget, "target record without pseudo label");
    labels.push_back(hard_label(*r.pseudo));
  }
  return mean_thresholds(*local_sims, labels, n_classes, epoch);
}

inline DirectionVector local_directions(std::span<const double> local_sims, const Thresholds& t,
                                        ClassIndex o_index) {
  return directions(local_sims, t.values, o_index);
}

}  // namespace glode
