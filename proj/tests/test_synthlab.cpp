#include <gtest/gtest.h>

#include <vector>

#include "glode/pipeline.hpp"
#include "glode/synthlab.hpp"
#include "oracles.hpp"

using namespace glode;

namespace {

SynthConfig small_config(std::uint64_t seed = 3) {
  SynthConfig c;
  c.n_source = 300;
  c.n_target = 400;
  c.n_target_test = 100;
  c.dim = 16;
  c.seed = seed;
  return c;
}

PipelineConfig small_pipeline() {
  PipelineConfig p;
  p.k = 20;
  p.train.epochs_source = 5;
  p.schedule.total_epochs = 3;
  p.seed = 3;
  return p;
}

}  // namespace

TEST(Generate, DeterministicAndShaped) {
  const SynthConfig cfg;
  const SynthDataset a = generate(cfg);
  const SynthDataset b = generate(cfg);
  EXPECT_EQ(a.dataset.records, b.dataset.records);
  EXPECT_EQ(a.truth.gold, b.truth.gold);
  ASSERT_EQ(a.dataset.records.size(), 3500u);
  EXPECT_EQ(a.dataset.labels.names(), (std::vector<std::string>{"PER", "LOC", "ORG", "MISC", "O"}));
  EXPECT_EQ(a.dataset.labels.o_index(), 4u);

  std::size_t o_target = 0;
  for (std::size_t i = 0; i < a.dataset.records.size(); ++i) {
    const Record& r = a.dataset.records[i];
    EXPECT_EQ(r.id, i);
    EXPECT_NEAR(l2_norm(r.embedding), 1.0, 1e-6);
    if (r.split == Split::Target) {
      EXPECT_FALSE(r.gold.has_value());
      o_target += a.truth.gold[i] == 4 ? 1 : 0;
    } else {
      EXPECT_EQ(r.gold, a.truth.gold[i]);
    }
    for (double x : r.embedding) EXPECT_EQ(x, static_cast<double>(static_cast<float>(x)));
  }
  // Binomial(2000, 0.8): mean 1600, sd ~17.9.
  EXPECT_NEAR(static_cast<double>(o_target), 1600.0, 5 * 17.9);

  SynthConfig other = cfg;
  other.seed = 43;
  EXPECT_NE(generate(other).dataset.records, a.dataset.records);
}

TEST(Generate, CentroidsRespectSeparationAndShiftLength) {
  SynthConfig cfg;
  const SynthDataset d = generate(cfg);
  for (std::size_t a = 0; a < d.truth.centroids.size(); ++a) {
    EXPECT_NEAR(l2_norm(d.truth.shifts[a]), cfg.shift_magnitude * cfg.cluster_sigma, 1e-12);
    for (std::size_t b = a + 1; b < d.truth.centroids.size(); ++b)
      EXPECT_GE(std::sqrt(squared_distance(d.truth.centroids[a], d.truth.centroids[b])),
                cfg.center_sep * cfg.cluster_sigma);
  }
}

TEST(Generate, ConfigErrors) {
  SynthConfig c;
  c.n_source = 0;
  try {
    generate(c);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::EmptySource);
  }
  c = SynthConfig{};
  c.o_fraction = 1.0;
  EXPECT_THROW(generate(c), Error);
  c = SynthConfig{};
  c.cluster_sigma = 0.0;
  EXPECT_THROW(generate(c), Error);
}

TEST(Generate, UnshiftedSeparableTargetIsClassifiedAlmostPerfectly) {
  SynthConfig cfg;
  cfg.shift_magnitude = 0.0;
  cfg.center_sep = 10.0;
  cfg.seed = 1;
  const SynthDataset d = generate(cfg);
  std::vector<Record> features = d.dataset.records;
  const LinearProbe probe = train_source(features, 5, TrainConfig{});
  std::size_t hits = 0, total = 0;
  for (std::size_t i = 0; i < features.size(); ++i) {
    if (features[i].split != Split::TargetTest) continue;
    ++total;
    hits += predict(probe, features[i].embedding) == d.truth.gold[i] ? 1 : 0;
  }
  EXPECT_GE(static_cast<double>(hits) / static_cast<double>(total), 0.99);
}

TEST(InjectPseudoNoise, FlipsExactlyTheRequestedCountToWrongClasses) {
  const SynthDataset d = generate(SynthConfig{});
  std::vector<Record> records = d.dataset.records;
  for (Record& r : records)
    if (r.split == Split::Target) r.pseudo = one_hot(5, d.truth.gold[r.id]);
  const std::size_t n = inject_pseudo_noise(records, d.truth.gold, 5, 0.3, 42);
  EXPECT_EQ(n, 600u);
  std::size_t wrong = 0;
  for (const Record& r : records)
    if (r.split == Split::Target && hard_label(*r.pseudo) != d.truth.gold[r.id]) ++wrong;
  EXPECT_EQ(wrong, 600u);
}

TEST(SpanF1, Examples) {
  // classes {A, B, O}
  const std::vector<ClassIndex> gold{0, 2, 1}, pred{0, 1, 1};
  const EvalReport r = span_f1(pred, gold, 2, 3);
  EXPECT_DOUBLE_EQ(r.precision, 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(r.recall, 1.0);
  EXPECT_NEAR(r.f1, 0.8, 1e-15);

  EXPECT_DOUBLE_EQ(span_f1(gold, gold, 2, 3).f1, 1.0);
  const std::vector<ClassIndex> all_o{2, 2, 2};
  const EvalReport none = span_f1(all_o, gold, 2, 3);
  EXPECT_EQ(none.precision, 0.0);
  EXPECT_EQ(none.recall, 0.0);
  EXPECT_EQ(none.f1, 0.0);

  try {
    span_f1(std::vector<ClassIndex>{0}, gold, 2, 3);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::LengthMismatch);
  }
}

TEST(SpanF1, MatchesNaiveCountingAndIsPermutationInvariant) {
  RngStream rng(55);
  for (int t = 0; t < 300; ++t) {
    const std::size_t n = rng.uniform_index(60);
    std::vector<ClassIndex> pred(n), gold(n);
    for (std::size_t i = 0; i < n; ++i) {
      pred[i] = rng.uniform_index(4);
      gold[i] = rng.uniform_index(4);
    }
    const EvalReport r = span_f1(pred, gold, 3, 4);
    const auto naive = oracle::naive_span_f1(pred, gold, 3);
    EXPECT_DOUBLE_EQ(r.precision, naive.precision);
    EXPECT_DOUBLE_EQ(r.recall, naive.recall);
    EXPECT_DOUBLE_EQ(r.f1, naive.f1);

    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(perm);
    std::vector<ClassIndex> pp(n), gp(n);
    for (std::size_t i = 0; i < n; ++i) {
      pp[i] = pred[perm[i]];
      gp[i] = gold[perm[i]];
    }
    EXPECT_EQ(span_f1(pp, gp, 3, 4).f1, r.f1);
  }
}

TEST(ApplyDrift, IdentityFullAndContraction) {
  RngStream rng(21);
  PrototypeBank bank{{rng.unit_vector(6), rng.unit_vector(6)}, 0.99};
  std::vector<Record> records;
  for (RecordId id = 0; id < 30; ++id) {
    Record r;
    r.id = id;
    r.split = id % 3 == 0 ? Split::Source : Split::Target;
    r.embedding = rng.unit_vector(6);
    r.pseudo = one_hot(2, id % 2);
    records.push_back(std::move(r));
  }

  std::vector<Record> same = records;
  apply_drift(same, bank, 0.0);
  EXPECT_EQ(same, records);

  std::vector<Record> full = records;
  apply_drift(full, bank, 1.0);
  for (const Record& r : full) {
    if (r.split != Split::Target) continue;
    const Vector& phi = bank.prototypes[hard_label(*r.pseudo)];
    for (std::size_t j = 0; j < 6; ++j) EXPECT_NEAR(r.embedding[j], phi[j], 1e-12);
  }

  std::vector<Record> step = records;
  apply_drift(step, bank, 0.1);
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (records[i].split != Split::Target) {
      EXPECT_EQ(step[i].embedding, records[i].embedding);
      continue;
    }
    const Vector& phi = bank.prototypes[hard_label(*records[i].pseudo)];
    EXPECT_LT(angle_degrees(step[i].embedding, phi), angle_degrees(records[i].embedding, phi));
    EXPECT_NEAR(l2_norm(step[i].embedding), 1.0, 1e-12);
  }
}

TEST(RandomProjection, OrthonormalRowsAndDeterministic) {
  const RandomProjection p(40, 12, 7);
  for (std::size_t a = 0; a < 12; ++a)
    for (std::size_t b = 0; b < 12; ++b)
      EXPECT_NEAR(dot(p.rows()[a], p.rows()[b]), a == b ? 1.0 : 0.0, 1e-12);
  EXPECT_EQ(RandomProjection(40, 12, 7).rows(), p.rows());
  EXPECT_THROW(RandomProjection(4, 5, 1), Error);
}

TEST(Pipeline, NoDenoiseLeavesInitialPseudoLabelsUntouched) {
  const SynthDataset d = generate(small_config());
  PipelineConfig cfg = small_pipeline();
  cfg.flags = {false, false, false};
  const PipelineResult r = run_pipeline(d.dataset, d.truth.gold, cfg);

  std::vector<Record> expected = d.dataset.records;
  for (Record& rec : expected) rec.embedding = l2_normalize(rec.embedding);
  TrainConfig train = cfg.train;
  train.seed = cfg.seed;
  assign_initial_pseudo(train_source(expected, 5, train), expected);
  for (std::size_t i = 0; i < expected.size(); ++i) EXPECT_EQ(r.records[i].pseudo, expected[i].pseudo);
  for (const auto& e : r.epochs) {
    EXPECT_EQ(e.pseudo_f1, r.initial_pseudo_f1);
    EXPECT_EQ(e.direction_stats.skip, 400u);
  }
}

TEST(Pipeline, DeterministicAndReportsEveryEpoch) {
  const SynthDataset d = generate(small_config());
  const PipelineConfig cfg = small_pipeline();
  const PipelineResult a = run_pipeline(d.dataset, d.truth.gold, cfg);
  const PipelineResult b = run_pipeline(d.dataset, d.truth.gold, cfg);
  ASSERT_EQ(a.epochs.size(), 3u);
  EXPECT_EQ(a.records, b.records);
  EXPECT_EQ(a.probe, b.probe);
  for (std::size_t e = 0; e < 3; ++e) {
    EXPECT_EQ(a.epochs[e].epoch, static_cast<int>(e + 1));
    EXPECT_EQ(a.epochs[e].pseudo_f1, b.epochs[e].pseudo_f1);
    EXPECT_TRUE(std::isfinite(a.epochs[e].train_loss));
    EXPECT_EQ(a.epochs[e].thresholds_global.size(), 5u);
  }
  EXPECT_DOUBLE_EQ(a.epochs[0].beta, 0.95);
  EXPECT_NEAR(a.epochs[2].beta, 0.80, 1e-15);
  for (const Record& r : a.records)
    if (r.pseudo) {
      EXPECT_TRUE(is_valid_soft_label(*r.pseudo));
    }
}

TEST(Pipeline, ProjectionDriftAndFlipsRun) {
  SynthConfig sc = small_config();
  sc.dim = 24;
  const SynthDataset d = generate(sc);
  PipelineConfig cfg = small_pipeline();
  cfg.denoise_dim = 8;
  cfg.drift_eta = 0.1;
  cfg.flip_rate = 0.2;
  const PipelineResult r = run_pipeline(d.dataset, d.truth.gold, cfg);
  EXPECT_EQ(r.epochs.size(), 3u);
  EXPECT_EQ(r.records.front().embedding, d.dataset.records.front().embedding);
  for (const auto& e : r.epochs) EXPECT_TRUE(std::isfinite(e.pseudo_f1));
}

TEST(Pipeline, WarnsAboutClassesWithoutSourceRecords) {
  SynthDataset d = generate(small_config());
  std::vector<Record> records;
  std::vector<ClassIndex> gold;
  for (std::size_t i = 0; i < d.dataset.records.size(); ++i) {
    const Record& r = d.dataset.records[i];
    if (r.split == Split::Source && r.gold == 0u) continue;
    records.push_back(r);
    gold.push_back(d.truth.gold[i]);
  }
  d.dataset.records = records;
  PipelineConfig cfg = small_pipeline();
  cfg.schedule.total_epochs = 1;
  const PipelineResult res = run_pipeline(d.dataset, gold, cfg);
  ASSERT_EQ(res.warnings.size(), 1u);
  EXPECT_NE(res.warnings[0].find("PER"), std::string::npos);
}

TEST(Ablation, FixedRowOrderAndNoDenoiseBaseline) {
  const SynthDataset d = generate(small_config());
  const AblationTable t = run_ablation(d.dataset, d.truth.gold, small_pipeline());
  ASSERT_EQ(t.rows.size(), 5u);
  for (std::size_t i = 0; i < 5; ++i) EXPECT_EQ(t.rows[i].strategy, kStrategies[i]);
  EXPECT_EQ(t.row(Strategy::NoDenoise).delta_vs_no_denoise, 0.0);

  PipelineConfig off = small_pipeline();
  off.flags = {false, false, false};
  const PipelineResult direct = run_pipeline(d.dataset, d.truth.gold, off);
  EXPECT_EQ(direct.records, t.row(Strategy::NoDenoise).run.records);
}
