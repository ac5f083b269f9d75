#include <gtest/gtest.h>

#include <vector>

#include "glode/refine.hpp"

using namespace glode;

TEST(IntegrateDirections, Examples) {
  const UpdateDecision u = integrate_directions({1, 0, 1, 0}, {0, 0, 1, 0});
  ASSERT_TRUE(u);
  EXPECT_DOUBLE_EQ((*u)[0], 1.0 / 3.0);
  EXPECT_DOUBLE_EQ((*u)[1], 0.0);
  EXPECT_DOUBLE_EQ((*u)[2], 2.0 / 3.0);
  EXPECT_DOUBLE_EQ((*u)[3], 0.0);

  EXPECT_FALSE(integrate_directions({0, 0, 0, 0}, {0, 0, 0, 0}));
  EXPECT_EQ(*integrate_directions({0, 1, 0, 0}, {0, 1, 0, 0}), (Vector{0, 1, 0, 0}));
  EXPECT_THROW(integrate_directions({1, 0}, {1, 0, 0}), Error);
}

TEST(BetaAt, LinearScheduleEndpoints) {
  const BetaSchedule s;
  EXPECT_DOUBLE_EQ(beta_at(s, 1), 0.95);
  EXPECT_NEAR(beta_at(s, 8), 0.80, 1e-15);
  EXPECT_NEAR(beta_at(s, 2), 0.928571, 1e-6);
  EXPECT_DOUBLE_EQ(beta_at(BetaSchedule{0.95, 0.8, 1}, 1), 0.95);
  for (int e = 2; e <= 8; ++e) EXPECT_LE(beta_at(s, e), beta_at(s, e - 1));
}

TEST(BetaAt, EpochOutOfRange) {
  const BetaSchedule s;
  for (int bad : {0, 9, -1}) {
    try {
      beta_at(s, bad);
      FAIL() << bad;
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::EpochOutOfRange);
    }
  }
}

TEST(ApplyUpdate, Examples) {
  const SoftLabel p{0.7, 0.1, 0.1, 0.1};
  const SoftLabel out = apply_update(p, Vector{0, 0, 1, 0}, 0.9);
  EXPECT_NEAR(out[0], 0.63, 1e-15);
  EXPECT_NEAR(out[1], 0.09, 1e-15);
  EXPECT_NEAR(out[2], 0.19, 1e-15);
  EXPECT_NEAR(out[3], 0.09, 1e-15);

  const SoftLabel same = apply_update(p, Vector{0, 0, 1, 0}, 1.0);
  for (std::size_t c = 0; c < 4; ++c) EXPECT_NEAR(same[c], p[c], 1e-15);
  EXPECT_EQ(apply_update(p, Vector{0, 1, 0, 0}, 0.0), (SoftLabel{0, 1, 0, 0}));
  EXPECT_EQ(apply_update(p, std::nullopt, 0.5), p);
}

TEST(ApplyUpdate, ShrinkageLawOnRandomTriples) {
  RngStream rng(1234);
  for (int t = 0; t < 1000; ++t) {
    const std::size_t n = 2 + rng.uniform_index(7);
    Vector p(n);
    for (double& x : p) x = rng.uniform() + 1e-9;
    p = l1_normalize(p);
    DirectionVector dg(n), dl(n);
    for (auto& b : dg) b = rng.uniform() < 0.3;
    for (auto& b : dl) b = rng.uniform() < 0.3;
    const UpdateDecision u = integrate_directions(dg, dl);
    const double beta = rng.uniform(0.5, 1.0);
    const SoftLabel out = apply_update(p, u, beta);
    EXPECT_TRUE(is_valid_soft_label(out));
    if (!u) {
      EXPECT_EQ(out, p);
      continue;
    }
    for (std::size_t c = 0; c < n; ++c)
      if ((*u)[c] == 0.0) {
        EXPECT_NEAR(out[c], beta * p[c], 1e-12);
      }
  }
}

namespace {

// Four target records in a 2-D space with classes {A, O}; record order is the
// id order.
struct Fixture {
  std::vector<Record> records;
  PrototypeBank bank{{{1.0, 0.0}, {0.0, 1.0}}, 0.99};
  NeighborRepository repo;
  Thresholds global{{0.5, 0.5}, 0};
  Thresholds local{{0.5, 0.5}, 0};

  Fixture() {
    const auto add = [&](RecordId id, Vector z, SoftLabel p) {
      Record r;
      r.id = id;
      r.split = Split::Target;
      r.pseudo = std::move(p);
      r.embedding = l2_normalize(z);
      records.push_back(std::move(r));
    };
    add(0, {1.0, 0.1}, {0.2, 0.8});  // near A, labeled O
    add(1, {1.0, 0.2}, {0.9, 0.1});
    add(2, {0.1, 1.0}, {0.6, 0.4});  // near O, labeled A
    add(3, {0.2, 1.0}, {0.1, 0.9});
    repo = build_repository(records, 0);
  }

  DenoiseState state(DenoiseFlags flags) {
    return DenoiseState{records, &bank, &repo, &global, &local, BetaSchedule{}, flags, 1, 1};
  }
};

}  // namespace

TEST(DenoiseEpoch, BothLevelsDisabledIsANoOp) {
  Fixture f;
  const auto before = f.records;
  DenoiseState s = f.state({false, false, false});
  const DirectionStats stats = denoise_epoch(s, 1);
  EXPECT_EQ(f.records, before);
  EXPECT_EQ(stats.skip, 4u);
  EXPECT_EQ(stats.single + stats.multi, 0u);
}

TEST(DenoiseEpoch, MovesNoisyLabelsTowardTheirNeighborhood) {
  Fixture f;
  const auto before = f.records;
  DenoiseState s = f.state({true, true, false});
  const DirectionStats stats = denoise_epoch(s, 1);
  EXPECT_EQ(stats.skip + stats.single + stats.multi, 4u);
  const double beta = 0.95;
  // Record 0 sits next to A: its O mass shrinks by exactly beta.
  EXPECT_NEAR((*f.records[0].pseudo)[1], beta * (*before[0].pseudo)[1], 1e-12);
  EXPECT_GT((*f.records[0].pseudo)[0], (*before[0].pseudo)[0]);
  EXPECT_GT((*f.records[2].pseudo)[1], (*before[2].pseudo)[1]);
  for (const Record& r : f.records) EXPECT_TRUE(is_valid_soft_label(*r.pseudo));
}

TEST(DenoiseEpoch, RejectsThresholdsFromTheCurrentEpoch) {
  Fixture f;
  f.global.epoch_computed = 1;
  DenoiseState s = f.state({true, true, false});
  try {
    denoise_epoch(s, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::StaleThresholds);
  }
  f.global.epoch_computed = 0;
  f.repo.epoch_built = 2;
  EXPECT_THROW(denoise_epoch(s, 2), Error);
}

TEST(DenoiseEpoch, SingleDirectionNeverAddsDirections) {
  Fixture f;
  f.global = Thresholds{{-1.0, -1.0}, 0};  // every class passes globally
  Fixture g = f;
  DenoiseState multi = f.state({true, false, false});
  DenoiseState single = g.state({true, false, true});
  const DirectionStats ms = denoise_epoch(multi, 1);
  const DirectionStats ss = denoise_epoch(single, 1);
  EXPECT_EQ(ms.multi, 4u);
  EXPECT_EQ(ss.multi, 0u);
  EXPECT_EQ(ss.single, 4u);
}
