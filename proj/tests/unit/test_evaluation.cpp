#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <sstream>

#include "support/builders.hpp"
#include "support/oracles.hpp"

using namespace sentinel;

namespace {

const PhaseLabel N = PhaseLabel::Normal;
const PhaseLabel A = PhaseLabel::Anomaly;

EpisodeResult result(EpisodeCategory c, bool flagged) {
  EpisodeResult r;
  r.gtCategory = c;
  r.detectorFlagged = flagged;
  if (flagged) r.detectionStep = 0;
  return r;
}

std::vector<Pose> poses_along_x(const std::vector<float>& xs) {
  std::vector<Pose> p;
  for (float x : xs) p.push_back({x, 0.0F, 0.0F, 0.0F});
  return p;
}

// Episodes whose entropy jumps at a fixed step; normal ones stay flat.
SweepEpisode sweep_episode(bool anomalous, std::size_t onset = 6, std::size_t steps = 16) {
  SweepEpisode e;
  e.category = anomalous ? EpisodeCategory::NtoA : EpisodeCategory::OnlyN;
  e.labels.assign(steps, N);
  std::vector<double> series(steps, 0.3);
  if (anomalous) {
    for (std::size_t t = onset; t < steps; ++t) {
      e.labels[t] = A;
      series[t] = 0.9;
    }
  }
  e.entropyByK = {series, series};
  return e;
}

}  // namespace

TEST(EpisodeMetrics, Counting) {
  const std::vector<EpisodeResult> r{result(EpisodeCategory::NtoA, true), result(EpisodeCategory::OnlyA, false),
                                     result(EpisodeCategory::OnlyN, false), result(EpisodeCategory::OnlyN, false)};
  const auto m = episode_metrics(r);
  EXPECT_EQ(*m.edr, 0.5);
  EXPECT_EQ(*m.fer, 0.0);
  EXPECT_EQ(*m.gap, 0.5);
}

TEST(EpisodeMetrics, FlagEverything) {
  const std::vector<EpisodeResult> r{result(EpisodeCategory::NtoA, true), result(EpisodeCategory::OnlyN, true)};
  const auto m = episode_metrics(r);
  EXPECT_EQ(*m.edr, 1.0);
  EXPECT_EQ(*m.fer, 1.0);
  EXPECT_EQ(*m.gap, 0.0);
}

TEST(EpisodeMetrics, EmptyClassIsUndefined) {
  const std::vector<EpisodeResult> r{result(EpisodeCategory::NtoA, true)};
  const auto m = episode_metrics(r);
  EXPECT_TRUE(m.edr);
  EXPECT_FALSE(m.fer);
  EXPECT_THROW(require_metric(m.fer, "FER"), UndefinedMetric);
}

TEST(StepMetrics, Examples) {
  const std::vector<StepSequence> same{{EpisodeCategory::NtoA, {N, N, A, A}, {N, N, A, A}}};
  auto m = step_metrics(same);
  EXPECT_EQ(m.precision, 1.0);
  EXPECT_EQ(m.recall, 1.0);
  EXPECT_EQ(m.f1, 1.0);

  const std::vector<StepSequence> none{{EpisodeCategory::NtoA, {N, N, A, A}, {N, N, N, N}}};
  m = step_metrics(none);
  EXPECT_EQ(m.recall, 0.0);
  EXPECT_EQ(m.f1, 0.0);

  const std::vector<StepSequence> early{{EpisodeCategory::NtoA, {N, N, A, A}, {N, A, A, A}}};
  m = step_metrics(early);
  EXPECT_NEAR(m.precision, 2.0 / 3.0, 1e-15);
  EXPECT_EQ(m.recall, 1.0);
  EXPECT_NEAR(m.f1, 0.8, 1e-15);
}

TEST(StepMetrics, LengthMismatchAndRestriction) {
  const std::vector<StepSequence> bad{{EpisodeCategory::NtoA, {N, A}, {N}}};
  EXPECT_THROW(step_metrics(bad), InputError);
  const std::vector<StepSequence> onlyN{{EpisodeCategory::OnlyN, {N, N}, {A, A}}};
  EXPECT_EQ(step_metrics(onlyN).fp, 0U);
  EXPECT_EQ(step_metrics(onlyN, false).fp, 2U);
}

TEST(Latch, HoldsAfterFirstFlag) {
  EXPECT_EQ(latch({N, A, N, N}), (std::vector<PhaseLabel>{N, A, A, A}));
  EXPECT_EQ(latch({N, N}), (std::vector<PhaseLabel>{N, N}));
}

TEST(Baselines, StationaryRobotFlaggedAtPatience) {
  const auto f = baseline_stagnation(poses_along_x({0, 0, 0, 0, 0}), 0.1, 3);
  EXPECT_EQ(f, (std::vector<PhaseLabel>{N, N, N, A, A}));
}

TEST(Baselines, MovingRobotNeverStagnates) {
  const auto f = baseline_stagnation(poses_along_x({0, 0.25F, 0.5F, 0.75F, 1.0F, 1.25F}), 0.1, 3);
  EXPECT_EQ(std::count(f.begin(), f.end(), A), 0);
  EXPECT_EQ(baseline_stagnation(poses_along_x({0}), 0.1, 3), std::vector<PhaseLabel>{N});
}

TEST(Baselines, ActionFailure) {
  const auto still = poses_along_x({0, 0});
  EXPECT_EQ(baseline_action_failure(std::vector{Action::forward(0.25F), Action::stop()}, still)[0], A);
  EXPECT_EQ(baseline_action_failure(std::vector{Action::turn_left(0.5F), Action::stop()}, still)[0], N);
  const auto moved = poses_along_x({0, 0.25F});
  EXPECT_EQ(baseline_action_failure(std::vector{Action::forward(0.25F), Action::stop()}, moved, 0.05)[0], N);
  EXPECT_THROW(baseline_action_failure(std::vector{Action::stop()}, moved), InputError);
}

TEST(Summarize, LatencyFromOnset) {
  const std::vector<StepSequence> s{{EpisodeCategory::NtoA, {N, N, A, A, A}, {N, N, N, A, A}},
                                    {EpisodeCategory::NtoA, {N, A, A}, {A, A, A}},
                                    {EpisodeCategory::OnlyN, {N, N}, {N, N}}};
  std::vector<EpisodeResult> r;
  const auto m = summarize(s, &r);
  ASSERT_TRUE(m.meanLatency);
  EXPECT_DOUBLE_EQ(*m.meanLatency, 0.0);  // +1 and -1
  EXPECT_EQ(*r[0].latency, 1.0);
  EXPECT_EQ(*r[1].latency, -1.0);
  EXPECT_EQ(m.edr, 1.0);
  EXPECT_EQ(m.fer, 0.0);
}

TEST(GridSweep, SingleCombination) {
  const std::vector<SweepEpisode> eps{sweep_episode(true), sweep_episode(false)};
  SweepSpec spec{{1}, {2}, {3}, {1.5}, 0.1, 1e-8};
  const auto r = grid_sweep(eps, spec);
  ASSERT_EQ(r.table.size(), 1U);
  EXPECT_EQ(r.best.key(), std::tuple(1, 2, 3, 1.5));
  EXPECT_EQ(r.best.metrics.edr, 1.0);
  EXPECT_EQ(r.best.metrics.fer, 0.0);
  EXPECT_EQ(*r.best.metrics.meanLatency, 1.0);
}

TEST(GridSweep, FullGridHasNineThousandRows) {
  EXPECT_EQ(SweepSpec::full_grid().combinations(), 9000U);
}

TEST(GridSweep, FeasibilityBeatsDetectionRate) {
  SweepRow a{1, 1, 1, 1.0, {}, false}, b{1, 1, 1, 1.1, {}, false};
  a.metrics.edr = 0.5;
  a.metrics.fer = 0.2;
  b.metrics.edr = 0.4;
  b.metrics.fer = 0.05;
  EXPECT_TRUE(better_row(a, b));  // unfiltered ordering prefers EDR
  // Through the sweep: one normal episode flagged by the low threshold only.
  std::vector<SweepEpisode> eps{sweep_episode(true), sweep_episode(false)};
  for (int i = 0; i < 9; ++i) eps.push_back(sweep_episode(false));
  eps[1].entropyByK[0][8] = 0.9;
  eps[1].entropyByK[0][9] = 0.9;
  SweepSpec spec{{1}, {2}, {3}, {1.5, 3.5}, 0.05, 1e-8};
  const auto r = grid_sweep(eps, spec);
  EXPECT_EQ(r.table[0].metrics.fer, 0.1);
  EXPECT_FALSE(r.table[0].feasible);
  EXPECT_EQ(r.best.tau, 3.5);
  EXPECT_LE(r.best.metrics.fer, spec.ferCap);
}

TEST(GridSweep, NoFeasibleConfigKeepsTable) {
  std::vector<SweepEpisode> eps{sweep_episode(true), sweep_episode(true, 3)};
  eps[1].category = EpisodeCategory::OnlyN;
  std::fill(eps[1].labels.begin(), eps[1].labels.end(), N);
  SweepSpec spec{{1, 2}, {1}, {2}, {1.2}, 0.1, 1e-8};
  try {
    grid_sweep(eps, spec);
    FAIL() << "expected NoFeasibleConfig";
  } catch (const NoFeasibleConfig& e) {
    EXPECT_EQ(e.table().size(), 2U);
  }
}

TEST(GridSweep, NeedsBothClasses) {
  const std::vector<SweepEpisode> eps{sweep_episode(true)};
  EXPECT_THROW(grid_sweep(eps, SweepSpec{{1}, {1}, {1}, {1.0}, 0.1, 1e-8}), ConfigError);
}

TEST(GridSweep, CsvLayout) {
  const std::vector<SweepEpisode> eps{sweep_episode(true), sweep_episode(false)};
  const auto r = grid_sweep(eps, SweepSpec{{1}, {1, 2}, {3}, {1.5}, 0.1, 1e-8});
  std::ostringstream out;
  write_sweep_csv(out, r.table);
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "K,P,W,tau,EDR,FER,Gap,precision,recall,F1,meanLatency");
  std::getline(in, line);
  EXPECT_EQ(line.rfind("1,1,3,1.5000,", 0), 0U);
}

// Episode metrics ignore order; step metrics match a direct confusion count.
TEST(EvaluationProperty, ReorderingAndConfusionCounts) {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<StepSequence> seqs;
    const std::size_t n = oracles::pick(rng, 2, 12);
    for (std::size_t i = 0; i < n; ++i) {
      StepSequence s;
      const std::size_t len = oracles::pick(rng, 1, 10);
      const std::size_t onset = oracles::pick(rng, 0, len);
      for (std::size_t t = 0; t < len; ++t) {
        s.labels.push_back(t >= onset ? A : N);
        s.flags.push_back((rng() % 3 == 0) ? A : N);
      }
      s.flags = latch(s.flags);
      s.category = categorize_episode(s.labels);
      seqs.push_back(s);
    }
    seqs[0].category = EpisodeCategory::OnlyN;
    seqs[0].labels.assign(seqs[0].labels.size(), N);
    seqs[1].category = EpisodeCategory::OnlyA;
    seqs[1].labels.assign(seqs[1].labels.size(), A);

    std::size_t tp = 0, fp = 0, fn = 0;
    for (const auto& s : seqs) {
      if (s.category != EpisodeCategory::NtoA) continue;
      for (std::size_t t = 0; t < s.labels.size(); ++t) {
        tp += s.labels[t] == A && s.flags[t] == A;
        fp += s.labels[t] == N && s.flags[t] == A;
        fn += s.labels[t] == A && s.flags[t] == N;
      }
    }
    const auto m = step_metrics(seqs);
    ASSERT_EQ(m.tp, tp);
    ASSERT_EQ(m.fp, fp);
    ASSERT_EQ(m.fn, fn);

    const auto base = summarize(seqs);
    auto shuffled = seqs;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    const auto again = summarize(shuffled);
    ASSERT_EQ(base.edr, again.edr);
    ASSERT_EQ(base.fer, again.fer);
  }
}

// The winner always respects the cap, whatever the data.
TEST(EvaluationProperty, WinnerRespectsCap) {
  std::mt19937_64 rng(5150);
  for (int trial = 0; trial < 40; ++trial) {
    std::vector<SweepEpisode> eps;
    for (int i = 0; i < 8; ++i) {
      auto e = sweep_episode(i % 2 == 0, oracles::pick(rng, 2, 12));
      for (auto& series : e.entropyByK) {
        for (auto& v : series) v += oracles::uniform(rng, 0.0, 0.4);
      }
      eps.push_back(e);
    }
    SweepSpec spec{{1, 2}, {1, 2, 3}, {1, 3}, {1.0, 1.3, 1.6}, 0.25, 1e-8};
    try {
      const auto r = grid_sweep(eps, spec, 2);
      ASSERT_LE(r.best.metrics.fer, spec.ferCap);
      for (const auto& row : r.table) {
        if (row.feasible) {
          ASSERT_FALSE(better_row(row, r.best));
        }
      }
    } catch (const NoFeasibleConfig& e) {
      for (const auto& row : e.table()) ASSERT_GT(row.metrics.fer, spec.ferCap);
    }
  }
}
