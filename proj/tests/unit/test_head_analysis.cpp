#include <gtest/gtest.h>

#include <random>

#include "support/builders.hpp"
#include "support/oracles.hpp"

using namespace sentinel;

namespace {

AttentionMatrix row_matrix(std::vector<double> row) {
  AttentionMatrix m(1, row.size());
  for (std::size_t j = 0; j < row.size(); ++j) m(0, j) = float(row[j]);
  return m;
}

HeadScore score(int l, int h, double iDiag, double d) { return {{l, h}, iDiag, d, 10, 10}; }

}  // namespace

TEST(FrameStats, PointMass) {
  std::vector<double> row(10, 0.0);
  row[4] = 1.0;
  const auto s = frame_stats(row_matrix(row), 1).at(0);
  EXPECT_DOUBLE_EQ(s.center, 4.0);
  EXPECT_DOUBLE_EQ(s.spread, 0.0);
  EXPECT_DOUBLE_EQ(s.windowMass, 1.0);
}

TEST(FrameStats, UniformRowSpread) {
  const auto s = frame_stats(row_matrix(std::vector<double>(10, 0.1)), 1).at(0);
  EXPECT_NEAR(s.center, 4.5, 1e-12);
  EXPECT_NEAR(s.spread, std::sqrt(99.0 / 12.0), 1e-6);
  EXPECT_NEAR(s.spread, 2.8723, 1e-4);
}

TEST(FrameStats, EnergyAndCenter) {
  const auto s = frame_stats(row_matrix({0, 0, 1, 1}), 1).at(0);
  EXPECT_DOUBLE_EQ(s.energy, 2.0);
  EXPECT_DOUBLE_EQ(s.center, 2.5);
}

TEST(FrameStats, AllZeroRowIsDegenerate) {
  EXPECT_THROW(frame_stats(row_matrix({0, 0, 0}), 1), DegenerateRow);
}

TEST(Alignment, PerfectDiagonalScoresOne) {
  const auto c = alignment_components(oracles::perfect_diagonal(5, 9), 1);
  EXPECT_NEAR(c.sDiag, 1.0, 1e-12);
  EXPECT_NEAR(c.sShift, 1.0, 1e-12);
  EXPECT_NEAR(c.sUniform, 1.0, 1e-12);
  EXPECT_NEAR(c.sPeak, 1.0, 1e-12);
  EXPECT_NEAR(combined_alignment(c, 0.3), 1.0, 1e-12);
}

TEST(Alignment, UniformRowsDiagonalScore) {
  const auto c = alignment_components(AttentionMatrix(3, 11, 1.0F), 1);
  EXPECT_NEAR(c.sDiag, 2.0 / 3.0, 1e-12);
}

TEST(Alignment, ReversedDiagonalShiftAtMostHalf) {
  const auto fwd = oracles::perfect_diagonal(6, 11);
  AttentionMatrix rev(6, 11);
  for (std::size_t k = 0; k < 6; ++k) {
    for (std::size_t j = 0; j < 11; ++j) rev(k, j) = fwd(5 - k, j);
  }
  EXPECT_LE(alignment_components(rev, 1).sShift, 0.5);
}

TEST(Alignment, ZeroRowsContributeNothing) {
  auto m = oracles::perfect_diagonal(4, 7);
  for (std::size_t j = 0; j < 7; ++j) m(2, j) = 0.0F;
  const auto c = alignment_components(m, 1);
  EXPECT_NEAR(c.sUniform, 0.75, 1e-12);
  EXPECT_NEAR(c.sShift, 1.0 / 3.0, 1e-12);
}

TEST(Alignment, NeedsTwoFrames) {
  EXPECT_THROW(alignment_components(AttentionMatrix(1, 5, 1.0F), 1), ConfigError);
}

TEST(Alignment, DefaultWindowIsFivePercent) {
  SelectionConfig cfg;
  EXPECT_EQ(resolve_window(cfg, 10), 1);
  EXPECT_EQ(resolve_window(cfg, 100), 5);
  cfg.peakWindowHalfWidth = 3;
  EXPECT_EQ(resolve_window(cfg, 100), 3);
}

TEST(IDiag, SinglePerfectEpisodeAnyLambda) {
  const std::vector<AttentionMatrix> ms{oracles::perfect_diagonal(4, 10)};
  for (double lambda : {0.0, 0.5, 1.0}) {
    SelectionConfig cfg;
    cfg.lambda = lambda;
    EXPECT_NEAR(i_diag(ms, cfg), 1.0, 1e-12);
  }
}

TEST(IDiag, MeanOverEpisodes) {
  // One perfect episode and one whose combined score is computed directly.
  std::mt19937_64 rng(5);
  const auto other = oracles::random_matrix(rng, 4, 10, 2);
  SelectionConfig cfg;
  const double b = combined_alignment(alignment_components(other, cfg), cfg.lambda);
  const std::vector<AttentionMatrix> ms{oracles::perfect_diagonal(4, 10), other};
  EXPECT_NEAR(i_diag(ms, cfg), (1.0 + b) / 2.0, 1e-12);
}

TEST(IDiag, LambdaZeroIsShiftTimesFactors) {
  std::mt19937_64 rng(9);
  const auto m = oracles::random_matrix(rng, 5, 12, 1);
  SelectionConfig cfg;
  cfg.lambda = 0.0;
  const auto c = alignment_components(m, cfg);
  const std::vector<AttentionMatrix> ms{m};
  EXPECT_NEAR(i_diag(ms, cfg), c.sUniform * c.sPeak * c.sShift, 1e-15);
}

TEST(IDiag, EmptySetIsConfigError) {
  EXPECT_THROW(i_diag(std::vector<AttentionMatrix>{}, SelectionConfig{}), ConfigError);
}

TEST(CohensD, Examples) {
  const std::vector<double> a{0, 1, 2}, b{3, 4, 5};
  EXPECT_NEAR(cohens_d(a, b), 3.0, 1e-12);
  EXPECT_EQ(cohens_d(a, a), 0.0);
  EXPECT_THROW(cohens_d(std::vector<double>{0, 0}, std::vector<double>{1, 1}), DegenerateVariance);
  EXPECT_EQ(cohens_d(std::vector<double>{2, 2}, std::vector<double>{2, 2}), 0.0);
}

TEST(CohensD, SymmetricAndShiftInvariant) {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 100; ++t) {
    std::vector<double> a(2 + rng() % 10), b(2 + rng() % 10);
    for (auto& x : a) x = oracles::uniform(rng, -1, 1);
    for (auto& x : b) x = oracles::uniform(rng, 0, 2);
    auto as = a, bs = b;
    for (auto& x : as) x += 7.5;
    for (auto& x : bs) x += 7.5;
    EXPECT_NEAR(cohens_d(a, b), cohens_d(b, a), 1e-12);
    EXPECT_NEAR(cohens_d(a, b), cohens_d(as, bs), 1e-9);
  }
}

TEST(SelectNavHeads, SingleDominantHead) {
  const std::vector<HeadScore> s{score(0, 0, 0.2, 0.1), score(1, 1, 0.9, 2.0), score(2, 2, 0.5, 0.5)};
  SelectionConfig cfg;
  cfg.candidatePoolSize = 1;
  cfg.k = 1;
  EXPECT_EQ(select_nav_heads(s, cfg), (std::vector<HeadId>{{1, 1}}));
}

TEST(SelectNavHeads, EffectSizeOrdersThePool) {
  // X tops alignment but has a small effect; Y sits at the pool's edge with
  // the largest effect.
  std::vector<HeadScore> s;
  for (int i = 0; i < 40; ++i) s.push_back(score(3, i % 32, 0.5 - 0.01 * i, 1.0 + 0.01 * i));
  s[0] = score(0, 0, 0.99, 0.01);   // X
  s[3] = score(0, 1, 0.60, 5.0);    // Y: alignment rank 2 here
  s[39] = score(0, 2, 0.01, 9.0);   // outside the pool
  SelectionConfig cfg;
  cfg.candidatePoolSize = 4;
  cfg.k = 4;
  const auto out = select_nav_heads(s, cfg);
  ASSERT_EQ(out.size(), 4U);
  EXPECT_EQ(out.front(), (HeadId{0, 1}));
  EXPECT_EQ(out.back(), (HeadId{0, 0}));
  EXPECT_EQ(std::count(out.begin(), out.end(), HeadId{0, 2}), 0);
}

TEST(SelectNavHeads, Errors) {
  const std::vector<HeadScore> s{score(0, 0, 0.2, 0.1)};
  SelectionConfig cfg;
  cfg.k = 2;
  EXPECT_THROW(select_nav_heads(s, cfg), ConfigError);
  cfg.k = 1;
  cfg.candidatePoolSize = 0;
  EXPECT_THROW(select_nav_heads(s, cfg), ConfigError);
}

// Alignment components stay inside their ranges for arbitrary nonnegative
// matrices, and scaling a matrix by a constant changes nothing.
TEST(AlignmentProperty, RangesAndScaleInvariance) {
  std::mt19937_64 rng(17);
  for (int t = 0; t < 300; ++t) {
    const std::size_t T = oracles::pick(rng, 2, 8), N = oracles::pick(rng, 2, 40);
    auto m = oracles::random_matrix(rng, T, N, int(t % 3));
    const int w = int(oracles::pick(rng, 0, 4));
    const auto c = alignment_components(m, w);
    for (double v : {c.sUniform, c.sPeak, c.sDiag, c.sShift}) {
      EXPECT_GE(v, -1e-12);
      EXPECT_LE(v, 1.0 + 1e-12);
    }
    for (auto& v : m.values()) v *= 4.0F;
    const auto c2 = alignment_components(m, w);
    EXPECT_NEAR(c.sDiag, c2.sDiag, 1e-6);
    EXPECT_NEAR(c.sPeak, c2.sPeak, 1e-6);
    EXPECT_NEAR(c.sShift, c2.sShift, 1e-6);
  }
}

TEST(ScoreHeads, JobsDoNotChangeScores) {
  SynthSpec spec;
  spec.episodes = 12;
  spec.layers = 2;
  spec.headsPerLayer = 3;
  spec.plantedHeads = {{1, 2}};
  std::vector<EpisodeHeadFeatures> f;
  std::vector<LabeledEpisode> l;
  for (std::size_t i = 0; i < spec.episodes; ++i) {
    const auto ep = gen_episode(spec, i);
    f.push_back(extract_features(ep.trace, {}));
    l.push_back(label_episode(ep.trace));
  }
  const auto a = score_heads(f, l, 1);
  const auto b = score_heads(f, l, 4);
  ASSERT_EQ(a.size(), 6U);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].head, b[i].head);
    EXPECT_EQ(a[i].iDiag, b[i].iDiag);
    EXPECT_EQ(a[i].cohensD, b[i].cohensD);
  }
}
