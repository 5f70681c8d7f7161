// Acceptance suite: one PASS/FAIL line per headline criterion. Every check
// compares library output against an oracle written independently here.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "sentinel/sentinel.hpp"
#include "support/oracles.hpp"

using namespace sentinel;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void report(const char* name, const std::function<Outcome()>& check) {
  const auto t0 = Clock::now();
  Outcome o;
  try {
    o = check();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
  std::printf("%s %s (%.1fs) %s\n", o.pass ? "PASS" : "FAIL", name, secs, o.detail.c_str());
  std::fflush(stdout);
  if (!o.pass) ++failures;
}

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

// ---------------------------------------------------------------------------
// Planted-signal pipeline, shared by the end-to-end and determinism checks.

struct Pipeline {
  std::vector<HeadId> planted;
  std::vector<HeadId> top3;
  std::vector<HeadId> ranked;
  std::vector<SweepEpisode> train;
  std::vector<SweepEpisode> val;
  double seconds = 0.0;
};

SynthSpec planted_spec() {
  SynthSpec s;
  s.seed = 20240611;
  s.episodes = 400;
  s.tokens = 32;
  s.frames = 8;
  s.steps = 32;
  s.layers = 8;
  s.headsPerLayer = 8;
  s.plantedHeads = {{2, 5}, {5, 1}, {6, 7}};
  s.anomalyFraction = 0.5;
  s.noise = 0.1;
  return s;
}

Pipeline& pipeline() {
  static Pipeline p = [] {
    const auto t0 = Clock::now();
    Pipeline out;
    const SynthSpec spec = planted_spec();
    out.planted = spec.plantedHeads;
    const auto plan = dataset_plan(spec);
    SelectionConfig sel;

    // Traces for 64 heads are large; reduce each to features and drop it.
    std::vector<EpisodeHeadFeatures> features(plan.size());
    std::vector<LabeledEpisode> labels(plan.size());
    parallel_for(plan.size(), default_jobs(), [&](std::size_t i) {
      const auto ep = gen_episode(spec, i);
      labels[i] = label_episode(ep.trace);
      features[i] = extract_features(ep.trace, sel);
    });

    std::vector<EpisodeHeadFeatures> trF;
    std::vector<LabeledEpisode> trL;
    for (std::size_t i = 0; i < plan.size(); ++i) {
      if (plan[i].split == Split::Train) {
        trF.push_back(features[i]);
        trL.push_back(labels[i]);
      }
    }
    const auto scores = score_heads(trF, trL, default_jobs());
    out.top3 = select_nav_heads(scores, sel);
    SelectionConfig wide = sel;
    wide.k = 10;
    out.ranked = select_nav_heads(scores, wide);

    for (std::size_t i = 0; i < plan.size(); ++i) {
      auto e = make_sweep_episode(features[i], labels[i], out.ranked, 10);
      (plan[i].split == Split::Train ? out.train : out.val).push_back(std::move(e));
    }
    out.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
    return out;
  }();
  return p;
}

Outcome check_end_to_end() {
  const auto t0 = Clock::now();
  auto& p = pipeline();
  const std::set<HeadId> planted(p.planted.begin(), p.planted.end());
  const std::set<HeadId> chosen(p.top3.begin(), p.top3.end());
  const bool headsOk = planted == chosen;

  const auto sweep = grid_sweep(p.train, SweepSpec::full_grid(), default_jobs());
  const auto& b = sweep.best;
  const auto val = evaluate_config(p.val, b.k, b.patience, b.window, b.tau);
  const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
  const bool metricsOk = val.metrics.edr >= 0.40 && val.metrics.fer <= 0.10;

  std::string detail = "top3=" + format_heads(p.top3) + " planted=" + format_heads(p.planted);
  detail += " best(K,P,W,tau)=" + std::to_string(b.k) + "," + std::to_string(b.patience) + "," +
            std::to_string(b.window) + "," + fmt("%.2f", b.tau);
  detail += fmt(" trainEDR=%.3f trainFER=%.3f valEDR=%.3f valFER=%.3f", b.metrics.edr, b.metrics.fer,
                val.metrics.edr, val.metrics.fer);
  detail += fmt(" runtime=%.1fs", secs);
  return {headsOk && metricsOk && secs < 300.0, detail};
}

Outcome check_sweep_determinism() {
  auto& p = pipeline();
  const auto spec = SweepSpec::full_grid();
  std::ostringstream a;
  std::ostringstream b;
  const auto first = grid_sweep(p.train, spec, 1);
  write_sweep_csv(a, first.table);
  const auto second = grid_sweep(p.train, spec, 4);
  write_sweep_csv(b, second.table);
  const bool same = a.str() == b.str() && first.table.size() == 9000;
  return {same, "rows=" + std::to_string(first.table.size()) + " bytes=" + std::to_string(a.str().size()) +
                    (same ? " identical (jobs 1 vs 4)" : " DIFFER")};
}

// ---------------------------------------------------------------------------

Outcome check_detector_equivalence() {
  std::mt19937_64 rng(99);
  std::size_t mismatches = 0;
  std::size_t steps = 0;
  for (int ep = 0; ep < 1000; ++ep) {
    const auto c = oracles::random_detector_case(rng);
    DeviationDetector det(c.config);
    std::vector<DetectorStep> stream;
    for (const auto& rec : c.trace.records) stream.push_back(det.observe(rec, c.trace.frameCount));
    const auto batch = oracles::batch_detector(c.trace, c.config);
    for (std::size_t t = 0; t < stream.size(); ++t, ++steps) {
      const bool sameR = stream[t].ratio.has_value() == batch[t].ratio.has_value() &&
                         (!stream[t].ratio || *stream[t].ratio == *batch[t].ratio);
      if (!sameR || stream[t].decision != batch[t].decision) ++mismatches;
    }
  }
  return {mismatches == 0, "episodes=1000 steps=" + std::to_string(steps) +
                               " mismatches=" + std::to_string(mismatches)};
}

Outcome check_labeler_oracle() {
  std::mt19937_64 rng(7);
  std::size_t mismatches = 0;
  std::size_t invariantFailures = 0;
  std::size_t cats[3] = {0, 0, 0};
  std::size_t truncated = 0;
  for (int i = 0; i < 1000; ++i) {
    const auto trace = oracles::random_walk(rng);
    LabelerConfig cfg;
    cfg.patience = 1 + static_cast<int>(rng() % 4);
    cfg.rotationsBreakRun = (rng() & 1U) != 0;
    const auto got = label_episode(trace, cfg);
    const auto want = oracles::brute_force_labels(trace, cfg);
    if (got.labels != want.labels || got.truncatedAt != want.truncatedAt) ++mismatches;
    if (!oracles::one_way(got.labels) || !oracles::targets_monotone(trace)) ++invariantFailures;
    ++cats[static_cast<int>(got.category)];
    truncated += got.truncatedAt.has_value();
  }
  const bool diverse = cats[0] > 0 && cats[1] > 0 && cats[2] > 0 && truncated > 0;
  return {mismatches == 0 && invariantFailures == 0 && diverse,
          "walks=1000 mismatches=" + std::to_string(mismatches) + " invariantFailures=" +
              std::to_string(invariantFailures) + " OnlyN/OnlyA/NtoA=" + std::to_string(cats[0]) + "/" +
              std::to_string(cats[1]) + "/" + std::to_string(cats[2]) + " truncated=" + std::to_string(truncated)};
}

Outcome check_scoring() {
  double worst = 0.0;
  // Shapes where every ideal position k(N-1)/(T-1) is a whole token, so the
  // point mass sits exactly on the diagonal.
  const std::pair<std::size_t, std::size_t> shapes[] = {{2, 2},  {2, 8},  {8, 8},   {8, 29},
                                                        {4, 256}, {6, 256}, {16, 256}, {18, 256}};
  for (const auto& [t, n] : shapes) {
    const auto m = oracles::perfect_diagonal(t, n);
    const auto c = alignment_components(m, resolve_window({}, n));
    for (double v : {c.sUniform, c.sPeak, c.sDiag, c.sShift}) worst = std::max(worst, std::abs(v - 1.0));
  }

  DetectorConfig cfg;
  cfg.window = 3;
  auto state = make_detector_state(cfg);
  std::optional<double> r;
  for (int t = 0; t <= 3; ++t) r = detector_update(state, cfg, std::pow(0.5, t)).ratio;
  const double rErr = std::abs(*r - 3.0 / 14.0);

  const std::vector<double> a{0, 1, 2};
  const std::vector<double> b{3, 4, 5};
  const double dErr = std::abs(cohens_d(a, b) - 3.0);
  return {worst <= 1e-9 && rErr <= 1e-6 && dErr <= 1e-12,
          fmt("diagonalMaxErr=%.2e R=%.6f (err %.2e) cohensD err=%.2e", worst, *r, rErr, dErr)};
}

Outcome check_latency() {
  const std::size_t K = 3, T = 8, N = 256, steps = 10000;
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<float> u(0.0F, 1.0F);
  std::vector<AttentionRecord> pool(16);
  DetectorConfig cfg;
  for (std::size_t k = 0; k < K; ++k) cfg.heads.push_back({static_cast<int>(10 + k), static_cast<int>(k)});
  for (auto& rec : pool) {
    for (const auto& h : cfg.heads) {
      AttentionMatrix m(T, N);
      for (auto& v : m.values()) v = u(rng);
      rec.heads.emplace(h, std::move(m));
    }
  }
  DeviationDetector det(cfg);
  std::vector<double> micros;
  micros.reserve(steps);
  for (std::size_t i = 0; i < steps; ++i) {
    auto& rec = pool[i % pool.size()];
    rec.step = static_cast<std::int64_t>(i);
    const auto t0 = Clock::now();
    det.observe(rec, T);
    micros.push_back(std::chrono::duration<double, std::micro>(Clock::now() - t0).count());
  }
  std::nth_element(micros.begin(), micros.begin() + steps / 2, micros.end());
  const double median = micros[steps / 2];
  return {median < 1000.0, fmt("median=%.1fus over 10000 steps (K=3 T=8 N=256)", median)};
}

Outcome check_smoother() {
  using namespace sentinel::sim;
  const SmootherConfig cfg;
  const double want[5] = {0.4, 0.3, 0.2, 0.1, 0.0};
  Twist cur{0.5, 0.0};
  double decelErr = 0.0;
  for (double w : want) {
    cur = smooth_action(cur, {0.0, 0.0}, cfg, 0.1);
    decelErr = std::max(decelErr, std::abs(cur.v - w));
  }

  Twist ang{0.0, -0.5};
  int stepsToReverse = 0;
  while (ang.omega != 0.5 && stepsToReverse < 10) {
    ang = smooth_action(ang, {0.0, 0.5}, cfg, 0.1);
    ++stepsToReverse;
  }

  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> pv(-cfg.vMax, cfg.vMax), pw(-cfg.wMax, cfg.wMax), tgt(-2.0, 2.0);
  std::size_t violations = 0;
  for (int i = 0; i < 100000; ++i) {
    const Twist prev{pv(rng), pw(rng)};
    const Twist out = smooth_action(prev, {tgt(rng), tgt(rng)}, cfg, 0.1);
    if (std::abs(out.v - prev.v) > cfg.aMax * 0.1 + 1e-9 || std::abs(out.omega - prev.omega) > cfg.aMaxW * 0.1 + 1e-9 ||
        std::abs(out.v) > cfg.vMax || std::abs(out.omega) > cfg.wMax) {
      ++violations;
    }
  }
  return {decelErr <= 1e-12 && stepsToReverse == 2 && violations == 0,
          fmt("decelMaxErr=%.1e reversalSteps=%.0f boundViolations=%.0f/100000", decelErr, stepsToReverse,
              double(violations))};
}

Outcome check_costmap() {
  using namespace sentinel::sim;
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  double warpErr = 0.0;
  std::size_t interior = 0;
  for (int i = 0; i < 100; ++i) {
    CostmapGrid g;
    for (auto& v : g.cells()) v = u01(rng) < 0.2 ? u01(rng) : 0.0;
    const EgoMotion m{(u01(rng) - 0.5), (u01(rng) - 0.5), (u01(rng) * 2.0 - 1.0) * std::numbers::pi};
    const auto warped = costmap_warp(g, m);
    const auto [err, count] = oracles::warp_error(g, warped, m);
    warpErr = std::max(warpErr, err);
    interior += count;
  }

  bool decayExact = true;
  CostmapGrid d;
  d.at(10, 10) = 1.0;
  double expect = 1.0;
  for (int n = 1; n <= 50; ++n) {
    d = costmap_decay(d);
    expect *= 0.9;
    decayExact = decayExact && d.at(10, 10) == expect && std::abs(expect - std::pow(0.9, n)) < 1e-12;
  }

  std::size_t inflateMismatch = 0;
  for (int i = 0; i < 100; ++i) {
    CostmapGrid g;
    for (auto& v : g.cells()) v = u01(rng) < 0.05 ? u01(rng) : 0.0;
    const auto got = costmap_inflate(g);
    const auto want = oracles::window_max(g);
    for (int r = 0; r < CostmapGrid::kSize; ++r) {
      for (int c = 0; c < CostmapGrid::kSize; ++c) inflateMismatch += got.at(r, c) != want.at(r, c);
    }
  }
  return {warpErr <= 1e-5 && interior > 0 && decayExact && inflateMismatch == 0,
          fmt("warpMaxErr=%.2e over %.0f interior cells, decay 0.9^n exact=%.0f, inflate mismatches=%.0f", warpErr,
              double(interior), decayExact ? 1.0 : 0.0, double(inflateMismatch))};
}

Outcome check_rollback() {
  using namespace sentinel::sim;
  const auto t0 = Clock::now();
  const int worlds = 100;
  std::vector<RecoveryOutcome> outcomes(worlds);
  std::vector<Scenario> scenarios(worlds);
  parallel_for(worlds, default_jobs(), [&](std::size_t i) {
    scenarios[i] = random_scenario(1000 + i);
    const auto& s = scenarios[i];
    outcomes[i] = run_rollback(s.goalX, s.goalY, 0.0, s.start, s.world, 60.0);
  });
  const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
  int counts[4] = {0, 0, 0, 0};
  int collidingSuccesses = 0;
  bool clearanceOk = true;
  for (int i = 0; i < worlds; ++i) {
    ++counts[static_cast<int>(outcomes[i].status)];
    clearanceOk = clearanceOk && oracles::min_obstacle_gap(scenarios[i].world) >= 2.0 - 1e-9 &&
                  std::hypot(scenarios[i].goalX - scenarios[i].start.x, scenarios[i].goalY - scenarios[i].start.y) <= 5.0;
    if (outcomes[i].status == RecoveryStatus::Success &&
        oracles::trajectory_collides(scenarios[i].world, outcomes[i])) {
      ++collidingSuccesses;
    }
  }
  const double rate = counts[0] / double(worlds);
  return {rate >= 0.80 && collidingSuccesses == 0 && clearanceOk && secs < 120.0,
          fmt("success=%.2f collision/stall/timeout=%.0f/%.0f/", rate, counts[1], counts[2]) +
              std::to_string(counts[3]) + " collidingSuccesses=" + std::to_string(collidingSuccesses) +
              fmt(" runtime=%.1fs", secs)};
}

}  // namespace

int main() {
  report("end-to-end planted-signal run", check_end_to_end);
  report("streaming/batch detector equivalence", check_detector_equivalence);
  report("labeler oracle equivalence", check_labeler_oracle);
  report("scoring exactness", check_scoring);
  report("detector latency", check_latency);
  report("smoother", check_smoother);
  report("costmap", check_costmap);
  report("rollback", check_rollback);
  report("grid sweep determinism", check_sweep_determinism);
  std::printf("%d failed\n", failures);
  return failures == 0 ? 0 : 1;
}
