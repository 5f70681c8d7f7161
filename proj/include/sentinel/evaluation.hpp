#pragma once

// Episode- and step-level detection metrics, the two kinematic heuristic
// baselines, and the (K, P, W, tau) grid sweep.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "sentinel/deviation_detector.hpp"
#include "sentinel/errors.hpp"
#include "sentinel/head_features.hpp"
#include "sentinel/parallel.hpp"
#include "sentinel/phase_labeler.hpp"
#include "sentinel/trace.hpp"

namespace sentinel {

inline bool is_anomalous(EpisodeCategory c) { return c != EpisodeCategory::OnlyN; }

struct EpisodeResult {
  std::string episodeId;
  EpisodeCategory gtCategory = EpisodeCategory::OnlyN;
  bool detectorFlagged = false;
  std::optional<std::size_t> detectionStep;
  std::optional<double> latency;  // detection step minus GT onset
};

struct EpisodeMetrics {
  std::optional<double> edr;
  std::optional<double> fer;
  std::optional<double> gap;
  std::size_t anomalousEpisodes = 0;
  std::size_t normalEpisodes = 0;
};

inline double require_metric(const std::optional<double>& v, const char* name) {
  if (!v) throw UndefinedMetric(std::string(name) + " is undefined (empty class)");
  return *v;
}

inline EpisodeMetrics episode_metrics(std::span<const EpisodeResult> results) {
  EpisodeMetrics m;
  std::size_t flaggedA = 0;
  std::size_t flaggedN = 0;
  for (const auto& r : results) {
    if (r.detectorFlagged != r.detectionStep.has_value()) {
      throw InputError("episode " + r.episodeId + ": detection step present iff flagged");
    }
    if (is_anomalous(r.gtCategory)) {
      ++m.anomalousEpisodes;
      flaggedA += r.detectorFlagged;
    } else {
      ++m.normalEpisodes;
      flaggedN += r.detectorFlagged;
    }
  }
  if (m.anomalousEpisodes) m.edr = double(flaggedA) / double(m.anomalousEpisodes);
  if (m.normalEpisodes) m.fer = double(flaggedN) / double(m.normalEpisodes);
  if (m.edr && m.fer) m.gap = *m.edr - *m.fer;
  return m;
}

struct StepMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
};

// One episode's ground truth and (latched) detector flags.
struct StepSequence {
  EpisodeCategory category = EpisodeCategory::NtoA;
  std::vector<PhaseLabel> labels;
  std::vector<PhaseLabel> flags;
};

// Makes every step after the first Anomaly flag Anomaly.
inline std::vector<PhaseLabel> latch(std::vector<PhaseLabel> flags) {
  bool on = false;
  for (auto& f : flags) {
    on = on || f == PhaseLabel::Anomaly;
    if (on) f = PhaseLabel::Anomaly;
  }
  return flags;
}

// Binary step classification with Anomaly as the positive class. By default
// only NtoA episodes count. Precision with no positive predictions is 0.
inline StepMetrics step_metrics(std::span<const StepSequence> episodes, bool ntoaOnly = true) {
  StepMetrics m;
  for (const auto& e : episodes) {
    if (e.labels.size() != e.flags.size()) {
      throw InputError("label/flag length mismatch: " + std::to_string(e.labels.size()) + " vs " +
                       std::to_string(e.flags.size()));
    }
    if (ntoaOnly && e.category != EpisodeCategory::NtoA) continue;
    for (std::size_t t = 0; t < e.labels.size(); ++t) {
      const bool truth = e.labels[t] == PhaseLabel::Anomaly;
      const bool pred = e.flags[t] == PhaseLabel::Anomaly;
      if (truth && pred) ++m.tp;
      else if (!truth && pred) ++m.fp;
      else if (truth && !pred) ++m.fn;
      else ++m.tn;
    }
  }
  if (m.tp + m.fp) m.precision = double(m.tp) / double(m.tp + m.fp);
  if (m.tp + m.fn) m.recall = double(m.tp) / double(m.tp + m.fn);
  if (m.precision + m.recall > 0.0) m.f1 = 2.0 * m.precision * m.recall / (m.precision + m.recall);
  return m;
}

// Position-stagnation heuristic: flags from the first step t >= patience at
// which every pose in [t - patience, t] stays within `threshold` (XY) of the
// window's first pose, latched thereafter.
inline std::vector<PhaseLabel> baseline_stagnation(std::span<const Pose> poses, double threshold = 0.1,
                                                   int patience = 3) {
  std::vector<PhaseLabel> flags(poses.size(), PhaseLabel::Normal);
  if (patience < 1) throw ConfigError("stagnation patience must be >= 1");
  const auto p = static_cast<std::size_t>(patience);
  for (std::size_t t = p; t < poses.size(); ++t) {
    bool stuck = true;
    for (std::size_t k = t - p + 1; k <= t && stuck; ++k) {
      stuck = planar_distance(poses[k], poses[t - p]) < threshold;
    }
    if (stuck) {
      std::fill(flags.begin() + static_cast<std::ptrdiff_t>(t), flags.end(), PhaseLabel::Anomaly);
      break;
    }
  }
  return flags;
}

// Action-failure heuristic: a Forward action whose successor pose moved less
// than `moveEpsilon` (XY). Flags are per step and not latched.
inline std::vector<PhaseLabel> baseline_action_failure(std::span<const Action> actions,
                                                       std::span<const Pose> poses,
                                                       double moveEpsilon = 0.05) {
  if (actions.size() != poses.size()) throw InputError("action/pose sequences differ in length");
  std::vector<PhaseLabel> flags(poses.size(), PhaseLabel::Normal);
  for (std::size_t t = 0; t + 1 < poses.size(); ++t) {
    if (actions[t].translational() && planar_distance(poses[t], poses[t + 1]) < moveEpsilon) {
      flags[t] = PhaseLabel::Anomaly;
    }
  }
  return flags;
}

struct MetricsReport {
  double edr = 0.0;
  double fer = 0.0;
  double gap = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::optional<double> meanLatency;
};

// Builds EpisodeResults from latched flag sequences and summarizes them.
inline MetricsReport summarize(std::span<const StepSequence> episodes,
                               std::vector<EpisodeResult>* resultsOut = nullptr) {
  std::vector<EpisodeResult> results;
  results.reserve(episodes.size());
  double latencySum = 0.0;
  std::size_t latencyCount = 0;
  for (std::size_t i = 0; i < episodes.size(); ++i) {
    const auto& e = episodes[i];
    EpisodeResult r;
    r.episodeId = std::to_string(i);
    r.gtCategory = e.category;
    for (std::size_t t = 0; t < e.flags.size(); ++t) {
      if (e.flags[t] == PhaseLabel::Anomaly) {
        r.detectorFlagged = true;
        r.detectionStep = t;
        break;
      }
    }
    if (r.detectorFlagged && is_anomalous(e.category)) {
      auto onset = std::find(e.labels.begin(), e.labels.end(), PhaseLabel::Anomaly);
      if (onset != e.labels.end()) {
        r.latency = double(*r.detectionStep) - double(onset - e.labels.begin());
        latencySum += *r.latency;
        ++latencyCount;
      }
    }
    results.push_back(std::move(r));
  }
  const auto em = episode_metrics(results);
  const auto sm = step_metrics(episodes);
  MetricsReport m;
  m.edr = require_metric(em.edr, "EDR");
  m.fer = require_metric(em.fer, "FER");
  m.gap = *em.gap;
  m.precision = sm.precision;
  m.recall = sm.recall;
  m.f1 = sm.f1;
  if (latencyCount) m.meanLatency = latencySum / double(latencyCount);
  if (resultsOut) *resultsOut = std::move(results);
  return m;
}

// ---------------------------------------------------------------------------
// Grid sweep

struct SweepSpec {
  std::vector<int> k;
  std::vector<int> patience;
  std::vector<int> window;
  std::vector<double> tau;
  double ferCap = 0.1;
  double epsilon = 1e-8;

  std::size_t combinations() const { return k.size() * patience.size() * window.size() * tau.size(); }

  void validate() const {
    if (k.empty() || patience.empty() || window.empty() || tau.empty()) {
      throw ConfigError("sweep ranges must be nonempty");
    }
    if (!(ferCap > 0.0 && ferCap < 1.0)) throw ConfigError("ferCap must lie in (0, 1)");
    for (int v : k) if (v < 1) throw ConfigError("sweep K values must be >= 1");
    for (int v : patience) if (v < 1) throw ConfigError("sweep P values must be >= 1");
    for (int v : window) if (v < 1) throw ConfigError("sweep W values must be >= 1");
    for (double v : tau) if (!(v > 0.0)) throw ConfigError("sweep tau values must be > 0");
  }

  static std::vector<int> range(int lo, int hi) {
    std::vector<int> out;
    for (int v = lo; v <= hi; ++v) out.push_back(v);
    return out;
  }

  // K, P, W in 1..10 and nine thresholds around 1.0: 9,000 combinations.
  static SweepSpec full_grid() {
    SweepSpec s;
    s.k = range(1, 10);
    s.patience = range(1, 10);
    s.window = range(1, 10);
    s.tau = {0.80, 0.85, 0.90, 0.95, 1.00, 1.05, 1.10, 1.15, 1.20};
    return s;
  }
};

// Detector input for one labeled episode: E_t for every ensemble size
// K = 1..maxK, where the ensemble is the top-K of a ranked head list.
struct SweepEpisode {
  std::string episodeId;
  EpisodeCategory category = EpisodeCategory::OnlyN;
  std::vector<PhaseLabel> labels;
  std::vector<std::vector<double>> entropyByK;  // [K-1][step]
};

inline SweepEpisode make_sweep_episode(const EpisodeHeadFeatures& f, const LabeledEpisode& labeled,
                                       std::span<const HeadId> rankedHeads, std::size_t maxK) {
  if (maxK > rankedHeads.size()) {
    throw ConfigError("sweep needs " + std::to_string(maxK) + " ranked heads, got " +
                      std::to_string(rankedHeads.size()));
  }
  SweepEpisode e;
  e.episodeId = f.episodeId;
  e.category = labeled.category;
  e.labels = labeled.labels;
  const std::size_t steps = std::min(labeled.labels.size(), f.steps());
  e.labels.resize(steps);
  std::vector<std::size_t> idx;
  for (std::size_t k = 0; k < maxK; ++k) idx.push_back(f.index_of(rankedHeads[k]));
  e.entropyByK.assign(maxK, std::vector<double>(steps, 0.0));
  for (std::size_t k = 1; k <= maxK; ++k) {
    for (std::size_t t = 0; t < steps; ++t) {
      double s = 0.0;
      for (std::size_t h = 0; h < k; ++h) s += f.entropy[idx[h]][t];
      e.entropyByK[k - 1][t] = s / double(k);
    }
  }
  return e;
}

struct SweepRow {
  int k = 0;
  int patience = 0;
  int window = 0;
  double tau = 0.0;
  MetricsReport metrics;
  bool feasible = false;

  auto key() const { return std::tuple(k, patience, window, tau); }
};

inline DetectorConfig detector_config(const SweepRow& row, double epsilon = 1e-8) {
  DetectorConfig c;
  c.window = row.window;
  c.patience = row.patience;
  c.tau = row.tau;
  c.epsilon = epsilon;
  return c;
}

// Runs the streaming detector for one configuration over every episode.
inline SweepRow evaluate_config(std::span<const SweepEpisode> episodes, int k, int patience, int window,
                                double tau, double epsilon = 1e-8) {
  SweepRow row{k, patience, window, tau, {}, false};
  DetectorConfig cfg = detector_config(row, epsilon);
  cfg.validate(false);

  std::vector<StepSequence> seqs;
  seqs.reserve(episodes.size());
  for (const auto& e : episodes) {
    if (static_cast<std::size_t>(k) > e.entropyByK.size()) {
      throw ConfigError("episode " + e.episodeId + " lacks entropies for K = " + std::to_string(k));
    }
    const auto& series = e.entropyByK[static_cast<std::size_t>(k - 1)];
    StepSequence s;
    s.category = e.category;
    s.labels = e.labels;
    s.flags.reserve(series.size());
    auto state = make_detector_state(cfg);
    for (double v : series) s.flags.push_back(detector_update(state, cfg, v).decision);
    seqs.push_back(std::move(s));
  }
  row.metrics = summarize(seqs);
  return row;
}

class NoFeasibleConfig : public Error {
 public:
  NoFeasibleConfig(std::string msg, std::vector<SweepRow> table)
      : Error(std::move(msg)), table_(std::move(table)) {}
  const std::vector<SweepRow>& table() const { return table_; }

 private:
  std::vector<SweepRow> table_;
};

struct SweepResult {
  SweepRow best;
  std::vector<SweepRow> table;  // sorted by (K, P, W, tau)
};

// True when `a` beats `b`: higher EDR, then lower FER, then lower mean
// latency (undefined counts as worst), then the smaller configuration key.
inline bool better_row(const SweepRow& a, const SweepRow& b) {
  if (a.metrics.edr != b.metrics.edr) return a.metrics.edr > b.metrics.edr;
  if (a.metrics.fer != b.metrics.fer) return a.metrics.fer < b.metrics.fer;
  const double la = a.metrics.meanLatency.value_or(std::numeric_limits<double>::infinity());
  const double lb = b.metrics.meanLatency.value_or(std::numeric_limits<double>::infinity());
  if (la != lb) return la < lb;
  return a.key() < b.key();
}

inline SweepResult grid_sweep(std::span<const SweepEpisode> episodes, const SweepSpec& spec,
                              unsigned jobs = 1) {
  spec.validate();
  bool anyA = false;
  bool anyN = false;
  for (const auto& e : episodes) (is_anomalous(e.category) ? anyA : anyN) = true;
  if (!anyA || !anyN) throw ConfigError("sweep dataset needs both anomalous and Normal-only episodes");

  auto ks = spec.k, ps = spec.patience, ws = spec.window;
  auto taus = spec.tau;
  std::sort(ks.begin(), ks.end());
  std::sort(ps.begin(), ps.end());
  std::sort(ws.begin(), ws.end());
  std::sort(taus.begin(), taus.end());

  struct Combo { int k, p, w; double tau; };
  std::vector<Combo> combos;
  combos.reserve(spec.combinations());
  for (int k : ks) for (int p : ps) for (int w : ws) for (double t : taus) combos.push_back({k, p, w, t});

  SweepResult result;
  result.table.resize(combos.size());
  parallel_for(combos.size(), jobs, [&](std::size_t i) {
    const auto& c = combos[i];
    auto row = evaluate_config(episodes, c.k, c.p, c.w, c.tau, spec.epsilon);
    row.feasible = row.metrics.fer <= spec.ferCap;
    result.table[i] = std::move(row);
  });

  const SweepRow* best = nullptr;
  for (const auto& row : result.table) {
    if (row.feasible && (!best || better_row(row, *best))) best = &row;
  }
  if (!best) {
    throw NoFeasibleConfig("no configuration keeps FER <= " + std::to_string(spec.ferCap),
                           std::move(result.table));
  }
  result.best = *best;
  return result;
}

inline void write_sweep_csv(std::ostream& out, std::span<const SweepRow> table) {
  out << "K,P,W,tau,EDR,FER,Gap,precision,recall,F1,meanLatency\n";
  char buf[256];
  for (const auto& r : table) {
    const auto& m = r.metrics;
    std::snprintf(buf, sizeof buf, "%d,%d,%d,%.4f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,", r.k, r.patience,
                  r.window, r.tau, m.edr, m.fer, m.gap, m.precision, m.recall, m.f1);
    out << buf;
    if (m.meanLatency) {
      std::snprintf(buf, sizeof buf, "%.6f", *m.meanLatency);
      out << buf;
    }
    out << '\n';
  }
}

}  // namespace sentinel
