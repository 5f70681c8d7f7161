#pragma once

// Streaming path-deviation detector over navigation-head attention entropy.
//
// Each step contributes the mean normalized entropy E_t of the monitored heads.
// Once W readings exist, R_t = E_t / (mean of the previous W readings + eps).
// P consecutive steps with R_t > tau latch the Anomaly phase; until then every
// quiet step refreshes the safe checkpoint used for rollback.

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sentinel/errors.hpp"
#include "sentinel/phase_labeler.hpp"
#include "sentinel/trace.hpp"

namespace sentinel {

// Normalized Shannon entropy of a nonnegative row, in [0, 1].
template <class Range>
double frame_entropy(const Range& row) {
  double total = 0.0;
  std::size_t n = 0;
  for (auto v : row) {
    total += static_cast<double>(v);
    ++n;
  }
  if (!(total > 0.0)) throw DegenerateRow("entropy of an all-zero attention row");
  if (n < 2) return 0.0;
  double h = 0.0;
  for (auto v : row) {
    const double p = static_cast<double>(v) / total;
    if (p > 0.0) h -= p * std::log(p);
  }
  return h / std::log(static_cast<double>(n));
}

// Frame-averaged entropy of one head's matrix.
inline double head_entropy(const AttentionMatrix& a) {
  if (a.rows() == 0) throw InputError("attention matrix has no frames");
  double sum = 0.0;
  for (std::size_t k = 0; k < a.rows(); ++k) sum += frame_entropy(a.row(k));
  return sum / static_cast<double>(a.rows());
}

inline double step_entropy(const AttentionRecord& record, std::span<const HeadId> heads) {
  if (heads.empty()) throw ConfigError("no navigation heads configured");
  double sum = 0.0;
  for (const auto& h : heads) {
    auto it = record.heads.find(h);
    if (it == record.heads.end()) {
      throw MissingHeadError("step " + std::to_string(record.step) + " lacks head " + to_string(h));
    }
    sum += head_entropy(it->second);
  }
  return sum / static_cast<double>(heads.size());
}

// Identifiers of the T history frames seen at `step`, sampled uniformly over
// the episode so far with the current frame last.
inline std::vector<std::int64_t> visual_history_ids(std::int64_t step, std::size_t frames) {
  std::vector<std::int64_t> ids;
  ids.reserve(frames);
  if (frames == 1) return {step};
  for (std::size_t k = 0; k < frames; ++k) {
    const double pos = static_cast<double>(k) * static_cast<double>(step) / static_cast<double>(frames - 1);
    ids.push_back(static_cast<std::int64_t>(std::llround(pos)));
  }
  return ids;
}

struct DetectorConfig {
  std::vector<HeadId> heads;
  int window = 10;        // W
  double tau = 0.95;
  int patience = 9;       // P
  double epsilon = 1e-8;
  // Refresh the checkpoint only on steps with R_t <= tau (in addition to the
  // phase still being Normal).
  bool refreshRequiresSubThreshold = true;

  void validate(bool requireHeads = true) const {
    if (requireHeads && heads.empty()) throw ConfigError("detector needs K >= 1 heads");
    if (window < 1) throw ConfigError("detector window W must be >= 1");
    if (patience < 1) throw ConfigError("detector patience P must be >= 1");
    if (!(tau > 0.0)) throw ConfigError("detector threshold tau must be > 0");
    if (!(epsilon > 0.0)) throw ConfigError("detector epsilon must be > 0");
  }
};

struct SafeCheckpoint {
  std::int64_t step = 0;
  Pose pose;
  std::vector<std::int64_t> visualHistoryIds;
  std::vector<double> entropyBuffer;  // E_{t-W} .. E_{t-1}, oldest first
  std::map<HeadId, AttentionMatrix> attention;
};

// What the detector remembers about a step when it becomes the checkpoint.
struct StepMeta {
  std::int64_t step = 0;
  Pose pose;
  std::vector<std::int64_t> frameIds;
  const std::map<HeadId, AttentionMatrix>* attention = nullptr;
};

// Fixed-capacity ring of the last W entropies.
class EntropyWindow {
 public:
  explicit EntropyWindow(std::size_t capacity = 1) : slots_(capacity, 0.0) {}

  void push(double e) {
    slots_[(head_ + size_) % slots_.size()] = e;
    if (size_ < slots_.size()) {
      ++size_;
    } else {
      head_ = (head_ + 1) % slots_.size();
    }
  }
  std::size_t size() const { return size_; }
  std::size_t capacity() const { return slots_.size(); }
  bool full() const { return size_ == slots_.size(); }

  // i-th oldest entry.
  double at(std::size_t i) const { return slots_[(head_ + i) % slots_.size()]; }

  // Sum accumulated oldest to newest.
  double sum() const {
    double s = 0.0;
    for (std::size_t i = 0; i < size_; ++i) s += at(i);
    return s;
  }

  std::vector<double> ordered() const {
    std::vector<double> out;
    out.reserve(size_);
    for (std::size_t i = 0; i < size_; ++i) out.push_back(at(i));
    return out;
  }

 private:
  std::vector<double> slots_;
  std::size_t head_ = 0;
  std::size_t size_ = 0;
};

struct DetectorState {
  EntropyWindow buffer;
  int exceedCount = 0;
  PhaseLabel phase = PhaseLabel::Normal;
  std::optional<SafeCheckpoint> checkpoint;
  std::optional<std::int64_t> lastSafeStep;
  std::int64_t stepsSeen = 0;
};

inline DetectorState make_detector_state(const DetectorConfig& cfg) {
  DetectorState s;
  s.buffer = EntropyWindow(static_cast<std::size_t>(cfg.window));
  return s;
}

struct DetectorStep {
  std::int64_t step = 0;
  double entropy = 0.0;
  std::optional<double> ratio;  // R_t, absent during warm-up
  int exceedCount = 0;
  PhaseLabel decision = PhaseLabel::Normal;
};

// Advances the detector by one reading. `meta` may be null when no checkpoint
// payload is wanted (batch evaluation); the safe step index is still tracked.
inline DetectorStep detector_update(DetectorState& state, const DetectorConfig& cfg, double entropy,
                                    const StepMeta* meta = nullptr) {
  if (!std::isfinite(entropy)) throw InputError("non-finite entropy reading");

  DetectorStep out;
  out.step = meta ? meta->step : state.stepsSeen;
  out.entropy = entropy;

  bool refresh = false;
  if (state.stepsSeen < cfg.window) {
    refresh = state.phase == PhaseLabel::Normal;
  } else {
    const double mean = state.buffer.sum() / static_cast<double>(cfg.window);
    const double r = entropy / (mean + cfg.epsilon);
    out.ratio = r;
    if (r > cfg.tau) {
      if (state.exceedCount < cfg.patience) ++state.exceedCount;
    } else {
      state.exceedCount = 0;
    }
    if (state.exceedCount >= cfg.patience) state.phase = PhaseLabel::Anomaly;
    refresh = state.phase == PhaseLabel::Normal && (!cfg.refreshRequiresSubThreshold || r <= cfg.tau);
  }

  if (refresh) {
    state.lastSafeStep = out.step;
    if (meta) {
      SafeCheckpoint cp;
      cp.step = meta->step;
      cp.pose = meta->pose;
      cp.visualHistoryIds = meta->frameIds;
      cp.entropyBuffer = state.buffer.ordered();
      if (meta->attention) {
        for (const auto& h : cfg.heads) {
          if (auto it = meta->attention->find(h); it != meta->attention->end()) {
            cp.attention.insert_or_assign(h, it->second);
          }
        }
      }
      state.checkpoint = std::move(cp);
    }
  }

  state.buffer.push(entropy);
  ++state.stepsSeen;
  out.exceedCount = state.exceedCount;
  out.decision = state.phase;
  return out;
}

class DeviationDetector {
 public:
  explicit DeviationDetector(DetectorConfig cfg, bool requireHeads = true) : cfg_(std::move(cfg)) {
    cfg_.validate(requireHeads);
    state_ = make_detector_state(cfg_);
  }

  DetectorStep update(double entropy, const StepMeta* meta = nullptr) {
    return detector_update(state_, cfg_, entropy, meta);
  }

  // Computes E_t from the record's navigation heads and keeps a full
  // checkpoint payload.
  DetectorStep observe(const AttentionRecord& record, std::size_t frames) {
    const double e = step_entropy(record, cfg_.heads);
    StepMeta meta{record.step, record.pose, visual_history_ids(record.step, frames), &record.heads};
    return update(e, &meta);
  }

  const SafeCheckpoint& current_checkpoint() const {
    if (state_.stepsSeen == 0) throw EmptyStateError("no steps processed yet");
    if (!state_.checkpoint) throw EmptyStateError("no checkpoint payload recorded");
    return *state_.checkpoint;
  }

  const DetectorState& state() const { return state_; }
  const DetectorConfig& config() const { return cfg_; }
  PhaseLabel phase() const { return state_.phase; }

  void reset() { state_ = make_detector_state(cfg_); }

 private:
  DetectorConfig cfg_;
  DetectorState state_;
};

inline std::vector<DetectorStep> run_detector(const EpisodeTrace& trace, const DetectorConfig& cfg,
                                              SafeCheckpoint* finalCheckpoint = nullptr) {
  DeviationDetector det(cfg);
  std::vector<DetectorStep> out;
  out.reserve(trace.records.size());
  for (const auto& rec : trace.records) out.push_back(det.observe(rec, trace.frameCount));
  if (finalCheckpoint && det.state().checkpoint) *finalCheckpoint = *det.state().checkpoint;
  return out;
}

}  // namespace sentinel
