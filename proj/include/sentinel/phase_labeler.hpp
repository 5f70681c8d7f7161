#pragma once

// Ground-truth Normal/Anomaly labeling of an episode against its reference
// path.
//
// A record holds the pose observed at step t and the action issued at step t,
// so the progress made by action t shows up in the distance delta of step t+1.
// A step is "deviating" when its action is translational and the following
// delta is positive; the last step has no successor and is never assessed.

#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sentinel/errors.hpp"
#include "sentinel/trace.hpp"

namespace sentinel {

enum class PhaseLabel : std::uint8_t { Normal, Anomaly };
enum class EpisodeCategory : std::uint8_t { OnlyN, OnlyA, NtoA };

inline const char* to_string(PhaseLabel l) { return l == PhaseLabel::Normal ? "N" : "A"; }

inline const char* to_string(EpisodeCategory c) {
  switch (c) {
    case EpisodeCategory::OnlyN: return "OnlyN";
    case EpisodeCategory::OnlyA: return "OnlyA";
    case EpisodeCategory::NtoA: return "NtoA";
  }
  return "?";
}

inline EpisodeCategory parse_category(const std::string& s) {
  if (s == "OnlyN") return EpisodeCategory::OnlyN;
  if (s == "OnlyA") return EpisodeCategory::OnlyA;
  if (s == "NtoA") return EpisodeCategory::NtoA;
  throw FormatError("unknown episode category '" + s + "'");
}

struct LabelerConfig {
  int patience = 3;
  // When set, a rotation or stop inside a deviating (or on-track) run breaks
  // the run instead of being skipped.
  bool rotationsBreakRun = false;
};

struct TargetState {
  std::size_t targetIndex = 0;
  double lastDistance = 0.0;
};

struct LabeledEpisode {
  std::string episodeId;
  std::vector<PhaseLabel> labels;
  EpisodeCategory category = EpisodeCategory::OnlyN;
  std::vector<double> deltaDistances;  // per pose, delta_d[0] == 0
  std::optional<std::size_t> truncatedAt;

  // First Anomaly step, if any.
  std::optional<std::size_t> onset() const {
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] == PhaseLabel::Anomaly) return i;
    }
    return std::nullopt;
  }
};

inline double waypoint_distance(const Pose& p, const Waypoint& w) {
  return std::hypot(double(p.x) - w.x, double(p.y) - w.y);
}

// Moves the target to the closest waypoint at or beyond the current target.
// Lowest index wins on equal distance.
inline TargetState update_target(const TargetState& state, const Pose& pose,
                                 std::span<const Waypoint> path) {
  if (path.empty()) throw ConfigError("reference path is empty");
  const std::size_t start = std::min(state.targetIndex, path.size() - 1);
  std::size_t best = start;
  double bestDist = waypoint_distance(pose, path[start]);
  for (std::size_t j = start + 1; j < path.size(); ++j) {
    const double d = waypoint_distance(pose, path[j]);
    if (d < bestDist) {
      bestDist = d;
      best = j;
    }
  }
  return {best, bestDist};
}

inline EpisodeCategory categorize_episode(std::span<const PhaseLabel> labels) {
  if (labels.empty()) throw InvariantError("cannot categorize an empty label sequence");
  bool seenA = false;
  bool anyN = false;
  for (auto l : labels) {
    if (l == PhaseLabel::Anomaly) {
      seenA = true;
    } else {
      if (seenA) throw InvariantError("Normal label follows an Anomaly label");
      anyN = true;
    }
  }
  if (!seenA) return EpisodeCategory::OnlyN;
  return anyN ? EpisodeCategory::NtoA : EpisodeCategory::OnlyA;
}

inline LabeledEpisode label_episode(const EpisodeTrace& trace, const LabelerConfig& config = {}) {
  if (config.patience < 1) throw ConfigError("labeler patience must be >= 1");
  if (!trace.referencePath || trace.referencePath->empty()) {
    throw ConfigError("episode '" + trace.episodeId + "' has no reference path");
  }
  const auto& path = *trace.referencePath;
  const auto& recs = trace.records;
  const std::size_t n = recs.size();

  LabeledEpisode out;
  out.episodeId = trace.episodeId;
  out.deltaDistances.assign(n, 0.0);

  // Pass 1: target tracking and distance deltas.
  TargetState target;
  for (std::size_t t = 0; t < n; ++t) {
    const TargetState next = update_target(target, recs[t].pose, path);
    if (t > 0 && next.targetIndex == target.targetIndex) {
      out.deltaDistances[t] = next.lastDistance - target.lastDistance;
    }
    target = next;
  }

  // Pass 2: one-way state machine.
  const auto p = static_cast<std::size_t>(config.patience);
  out.labels.assign(n, PhaseLabel::Normal);
  bool anomaly = false;
  std::size_t run = 0;
  std::size_t runStart = 0;

  for (std::size_t t = 0; t < n; ++t) {
    if (anomaly) out.labels[t] = PhaseLabel::Anomaly;
    if (t + 1 >= n) break;  // no successor pose to assess this action

    if (!recs[t].action.translational()) {
      if (config.rotationsBreakRun) run = 0;
      continue;
    }
    const double delta = out.deltaDistances[t + 1];
    const bool deviating = delta > 0.0;

    if (!anomaly) {
      if (!deviating) {
        run = 0;
        continue;
      }
      if (run++ == 0) runStart = t;
      if (run >= p) {
        anomaly = true;
        for (std::size_t k = runStart; k <= t; ++k) out.labels[k] = PhaseLabel::Anomaly;
        run = 0;
      }
    } else {
      if (deviating) {
        run = 0;
        continue;
      }
      if (run++ == 0) runStart = t;
      if (run >= p) {
        out.truncatedAt = runStart;
        break;
      }
    }
  }

  if (out.truncatedAt) {
    out.labels.resize(*out.truncatedAt);
    out.deltaDistances.resize(*out.truncatedAt);
  }
  out.category = categorize_episode(out.labels);
  return out;
}

}  // namespace sentinel
