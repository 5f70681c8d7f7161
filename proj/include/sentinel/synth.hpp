#pragma once

// Deterministic synthetic episode traces with planted navigation heads.
//
// Planted heads attend along the frame/token diagonal while the agent follows
// its reference path, and collapse to near-uniform attention from the anomaly
// onset on, when the agent walks off the path. All other heads attend to
// random tokens throughout. Every random draw is a pure function of
// (seed, episode, step, head, token, stream), so any element can be
// regenerated in isolation and parallel generation equals serial generation.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <numbers>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "sentinel/errors.hpp"
#include "sentinel/parallel.hpp"
#include "sentinel/phase_labeler.hpp"
#include "sentinel/trace.hpp"

namespace sentinel {

struct SynthSpec {
  std::uint64_t seed = 1;
  std::size_t episodes = 200;
  std::size_t tokens = 32;        // N
  std::size_t frames = 8;         // T
  std::size_t steps = 32;         // records per episode
  int layers = 8;
  int headsPerLayer = 8;
  std::vector<HeadId> storedHeads;   // empty: every head of the model
  std::vector<HeadId> plantedHeads;
  double anomalyFraction = 0.5;
  std::size_t onsetMin = 4;
  std::size_t onsetMax = 20;
  double noise = 0.1;             // rho
  double stepLength = 0.25;       // meters per Forward action

  std::vector<HeadId> resolved_heads() const {
    if (!storedHeads.empty()) return storedHeads;
    std::vector<HeadId> all;
    for (int l = 0; l < layers; ++l) {
      for (int h = 0; h < headsPerLayer; ++h) all.push_back({l, h});
    }
    return all;
  }

  std::size_t anomalous_count() const {
    return static_cast<std::size_t>(std::llround(static_cast<double>(episodes) * anomalyFraction));
  }

  void validate() const {
    if (episodes < 1) throw ConfigError("synth needs at least one episode");
    if (tokens < 2 || frames < 2) throw ConfigError("synth needs N >= 2 and T >= 2");
    if (steps < 1) throw ConfigError("synth needs at least one step per episode");
    if (layers < 1 || headsPerLayer < 1) throw ConfigError("synth model dimensions must be positive");
    if (!(anomalyFraction >= 0.0 && anomalyFraction <= 1.0)) throw ConfigError("anomalyFraction outside [0, 1]");
    if (!(noise >= 0.0 && noise <= 1.0)) throw ConfigError("noise level outside [0, 1]");
    if (!(stepLength > 0.0)) throw ConfigError("stepLength must be positive");
    if (onsetMin > onsetMax || onsetMax >= steps) throw ConfigError("onset range must lie within the episode");
    const auto heads = resolved_heads();
    std::set<HeadId> stored(heads.begin(), heads.end());
    if (stored.size() != heads.size()) throw ConfigError("duplicate stored heads");
    for (const auto& h : heads) {
      if (h.layer < 0 || h.layer >= layers || h.head < 0 || h.head >= headsPerLayer) {
        throw ConfigError("stored head " + to_string(h) + " outside model dimensions");
      }
    }
    for (const auto& h : plantedHeads) {
      if (!stored.contains(h)) throw ConfigError("planted head " + to_string(h) + " is not stored");
    }
  }
};

enum class Split : std::uint8_t { Train, Val };

inline const char* to_string(Split s) { return s == Split::Train ? "train" : "val"; }

struct SynthEpisode {
  EpisodeTrace trace;
  std::optional<std::size_t> gtOnset;
  EpisodeCategory gtCategory = EpisodeCategory::OnlyN;
};

struct PlanEntry {
  std::size_t index = 0;
  std::string episodeId;
  bool anomalous = false;
  Split split = Split::Train;
};

namespace synth_detail {

enum Stream : std::uint64_t {
  kOnset = 1,
  kHeading = 2,
  kSide = 3,
  kBlur = 4,
  kCollapse = 5,
  kBackground = 6,
  kBackgroundEnergy = 7,
  kSplit = 8,
};

inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Uniform in [0, 1) keyed by a tuple of counters.
inline double draw(std::uint64_t seed, std::uint64_t stream, std::uint64_t episode, std::uint64_t step = 0,
                   std::uint64_t head = 0, std::uint64_t token = 0) {
  std::uint64_t h = mix64(seed);
  for (std::uint64_t k : {stream, episode, step, head, token}) h = mix64(h ^ k);
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

inline std::uint64_t head_key(const HeadId& h) {
  return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(h.layer)) << 32) |
         static_cast<std::uint32_t>(h.head);
}

inline float pose_angle(double a) {
  auto f = static_cast<float>(normalize_angle(a));
  if (!(double(f) > -std::numbers::pi)) f = static_cast<float>(std::numbers::pi);
  return f;
}

}  // namespace synth_detail

inline std::string synth_episode_id(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "ep%05zu", index);
  return buf;
}

// Spreads the anomalous episodes evenly over the index range; exactly
// anomalous_count() of them are anomalous.
inline bool synth_is_anomalous(const SynthSpec& spec, std::size_t index) {
  const std::size_t a = spec.anomalous_count();
  return ((index + 1) * a) / spec.episodes - (index * a) / spec.episodes == 1;
}

// Class membership and a seeded, class-stratified 50/50 split (the larger
// half of an odd class goes to train). Both classes must be present.
inline std::vector<PlanEntry> dataset_plan(const SynthSpec& spec) {
  spec.validate();
  std::vector<PlanEntry> plan(spec.episodes);
  std::vector<std::size_t> byClass[2];
  for (std::size_t i = 0; i < spec.episodes; ++i) {
    plan[i] = {i, synth_episode_id(i), synth_is_anomalous(spec, i), Split::Val};
    byClass[plan[i].anomalous].push_back(i);
  }
  if (byClass[0].empty() || byClass[1].empty()) {
    throw ConfigError("anomalyFraction leaves one class empty; both normal and anomalous episodes are needed");
  }
  for (std::uint64_t cls = 0; cls < 2; ++cls) {
    auto& members = byClass[cls];
    // Fisher-Yates driven by the counter generator.
    for (std::size_t i = members.size(); i > 1; --i) {
      const double u = synth_detail::draw(spec.seed, synth_detail::kSplit, cls, i);
      const auto j = static_cast<std::size_t>(u * static_cast<double>(i));
      std::swap(members[i - 1], members[j]);
    }
    const std::size_t trainCount = (members.size() + 1) / 2;
    for (std::size_t i = 0; i < trainCount; ++i) plan[members[i]].split = Split::Train;
  }
  return plan;
}

namespace synth_detail {

// Diagonal row for frame k: mass (1 - rho) split between the two tokens
// around the ideal position so the center of mass sits exactly on it, plus
// mass rho spread with random weights over the +-r window around it.
inline void diagonal_row(std::span<float> row, const SynthSpec& spec, std::size_t k, int window,
                         std::uint64_t episode, std::uint64_t step, std::uint64_t head) {
  const std::size_t N = row.size();
  const double ideal = static_cast<double>(k) * static_cast<double>(N - 1) / static_cast<double>(spec.frames - 1);
  const auto lo = static_cast<std::size_t>(std::floor(ideal));
  const double frac = ideal - static_cast<double>(lo);
  std::vector<double> v(N, 0.0);
  v[lo] += (1.0 - spec.noise) * (1.0 - frac);
  if (frac > 0.0) v[lo + 1] += (1.0 - spec.noise) * frac;
  if (spec.noise > 0.0) {
    std::vector<double> w(N, 0.0);
    double total = 0.0;
    for (std::size_t j = 0; j < N; ++j) {
      if (std::abs(static_cast<double>(j) - ideal) <= static_cast<double>(window)) {
        w[j] = draw(spec.seed, kBlur, episode, step, head, k * N + j);
        total += w[j];
      }
    }
    for (std::size_t j = 0; j < N; ++j) {
      if (total > 0.0) v[j] += spec.noise * w[j] / total;
    }
  }
  for (std::size_t j = 0; j < N; ++j) row[j] = static_cast<float>(v[j]);
}

// Near-uniform row: 1/N with +-5 % multiplicative jitter.
inline void collapsed_row(std::span<float> row, const SynthSpec& spec, std::size_t k, std::uint64_t episode,
                          std::uint64_t step, std::uint64_t head) {
  const std::size_t N = row.size();
  for (std::size_t j = 0; j < N; ++j) {
    const double u = draw(spec.seed, kCollapse, episode, step, head, k * N + j);
    row[j] = static_cast<float>((1.0 + 0.1 * (u - 0.5)) / static_cast<double>(N));
  }
}

// Unstructured attention: squared uniforms plus a floor, scaled by a random
// frame energy in [0.5, 1].
inline void background_row(std::span<float> row, const SynthSpec& spec, std::size_t k, std::uint64_t episode,
                           std::uint64_t step, std::uint64_t head) {
  const std::size_t N = row.size();
  std::vector<double> v(N);
  double total = 0.0;
  for (std::size_t j = 0; j < N; ++j) {
    const double u = draw(spec.seed, kBackground, episode, step, head, k * N + j);
    v[j] = u * u + 0.01;
    total += v[j];
  }
  const double energy = 0.5 + 0.5 * draw(spec.seed, kBackgroundEnergy, episode, step, head, k);
  for (std::size_t j = 0; j < N; ++j) row[j] = static_cast<float>(energy * v[j] / total);
}

}  // namespace synth_detail

inline SynthEpisode gen_episode(const SynthSpec& spec, std::size_t index) {
  using namespace synth_detail;
  spec.validate();
  const auto heads = spec.resolved_heads();
  const std::set<HeadId> planted(spec.plantedHeads.begin(), spec.plantedHeads.end());
  const int window = std::max(1, static_cast<int>(std::lround(0.05 * static_cast<double>(spec.tokens))));
  const std::uint64_t ep = index;

  SynthEpisode out;
  const bool anomalous = synth_is_anomalous(spec, index);
  if (anomalous) {
    const double u = draw(spec.seed, kOnset, ep);
    const auto span = spec.onsetMax - spec.onsetMin + 1;
    out.gtOnset = spec.onsetMin + std::min(span - 1, static_cast<std::size_t>(u * static_cast<double>(span)));
    out.gtCategory = *out.gtOnset == 0 ? EpisodeCategory::OnlyA : EpisodeCategory::NtoA;
  }

  // Straight reference path with a random heading. Waypoints are rounded to
  // single precision so on-path poses coincide with them exactly.
  const double heading = 2.0 * std::numbers::pi * draw(spec.seed, kHeading, ep) - std::numbers::pi;
  const double side = draw(spec.seed, kSide, ep) < 0.5 ? -1.0 : 1.0;
  const double away = heading + side * 2.0 * std::numbers::pi / 3.0;  // 120 deg off the path
  std::vector<Waypoint> path;
  for (std::size_t j = 0; j < spec.steps; ++j) {
    const double s = static_cast<double>(j) * spec.stepLength;
    path.push_back({double(static_cast<float>(s * std::cos(heading))),
                    double(static_cast<float>(s * std::sin(heading)))});
  }

  EpisodeTrace& t = out.trace;
  t.episodeId = synth_episode_id(index);
  t.tokenCount = spec.tokens;
  t.frameCount = spec.frames;
  t.layerCount = spec.layers;
  t.headsPerLayer = spec.headsPerLayer;
  t.storedHeads = heads;
  t.referencePath = path;
  t.records.reserve(spec.steps);

  for (std::size_t step = 0; step < spec.steps; ++step) {
    AttentionRecord rec;
    rec.step = static_cast<std::int64_t>(step);
    const bool collapsed = out.gtOnset && step >= *out.gtOnset;
    const bool offPath = out.gtOnset && step > *out.gtOnset;
    if (offPath) {
      const auto& base = path[*out.gtOnset];
      const double s = static_cast<double>(step - *out.gtOnset) * spec.stepLength;
      rec.pose = {static_cast<float>(base.x + s * std::cos(away)), static_cast<float>(base.y + s * std::sin(away)),
                  0.0F, pose_angle(away)};
    } else {
      rec.pose = {static_cast<float>(path[step].x), static_cast<float>(path[step].y), 0.0F, pose_angle(heading)};
    }
    rec.action = step + 1 < spec.steps ? Action::forward(static_cast<float>(spec.stepLength)) : Action::stop();

    for (const auto& h : heads) {
      AttentionMatrix m(spec.frames, spec.tokens);
      const auto hk = head_key(h);
      for (std::size_t k = 0; k < spec.frames; ++k) {
        if (!planted.contains(h)) {
          background_row(m.row(k), spec, k, ep, step, hk);
        } else if (collapsed) {
          collapsed_row(m.row(k), spec, k, ep, step, hk);
        } else {
          diagonal_row(m.row(k), spec, k, window, ep, step, hk);
        }
      }
      rec.heads.emplace(h, std::move(m));
    }
    t.records.push_back(std::move(rec));
  }
  return out;
}

struct SynthDataset {
  std::vector<SynthEpisode> train;
  std::vector<SynthEpisode> val;
};

// Materializes both splits. Large specs are better driven episode by episode
// through dataset_plan() and gen_episode().
inline SynthDataset gen_dataset(const SynthSpec& spec, unsigned jobs = 1) {
  if (spec.episodes < 2) throw ConfigError("a dataset needs at least two episodes");
  const auto plan = dataset_plan(spec);
  std::vector<SynthEpisode> all(plan.size());
  parallel_for(plan.size(), jobs, [&](std::size_t i) { all[i] = gen_episode(spec, i); });
  SynthDataset ds;
  for (std::size_t i = 0; i < plan.size(); ++i) {
    (plan[i].split == Split::Train ? ds.train : ds.val).push_back(std::move(all[i]));
  }
  return ds;
}

}  // namespace sentinel
