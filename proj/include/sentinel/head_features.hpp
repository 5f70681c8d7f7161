#pragma once

// Per-episode, per-head scalar summaries of an attention trace. Traces over
// all model heads are large; scoring, selection and the grid sweep only ever
// need these summaries, so a trace is reduced once and then dropped.

#include <algorithm>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "sentinel/deviation_detector.hpp"
#include "sentinel/head_analysis.hpp"
#include "sentinel/parallel.hpp"
#include "sentinel/phase_labeler.hpp"
#include "sentinel/trace.hpp"

namespace sentinel {

struct EpisodeHeadFeatures {
  std::string episodeId;
  std::vector<HeadId> heads;                  // stored-head order
  std::vector<std::vector<double>> sPeak;     // [head][step]
  std::vector<std::vector<double>> entropy;   // [head][step], frame-averaged
  std::vector<AlignmentComponents> finalComponents;  // [head], last step
  std::vector<double> finalAlignment;         // [head], combined score at lambda

  std::size_t steps() const { return entropy.empty() ? 0 : entropy.front().size(); }

  std::size_t index_of(const HeadId& h) const {
    auto it = std::find(heads.begin(), heads.end(), h);
    if (it == heads.end()) throw MissingHeadError("episode " + episodeId + " lacks head " + to_string(h));
    return static_cast<std::size_t>(it - heads.begin());
  }
};

namespace detail {

inline double guarded_entropy(const AttentionMatrix& m) {
  double sum = 0.0;
  for (std::size_t k = 0; k < m.rows(); ++k) {
    try {
      sum += frame_entropy(m.row(k));
    } catch (const DegenerateRow&) {
      // An empty row has no dispersion to report.
    }
  }
  return m.rows() ? sum / static_cast<double>(m.rows()) : 0.0;
}

}  // namespace detail

inline EpisodeHeadFeatures extract_features(const EpisodeTrace& trace, const SelectionConfig& cfg) {
  if (trace.records.empty()) throw InputError("episode '" + trace.episodeId + "' has no steps");
  const int window = resolve_window(cfg, trace.tokenCount);
  EpisodeHeadFeatures f;
  f.episodeId = trace.episodeId;
  f.heads = trace.storedHeads;
  const std::size_t H = f.heads.size();
  const std::size_t S = trace.records.size();
  f.sPeak.assign(H, std::vector<double>(S, 0.0));
  f.entropy.assign(H, std::vector<double>(S, 0.0));
  for (std::size_t t = 0; t < S; ++t) {
    const auto& rec = trace.records[t];
    for (std::size_t h = 0; h < H; ++h) {
      const auto& m = rec.heads.at(f.heads[h]);
      f.sPeak[h][t] = peak_sharpness(m, window);
      f.entropy[h][t] = detail::guarded_entropy(m);
    }
  }
  const auto& last = trace.records.back();
  for (std::size_t h = 0; h < H; ++h) {
    f.finalComponents.push_back(alignment_components(last.heads.at(f.heads[h]), window));
    f.finalAlignment.push_back(combined_alignment(f.finalComponents.back(), cfg.lambda));
  }
  return f;
}

// Scores every head shared by the episodes. Ideal episodes (only Normal,
// untruncated) feed the alignment score; every labeled step feeds the
// per-phase sharpness samples for the effect size. Heads are scored
// independently and merged in head order, so `jobs` never changes the result.
inline std::vector<HeadScore> score_heads(std::span<const EpisodeHeadFeatures> episodes,
                                          std::span<const LabeledEpisode> labels,
                                          unsigned jobs = 1) {
  if (episodes.empty()) throw ConfigError("no episodes to score");
  if (episodes.size() != labels.size()) throw InputError("feature/label episode counts differ");
  const auto& heads = episodes.front().heads;
  for (const auto& e : episodes) {
    if (e.heads != heads) throw InputError("episodes store different head sets");
  }

  std::vector<std::size_t> ideal;
  for (std::size_t i = 0; i < episodes.size(); ++i) {
    if (labels[i].category == EpisodeCategory::OnlyN && !labels[i].truncatedAt) ideal.push_back(i);
  }
  if (ideal.empty()) throw ConfigError("no ideal (Normal-only) episodes to compute i_diag");

  std::vector<HeadScore> out(heads.size());
  parallel_for(heads.size(), jobs, [&](std::size_t h) {
    HeadScore s;
    s.head = heads[h];
    double align = 0.0;
    for (auto i : ideal) align += episodes[i].finalAlignment[h];
    s.iDiag = align / static_cast<double>(ideal.size());

    std::vector<double> normal;
    std::vector<double> anomalous;
    for (std::size_t i = 0; i < episodes.size(); ++i) {
      const auto& lab = labels[i].labels;
      const auto& peaks = episodes[i].sPeak[h];
      const std::size_t n = std::min(lab.size(), peaks.size());
      for (std::size_t t = 0; t < n; ++t) {
        (lab[t] == PhaseLabel::Normal ? normal : anomalous).push_back(peaks[t]);
      }
    }
    s.nN = normal.size();
    s.nA = anomalous.size();
    if (s.nN >= 2 && s.nA >= 2) {
      try {
        s.cohensD = cohens_d(normal, anomalous);
      } catch (const DegenerateVariance&) {
        s.cohensD = std::numeric_limits<double>::infinity();
      }
    }
    out[h] = s;
  });
  return out;
}

}  // namespace sentinel
