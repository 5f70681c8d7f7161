#pragma once

// Spatiotemporal alignment scoring of attention heads and their selection as
// navigation heads.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "sentinel/errors.hpp"
#include "sentinel/trace.hpp"

namespace sentinel {

struct FrameStats {
  double energy = 0.0;          // E_k
  std::vector<double> dist;     // P_k
  double center = 0.0;          // c_k
  double spread = 0.0;          // sigma_k
  double windowMass = 0.0;      // m_k
};

struct AlignmentComponents {
  double sUniform = 0.0;
  double sPeak = 0.0;
  double sDiag = 0.0;
  double sShift = 0.0;
};

struct HeadScore {
  HeadId head;
  double iDiag = 0.0;
  double cohensD = 0.0;
  std::size_t nN = 0;
  std::size_t nA = 0;
};

struct SelectionConfig {
  double lambda = 0.5;
  std::optional<int> peakWindowHalfWidth;  // r; derived from N when unset
  std::size_t candidatePoolSize = 32;      // M
  std::size_t k = 3;                       // K
};

// Window half-width used when none is configured: 5 % of the token count,
// at least one token.
inline int resolve_window(const SelectionConfig& cfg, std::size_t tokens) {
  if (cfg.peakWindowHalfWidth) {
    if (*cfg.peakWindowHalfWidth < 0) throw ConfigError("peak window half-width must be >= 0");
    return *cfg.peakWindowHalfWidth;
  }
  return std::max(1, static_cast<int>(std::lround(0.05 * static_cast<double>(tokens))));
}

// Standard deviation of the discrete uniform distribution over n positions.
inline double max_spread(std::size_t n) {
  const double nn = static_cast<double>(n);
  return std::sqrt((nn * nn - 1.0) / 12.0);
}

// Statistics of one attention row. Returns nullopt for an all-zero row.
template <class Range>
std::optional<FrameStats> try_frame_stats(const Range& row, int window) {
  FrameStats s;
  for (auto v : row) s.energy += static_cast<double>(v);
  if (!(s.energy > 0.0)) return std::nullopt;

  s.dist.reserve(std::size(row));
  double center = 0.0;
  std::size_t j = 0;
  for (auto v : row) {
    const double p = static_cast<double>(v) / s.energy;
    s.dist.push_back(p);
    center += static_cast<double>(j++) * p;
  }
  s.center = center;

  double var = 0.0;
  double mass = 0.0;
  for (std::size_t i = 0; i < s.dist.size(); ++i) {
    const double off = static_cast<double>(i) - center;
    var += s.dist[i] * off * off;
    if (std::abs(off) <= static_cast<double>(window)) mass += s.dist[i];
  }
  s.spread = std::sqrt(var);
  s.windowMass = std::min(1.0, mass);
  return s;
}

inline std::vector<FrameStats> frame_stats(const AttentionMatrix& a, int window) {
  std::vector<FrameStats> out;
  out.reserve(a.rows());
  for (std::size_t k = 0; k < a.rows(); ++k) {
    auto s = try_frame_stats(a.row(k), window);
    if (!s) throw DegenerateRow("frame " + std::to_string(k) + " carries no attention mass");
    out.push_back(std::move(*s));
  }
  return out;
}

namespace detail {

// A bimodal row can spread wider than the uniform one; the ratio is capped so
// the term stays in [0, 1].
inline double peak_term(const FrameStats& s, double sigmaMax) {
  return 0.5 * ((1.0 - std::min(s.spread / sigmaMax, 1.0)) + s.windowMass);
}

}  // namespace detail

// Focus sharpness alone; this is the per-step statistic used for the
// Normal/Anomaly sensitivity test.
inline double peak_sharpness(const AttentionMatrix& a, int window) {
  if (a.rows() == 0 || a.cols() < 2) throw ConfigError("peak sharpness needs N >= 2");
  const double sigmaMax = max_spread(a.cols());
  double sum = 0.0;
  for (std::size_t k = 0; k < a.rows(); ++k) {
    if (auto s = try_frame_stats(a.row(k), window)) sum += detail::peak_term(*s, sigmaMax);
  }
  return sum / static_cast<double>(a.rows());
}

// All four alignment components of one T x N matrix. All-zero rows contribute
// zero to every component.
inline AlignmentComponents alignment_components(const AttentionMatrix& a, int window) {
  const std::size_t T = a.rows();
  const std::size_t N = a.cols();
  if (T < 2) throw ConfigError("alignment needs at least two frames");
  if (N < 2) throw ConfigError("alignment needs at least two instruction tokens");

  std::vector<std::optional<FrameStats>> stats;
  stats.reserve(T);
  double maxEnergy = 0.0;
  for (std::size_t k = 0; k < T; ++k) {
    stats.push_back(try_frame_stats(a.row(k), window));
    if (stats.back()) maxEnergy = std::max(maxEnergy, stats.back()->energy);
  }

  const double sigmaMax = max_spread(N);
  const double span = static_cast<double>(N - 1);
  const double idealStep = span / static_cast<double>(T - 1);

  AlignmentComponents c;
  for (std::size_t k = 0; k < T; ++k) {
    const auto& s = stats[k];
    if (!s) continue;
    const double ideal = static_cast<double>(k) * idealStep;
    c.sUniform += s->energy / maxEnergy;
    c.sPeak += detail::peak_term(*s, sigmaMax);
    c.sDiag += 1.0 - std::abs(s->center - ideal) / span;
    if (k >= 1 && stats[k - 1]) {
      const double shift = s->center - stats[k - 1]->center;
      const double ratio = shift / idealStep - 1.0;
      c.sShift += (shift > 0.0 ? 1.0 : 0.0) + std::exp(-0.5 * ratio * ratio);
    }
  }
  const double tt = static_cast<double>(T);
  c.sUniform /= tt;
  c.sPeak /= tt;
  c.sDiag /= tt;
  c.sShift /= 2.0 * static_cast<double>(T - 1);
  return c;
}

inline AlignmentComponents alignment_components(const AttentionMatrix& a, const SelectionConfig& cfg) {
  return alignment_components(a, resolve_window(cfg, a.cols()));
}

inline double combined_alignment(const AlignmentComponents& c, double lambda) {
  return c.sUniform * c.sPeak * (lambda * c.sDiag + (1.0 - lambda) * c.sShift);
}

// Alignment score of one head: mean combined score over the final-step
// matrices of the ideal episodes.
inline double i_diag(std::span<const AttentionMatrix> idealFinalMatrices, const SelectionConfig& cfg) {
  if (idealFinalMatrices.empty()) throw ConfigError("i_diag needs at least one ideal episode");
  if (cfg.lambda < 0.0 || cfg.lambda > 1.0) throw ConfigError("lambda must lie in [0, 1]");
  double sum = 0.0;
  for (const auto& m : idealFinalMatrices) sum += combined_alignment(alignment_components(m, cfg), cfg.lambda);
  return sum / static_cast<double>(idealFinalMatrices.size());
}

// Effect size |mu_N - mu_A| / sigma_pooled with sample variances.
inline double cohens_d(std::span<const double> normal, std::span<const double> anomalous) {
  if (normal.size() < 2 || anomalous.size() < 2) {
    throw InputError("cohens_d needs at least two samples per group");
  }
  auto moments = [](std::span<const double> xs) {
    const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
    double ss = 0.0;
    for (double x : xs) ss += (x - mean) * (x - mean);
    return std::pair{mean, ss};
  };
  const auto [muN, ssN] = moments(normal);
  const auto [muA, ssA] = moments(anomalous);
  const double dof = static_cast<double>(normal.size() + anomalous.size() - 2);
  const double pooled = std::sqrt((ssN + ssA) / dof);
  const double diff = std::abs(muN - muA);
  if (pooled == 0.0) {
    if (diff == 0.0) return 0.0;
    throw DegenerateVariance("zero pooled variance with unequal means");
  }
  return diff / pooled;
}

// Two-stage selection: the top-M heads by alignment form the candidate pool,
// which is then ranked by effect size. Ties fall back to (layer, head).
inline std::vector<HeadId> select_nav_heads(std::span<const HeadScore> scores, const SelectionConfig& cfg) {
  if (cfg.k < 1) throw ConfigError("K must be >= 1");
  if (cfg.candidatePoolSize < cfg.k) throw ConfigError("candidate pool M must be >= K");
  if (scores.size() < cfg.k) {
    throw ConfigError("only " + std::to_string(scores.size()) + " scored heads for K = " +
                      std::to_string(cfg.k));
  }
  std::vector<HeadScore> pool(scores.begin(), scores.end());
  std::sort(pool.begin(), pool.end(), [](const HeadScore& a, const HeadScore& b) {
    if (a.iDiag != b.iDiag) return a.iDiag > b.iDiag;
    return a.head < b.head;
  });
  pool.resize(std::min(cfg.candidatePoolSize, pool.size()));
  std::sort(pool.begin(), pool.end(), [](const HeadScore& a, const HeadScore& b) {
    if (a.cohensD != b.cohensD) return a.cohensD > b.cohensD;
    return a.head < b.head;
  });
  std::vector<HeadId> out;
  out.reserve(cfg.k);
  for (std::size_t i = 0; i < cfg.k; ++i) out.push_back(pool[i].head);
  return out;
}

}  // namespace sentinel
