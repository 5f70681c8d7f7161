#pragma once

// JSON forms of the toolkit's records and configs, plus small file helpers.
// Config readers take defaults from the passed-in object and reject unknown
// keys, so a file only needs to name what it changes.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <iterator>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "sentinel/deviation_detector.hpp"
#include "sentinel/errors.hpp"
#include "sentinel/evaluation.hpp"
#include "sentinel/head_analysis.hpp"
#include "sentinel/phase_labeler.hpp"
#include "sentinel/sim/world.hpp"
#include "sentinel/synth.hpp"
#include "sentinel/trace.hpp"

namespace sentinel {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Files

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_text_file(const std::filesystem::path& path, std::string_view text) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

inline json read_json_file(const std::filesystem::path& path) {
  const std::string text = read_text_file(path);
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

inline void write_json_file(const std::filesystem::path& path, const json& j) {
  write_text_file(path, j.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Heads

inline HeadId parse_head(std::string_view s) {
  const auto colon = s.find(':');
  if (colon == std::string_view::npos) throw ConfigError("head '" + std::string(s) + "' is not layer:head");
  auto num = [&](std::string_view part) {
    if (part.empty()) throw ConfigError("head '" + std::string(s) + "' is not layer:head");
    int v = 0;
    for (char c : part) {
      if (c < '0' || c > '9') throw ConfigError("head '" + std::string(s) + "' is not layer:head");
      v = v * 10 + (c - '0');
      if (v > 1'000'000) throw ConfigError("head index too large in '" + std::string(s) + "'");
    }
    return v;
  };
  return {num(s.substr(0, colon)), num(s.substr(colon + 1))};
}

inline std::vector<HeadId> parse_heads(std::string_view list) {
  std::vector<HeadId> out;
  std::size_t start = 0;
  while (start <= list.size()) {
    const auto comma = list.find(',', start);
    const auto part = list.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start);
    if (!part.empty()) out.push_back(parse_head(part));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  if (out.empty()) throw ConfigError("empty head list");
  return out;
}

inline std::string format_heads(const std::vector<HeadId>& heads) {
  std::string s;
  for (const auto& h : heads) {
    if (!s.empty()) s += ',';
    s += to_string(h);
  }
  return s;
}

inline void to_json(json& j, const HeadId& h) { j = json::array({h.layer, h.head}); }

inline void from_json(const json& j, HeadId& h) {
  if (j.is_string()) {
    h = parse_head(j.get<std::string>());
    return;
  }
  if (!j.is_array() || j.size() != 2) throw ConfigError("head must be [layer, head] or \"layer:head\"");
  h = {j[0].get<int>(), j[1].get<int>()};
}

// ---------------------------------------------------------------------------
// Config helpers

namespace json_detail {

inline void reject_unknown(const json& j, std::initializer_list<std::string_view> known, std::string_view what) {
  if (!j.is_object()) throw ConfigError(std::string(what) + " must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    bool ok = false;
    for (auto k : known) ok = ok || k == key;
    if (!ok) throw ConfigError(std::string(what) + ": unknown key '" + key + "'");
  }
}

template <class T>
void read_opt(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad value for '") + key + "': " + e.what());
  }
}

template <class Fn>
auto guard(Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const json::exception& e) {
    throw FormatError(e.what());
  }
}

}  // namespace json_detail

// ---------------------------------------------------------------------------
// Labels

inline json labels_to_json(const LabeledEpisode& e) {
  json labels = json::array();
  for (auto l : e.labels) labels.push_back(to_string(l));
  json j = {{"episodeId", e.episodeId}, {"labels", labels}, {"category", to_string(e.category)}};
  j["truncatedAt"] = e.truncatedAt ? json(*e.truncatedAt) : json(nullptr);
  return j;
}

inline LabeledEpisode labels_from_json(const json& j) {
  return json_detail::guard([&] {
    LabeledEpisode e;
    e.episodeId = j.at("episodeId").get<std::string>();
    for (const auto& l : j.at("labels")) {
      const auto s = l.get<std::string>();
      if (s == "N") e.labels.push_back(PhaseLabel::Normal);
      else if (s == "A") e.labels.push_back(PhaseLabel::Anomaly);
      else throw FormatError("labels may only be \"N\" or \"A\"");
    }
    e.category = parse_category(j.at("category").get<std::string>());
    if (j.contains("truncatedAt") && !j.at("truncatedAt").is_null()) {
      e.truncatedAt = j.at("truncatedAt").get<std::size_t>();
    }
    if (!e.labels.empty() && categorize_episode(e.labels) != e.category) {
      throw FormatError("episode " + e.episodeId + ": category does not match labels");
    }
    return e;
  });
}

// ---------------------------------------------------------------------------
// Head scores and selection

inline json head_scores_to_json(std::span<const HeadScore> scores, const SelectionConfig& cfg) {
  json rows = json::array();
  for (const auto& s : scores) {
    json d = std::isfinite(s.cohensD) ? json(s.cohensD) : json("inf");
    rows.push_back({{"head", s.head}, {"iDiag", s.iDiag}, {"cohensD", d}, {"nN", s.nN}, {"nA", s.nA}});
  }
  json j = {{"lambda", cfg.lambda}, {"scores", rows}};
  j["peakWindowHalfWidth"] = cfg.peakWindowHalfWidth ? json(*cfg.peakWindowHalfWidth) : json(nullptr);
  return j;
}

inline std::vector<HeadScore> head_scores_from_json(const json& j) {
  return json_detail::guard([&] {
    std::vector<HeadScore> out;
    for (const auto& r : j.at("scores")) {
      HeadScore s;
      s.head = r.at("head").get<HeadId>();
      s.iDiag = r.at("iDiag").get<double>();
      const auto& d = r.at("cohensD");
      s.cohensD = d.is_string() ? std::numeric_limits<double>::infinity() : d.get<double>();
      s.nN = r.value("nN", std::size_t{0});
      s.nA = r.value("nA", std::size_t{0});
      out.push_back(s);
    }
    return out;
  });
}

inline std::vector<HeadId> selection_from_json(const json& j) {
  return json_detail::guard([&] { return j.at("heads").get<std::vector<HeadId>>(); });
}

// ---------------------------------------------------------------------------
// Detector output

inline json detector_step_to_json(const DetectorStep& s) {
  json j = {{"step", s.step}, {"E", s.entropy}};
  j["R"] = s.ratio ? json(*s.ratio) : json(nullptr);
  j["exceedCount"] = s.exceedCount;
  j["phase"] = to_string(s.decision);
  return j;
}

inline json pose_to_json(const Pose& p) { return json::array({p.x, p.y, p.z, p.theta}); }

inline Pose pose_from_json(const json& j) {
  if (!j.is_array() || j.size() != 4) throw FormatError("pose must be [x, y, z, theta]");
  return {j[0].get<float>(), j[1].get<float>(), j[2].get<float>(), j[3].get<float>()};
}

inline json checkpoint_to_json(const SafeCheckpoint& c) {
  json att = json::array();
  for (const auto& [head, m] : c.attention) {
    json rows = json::array();
    for (std::size_t k = 0; k < m.rows(); ++k) {
      auto r = m.row(k);
      rows.push_back(std::vector<float>(r.begin(), r.end()));
    }
    att.push_back({{"head", head}, {"matrix", rows}});
  }
  return {{"step", c.step},
          {"pose", pose_to_json(c.pose)},
          {"visualHistoryIds", c.visualHistoryIds},
          {"entropyBuffer", c.entropyBuffer},
          {"attention", att}};
}

inline SafeCheckpoint checkpoint_from_json(const json& j) {
  return json_detail::guard([&] {
    SafeCheckpoint c;
    c.step = j.at("step").get<std::int64_t>();
    c.pose = pose_from_json(j.at("pose"));
    c.visualHistoryIds = j.value("visualHistoryIds", std::vector<std::int64_t>{});
    c.entropyBuffer = j.value("entropyBuffer", std::vector<double>{});
    if (j.contains("attention")) {
      for (const auto& a : j.at("attention")) {
        const auto rows = a.at("matrix").get<std::vector<std::vector<float>>>();
        const std::size_t cols = rows.empty() ? 0 : rows.front().size();
        AttentionMatrix m(rows.size(), cols);
        for (std::size_t k = 0; k < rows.size(); ++k) {
          if (rows[k].size() != cols) throw FormatError("ragged checkpoint attention matrix");
          std::copy(rows[k].begin(), rows[k].end(), m.row(k).begin());
        }
        c.attention.insert_or_assign(a.at("head").get<HeadId>(), std::move(m));
      }
    }
    return c;
  });
}

// ---------------------------------------------------------------------------
// Synthetic dataset spec

inline json synth_spec_to_json(const SynthSpec& s) {
  return {{"seed", s.seed},
          {"episodes", s.episodes},
          {"tokens", s.tokens},
          {"frames", s.frames},
          {"steps", s.steps},
          {"layers", s.layers},
          {"headsPerLayer", s.headsPerLayer},
          {"storedHeads", s.storedHeads},
          {"plantedHeads", s.plantedHeads},
          {"anomalyFraction", s.anomalyFraction},
          {"onsetMin", s.onsetMin},
          {"onsetMax", s.onsetMax},
          {"noise", s.noise},
          {"stepLength", s.stepLength}};
}

inline SynthSpec synth_spec_from_json(const json& j, SynthSpec s = {}) {
  json_detail::reject_unknown(j,
                              {"seed", "episodes", "tokens", "frames", "steps", "layers", "headsPerLayer",
                               "storedHeads", "plantedHeads", "anomalyFraction", "onsetMin", "onsetMax",
                               "noise", "stepLength"},
                              "synth spec");
  using json_detail::read_opt;
  read_opt(j, "seed", s.seed);
  read_opt(j, "episodes", s.episodes);
  read_opt(j, "tokens", s.tokens);
  read_opt(j, "frames", s.frames);
  read_opt(j, "steps", s.steps);
  read_opt(j, "layers", s.layers);
  read_opt(j, "headsPerLayer", s.headsPerLayer);
  read_opt(j, "storedHeads", s.storedHeads);
  read_opt(j, "plantedHeads", s.plantedHeads);
  read_opt(j, "anomalyFraction", s.anomalyFraction);
  read_opt(j, "onsetMin", s.onsetMin);
  read_opt(j, "onsetMax", s.onsetMax);
  read_opt(j, "noise", s.noise);
  read_opt(j, "stepLength", s.stepLength);
  s.validate();
  return s;
}

// ---------------------------------------------------------------------------
// Sweep

inline json sweep_spec_to_json(const SweepSpec& s) {
  return {{"K", s.k}, {"P", s.patience}, {"W", s.window}, {"tau", s.tau}, {"ferCap", s.ferCap},
          {"epsilon", s.epsilon}};
}

inline SweepSpec sweep_spec_from_json(const json& j, SweepSpec s = SweepSpec::full_grid()) {
  json_detail::reject_unknown(j, {"K", "P", "W", "tau", "ferCap", "epsilon"}, "sweep spec");
  using json_detail::read_opt;
  read_opt(j, "K", s.k);
  read_opt(j, "P", s.patience);
  read_opt(j, "W", s.window);
  read_opt(j, "tau", s.tau);
  read_opt(j, "ferCap", s.ferCap);
  read_opt(j, "epsilon", s.epsilon);
  s.validate();
  return s;
}

inline json metrics_to_json(const MetricsReport& m) {
  json j = {{"EDR", m.edr}, {"FER", m.fer}, {"Gap", m.gap}, {"precision", m.precision},
            {"recall", m.recall}, {"F1", m.f1}};
  j["meanLatency"] = m.meanLatency ? json(*m.meanLatency) : json(nullptr);
  return j;
}

inline json sweep_row_to_json(const SweepRow& r) {
  return {{"K", r.k}, {"P", r.patience}, {"W", r.window}, {"tau", r.tau}, {"feasible", r.feasible},
          {"metrics", metrics_to_json(r.metrics)}};
}

// ---------------------------------------------------------------------------
// Worlds

inline json world_to_json(const sim::World& w) {
  json circles = json::array();
  for (const auto& c : w.circles) circles.push_back({{"x", c.x}, {"y", c.y}, {"r", c.r}});
  json boxes = json::array();
  for (const auto& b : w.boxes) boxes.push_back({{"min", {b.minX, b.minY}}, {"max", {b.maxX, b.maxY}}});
  return {{"bounds", {{"min", {w.bounds.minX, w.bounds.minY}}, {"max", {w.bounds.maxX, w.bounds.maxY}}}},
          {"circles", circles},
          {"boxes", boxes},
          {"minClearance", w.minClearance}};
}

inline sim::World world_from_json(const json& j) {
  json_detail::reject_unknown(j, {"bounds", "circles", "boxes", "minClearance"}, "world");
  return json_detail::guard([&] {
    sim::World w;
    if (j.contains("bounds")) {
      const auto& b = j.at("bounds");
      w.bounds = {b.at("min")[0].get<double>(), b.at("min")[1].get<double>(), b.at("max")[0].get<double>(),
                  b.at("max")[1].get<double>()};
      if (!(w.bounds.minX < w.bounds.maxX && w.bounds.minY < w.bounds.maxY)) {
        throw ConfigError("world bounds are empty");
      }
    }
    for (const auto& c : j.value("circles", json::array())) {
      sim::Circle circle{c.at("x").get<double>(), c.at("y").get<double>(), c.at("r").get<double>()};
      if (!(circle.r > 0.0)) throw ConfigError("circle radius must be positive");
      w.circles.push_back(circle);
    }
    for (const auto& b : j.value("boxes", json::array())) {
      sim::Box box{b.at("min")[0].get<double>(), b.at("min")[1].get<double>(), b.at("max")[0].get<double>(),
                   b.at("max")[1].get<double>()};
      if (!(box.minX < box.maxX && box.minY < box.maxY)) throw ConfigError("box extents are empty");
      w.boxes.push_back(box);
    }
    w.minClearance = j.value("minClearance", w.minClearance);
    return w;
  });
}

}  // namespace sentinel
