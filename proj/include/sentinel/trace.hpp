#pragma once

#include <cmath>
#include <compare>
#include <cstdint>
#include <map>
#include <numbers>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sentinel/errors.hpp"

namespace sentinel {

struct HeadId {
  int layer = 0;
  int head = 0;

  auto operator<=>(const HeadId&) const = default;
};

inline std::string to_string(const HeadId& h) {
  return std::to_string(h.layer) + ":" + std::to_string(h.head);
}

// Agent pose as stored in a trace. Values are kept in single precision so a
// trace survives a write/read cycle bit-exactly.
struct Pose {
  float x = 0.0F;
  float y = 0.0F;
  float z = 0.0F;
  float theta = 0.0F;

  bool operator==(const Pose&) const = default;
};

// Wraps an angle into (-pi, pi].
inline double normalize_angle(double a) {
  constexpr double kTwoPi = 2.0 * std::numbers::pi;
  a = std::fmod(a, kTwoPi);
  if (a <= -std::numbers::pi) a += kTwoPi;
  if (a > std::numbers::pi) a -= kTwoPi;
  return a;
}

inline double planar_distance(const Pose& a, const Pose& b) {
  return std::hypot(double(a.x) - double(b.x), double(a.y) - double(b.y));
}

enum class ActionType : std::uint8_t { Stop = 0, Forward = 1, TurnLeft = 2, TurnRight = 3 };

// A mid-level navigation action. `amount` is meters for Forward, radians for
// turns and unused (0) for Stop.
struct Action {
  ActionType type = ActionType::Stop;
  float amount = 0.0F;

  static Action forward(float meters) { return {ActionType::Forward, meters}; }
  static Action turn_left(float radians) { return {ActionType::TurnLeft, radians}; }
  static Action turn_right(float radians) { return {ActionType::TurnRight, radians}; }
  static Action stop() { return {ActionType::Stop, 0.0F}; }

  bool translational() const { return type == ActionType::Forward; }
  bool operator==(const Action&) const = default;
};

// Dense T x N attention matrix, row k = history frame k, column j = instruction
// token j. Row-major single precision, matching the on-disk layout.
class AttentionMatrix {
 public:
  AttentionMatrix() = default;
  AttentionMatrix(std::size_t rows, std::size_t cols, float fill = 0.0F)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  AttentionMatrix(std::size_t rows, std::size_t cols, std::vector<float> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
      throw ValidationError("attention matrix data size " + std::to_string(data_.size()) +
                            " does not match " + std::to_string(rows_) + "x" +
                            std::to_string(cols_));
    }
  }
  AttentionMatrix(std::initializer_list<std::initializer_list<double>> rows) {
    rows_ = rows.size();
    cols_ = rows_ == 0 ? 0 : rows.begin()->size();
    data_.reserve(rows_ * cols_);
    for (const auto& r : rows) {
      if (r.size() != cols_) throw ValidationError("ragged attention matrix literal");
      for (double v : r) data_.push_back(static_cast<float>(v));
    }
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  float& operator()(std::size_t k, std::size_t j) { return data_[k * cols_ + j]; }
  float operator()(std::size_t k, std::size_t j) const { return data_[k * cols_ + j]; }

  std::span<const float> row(std::size_t k) const {
    return std::span<const float>(data_).subspan(k * cols_, cols_);
  }
  std::span<float> row(std::size_t k) { return std::span<float>(data_).subspan(k * cols_, cols_); }

  std::span<const float> values() const { return data_; }
  std::span<float> values() { return data_; }

  bool operator==(const AttentionMatrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<float> data_;
};

struct AttentionRecord {
  std::int64_t step = 0;
  std::map<HeadId, AttentionMatrix> heads;
  Pose pose;
  Action action;

  bool operator==(const AttentionRecord&) const = default;
};

struct Waypoint {
  double x = 0.0;
  double y = 0.0;

  bool operator==(const Waypoint&) const = default;
};

struct EpisodeTrace {
  std::string episodeId;
  std::size_t tokenCount = 0;  // N
  std::size_t frameCount = 0;  // T
  int layerCount = 32;         // L_total
  int headsPerLayer = 32;      // H_total
  std::vector<HeadId> storedHeads;
  std::vector<AttentionRecord> records;
  std::optional<std::vector<Waypoint>> referencePath;

  bool operator==(const EpisodeTrace&) const = default;
};

struct Violation {
  std::optional<std::size_t> recordIndex;
  std::string field;
  std::string message;
};

inline std::string to_string(const Violation& v) {
  std::string out;
  if (v.recordIndex) out += "record " + std::to_string(*v.recordIndex) + ": ";
  out += v.field + ": " + v.message;
  return out;
}

namespace detail {

inline bool theta_in_range(float theta) {
  // float(pi) rounds slightly above pi, so the upper bound is compared in
  // single precision.
  return std::isfinite(theta) && double(theta) > -std::numbers::pi &&
         theta <= static_cast<float>(std::numbers::pi);
}

}  // namespace detail

// Checks every structural invariant of a trace. Violations are returned, not
// thrown; an empty result means the trace is well formed.
inline std::vector<Violation> validate_trace(const EpisodeTrace& trace) {
  std::vector<Violation> out;
  auto add = [&](std::optional<std::size_t> idx, std::string field, std::string msg) {
    out.push_back({idx, std::move(field), std::move(msg)});
  };

  if (trace.tokenCount == 0) add(std::nullopt, "N", "instruction token count must be positive");
  if (trace.frameCount == 0) add(std::nullopt, "T", "frame count must be positive");
  if (trace.layerCount <= 0 || trace.headsPerLayer <= 0) {
    add(std::nullopt, "dims", "layer and head counts must be positive");
  }
  if (trace.storedHeads.empty()) add(std::nullopt, "storedHeads", "no heads declared");

  std::set<HeadId> declared;
  for (const auto& h : trace.storedHeads) {
    if (h.layer < 0 || h.layer >= trace.layerCount || h.head < 0 || h.head >= trace.headsPerLayer) {
      add(std::nullopt, "storedHeads", "head " + to_string(h) + " outside model dimensions");
    }
    if (!declared.insert(h).second) add(std::nullopt, "storedHeads", "duplicate head " + to_string(h));
  }

  if (trace.records.empty()) add(std::nullopt, "records", "episode has no steps");

  if (trace.referencePath) {
    for (const auto& w : *trace.referencePath) {
      if (!std::isfinite(w.x) || !std::isfinite(w.y)) {
        add(std::nullopt, "referencePath", "non-finite waypoint");
        break;
      }
    }
  }

  for (std::size_t i = 0; i < trace.records.size(); ++i) {
    const auto& rec = trace.records[i];
    if (i > 0 && rec.step <= trace.records[i - 1].step) {
      add(i, "step", "step indices must be strictly increasing");
    }
    const auto& p = rec.pose;
    if (!std::isfinite(p.x) || !std::isfinite(p.y) || !std::isfinite(p.z)) {
      add(i, "pose", "non-finite coordinate");
    }
    if (!detail::theta_in_range(p.theta)) {
      add(i, "pose.theta", "theta " + std::to_string(p.theta) + " not normalized into (-pi, pi]");
    }
    const auto& a = rec.action;
    if (static_cast<unsigned>(a.type) > 3U) {
      add(i, "action", "unknown action code");
    } else if (a.type != ActionType::Stop && !(a.amount > 0.0F && std::isfinite(a.amount))) {
      add(i, "action", "action magnitude must be positive");
    }

    if (rec.heads.size() != declared.size()) {
      add(i, "heads", "record holds " + std::to_string(rec.heads.size()) + " heads, header declares " +
                          std::to_string(declared.size()));
    }
    for (const auto& [head, m] : rec.heads) {
      if (!declared.contains(head)) {
        add(i, "heads", "undeclared head " + to_string(head));
        continue;
      }
      if (m.rows() != trace.frameCount || m.cols() != trace.tokenCount) {
        add(i, "heads", "head " + to_string(head) + " matrix is " + std::to_string(m.rows()) + "x" +
                            std::to_string(m.cols()) + ", expected " + std::to_string(trace.frameCount) +
                            "x" + std::to_string(trace.tokenCount));
        continue;
      }
      for (float v : m.values()) {
        if (!std::isfinite(v) || v < 0.0F) {
          add(i, "heads", "head " + to_string(head) + " has a negative or non-finite entry");
          break;
        }
      }
    }
  }
  return out;
}

inline void require_valid(const EpisodeTrace& trace) {
  auto violations = validate_trace(trace);
  if (!violations.empty()) {
    std::string msg = "trace '" + trace.episodeId + "' invalid: " + to_string(violations.front());
    if (violations.size() > 1) msg += " (+" + std::to_string(violations.size() - 1) + " more)";
    throw ValidationError(msg);
  }
}

}  // namespace sentinel
