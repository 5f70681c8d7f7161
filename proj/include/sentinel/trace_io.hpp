#pragma once

// ATRC episode-trace container.
//
//   "ATRC" | u16 version | u32 header length | header JSON (UTF-8)
//   per step: u8 action code, f32 action scalar, 4 x f32 pose (x, y, z, theta),
//             then one T x N f32 row-major matrix per stored head, header order.
//
// Every integer and float is little-endian. There is no padding.

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <istream>
#include <iterator>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sentinel/errors.hpp"
#include "sentinel/trace.hpp"

namespace sentinel {

inline constexpr std::array<char, 4> kTraceMagic = {'A', 'T', 'R', 'C'};
inline constexpr std::uint16_t kTraceVersion = 1;

namespace detail {

class ByteWriter {
 public:
  explicit ByteWriter(std::ostream& out) : out_(out) {}

  void bytes(const void* data, std::size_t n) {
    out_.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
    if (!out_) throw IoError("write to trace sink failed");
    count_ += n;
  }
  void u8(std::uint8_t v) { bytes(&v, 1); }
  void u16(std::uint16_t v) {
    const std::uint8_t b[2] = {std::uint8_t(v), std::uint8_t(v >> 8)};
    bytes(b, 2);
  }
  void u32(std::uint32_t v) {
    const std::uint8_t b[4] = {std::uint8_t(v), std::uint8_t(v >> 8), std::uint8_t(v >> 16),
                               std::uint8_t(v >> 24)};
    bytes(b, 4);
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }

  // Bulk little-endian float emission through a stack buffer.
  void f32s(std::span<const float> values) {
    std::array<std::uint8_t, 4096> buf{};
    std::size_t used = 0;
    for (float f : values) {
      const auto v = std::bit_cast<std::uint32_t>(f);
      buf[used++] = std::uint8_t(v);
      buf[used++] = std::uint8_t(v >> 8);
      buf[used++] = std::uint8_t(v >> 16);
      buf[used++] = std::uint8_t(v >> 24);
      if (used == buf.size()) {
        bytes(buf.data(), used);
        used = 0;
      }
    }
    if (used > 0) bytes(buf.data(), used);
  }

  std::size_t count() const { return count_; }

 private:
  std::ostream& out_;
  std::size_t count_ = 0;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> data) : data_(data) {}

  std::span<const std::uint8_t> take(std::size_t n, const char* what) {
    if (data_.size() - pos_ < n) {
      throw TruncationError(std::string("trace truncated while reading ") + what + " at byte " +
                            std::to_string(pos_));
    }
    auto out = data_.subspan(pos_, n);
    pos_ += n;
    return out;
  }
  std::uint8_t u8(const char* what) { return take(1, what)[0]; }
  std::uint16_t u16(const char* what) {
    auto b = take(2, what);
    return std::uint16_t(b[0] | (b[1] << 8));
  }
  std::uint32_t u32(const char* what) {
    auto b = take(4, what);
    return std::uint32_t(b[0]) | (std::uint32_t(b[1]) << 8) | (std::uint32_t(b[2]) << 16) |
           (std::uint32_t(b[3]) << 24);
  }
  float f32(const char* what) { return std::bit_cast<float>(u32(what)); }

  void f32s(std::span<float> out, const char* what) {
    auto b = take(out.size() * 4, what);
    for (std::size_t i = 0; i < out.size(); ++i) {
      const std::uint32_t v = std::uint32_t(b[4 * i]) | (std::uint32_t(b[4 * i + 1]) << 8) |
                              (std::uint32_t(b[4 * i + 2]) << 16) |
                              (std::uint32_t(b[4 * i + 3]) << 24);
      out[i] = std::bit_cast<float>(v);
    }
  }

  std::size_t remaining() const { return data_.size() - pos_; }

 private:
  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
};

inline bool steps_are_contiguous(const EpisodeTrace& trace) {
  for (std::size_t i = 0; i < trace.records.size(); ++i) {
    if (trace.records[i].step != static_cast<std::int64_t>(i)) return false;
  }
  return true;
}

inline nlohmann::json trace_header(const EpisodeTrace& trace) {
  nlohmann::json h;
  h["episodeId"] = trace.episodeId;
  h["N"] = trace.tokenCount;
  h["T"] = trace.frameCount;
  h["L_total"] = trace.layerCount;
  h["H_total"] = trace.headsPerLayer;
  auto heads = nlohmann::json::array();
  for (const auto& s : trace.storedHeads) heads.push_back({s.layer, s.head});
  h["storedHeads"] = std::move(heads);
  h["stepCount"] = trace.records.size();
  if (trace.referencePath) {
    auto path = nlohmann::json::array();
    for (const auto& w : *trace.referencePath) path.push_back({w.x, w.y});
    h["referencePath"] = std::move(path);
  }
  // Step indices are implicit (0..stepCount-1) unless a trace uses others.
  if (!steps_are_contiguous(trace)) {
    auto steps = nlohmann::json::array();
    for (const auto& r : trace.records) steps.push_back(r.step);
    h["steps"] = std::move(steps);
  }
  return h;
}

template <class T>
T header_field(const nlohmann::json& h, const char* key) {
  if (!h.contains(key)) throw FormatError(std::string("trace header missing '") + key + "'");
  try {
    return h.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("trace header field '") + key + "': " + e.what());
  }
}

}  // namespace detail

// Serializes `trace` to `out`. Returns the number of bytes written.
inline std::size_t write_trace(const EpisodeTrace& trace, std::ostream& out) {
  require_valid(trace);

  detail::ByteWriter w(out);
  w.bytes(kTraceMagic.data(), kTraceMagic.size());
  w.u16(kTraceVersion);
  const std::string header = detail::trace_header(trace).dump();
  w.u32(static_cast<std::uint32_t>(header.size()));
  w.bytes(header.data(), header.size());

  for (const auto& rec : trace.records) {
    w.u8(static_cast<std::uint8_t>(rec.action.type));
    w.f32(rec.action.amount);
    w.f32(rec.pose.x);
    w.f32(rec.pose.y);
    w.f32(rec.pose.z);
    w.f32(rec.pose.theta);
    for (const auto& head : trace.storedHeads) w.f32s(rec.heads.at(head).values());
  }
  return w.count();
}

inline EpisodeTrace read_trace(std::span<const std::uint8_t> bytes) {
  detail::ByteReader r(bytes);
  auto magic = r.take(4, "magic");
  if (std::memcmp(magic.data(), kTraceMagic.data(), 4) != 0) {
    throw FormatError("bad magic: not an ATRC trace");
  }
  const auto version = r.u16("version");
  if (version != kTraceVersion) {
    throw FormatError("unsupported ATRC version " + std::to_string(version));
  }
  const auto headerLen = r.u32("header length");
  auto headerBytes = r.take(headerLen, "header");

  nlohmann::json h;
  try {
    h = nlohmann::json::parse(headerBytes.begin(), headerBytes.end());
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(std::string("trace header is not valid JSON: ") + e.what());
  }
  if (!h.is_object()) throw FormatError("trace header must be a JSON object");

  EpisodeTrace t;
  t.episodeId = detail::header_field<std::string>(h, "episodeId");
  t.tokenCount = detail::header_field<std::size_t>(h, "N");
  t.frameCount = detail::header_field<std::size_t>(h, "T");
  t.layerCount = detail::header_field<int>(h, "L_total");
  t.headsPerLayer = detail::header_field<int>(h, "H_total");
  for (const auto& pair : detail::header_field<std::vector<std::array<int, 2>>>(h, "storedHeads")) {
    t.storedHeads.push_back({pair[0], pair[1]});
  }
  const auto stepCount = detail::header_field<std::size_t>(h, "stepCount");
  if (h.contains("referencePath")) {
    std::vector<Waypoint> path;
    for (const auto& p : detail::header_field<std::vector<std::array<double, 2>>>(h, "referencePath")) {
      path.push_back({p[0], p[1]});
    }
    t.referencePath = std::move(path);
  }
  std::vector<std::int64_t> steps;
  if (h.contains("steps")) {
    steps = detail::header_field<std::vector<std::int64_t>>(h, "steps");
    if (steps.size() != stepCount) {
      throw ValidationError("header lists " + std::to_string(steps.size()) + " step ids for " +
                            std::to_string(stepCount) + " steps");
    }
  }

  const std::size_t cells = t.frameCount * t.tokenCount;
  if (t.frameCount != 0 && cells / t.frameCount != t.tokenCount) {
    throw ValidationError("matrix dimensions overflow");
  }
  // Cheap sanity bound before allocating: the body must at least hold the
  // fixed per-step fields.
  if (stepCount > r.remaining() / 21 + 1) {
    throw TruncationError("header declares " + std::to_string(stepCount) +
                          " steps but the body is too short");
  }

  t.records.reserve(stepCount);
  for (std::size_t i = 0; i < stepCount; ++i) {
    AttentionRecord rec;
    rec.step = steps.empty() ? static_cast<std::int64_t>(i) : steps[i];
    const auto code = r.u8("action code");
    if (code > 3) throw ValidationError("step " + std::to_string(i) + ": unknown action code");
    rec.action.type = static_cast<ActionType>(code);
    rec.action.amount = r.f32("action scalar");
    rec.pose.x = r.f32("pose");
    rec.pose.y = r.f32("pose");
    rec.pose.z = r.f32("pose");
    rec.pose.theta = r.f32("pose");
    for (const auto& head : t.storedHeads) {
      AttentionMatrix m(t.frameCount, t.tokenCount);
      r.f32s(m.values(), "attention matrix");
      rec.heads.insert_or_assign(head, std::move(m));
    }
    t.records.push_back(std::move(rec));
  }
  if (r.remaining() != 0) {
    throw ValidationError(std::to_string(r.remaining()) + " trailing bytes after the declared " +
                          std::to_string(stepCount) + " steps");
  }
  require_valid(t);
  return t;
}

inline EpisodeTrace read_trace(std::istream& in) {
  std::vector<std::uint8_t> bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  return read_trace(std::span<const std::uint8_t>(bytes));
}

inline std::size_t write_trace_file(const EpisodeTrace& trace, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  const auto n = write_trace(trace, out);
  out.flush();
  if (!out) throw IoError("write to " + path.string() + " failed");
  return n;
}

inline EpisodeTrace read_trace_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return read_trace(in);
}

}  // namespace sentinel
