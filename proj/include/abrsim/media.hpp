#pragma once

// Bandwidth traces, video manifests and the per-track statistics that the
// VBR-aware schemes read (track averages, look-ahead windows, size quartiles).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "abrsim/error.hpp"
#include "abrsim/format.hpp"

namespace abrsim {

/// Per-second link bandwidth in kbps. Sample k holds on [k, k+1).
class BandwidthTrace {
 public:
  BandwidthTrace() = default;
  BandwidthTrace(std::string name, std::vector<double> kbps)
      : name_(std::move(name)), kbps_(std::move(kbps)) {
    if (kbps_.empty()) throw ValidationError("trace '" + name_ + "' has no samples");
    for (std::size_t i = 0; i < kbps_.size(); ++i) {
      if (!(kbps_[i] >= 0.0) || !std::isfinite(kbps_[i]))
        throw ValidationError("trace '" + name_ + "': invalid bandwidth at t=" + std::to_string(i));
    }
  }

  const std::string& name() const noexcept { return name_; }
  std::size_t size() const noexcept { return kbps_.size(); }
  const std::vector<double>& samples() const noexcept { return kbps_; }
  double at_second(std::size_t k) const { return kbps_.at(k); }
  double duration_s() const noexcept { return static_cast<double>(kbps_.size()); }

  double mean_kbps() const {
    return std::accumulate(kbps_.begin(), kbps_.end(), 0.0) / static_cast<double>(kbps_.size());
  }

  bool has_positive_sample() const {
    return std::any_of(kbps_.begin(), kbps_.end(), [](double v) { return v > 0.0; });
  }

  /// Zero-order-hold lookup. With `loop` the trace repeats modulo its length.
  double bandwidth_at(double clock, bool loop) const {
    const double sec = std::floor(clock);
    const auto idx = static_cast<std::size_t>(sec < 0.0 ? 0.0 : sec);
    if (idx < kbps_.size()) return kbps_[idx];
    if (!loop)
      throw SimulationError("trace '" + name_ + "' exhausted at t=" + format_double(clock) +
                            " s and looping is disabled");
    return kbps_[idx % kbps_.size()];
  }

 private:
  std::string name_;
  std::vector<double> kbps_;
};

inline BandwidthTrace concatenate(const BandwidthTrace& a, const BandwidthTrace& b) {
  std::vector<double> all = a.samples();
  all.insert(all.end(), b.samples().begin(), b.samples().end());
  return BandwidthTrace(a.name() + "+" + b.name(), std::move(all));
}

inline constexpr std::string_view kTraceHeader = "t_s,bandwidth_kbps";

/// Parses the `t_s,bandwidth_kbps` CSV. Rows must start at 0 and step by exactly 1 s.
inline BandwidthTrace parse_trace(std::string_view text, std::string name = "trace") {
  std::vector<double> kbps;
  std::size_t pos = 0;
  int line_no = 0;
  bool header_seen = false;
  while (pos <= text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) {
      if (pos > text.size()) break;
      continue;
    }
    if (!header_seen) {
      if (line != kTraceHeader)
        throw ParseError("expected header '" + std::string(kTraceHeader) + "'", line_no);
      header_seen = true;
      continue;
    }
    const auto comma = line.find(',');
    if (comma == std::string_view::npos || line.find(',', comma + 1) != std::string_view::npos)
      throw ParseError("expected two comma-separated fields", line_no);
    const auto t = parse_int(line.substr(0, comma));
    const auto bw = parse_double(line.substr(comma + 1));
    if (!t || !bw) throw ParseError("malformed row '" + std::string(line) + "'", line_no);
    const auto expected = static_cast<long long>(kbps.size());
    if (*t != expected) {
      if (*t > expected)
        throw ParseError("gap at t=" + std::to_string(expected) + " (next row has t=" +
                             std::to_string(*t) + ")",
                         line_no);
      throw ParseError("non-monotone timestamp t=" + std::to_string(*t), line_no);
    }
    if (!(*bw >= 0.0) || !std::isfinite(*bw))
      throw ParseError("negative or non-finite bandwidth", line_no);
    kbps.push_back(*bw);
  }
  if (!header_seen) throw ParseError("empty trace file");
  if (kbps.empty()) throw ParseError("trace has no samples");
  return BandwidthTrace(std::move(name), std::move(kbps));
}

inline std::string serialize_trace(const BandwidthTrace& trace) {
  std::string out(kTraceHeader);
  out += '\n';
  for (std::size_t i = 0; i < trace.size(); ++i) {
    out += std::to_string(i);
    out += ',';
    out += format_double(trace.at_second(i));
    out += '\n';
  }
  return out;
}

struct ChunkMeta {
  std::int64_t size_bytes = 0;
  double duration_s = 0.0;
  std::optional<double> quality;  // VMAF, absent for quality-blind runs

  double bitrate_kbps() const { return (static_cast<double>(size_bytes) * 8.0 / 1000.0) / duration_s; }
  double kilobits() const { return static_cast<double>(size_bytes) * 8.0 / 1000.0; }
};

struct Track {
  int level = 0;  // 1-based
  double declared_bitrate_kbps = 0.0;
  std::vector<ChunkMeta> chunks;
};

/// Mean bitrate of a whole track: total kilobits over total playback seconds.
inline double track_avg_bitrate(const Track& track) {
  double kbits = 0.0, secs = 0.0;
  for (const auto& c : track.chunks) {
    kbits += c.kilobits();
    secs += c.duration_s;
  }
  return kbits / secs;
}

/// Mean bitrate of chunks [start, min(start + window, n)).
inline double windowed_avg_bitrate(const Track& track, std::size_t start, std::size_t window) {
  const std::size_t n = track.chunks.size();
  if (start >= n) throw DomainError("window start " + std::to_string(start) + " out of range");
  if (window == 0) throw DomainError("window must be >= 1");
  const std::size_t stop = std::min(n, start + window);
  double kbits = 0.0, secs = 0.0;
  for (std::size_t i = start; i < stop; ++i) {
    kbits += track.chunks[i].kilobits();
    secs += track.chunks[i].duration_s;
  }
  return kbits / secs;
}

class VideoManifest {
 public:
  std::string name;
  double chunk_duration_s = 0.0;
  bool is_vbr = false;
  std::vector<Track> tracks;

  int num_levels() const noexcept { return static_cast<int>(tracks.size()); }
  std::size_t num_chunks() const noexcept { return tracks.empty() ? 0 : tracks.front().chunks.size(); }

  const Track& track(int level) const {
    if (level < 1 || level > num_levels())
      throw DomainError("level " + std::to_string(level) + " out of range");
    return tracks[static_cast<std::size_t>(level - 1)];
  }
  const ChunkMeta& chunk(int level, std::size_t index) const { return track(level).chunks.at(index); }
  double chunk_bitrate(int level, std::size_t index) const { return chunk(level, index).bitrate_kbps(); }

  bool has_quality() const {
    for (const auto& t : tracks)
      for (const auto& c : t.chunks)
        if (!c.quality) return false;
    return !tracks.empty();
  }

  double quality(int level, std::size_t index) const {
    const auto& q = chunk(level, index).quality;
    if (!q)
      throw ConfigError("manifest '" + name + "' has no quality for level " + std::to_string(level) +
                        " chunk " + std::to_string(index));
    return *q;
  }

  /// Track averages r(l), index 0 = level 1. Cached after validate().
  const std::vector<double>& avg_bitrates() const { return avg_bitrates_; }
  double avg_bitrate(int level) const { return avg_bitrates_.at(static_cast<std::size_t>(level - 1)); }

  /// Sorts tracks by level and checks every Track/VideoManifest invariant.
  void validate() {
    if (!(chunk_duration_s > 0.0) || !std::isfinite(chunk_duration_s))
      throw ValidationError("manifest '" + name + "': missing or non-positive chunk duration");
    if (tracks.size() < 2) throw ValidationError("manifest '" + name + "': need at least 2 tracks");
    std::sort(tracks.begin(), tracks.end(), [](const Track& a, const Track& b) { return a.level < b.level; });
    for (std::size_t i = 0; i < tracks.size(); ++i) {
      if (tracks[i].level != static_cast<int>(i) + 1)
        throw ValidationError("manifest '" + name + "': non-contiguous levels (expected level " +
                              std::to_string(i + 1) + ")");
    }
    const std::size_t n = tracks.front().chunks.size();
    if (n == 0) throw ValidationError("manifest '" + name + "': tracks have no chunks");
    for (const auto& t : tracks) {
      if (t.chunks.size() != n) throw ValidationError("manifest '" + name + "': ragged chunk counts");
      if (!(t.declared_bitrate_kbps > 0.0))
        throw ValidationError("manifest '" + name + "': declared bitrate must be positive");
      for (std::size_t i = 0; i < n; ++i) {
        const auto& c = t.chunks[i];
        if (c.size_bytes <= 0) throw ValidationError("manifest '" + name + "': chunk size must be positive");
        if (c.duration_s != chunk_duration_s)
          throw ValidationError("manifest '" + name + "': chunk durations differ across tracks");
        if (c.quality && !(*c.quality >= 0.0 && *c.quality <= 100.0))
          throw ValidationError("manifest '" + name + "': quality outside [0,100]");
        if (!is_vbr) {
          const double expect = t.declared_bitrate_kbps * 1000.0 * chunk_duration_s / 8.0;
          if (std::abs(static_cast<double>(c.size_bytes) - expect) > 1.0)
            throw ValidationError("manifest '" + name + "': CBR chunk size does not match declared bitrate at level " +
                                  std::to_string(t.level));
        }
      }
    }
    avg_bitrates_.clear();
    for (const auto& t : tracks) avg_bitrates_.push_back(track_avg_bitrate(t));
    for (std::size_t i = 1; i < avg_bitrates_.size(); ++i) {
      if (avg_bitrates_[i] < avg_bitrates_[i - 1])
        throw ValidationError("manifest '" + name + "': track average bitrate decreases at level " +
                              std::to_string(i + 1));
    }
  }

 private:
  std::vector<double> avg_bitrates_;
};

/// Builds a validated CBR manifest: every chunk is declared_bitrate * duration / 8 bytes.
inline VideoManifest make_cbr_manifest(std::string name, const std::vector<double>& bitrates_kbps,
                                       double chunk_duration_s, std::size_t chunk_count,
                                       const std::vector<double>& qualities = {}) {
  VideoManifest m;
  m.name = std::move(name);
  m.chunk_duration_s = chunk_duration_s;
  m.is_vbr = false;
  for (std::size_t l = 0; l < bitrates_kbps.size(); ++l) {
    Track t;
    t.level = static_cast<int>(l) + 1;
    t.declared_bitrate_kbps = bitrates_kbps[l];
    const auto bytes = static_cast<std::int64_t>(std::llround(bitrates_kbps[l] * 1000.0 * chunk_duration_s / 8.0));
    for (std::size_t i = 0; i < chunk_count; ++i) {
      ChunkMeta c{bytes, chunk_duration_s, std::nullopt};
      if (l < qualities.size()) c.quality = qualities[l];
      t.chunks.push_back(c);
    }
    m.tracks.push_back(std::move(t));
  }
  m.validate();
  return m;
}

inline VideoManifest parse_manifest(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("manifest is not valid JSON: ") + e.what());
  }
  VideoManifest m;
  try {
    if (!j.is_object()) throw ValidationError("manifest must be a JSON object");
    m.name = j.value("name", std::string("video"));
    if (!j.contains("chunk_duration_s") || j["chunk_duration_s"].is_null())
      throw ValidationError("manifest '" + m.name + "': missing chunk_duration_s");
    m.chunk_duration_s = j.at("chunk_duration_s").get<double>();
    m.is_vbr = j.value("is_vbr", false);
    if (!j.contains("tracks") || !j["tracks"].is_array())
      throw ValidationError("manifest '" + m.name + "': missing tracks array");
    for (const auto& jt : j["tracks"]) {
      Track t;
      t.level = jt.at("level").get<int>();
      t.declared_bitrate_kbps = jt.at("declared_bitrate_kbps").get<double>();
      for (const auto& jc : jt.at("chunks")) {
        ChunkMeta c;
        c.size_bytes = jc.at("size_bytes").get<std::int64_t>();
        c.duration_s = m.chunk_duration_s;
        if (jc.contains("vmaf") && !jc["vmaf"].is_null()) c.quality = jc["vmaf"].get<double>();
        t.chunks.push_back(c);
      }
      m.tracks.push_back(std::move(t));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("manifest schema error: ") + e.what());
  }
  m.validate();
  return m;
}

inline nlohmann::json manifest_to_json(const VideoManifest& m) {
  nlohmann::json j;
  j["name"] = m.name;
  j["chunk_duration_s"] = m.chunk_duration_s;
  j["is_vbr"] = m.is_vbr;
  j["tracks"] = nlohmann::json::array();
  for (const auto& t : m.tracks) {
    nlohmann::json jt;
    jt["level"] = t.level;
    jt["declared_bitrate_kbps"] = t.declared_bitrate_kbps;
    jt["chunks"] = nlohmann::json::array();
    for (const auto& c : t.chunks) {
      nlohmann::json jc;
      jc["size_bytes"] = c.size_bytes;
      jc["vmaf"] = c.quality ? nlohmann::json(*c.quality) : nlohmann::json(nullptr);
      jt["chunks"].push_back(jc);
    }
    j["tracks"].push_back(jt);
  }
  return j;
}

enum class Quartile : std::uint8_t { Q1 = 1, Q2 = 2, Q3 = 3, Q4 = 4 };

struct ChunkClass {
  std::vector<Quartile> classes;
  int reference_level = 0;

  Quartile at(std::size_t i) const { return classes.at(i); }
  bool is_q4(std::size_t i) const { return classes.at(i) == Quartile::Q4; }
};

/// Size-quartile category per playback position, ranked on the reference track.
/// Ties break by position, so rank r of n lands in quartile floor(4r/n).
inline ChunkClass classify_chunks(const VideoManifest& manifest, int reference_level) {
  const Track& ref = manifest.track(reference_level);
  const std::size_t n = ref.chunks.size();
  if (n < 4) throw ValidationError("chunk classification needs at least 4 chunks, got " + std::to_string(n));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return ref.chunks[a].size_bytes < ref.chunks[b].size_bytes;
  });
  ChunkClass out;
  out.reference_level = reference_level;
  out.classes.resize(n);
  for (std::size_t rank = 0; rank < n; ++rank) {
    const auto q = std::min<std::size_t>(3, (4 * rank) / n);
    out.classes[order[rank]] = static_cast<Quartile>(q + 1);
  }
  return out;
}

inline int middle_level(const VideoManifest& m) { return (m.num_levels() + 1) / 2; }

}  // namespace abrsim
