#pragma once

// Deterministic trace-driven playback simulator.
//
// Buffer model: `buffer` holds fully downloaded, unplayed seconds. While a
// chunk is in flight its downloaded fraction counts toward the controller's
// view of the buffer (x = buffer + fraction * duration), so x grows at C/R.
// Once playback has started it drains `buffer` at rate 1; when `buffer` hits
// zero playback stalls until the in-flight chunk completes.
//
// Time advances in steps that end at every integer second (trace changes),
// chunk completion, buffer exhaustion, startup, and phase boundaries.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "abrsim/control.hpp"
#include "abrsim/error.hpp"
#include "abrsim/estimator.hpp"
#include "abrsim/format.hpp"
#include "abrsim/media.hpp"
#include "abrsim/schemes/scheme.hpp"

namespace abrsim {

struct StartupRule {
  enum class Kind { latency, chunks_buffered };
  Kind kind = Kind::latency;
  double latency_s = 10.0;
  int chunks = 2;

  static StartupRule latency(double seconds) { return {Kind::latency, seconds, 0}; }
  static StartupRule chunks_buffered(int k) { return {Kind::chunks_buffered, 0.0, k}; }
};

inline constexpr double kInfiniteBuffer = std::numeric_limits<double>::infinity();

struct SimConfig {
  StartupRule startup = StartupRule::latency(10.0);
  double max_buffer = 120.0;
  std::optional<double> resume_margin;  // defaults to one chunk duration
  double rtt = 0.07;
  BandwidthEstimatorSpec estimator;
  std::optional<int> first_level;  // forced level for chunk 0
  bool loop_trace = true;

  double margin_for(double chunk_duration) const { return resume_margin.value_or(chunk_duration); }

  void validate(double chunk_duration) const {
    if (!(max_buffer > chunk_duration)) throw ConfigError("max_buffer must exceed the chunk duration");
    const double m = margin_for(chunk_duration);
    if (!(m > 0.0) || !(m < max_buffer)) throw ConfigError("resume_margin must be in (0, max_buffer)");
    if (!(rtt >= 0.0)) throw ConfigError("rtt must be >= 0");
    if (startup.kind == StartupRule::Kind::latency && !(startup.latency_s >= 0.0))
      throw ConfigError("startup latency must be >= 0");
    if (startup.kind == StartupRule::Kind::chunks_buffered && startup.chunks < 1)
      throw ConfigError("startup chunk count must be >= 1");
    estimator.validate();
  }
};

/// Smallest end time such that the trace delivers `bytes` starting at `start_clock`.
inline double advance_download(const BandwidthTrace& trace, double start_clock, std::int64_t bytes, bool loop = true) {
  if (bytes <= 0) throw DomainError("advance_download needs a positive byte count");
  if (!trace.has_positive_sample()) throw SimulationError("trace '" + trace.name() + "' never delivers data");
  double remaining = static_cast<double>(bytes) * 8.0 / 1000.0;
  double clock = start_clock;
  for (;;) {
    const double c = trace.bandwidth_at(clock, loop);
    const double seg = std::floor(clock) + 1.0 - clock;
    if (c > 0.0 && remaining <= c * seg) return clock + remaining / c;
    remaining -= c * seg;
    clock = std::floor(clock) + 1.0;
  }
}

struct PlaybackState {
  double clock = 0.0;
  double buffer = 0.0;  // complete, unplayed content (s)
  bool started = false;
  double startup_time = 0.0;
  std::size_t chunks_done = 0;
  double stall_total = 0.0;
  double played = 0.0;
  std::int64_t bytes_downloaded = 0;
};

struct StallInterval {
  double start = 0.0;
  double duration = 0.0;
};

/// Optional side outputs of the engine; the oracle runs without one.
struct StepRecorder {
  std::vector<BufferSample> trajectory;
  std::vector<StallInterval> stalls;
  ThroughputHistory throughput;
  double stall_this_chunk = 0.0;

  void add_stall(double start, double dt) {
    stall_this_chunk += dt;
    if (!stalls.empty()) {
      auto& last = stalls.back();
      if (last.start + last.duration == start) {
        last.duration += dt;
        return;
      }
    }
    stalls.push_back({start, dt});
  }
};

struct ChunkTransfer {
  double request_clock = 0.0;  // request sent (before rtt)
  double end_clock = 0.0;
  double stall_s = 0.0;
};

class PlaybackEngine {
 public:
  PlaybackEngine(const BandwidthTrace& trace, const SimConfig& config, double chunk_duration, std::size_t chunk_count)
      : trace_(trace), config_(config), duration_(chunk_duration), count_(chunk_count),
        margin_(config.margin_for(chunk_duration)) {
    config_.validate(chunk_duration);
    if (!trace.has_positive_sample()) throw SimulationError("trace '" + trace.name() + "' never delivers data");
  }

  const SimConfig& config() const noexcept { return config_; }
  double chunk_duration() const noexcept { return duration_; }
  std::size_t chunk_count() const noexcept { return count_; }

  /// Pauses downloading while the buffer is at or above max_buffer, until it
  /// drains to max_buffer - resume_margin.
  void wait_for_capacity(PlaybackState& s, StepRecorder* rec) const {
    if (!(s.buffer >= config_.max_buffer)) return;
    if (!s.started) start(s);
    const double target = config_.max_buffer - margin_;
    double left = s.buffer - target;
    while (left > 0.0) {
      const double sec_end = std::floor(s.clock) + 1.0;
      double dt = sec_end - s.clock;
      bool last = false;
      if (left <= dt) {
        dt = left;
        last = true;
      }
      if (rec) rec->trajectory.push_back({s.clock, dt, s.buffer});
      s.buffer -= dt;
      s.played += dt;
      s.clock += dt;
      left -= dt;
      if (last) break;
    }
  }

  /// Requests and downloads one chunk of `bytes`, advancing playback meanwhile.
  ChunkTransfer fetch_chunk(PlaybackState& s, std::int64_t bytes, StepRecorder* rec) const {
    if (bytes <= 0) throw SimulationError("chunk size must be positive");
    ChunkTransfer out;
    out.request_clock = s.clock;
    if (rec) rec->stall_this_chunk = 0.0;

    const double total = static_cast<double>(bytes) * 8.0 / 1000.0;
    double remaining = total;
    enum class Phase { rtt, transfer };
    Phase phase = config_.rtt > 0.0 ? Phase::rtt : Phase::transfer;
    double rtt_left = config_.rtt;
    const bool latency_rule = config_.startup.kind == StartupRule::Kind::latency;

    for (;;) {
      enum class Event { second, rtt_end, complete, exhaust, startup };
      const double sec_end = std::floor(s.clock) + 1.0;
      double dt = sec_end - s.clock;
      Event ev = Event::second;
      double c = 0.0;
      if (phase == Phase::transfer) c = trace_.bandwidth_at(s.clock, config_.loop_trace);

      if (s.started && s.buffer > 0.0 && s.buffer < dt) {
        dt = s.buffer;
        ev = Event::exhaust;
      }
      if (!s.started && latency_rule && s.buffer > 0.0 && s.clock < config_.startup.latency_s &&
          config_.startup.latency_s - s.clock < dt) {
        dt = config_.startup.latency_s - s.clock;
        ev = Event::startup;
      }
      if (phase == Phase::rtt && rtt_left <= dt) {
        dt = rtt_left;
        ev = Event::rtt_end;
      }
      if (phase == Phase::transfer && c > 0.0 && remaining / c <= dt) {
        dt = remaining / c;
        ev = Event::complete;
      }

      if (rec) {
        const double partial = phase == Phase::transfer ? (1.0 - remaining / total) * duration_ : 0.0;
        rec->trajectory.push_back({s.clock, dt, s.buffer + partial});
        if (phase == Phase::transfer) {
          const auto sec = static_cast<long long>(std::floor(s.clock));
          if (sec != rec->throughput.last_second) {
            rec->throughput.per_second_kbps.push_back(c);
            rec->throughput.last_second = sec;
          }
        }
      }

      if (s.started) {
        if (s.buffer > 0.0) {
          const double before = s.buffer;
          s.buffer = dt >= before ? 0.0 : before - dt;
          s.played += dt;
        } else {
          s.stall_total += dt;
          out.stall_s += dt;
          if (rec) rec->add_stall(s.clock, dt);
        }
      }
      if (phase == Phase::transfer) remaining -= c * dt;
      if (phase == Phase::rtt) rtt_left -= dt;
      s.clock += dt;

      switch (ev) {
        case Event::second:
        case Event::exhaust:
          break;
        case Event::startup:
          start(s);
          break;
        case Event::rtt_end:
          phase = Phase::transfer;
          break;
        case Event::complete:
          s.buffer += duration_;
          s.chunks_done += 1;
          s.bytes_downloaded += bytes;
          if (!s.started) {
            const bool ready = latency_rule ? s.clock >= config_.startup.latency_s
                                            : s.chunks_done >= static_cast<std::size_t>(config_.startup.chunks);
            if (ready || s.chunks_done == count_) start(s);
          }
          out.end_clock = s.clock;
          if (rec) {
            const double elapsed = out.end_clock - out.request_clock;
            rec->throughput.per_chunk_kbps.push_back(elapsed > 0.0 ? total / elapsed : c);
          }
          return out;
      }
    }
  }

 private:
  static void start(PlaybackState& s) {
    s.started = true;
    s.startup_time = s.clock;
  }

  const BandwidthTrace& trace_;
  SimConfig config_;
  double duration_;
  std::size_t count_;
  double margin_;
};

struct DecisionRecord {
  std::size_t chunk = 0;
  int level = 1;
  double bitrate_kbps = 0.0;
  std::optional<double> quality;
  double dl_start = 0.0;
  double dl_end = 0.0;
  double buffer = 0.0;
  double est_kbps = 0.0;
  std::optional<double> u;
  int allowed_top = 1;
  double stall_s = 0.0;  // stall while this chunk was pending
  std::int64_t bytes = 0;
};

struct SessionLog {
  std::string scheme;
  std::string trace;
  std::string video;
  double chunk_duration = 0.0;
  std::vector<DecisionRecord> decisions;
  std::vector<StallInterval> stalls;
  double startup_latency = 0.0;
  double total_stall = 0.0;            // accumulated step by step
  double total_stall_wallclock = 0.0;  // end clock - startup - playback time
  double end_clock = 0.0;
  double played = 0.0;
  double final_buffer = 0.0;
  std::int64_t bytes_downloaded = 0;
  std::uint64_t evaluations = 0;

  std::vector<int> levels() const {
    std::vector<int> out;
    out.reserve(decisions.size());
    for (const auto& d : decisions) out.push_back(d.level);
    return out;
  }
  double stall_interval_sum() const {
    double s = 0.0;
    for (const auto& st : stalls) s += st.duration;
    return s;
  }
};

/// Per-position level caps; an empty vector leaves every level allowed.
using LevelCaps = std::vector<int>;

inline constexpr double kConservationTolerance = 1e-6;

inline SessionLog simulate_session(AbrScheme& scheme, const BandwidthTrace& trace, const VideoManifest& manifest,
                                   const SimConfig& config, const LevelCaps& caps = {}) {
  const std::size_t n = manifest.num_chunks();
  if (!caps.empty() && caps.size() != n) throw SimulationError("level caps do not match chunk count");
  for (int cap : caps)
    if (cap < 1 || cap > manifest.num_levels()) throw SimulationError("level cap out of range");

  PlaybackEngine engine(trace, config, manifest.chunk_duration_s, n);
  PlaybackState state;
  StepRecorder rec;
  SessionLog log;
  log.scheme = scheme.name();
  log.trace = trace.name();
  log.video = manifest.name;
  log.chunk_duration = manifest.chunk_duration_s;
  log.decisions.reserve(n);

  std::optional<int> last_level;
  for (std::size_t i = 0; i < n; ++i) {
    engine.wait_for_capacity(state, &rec);
    scheme.observe(rec.trajectory);
    rec.trajectory.clear();

    const double est = estimate_bandwidth(rec.throughput, config.estimator).value_or(manifest.avg_bitrate(1));
    DecisionContext ctx;
    ctx.chunk_index = i;
    ctx.buffer = state.buffer;
    ctx.clock = state.clock;
    ctx.est_bandwidth = est;
    ctx.last_level = last_level;
    ctx.manifest = &manifest;
    ctx.allowed_tops = caps;
    ctx.allowed_top = caps.empty() ? manifest.num_levels() : caps[i];
    ctx.playing = state.started;
    ctx.playing_indicator = (state.started && state.buffer >= manifest.chunk_duration_s) ? 1 : 0;
    ctx.chunk_throughputs = rec.throughput.per_chunk_kbps;

    Decision d;
    if (i == 0 && config.first_level) {
      d.level = std::min(*config.first_level, ctx.allowed_top);
    } else {
      d = scheme.decide(ctx);
    }
    if (d.level < 1 || d.level > ctx.allowed_top)
      throw SimulationError("scheme '" + scheme.name() + "' chose invalid level " + std::to_string(d.level) +
                            " for chunk " + std::to_string(i) + " (allowed 1.." + std::to_string(ctx.allowed_top) +
                            ")");

    const ChunkMeta& chunk = manifest.chunk(d.level, i);
    const ChunkTransfer tr = engine.fetch_chunk(state, chunk.size_bytes, &rec);

    DecisionRecord r;
    r.chunk = i;
    r.level = d.level;
    r.bitrate_kbps = chunk.bitrate_kbps();
    r.quality = chunk.quality;
    r.dl_start = tr.request_clock;
    r.dl_end = tr.end_clock;
    r.buffer = ctx.buffer;
    r.est_kbps = est;
    r.u = d.u;
    r.allowed_top = ctx.allowed_top;
    r.stall_s = tr.stall_s;
    r.bytes = chunk.size_bytes;
    log.decisions.push_back(r);
    last_level = d.level;
  }

  log.stalls = rec.stalls;
  log.startup_latency = state.startup_time;
  log.total_stall = state.stall_total;
  log.end_clock = state.clock;
  log.played = state.played;
  log.final_buffer = state.buffer;
  log.bytes_downloaded = state.bytes_downloaded;
  log.total_stall_wallclock = std::max(0.0, state.clock - state.startup_time - state.played);
  log.evaluations = scheme.evaluations();

  const double content = static_cast<double>(n) * manifest.chunk_duration_s;
  if (std::abs(content - (log.played + log.final_buffer)) > kConservationTolerance)
    throw SimulationError("content conservation violated");
  if (std::abs(log.total_stall - log.total_stall_wallclock) > kConservationTolerance)
    throw SimulationError("stall accounting mismatch");
  return log;
}

inline const char* kDecisionCsvHeader =
    "chunk,level,bitrate_kbps,vmaf,dl_start_s,dl_end_s,buffer_s,est_kbps,u,allowed_max,stall_s";

inline std::string decisions_to_csv(const SessionLog& log) {
  std::string out = kDecisionCsvHeader;
  out += '\n';
  for (const auto& d : log.decisions) {
    out += std::to_string(d.chunk) + ',' + std::to_string(d.level) + ',' + format_double(d.bitrate_kbps) + ',' +
           format_optional(d.quality) + ',' + format_double(d.dl_start) + ',' + format_double(d.dl_end) + ',' +
           format_double(d.buffer) + ',' + format_double(d.est_kbps) + ',' + format_optional(d.u) + ',' +
           std::to_string(d.allowed_top) + ',' + format_double(d.stall_s) + '\n';
  }
  return out;
}

inline nlohmann::json session_to_json(const SessionLog& log) {
  using nlohmann::json;
  json j;
  j["scheme"] = log.scheme;
  j["trace"] = log.trace;
  j["video"] = log.video;
  j["chunk_duration_s"] = log.chunk_duration;
  j["startup_latency_s"] = log.startup_latency;
  j["total_stall_s"] = log.total_stall;
  j["total_stall_wallclock_s"] = log.total_stall_wallclock;
  j["end_clock_s"] = log.end_clock;
  j["played_s"] = log.played;
  j["final_buffer_s"] = log.final_buffer;
  j["bytes_downloaded"] = log.bytes_downloaded;
  j["objective_evaluations"] = log.evaluations;
  j["stalls"] = json::array();
  for (const auto& s : log.stalls) j["stalls"].push_back({{"start_s", s.start}, {"duration_s", s.duration}});
  j["decisions"] = json::array();
  for (const auto& d : log.decisions) {
    json jd;
    jd["chunk"] = d.chunk;
    jd["level"] = d.level;
    jd["bitrate_kbps"] = d.bitrate_kbps;
    jd["vmaf"] = d.quality ? json(*d.quality) : json(nullptr);
    jd["dl_start_s"] = d.dl_start;
    jd["dl_end_s"] = d.dl_end;
    jd["buffer_s"] = d.buffer;
    jd["est_kbps"] = d.est_kbps;
    jd["u"] = d.u ? json(*d.u) : json(nullptr);
    jd["allowed_max"] = d.allowed_top;
    jd["stall_s"] = d.stall_s;
    jd["bytes"] = d.bytes;
    j["decisions"].push_back(jd);
  }
  return j;
}

}  // namespace abrsim
