#pragma once

// CAVA: VBR-aware control. An outer loop sets the target buffer from the
// size of upcoming chunks; the inner PI controller plus look-ahead works on
// windowed track bitrates and treats complex (Q4) chunks differently.

#include <algorithm>
#include <limits>
#include <optional>

#include "abrsim/schemes/pia.hpp"

namespace abrsim {

struct CavaParams {
  PidParams pid = default_pid();
  int horizon = 5;
  int inner_window = 20;
  int outer_window = 40;
  double alpha_q4 = 1.1;
  double alpha_q123 = 0.8;
  int low_level_cutoff = 2;
  double safe_buffer = 10.0;
  double base_target_buffer = 60.0;
  std::optional<int> reference_level;  // defaults to the middle track
  bool q4_low_buffer_heuristic = false;

  static PidParams default_pid() {
    PidParams p;
    p.beta = 1.0;
    return p;
  }

  void validate() const {
    pid.validate();
    if (horizon < 1) throw ConfigError("CAVA horizon must be >= 1");
    if (inner_window < horizon) throw ConfigError("CAVA inner window must be >= horizon");
    if (outer_window < 1) throw ConfigError("CAVA outer window must be >= 1");
    if (!(alpha_q4 > 1.0 && alpha_q123 < 1.0 && alpha_q123 > 0.0))
      throw ConfigError("CAVA needs alpha_q4 > 1 > alpha_q123 > 0");
    if (low_level_cutoff < 1) throw ConfigError("CAVA low level cutoff must be >= 1");
    if (safe_buffer < 0.0) throw ConfigError("CAVA safe buffer must be >= 0");
    if (!(base_target_buffer > 0.0)) throw ConfigError("CAVA base target must be > 0");
  }
};

/// Outer loop: base target scaled by how much larger the next W' chunks of the
/// current track are than that track's average, clamped to [1, 2].
inline double cava_outer_target(const DecisionContext& ctx, const CavaParams& p) {
  if (!ctx.last_level) return p.base_target_buffer;
  const VideoManifest& m = ctx.video();
  const Track& t = m.track(*ctx.last_level);
  const double ratio =
      windowed_avg_bitrate(t, ctx.chunk_index, static_cast<std::size_t>(p.outer_window)) / m.avg_bitrate(*ctx.last_level);
  return p.base_target_buffer * std::clamp(ratio, 1.0, 2.0);
}

class CavaScheme final : public AbrScheme {
 public:
  explicit CavaScheme(CavaParams p = {}) : p_(p), target_(p.base_target_buffer) { p_.validate(); }

  std::string name() const override { return "cava"; }

  void observe(std::span<const BufferSample> samples) override {
    integrate_error(state_, samples, [this](double) { return target_; });
  }

  Decision decide(const DecisionContext& ctx) override {
    const VideoManifest& m = ctx.video();
    if (!classes_ || class_source_ != &m) {
      classes_ = classify_chunks(m, p_.reference_level.value_or(middle_level(m)));
      class_source_ = &m;
    }
    const std::size_t i = ctx.chunk_index;
    target_ = cava_outer_target(ctx, p_);

    const AntiWindup aw =
        anti_windup(pid_output(p_.pid, ctx.buffer, state_.integral, target_, ctx.playing_indicator), p_.pid);
    if (aw.force_max) {
      state_.frozen = true;
      return {ctx.allowed_top, aw.u};
    }

    const bool q4 = classes_->is_q4(i);
    const double eta = (i > 0 && classes_->is_q4(i - 1) != q4) ? 0.0 : 1.0;
    double alpha = q4 ? p_.alpha_q4 : p_.alpha_q123;
    if (q4 && p_.q4_low_buffer_heuristic && ctx.buffer < p_.safe_buffer) alpha = 1.0;

    int level = inner_argmin(ctx, aw.u, alpha, eta);
    if (!q4 && level <= p_.low_level_cutoff && ctx.buffer > p_.safe_buffer) level = inner_argmin(ctx, aw.u, 1.0, eta);
    return {level, aw.u};
  }

  const PidState& state() const noexcept { return state_; }
  double current_target() const noexcept { return target_; }

  /// Inner objective for one level, exposed for inspection.
  double inner_objective(const DecisionContext& ctx, double u, double alpha, double eta, int level) {
    const VideoManifest& m = ctx.video();
    const double rbar =
        windowed_avg_bitrate(m.track(level), ctx.chunk_index, static_cast<std::size_t>(p_.inner_window));
    const RolloutStart start{ctx.buffer, state_.integral, ctx.playing};
    // The rollout uses the inflated/deflated bandwidth throughout.
    double q = rollout_tracking_cost(p_.pid, p_.pid.kp, target_, start, u, ctx.chunk_duration(), rbar,
                                     alpha * ctx.est_bandwidth, p_.horizon);
    evaluations_ += static_cast<std::uint64_t>(p_.horizon);
    if (ctx.last_level) {
      const double d = m.avg_bitrate(level) - m.avg_bitrate(*ctx.last_level);
      q += eta * d * d;
    }
    return q;
  }

 private:
  int inner_argmin(const DecisionContext& ctx, double u, double alpha, double eta) {
    double best = std::numeric_limits<double>::infinity();
    int best_level = 1;
    for (int l = 1; l <= ctx.allowed_top; ++l) {
      const double q = inner_objective(ctx, u, alpha, eta, l);
      if (q < best) {
        best = q;
        best_level = l;
      }
    }
    return best_level;
  }

  CavaParams p_;
  PidState state_;
  double target_;
  std::optional<ChunkClass> classes_;
  const VideoManifest* class_source_ = nullptr;
};

}  // namespace abrsim
