#pragma once

// QUAD: quality-aware PI control. Trades bandwidth overshoot, distance from a
// target quality and quality changes in one normalized least-squares objective.

#include <algorithm>
#include <limits>
#include <vector>

#include "abrsim/schemes/scheme.hpp"

namespace abrsim {

struct QuadParams {
  PidParams pid = default_pid();
  double target_quality = 80.0;
  double alpha = 1.0;
  double eta = 1.0;
  int fair_level = 2;
  double low_buffer_multiplier = 4.0;

  static PidParams default_pid() {
    PidParams p;
    p.beta = 1.0;
    return p;
  }

  void validate() const {
    pid.validate();
    if (!(target_quality > 0.0 && target_quality <= 100.0)) throw ConfigError("target quality must be in (0,100]");
    if (alpha < 0.0 || eta < 0.0) throw ConfigError("QUAD weights must be >= 0");
    if (fair_level < 1) throw ConfigError("QUAD fair level must be >= 1");
    if (low_buffer_multiplier < 0.0) throw ConfigError("QUAD low buffer multiplier must be >= 0");
  }
};

struct QuadTerms {
  double overshoot = 0.0;  // (max(0, uR - C) / C)^2
  double target = 0.0;     // ((Q_r - Q) / Q_r)^2
  double change = 0.0;     // ((Q - Q_prev) / Q_r)^2
};

inline QuadTerms quad_terms(const QuadParams& p, const DecisionContext& ctx, double u, int level) {
  const VideoManifest& m = ctx.video();
  const std::size_t i = ctx.chunk_index;
  const double c = ctx.est_bandwidth;
  const double over = std::max(0.0, u * m.chunk_bitrate(level, i) - c) / c;
  const double q = m.quality(level, i);
  const double dq = (p.target_quality - q) / p.target_quality;
  QuadTerms t{over * over, dq * dq, 0.0};
  if (ctx.last_level && i > 0) {
    const double ch = (q - m.quality(*ctx.last_level, i - 1)) / p.target_quality;
    t.change = ch * ch;
  }
  return t;
}

class QuadScheme final : public AbrScheme {
 public:
  explicit QuadScheme(QuadParams p = {}) : p_(p) { p_.validate(); }

  std::string name() const override { return "quad"; }

  void observe(std::span<const BufferSample> samples) override {
    integrate_error(state_, samples, [this](double) { return p_.pid.target_buffer; });
  }

  Decision decide(const DecisionContext& ctx) override {
    const VideoManifest& m = ctx.video();
    if (!m.has_quality()) throw ConfigError("QUAD needs per-chunk quality in the manifest");
    const AntiWindup aw = anti_windup(
        pid_output(p_.pid, ctx.buffer, state_.integral, p_.pid.target_buffer, ctx.playing_indicator), p_.pid);
    if (aw.freeze_integral) state_.frozen = true;
    const std::size_t i = ctx.chunk_index;

    if (ctx.buffer < p_.low_buffer_multiplier * ctx.chunk_duration()) {
      std::vector<double> rates;
      for (int l = 1; l <= ctx.allowed_top; ++l) rates.push_back(m.chunk_bitrate(l, i));
      const int level = std::min({p_.fair_level, bitrate_from_u(aw.u, ctx.est_bandwidth, rates), ctx.allowed_top});
      return {level, aw.u};
    }

    double best = std::numeric_limits<double>::infinity();
    int best_level = 1;
    for (int l = 1; l <= ctx.allowed_top; ++l) {
      ++evaluations_;
      const QuadTerms t = quad_terms(p_, ctx, aw.u, l);
      const double j = t.overshoot + p_.alpha * t.target + p_.eta * t.change;
      if (j < best) {
        best = j;
        best_level = l;
      }
    }
    return {best_level, aw.u};
  }

  const PidState& state() const noexcept { return state_; }
  const QuadParams& params() const noexcept { return p_; }

 private:
  QuadParams p_;
  PidState state_;
};

}  // namespace abrsim
