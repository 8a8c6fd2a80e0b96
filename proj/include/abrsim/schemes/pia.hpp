#pragma once

// PIA: PI buffer controller plus a short least-squares look-ahead, and PIA-E,
// which ramps kp and the target buffer during startup.

#include <algorithm>
#include <limits>
#include <optional>
#include <span>

#include "abrsim/control.hpp"
#include "abrsim/schemes/scheme.hpp"

namespace abrsim {

/// Rollout state for the look-ahead: buffer, integral and playback flag.
struct RolloutStart {
  double x = 0.0;
  double integral = 0.0;
  bool playing = false;
};

/// Tracking cost sum_k (u_k * rate - bandwidth)^2 over `horizon` steps. Each
/// step downloads one chunk of `rate` at `bandwidth` and updates x and the
/// integral with the same discretization the controller uses online.
/// `u0` is the (already clamped) controller output for the first step.
inline double rollout_tracking_cost(const PidParams& p, double kp, double target, RolloutStart s, double u0,
                                    double delta, double rate, double bandwidth, int horizon) {
  PidParams q = p;
  q.kp = kp;
  double cost = 0.0;
  double u = u0;
  for (int k = 0; k < horizon; ++k) {
    if (k > 0) {
      const int ind = (s.playing && s.x >= delta) ? 1 : 0;
      u = std::max(pid_output(q, s.x, s.integral, target, ind), q.epsilon);
    }
    const double e = u * rate - bandwidth;
    cost += e * e;
    const double dl = delta * rate / bandwidth;
    s.integral += (target - s.x) * dl;
    if (s.playing && s.x >= delta)
      s.x = std::max(s.x - dl, 0.0) + delta;
    else
      s.x += delta;
  }
  return cost;
}

struct PiaParams {
  PidParams pid;
  int horizon = 5;
  double eta = 1.0;

  void validate() const {
    pid.validate();
    if (horizon < 1) throw ConfigError("PIA horizon must be >= 1");
    if (eta < 0.0) throw ConfigError("PIA eta must be >= 0");
  }
};

class PiaScheme : public AbrScheme {
 public:
  explicit PiaScheme(PiaParams p = {}) : p_(p) { p_.validate(); }

  std::string name() const override { return "pia"; }

  void observe(std::span<const BufferSample> samples) override {
    integrate_error(state_, samples, [this](double t) { return target_at(t); });
  }

  Decision decide(const DecisionContext& ctx) override {
    return decide_with(ctx, p_.pid.kp, p_.pid.target_buffer);
  }

  const PidState& state() const noexcept { return state_; }
  PidState& state() noexcept { return state_; }
  const PiaParams& params() const noexcept { return p_; }

 protected:
  virtual double target_at(double) const { return p_.pid.target_buffer; }

  Decision decide_with(const DecisionContext& ctx, double kp, double target) {
    PidParams pid = p_.pid;
    pid.kp = kp;
    const AntiWindup aw = anti_windup(pid_output(pid, ctx.buffer, state_.integral, target, ctx.playing_indicator), pid);
    if (aw.force_max) {
      state_.frozen = true;
      return {ctx.allowed_top, aw.u};
    }

    const VideoManifest& m = ctx.video();
    const RolloutStart start{ctx.buffer, state_.integral, ctx.playing};
    double best = std::numeric_limits<double>::infinity();
    int best_level = 1;
    for (int l = 1; l <= ctx.allowed_top; ++l) {
      const double r = m.avg_bitrate(l);
      double j = rollout_tracking_cost(pid, kp, target, start, aw.u, ctx.chunk_duration(), r, ctx.est_bandwidth,
                                       p_.horizon);
      evaluations_ += static_cast<std::uint64_t>(p_.horizon);
      if (ctx.last_level) {
        const double d = r - m.avg_bitrate(*ctx.last_level);
        j += p_.eta * d * d;
      }
      if (j < best) {
        best = j;
        best_level = l;
      }
    }
    return {best_level, aw.u};
  }

  PiaParams p_;
  PidState state_;
};

/// PIA with startup ramps. Requires beta = 1 so the ramped target is tracked
/// without steady-state error.
class PiaeScheme final : public PiaScheme {
 public:
  explicit PiaeScheme(PiaParams p = default_params(), RampSchedule ramp = {}) : PiaScheme(p), ramp_(ramp) {
    if (p.pid.beta != 1.0) throw ConfigError("PIA-E requires beta = 1");
    ramp_.base_kp = p.pid.kp;
    ramp_.base_xr = p.pid.target_buffer;
    ramp_.validate();
  }

  static PiaParams default_params() {
    PiaParams p;
    p.pid.beta = 1.0;
    return p;
  }

  std::string name() const override { return "piae"; }

  Decision decide(const DecisionContext& ctx) override {
    ramp_.delta = ctx.chunk_duration();
    return decide_with(ctx, ramp_kp(ramp_, ctx.clock), ramp_xr(ramp_, ctx.clock));
  }

  const RampSchedule& ramp() const noexcept { return ramp_; }

 protected:
  double target_at(double t) const override { return ramp_xr(ramp_, t); }

 private:
  RampSchedule ramp_;
};

}  // namespace abrsim
