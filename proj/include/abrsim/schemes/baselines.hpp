#pragma once

// Baseline ABR schemes: rate-based (RB), buffer-based (BBA-0),
// rate-and-buffer (RBA) and model predictive control (MPC / RobustMPC).

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <optional>
#include <vector>

#include "abrsim/schemes/scheme.hpp"

namespace abrsim {

/// Highest allowed track whose average bitrate is at or below the estimate.
class RateBasedScheme final : public AbrScheme {
 public:
  std::string name() const override { return "rb"; }
  Decision decide(const DecisionContext& ctx) override {
    ++evaluations_;
    return {highest_level_at_most(ctx.video().avg_bitrates(), ctx.allowed_top, ctx.est_bandwidth), std::nullopt};
  }
};

struct Bba0Params {
  double theta_low = 10.0;
  double theta_high = 60.0;

  void validate() const {
    if (!(theta_high > theta_low) || theta_low < 0.0) throw ConfigError("BBA-0 needs theta_high > theta_low >= 0");
  }
};

/// Buffer-to-rate map: R_min below theta_low, R_max above theta_high, linear
/// in between, snapped down to a real track.
class Bba0Scheme final : public AbrScheme {
 public:
  explicit Bba0Scheme(Bba0Params p = {}) : p_(p) { p_.validate(); }
  std::string name() const override { return "bba0"; }

  Decision decide(const DecisionContext& ctx) override {
    ++evaluations_;
    const auto& rates = ctx.video().avg_bitrates();
    const int top = ctx.allowed_top;
    if (ctx.buffer < p_.theta_low) return {1, std::nullopt};
    if (ctx.buffer > p_.theta_high) return {top, std::nullopt};
    const double r_min = rates.front();
    const double r_max = rates[static_cast<std::size_t>(top - 1)];
    const double rate = r_min + (r_max - r_min) * (ctx.buffer - p_.theta_low) / (p_.theta_high - p_.theta_low);
    return {highest_level_at_most(rates, top, rate), std::nullopt};
  }

 private:
  Bba0Params p_;
};

struct RbaParams {
  double reserve_chunks = 4.0;
};

/// Highest level whose download still leaves `reserve_chunks` chunks of buffer.
class RbaScheme final : public AbrScheme {
 public:
  explicit RbaScheme(RbaParams p = {}) : p_(p) {}
  std::string name() const override { return "rba"; }

  Decision decide(const DecisionContext& ctx) override {
    const double reserve = p_.reserve_chunks * ctx.chunk_duration();
    int best = 1;
    for (int l = 1; l <= ctx.allowed_top; ++l) {
      ++evaluations_;
      const double dl = ctx.video().chunk(l, ctx.chunk_index).kilobits() / ctx.est_bandwidth;
      if (ctx.buffer - dl >= reserve) best = l;
    }
    return {best, std::nullopt};
  }

 private:
  RbaParams p_;
};

struct MpcParams {
  int horizon = 5;
  double mu = 1.0;
  std::optional<double> lambda;  // stall weight; defaults to the top bitrate in Mbps
  bool robust = false;
  int error_window = 5;

  void validate() const {
    if (horizon < 1) throw ConfigError("MPC horizon must be >= 1");
    if (mu < 0.0 || (lambda && *lambda < 0.0)) throw ConfigError("MPC weights must be >= 0");
    if (error_window < 1) throw ConfigError("MPC error window must be >= 1");
  }
};

/// Exhaustive look-ahead over every level sequence of the horizon, scoring
/// sum(R) - mu * sum|dR| - lambda * stall (bitrates in Mbps) on a rollout that
/// assumes the current estimate persists. Ties go to the lower first level.
class MpcScheme final : public AbrScheme {
 public:
  explicit MpcScheme(MpcParams p = {}) : p_(p) { p_.validate(); }
  std::string name() const override { return p_.robust ? "robustmpc" : "mpc"; }

  Decision decide(const DecisionContext& ctx) override {
    const VideoManifest& m = ctx.video();
    const double lambda = p_.lambda.value_or(m.avg_bitrates().back() / 1000.0);
    double est = ctx.est_bandwidth;

    if (p_.robust) {
      // Compare the previous prediction with what the last chunk actually got.
      if (last_prediction_ && !ctx.chunk_throughputs.empty()) {
        const double actual = ctx.chunk_throughputs.back();
        const double err = actual > 0.0 ? (*last_prediction_ - actual) / actual : 0.0;
        errors_.push_back(std::max(0.0, err));
        while (errors_.size() > static_cast<std::size_t>(p_.error_window)) errors_.pop_front();
      }
      last_prediction_ = ctx.est_bandwidth;
      double max_err = 0.0;
      for (double e : errors_) max_err = std::max(max_err, e);
      est = ctx.est_bandwidth / (1.0 + max_err);
    }

    const std::size_t h = std::min<std::size_t>(static_cast<std::size_t>(p_.horizon), ctx.remaining());
    if (h == 0) throw SimulationError("MPC consulted past the last chunk");
    std::vector<int> tops(h);
    for (std::size_t k = 0; k < h; ++k) tops[k] = ctx.top_at(ctx.chunk_index + k);
    std::vector<int> seq(h, 1);

    const double delta = ctx.chunk_duration();
    const bool playing = ctx.playing;
    double best = -std::numeric_limits<double>::infinity();
    int best_first = 1;
    for (;;) {
      ++evaluations_;
      double x = ctx.buffer;
      double reward = 0.0;
      std::optional<double> prev;
      if (ctx.last_level) prev = m.avg_bitrate(*ctx.last_level) / 1000.0;
      for (std::size_t k = 0; k < h; ++k) {
        const double dl = m.chunk(seq[k], ctx.chunk_index + k).kilobits() / est;
        double stall = 0.0;
        if (playing) {
          stall = std::max(0.0, dl - x);
          x = std::max(x - dl, 0.0) + delta;
        } else {
          x += delta;
        }
        const double r = m.avg_bitrate(seq[k]) / 1000.0;
        reward += r - lambda * stall;
        if (prev) reward -= p_.mu * std::abs(r - *prev);
        prev = r;
      }
      if (reward > best) {
        best = reward;
        best_first = seq[0];
      }
      // odometer over the sequence, last position fastest
      std::size_t pos = h;
      while (pos > 0) {
        --pos;
        if (seq[pos] < tops[pos]) {
          ++seq[pos];
          std::fill(seq.begin() + static_cast<std::ptrdiff_t>(pos) + 1, seq.end(), 1);
          break;
        }
        if (pos == 0) return {best_first, std::nullopt};
      }
    }
  }

 private:
  MpcParams p_;
  std::optional<double> last_prediction_;
  std::deque<double> errors_;
};

}  // namespace abrsim
