#pragma once

// PI buffer controller shared by PIA, PIA-E, CAVA and QUAD.
//
// The controller output u is the ratio of link bandwidth to the bitrate it
// asks for. The control law is
//
//   u = kp * (beta * target - x) + ki * integral + indicator
//
// where `integral` is the running integral of (target - x) and `indicator`
// is 1 while playback is draining a full chunk (x >= chunk duration).
// Closing the loop through the buffer dynamics gives a second-order system
// with natural frequency sqrt(ki) and damping ratio kp / (2 sqrt(ki)).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "abrsim/error.hpp"

namespace abrsim {

inline constexpr double kDefaultEpsilon = 1e-10;

struct PidParams {
  double kp = 8.8e-3;
  double ki = 3.6e-5;
  double kd = 0.0;  // PI only
  double beta = 0.2;
  double epsilon = kDefaultEpsilon;
  double target_buffer = 60.0;

  void validate() const {
    if (!(kp > 0.0)) throw ConfigError("kp must be > 0");
    if (!(ki > 0.0)) throw ConfigError("ki must be > 0");
    if (kd != 0.0) throw ConfigError("kd must be 0 (proportional-integral controller)");
    if (!(beta > 0.0 && beta <= 1.0)) throw ConfigError("beta must be in (0,1]");
    if (!(epsilon > 0.0 && epsilon < 1.0)) throw ConfigError("epsilon must be in (0,1)");
    if (!(target_buffer > 0.0)) throw ConfigError("target buffer must be > 0");
  }
};

/// One left-endpoint integration step of the buffer trajectory.
struct BufferSample {
  double t = 0.0;   // start of the step, session clock
  double dt = 0.0;  // step length
  double x = 0.0;   // buffer level at the start of the step (seconds)
};

struct PidState {
  double integral = 0.0;     // seconds^2
  bool frozen = false;       // set by anti-windup; skips the next interval
};

inline double pid_output(const PidParams& p, double x, double integral, double target, int playing_indicator) {
  return p.kp * (p.beta * target - x) + p.ki * integral + static_cast<double>(playing_indicator);
}

/// Highest level whose bitrate fits under est_bandwidth / u; level 1 if none does.
/// `bitrates` is indexed by level - 1 and ascending.
inline int bitrate_from_u(double u, double est_bandwidth, std::span<const double> bitrates) {
  const double budget = est_bandwidth / u;
  int best = 1;
  for (std::size_t i = 0; i < bitrates.size(); ++i)
    if (bitrates[i] <= budget) best = static_cast<int>(i) + 1;
  return best;
}

struct AntiWindup {
  double u = 0.0;
  bool freeze_integral = false;
  bool force_max = false;
};

inline AntiWindup anti_windup(double u, const PidParams& p) {
  if (u <= p.epsilon) return {p.epsilon, true, true};
  return {u, false, false};
}

inline double damping_ratio(double kp, double ki) {
  if (!(ki > 0.0)) throw DomainError("damping ratio needs ki > 0");
  return kp / (2.0 * std::sqrt(ki));
}

inline double natural_frequency(double ki) {
  if (!(ki > 0.0)) throw DomainError("natural frequency needs ki > 0");
  return std::sqrt(ki);
}

inline constexpr double kZetaLow = 0.6;
inline constexpr double kZetaHigh = 0.8;

inline bool is_valid_gain_pair(double kp, double ki) {
  if (!(kp > 0.0) || !(ki > 0.0)) return false;
  const double z = damping_ratio(kp, ki);
  return z >= kZetaLow && z <= kZetaHigh;
}

/// Steady-state ramp-tracking error scale 1/Kv = kp (1 - beta) / ki.
inline double velocity_constant(const PidParams& p) {
  if (!(p.ki > 0.0)) throw DomainError("velocity constant needs ki > 0");
  return p.kp * (1.0 - p.beta) / p.ki;
}

/// Startup ramps: kp falls linearly from alpha*kp to kp and the target rises
/// linearly from 2 chunk durations to its base value, both over tau seconds.
struct RampSchedule {
  double alpha = 4.0;
  double tau = 300.0;
  double base_kp = 8.8e-3;
  double base_xr = 60.0;
  double delta = 2.0;

  void validate() const {
    if (!(alpha > 1.0)) throw ConfigError("ramp alpha must be > 1");
    if (!(tau > 0.0)) throw ConfigError("ramp tau must be > 0");
    if (!(base_kp > 0.0) || !(base_xr > 0.0) || !(delta > 0.0)) throw ConfigError("ramp bases must be > 0");
  }
};

inline double ramp_kp(const RampSchedule& s, double t) {
  if (t > s.tau) return s.base_kp;
  const double start = s.alpha * s.base_kp;
  return start - (start - s.base_kp) * t / s.tau;
}

inline double ramp_xr(const RampSchedule& s, double t) {
  if (t > s.tau) return s.base_xr;
  return std::max(2.0 * s.delta, s.base_xr * t / s.tau);
}

/// Accumulates integral += (target(t) - x) * dt over a trajectory, unless the
/// previous decision froze it. Clears the freeze afterwards.
template <typename TargetFn>
void integrate_error(PidState& state, std::span<const BufferSample> samples, TargetFn&& target) {
  if (!state.frozen) {
    for (const auto& s : samples) state.integral += (target(s.t) - s.x) * s.dt;
  }
  state.frozen = false;
}

}  // namespace abrsim
