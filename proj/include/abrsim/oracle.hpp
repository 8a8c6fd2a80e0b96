#pragma once

// Offline-optimal track selection with the whole trace known in advance.
//
//   J = sum_t (Q_r - Q_t)^2 + sum_t (Q_t - Q_{t-1})^2 + gamma * total stall
//
// The DP walks chunk by chunk and keeps one node per distinct reachable
// player state. Transitions run the same PlaybackEngine as the simulator, so
// a sequence's DP value is bit-identical to re-simulating it.
//
// Large frontiers are pruned. When the buffer cap can never bind, pruning
// drops states that are dominated (same previous level, no later finish time,
// no more stall, no earlier startup, no higher cost so far), which cannot lose
// the optimum. Otherwise states are merged on 0.1 s buffer bins, which is
// approximate.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <tuple>
#include <vector>

#include "abrsim/error.hpp"
#include "abrsim/sim.hpp"

namespace abrsim {

struct OfflineObjective {
  double target_quality = 80.0;
  double gamma = 10000.0;

  void validate() const {
    if (!(target_quality > 0.0 && target_quality <= 100.0)) throw ConfigError("target quality must be in (0,100]");
    if (gamma < 0.0) throw ConfigError("gamma must be >= 0");
  }
};

class BudgetError : public Error {
 public:
  using Error::Error;
};

/// Quality part of J contributed by chunk t; cost is accumulated in chunk order.
inline double objective_step(const OfflineObjective& o, double q, std::optional<double> prev_q) {
  const double dev = o.target_quality - q;
  double step = dev * dev;
  if (prev_q) {
    const double ch = q - *prev_q;
    step += ch * ch;
  }
  return step;
}

inline double offline_objective(const SessionLog& log, const OfflineObjective& o) {
  double acc = 0.0;
  std::optional<double> prev;
  for (const auto& d : log.decisions) {
    if (!d.quality) throw ConfigError("offline objective needs per-chunk quality");
    acc += objective_step(o, *d.quality, prev);
    prev = d.quality;
  }
  return acc + o.gamma * log.total_stall;
}

struct OracleResult {
  std::vector<int> levels;
  double objective = 0.0;
  double total_stall = 0.0;
  bool exact = true;  // false if bin merging was needed
  std::size_t peak_frontier = 0;
};

inline constexpr std::size_t kOracleFrontierLimit = 20000;
inline constexpr double kOracleBufferBin = 0.1;

namespace detail {

struct OracleNode {
  PlaybackState state;
  int prev = 0;
  double acc = 0.0;
  std::size_t parent = 0;  // index into the previous layer's history
};

inline bool same_state(const PlaybackState& a, const PlaybackState& b) {
  return a.clock == b.clock && a.buffer == b.buffer && a.started == b.started && a.startup_time == b.startup_time &&
         a.stall_total == b.stall_total && a.played == b.played && a.bytes_downloaded == b.bytes_downloaded;
}

// a dominates b: b can be dropped without losing the optimum.
inline bool dominates(const OracleNode& a, const OracleNode& b, bool latency_rule, double gamma) {
  if (a.prev != b.prev || a.state.started != b.state.started) return false;
  if (a.acc > b.acc) return false;
  if (a.state.clock > b.state.clock) return false;
  if (!a.state.started) return latency_rule;  // both wait for the same startup instant
  if (gamma == 0.0) return true;               // future finish times depend on the clock alone
  return a.state.startup_time >= b.state.startup_time && a.state.stall_total <= b.state.stall_total;
}

}  // namespace detail

inline OracleResult offline_optimal(const BandwidthTrace& trace, const VideoManifest& manifest,
                                    const OfflineObjective& objective, const SimConfig& config) {
  objective.validate();
  if (!manifest.has_quality()) throw ConfigError("offline optimal needs per-chunk quality");
  const std::size_t n = manifest.num_chunks();
  const int levels = manifest.num_levels();
  const double delta = manifest.chunk_duration_s;
  const PlaybackEngine engine(trace, config, delta, n);
  const bool latency_rule = config.startup.kind == StartupRule::Kind::latency;
  const bool cap_can_bind = !(config.max_buffer > static_cast<double>(n - 1) * delta);

  // history[i][k] = (level, parent) of node k after chunk i
  std::vector<std::vector<std::pair<int, std::size_t>>> history;
  std::vector<detail::OracleNode> frontier(1);
  OracleResult result;

  for (std::size_t i = 0; i < n; ++i) {
    std::vector<detail::OracleNode> next;
    next.reserve(frontier.size() * static_cast<std::size_t>(levels));
    int lo = 1, hi = levels;
    if (i == 0 && config.first_level) lo = hi = std::min(*config.first_level, levels);
    for (std::size_t k = 0; k < frontier.size(); ++k) {
      const auto& node = frontier[k];
      PlaybackState waited = node.state;
      engine.wait_for_capacity(waited, nullptr);
      for (int l = lo; l <= hi; ++l) {
        detail::OracleNode child;
        child.state = waited;
        engine.fetch_chunk(child.state, manifest.chunk(l, i).size_bytes, nullptr);
        const std::optional<double> prev_q =
            i > 0 ? std::optional<double>(manifest.quality(node.prev, i - 1)) : std::nullopt;
        child.acc = node.acc + objective_step(objective, manifest.quality(l, i), prev_q);
        child.prev = l;
        child.parent = k;
        next.push_back(child);
      }
    }

    // Merge identical states (same future), keeping the cheaper path.
    std::stable_sort(next.begin(), next.end(), [](const auto& a, const auto& b) {
      return std::tie(a.prev, a.state.clock, a.state.buffer, a.state.stall_total, a.state.startup_time) <
             std::tie(b.prev, b.state.clock, b.state.buffer, b.state.stall_total, b.state.startup_time);
    });
    std::vector<detail::OracleNode> merged;
    for (auto& c : next) {
      if (!merged.empty() && merged.back().prev == c.prev && detail::same_state(merged.back().state, c.state)) {
        if (c.acc < merged.back().acc) merged.back() = c;
        continue;
      }
      merged.push_back(c);
    }

    if (merged.size() > kOracleFrontierLimit && !cap_can_bind) {
      // Pareto sweep: nodes sorted by (prev, clock); compare against kept nodes.
      std::vector<detail::OracleNode> kept;
      for (auto& c : merged) {
        bool dominated = false;
        for (auto it = kept.rbegin(); it != kept.rend() && it->prev == c.prev; ++it) {
          if (detail::dominates(*it, c, latency_rule, objective.gamma)) {
            dominated = true;
            break;
          }
        }
        if (!dominated) kept.push_back(c);
      }
      merged = std::move(kept);
    }
    if (merged.size() > kOracleFrontierLimit) {
      result.exact = false;
      std::map<std::tuple<int, bool, long long>, detail::OracleNode> bins;
      for (auto& c : merged) {
        const auto key = std::make_tuple(c.prev, c.state.started,
                                         static_cast<long long>(std::floor(c.state.buffer / kOracleBufferBin)));
        auto it = bins.find(key);
        const double score = c.acc + objective.gamma * c.state.stall_total;
        if (it == bins.end()) {
          bins.emplace(key, c);
        } else if (score < it->second.acc + objective.gamma * it->second.state.stall_total ||
                   (score == it->second.acc + objective.gamma * it->second.state.stall_total &&
                    c.state.clock < it->second.state.clock)) {
          it->second = c;
        }
      }
      merged.clear();
      for (auto& [key, node] : bins) merged.push_back(node);
    }

    std::vector<std::pair<int, std::size_t>> layer;
    layer.reserve(merged.size());
    for (const auto& c : merged) layer.emplace_back(c.prev, c.parent);
    history.push_back(std::move(layer));
    for (std::size_t k = 0; k < merged.size(); ++k) merged[k].parent = k;
    result.peak_frontier = std::max(result.peak_frontier, merged.size());
    frontier = std::move(merged);
  }

  std::size_t best = 0;
  double best_j = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < frontier.size(); ++k) {
    const double j = frontier[k].acc + objective.gamma * frontier[k].state.stall_total;
    if (j < best_j) {
      best_j = j;
      best = k;
    }
  }
  result.objective = best_j;
  result.total_stall = frontier[best].state.stall_total;
  result.levels.assign(n, 1);
  std::size_t k = best;
  for (std::size_t i = n; i-- > 0;) {
    result.levels[i] = history[i][k].first;
    k = history[i][k].second;
  }
  return result;
}

/// Exhaustive search by full simulation of every level sequence. Refuses when
/// n * |L|^n exceeds `budget`.
inline OracleResult brute_force_optimal(const BandwidthTrace& trace, const VideoManifest& manifest,
                                        const OfflineObjective& objective, const SimConfig& config,
                                        double budget = 1e7) {
  objective.validate();
  const std::size_t n = manifest.num_chunks();
  const int levels = manifest.num_levels();
  const double work = static_cast<double>(n) * std::pow(static_cast<double>(levels), static_cast<double>(n));
  if (work > budget)
    throw BudgetError("brute force needs " + format_double(work) + " steps, over the budget of " +
                      format_double(budget));

  OracleResult best;
  best.objective = std::numeric_limits<double>::infinity();
  std::vector<int> seq(n, 1);
  for (;;) {
    FixedSequenceScheme s(seq);
    const SessionLog log = simulate_session(s, trace, manifest, config);
    const double j = offline_objective(log, objective);
    if (j < best.objective) {
      best.objective = j;
      best.levels = log.levels();
      best.total_stall = log.total_stall;
    }
    std::size_t pos = n;
    bool done = true;
    while (pos > 0) {
      --pos;
      if (seq[pos] < levels) {
        ++seq[pos];
        std::fill(seq.begin() + static_cast<std::ptrdiff_t>(pos) + 1, seq.end(), 1);
        done = false;
        break;
      }
    }
    if (done) break;
  }
  return best;
}

}  // namespace abrsim
