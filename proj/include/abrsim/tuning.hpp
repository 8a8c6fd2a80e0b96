#pragma once

// (kp, ki) heat-map tuning. Every valid grid cell is simulated on every trace;
// a cell earns one unit of heat per trace on which its QoE is near that
// trace's best.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <functional>
#include <limits>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "abrsim/format.hpp"
#include "abrsim/metrics.hpp"
#include "abrsim/schemes/pia.hpp"
#include "abrsim/sim.hpp"

namespace abrsim {

struct GainGrid {
  std::vector<double> kp_values;
  std::vector<double> ki_values;

  bool valid(std::size_t i, std::size_t j) const { return is_valid_gain_pair(kp_values[i], ki_values[j]); }

  std::size_t valid_count() const {
    std::size_t c = 0;
    for (std::size_t i = 0; i < kp_values.size(); ++i)
      for (std::size_t j = 0; j < ki_values.size(); ++j) c += valid(i, j) ? 1 : 0;
    return c;
  }

  void validate() const {
    auto increasing = [](const std::vector<double>& v) {
      if (v.empty()) return false;
      for (std::size_t i = 1; i < v.size(); ++i)
        if (!(v[i] > v[i - 1])) return false;
      return true;
    };
    if (!increasing(kp_values) || !increasing(ki_values))
      throw ConfigError("gain grid values must be non-empty and strictly increasing");
    if (valid_count() == 0) throw ConfigError("gain grid has no valid cell (damping ratio outside [0.6, 0.8] everywhere)");
  }
};

/// Linearly spaced values from lo to hi inclusive.
inline std::vector<double> linspace(double lo, double hi, std::size_t count) {
  std::vector<double> v;
  if (count == 0) return v;
  if (count == 1) return {lo};
  for (std::size_t i = 0; i < count; ++i)
    v.push_back(lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(count - 1));
  return v;
}

struct HeatMap {
  std::vector<double> kp_values;
  std::vector<double> ki_values;
  std::vector<bool> valid;  // row-major, kp rows
  std::vector<int> heat;
  int trace_count = 0;
  double threshold = 0.9;

  std::size_t rows() const { return kp_values.size(); }
  std::size_t cols() const { return ki_values.size(); }
  std::size_t index(std::size_t i, std::size_t j) const { return i * cols() + j; }
};

/// score is within (1 - threshold) of the best, measured relative to |best| so
/// that the rule still works for negative QoE.
inline bool near_optimal(double score, double best, double threshold) {
  return score >= best - (1.0 - threshold) * std::abs(best);
}

using SchemeFactory = std::function<std::unique_ptr<AbrScheme>(double kp, double ki)>;

inline SchemeFactory pia_factory(PiaParams base) {
  return [base](double kp, double ki) {
    PiaParams p = base;
    p.pid.kp = kp;
    p.pid.ki = ki;
    return std::make_unique<PiaScheme>(p);
  };
}

/// Runs `fn(task)` for task in [0, count) on up to `jobs` threads. Exceptions
/// are rethrown after all workers stop.
inline void parallel_for(std::size_t count, int jobs, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers = std::max<std::size_t>(1, std::min<std::size_t>(static_cast<std::size_t>(std::max(jobs, 1)), count));
  if (workers <= 1) {
    for (std::size_t t = 0; t < count; ++t) fn(t);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mu;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t t = next.fetch_add(1);
        if (t >= count) return;
        try {
          fn(t);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mu);
          if (!error) error = std::current_exception();
          next = count;
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

/// Per-trace QoE of every cell; NaN for invalid cells. scores[trace][cell].
inline std::vector<std::vector<double>> sweep_scores(const GainGrid& grid, const std::vector<BandwidthTrace>& traces,
                                                     const VideoManifest& manifest, const SchemeFactory& factory,
                                                     const SimConfig& config, const QoeWeights& weights,
                                                     int jobs = 1) {
  grid.validate();
  if (traces.empty()) throw ConfigError("sweep needs at least one trace");
  const std::size_t cells = grid.kp_values.size() * grid.ki_values.size();
  std::vector<std::vector<double>> scores(traces.size(), std::vector<double>(cells, std::nan("")));
  parallel_for(cells * traces.size(), jobs, [&](std::size_t task) {
    const std::size_t k = task / cells;
    const std::size_t cell = task % cells;
    const std::size_t i = cell / grid.ki_values.size();
    const std::size_t j = cell % grid.ki_values.size();
    if (!grid.valid(i, j)) return;
    auto scheme = factory(grid.kp_values[i], grid.ki_values[j]);
    const SessionLog log = simulate_session(*scheme, traces[k], manifest, config);
    scores[k][cell] = qoe_score(log, weights);
  });
  return scores;
}

inline HeatMap heat_from_scores(const GainGrid& grid, const std::vector<std::vector<double>>& scores,
                                double threshold = 0.9) {
  HeatMap map;
  map.kp_values = grid.kp_values;
  map.ki_values = grid.ki_values;
  map.threshold = threshold;
  map.trace_count = static_cast<int>(scores.size());
  const std::size_t cells = map.rows() * map.cols();
  map.valid.assign(cells, false);
  map.heat.assign(cells, 0);
  for (std::size_t i = 0; i < map.rows(); ++i)
    for (std::size_t j = 0; j < map.cols(); ++j) map.valid[map.index(i, j)] = grid.valid(i, j);
  for (const auto& per_trace : scores) {
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < cells; ++c)
      if (map.valid[c]) best = std::max(best, per_trace[c]);
    for (std::size_t c = 0; c < cells; ++c)
      if (map.valid[c] && near_optimal(per_trace[c], best, threshold)) map.heat[c] += 1;
  }
  return map;
}

inline HeatMap sweep_gains(const GainGrid& grid, const std::vector<BandwidthTrace>& traces,
                           const VideoManifest& manifest, const SchemeFactory& factory, const SimConfig& config,
                           const QoeWeights& weights, int jobs = 1, double threshold = 0.9) {
  return heat_from_scores(grid, sweep_scores(grid, traces, manifest, factory, config, weights, jobs), threshold);
}

inline const char* kHeatMapCsvHeader = "kp,ki,valid,heat";

inline std::string heatmap_to_csv(const HeatMap& map) {
  std::string out = std::string(kHeatMapCsvHeader) + '\n';
  for (std::size_t i = 0; i < map.rows(); ++i)
    for (std::size_t j = 0; j < map.cols(); ++j) {
      const std::size_t c = map.index(i, j);
      out += format_double(map.kp_values[i]) + ',' + format_double(map.ki_values[j]) + ',' +
             (map.valid[c] ? "1" : "0") + ',' + std::to_string(map.heat[c]) + '\n';
    }
  return out;
}

/// Inclusive index bounds of a rectangle of grid cells.
struct GainRect {
  std::size_t kp_lo = 0, kp_hi = 0, ki_lo = 0, ki_hi = 0;
  double mean_heat = 0.0;

  std::size_t area() const { return (kp_hi - kp_lo + 1) * (ki_hi - ki_lo + 1); }
};

struct RegionResult {
  std::optional<GainRect> rect;
  std::string diagnostic;
};

/// Mean heat of a rectangle, or nullopt if it contains an invalid cell.
inline std::optional<double> rect_mean_heat(const HeatMap& map, const GainRect& r) {
  double sum = 0.0;
  for (std::size_t i = r.kp_lo; i <= r.kp_hi; ++i)
    for (std::size_t j = r.ki_lo; j <= r.ki_hi; ++j) {
      const std::size_t c = map.index(i, j);
      if (!map.valid[c]) return std::nullopt;
      sum += map.heat[c];
    }
  return sum / static_cast<double>(r.area());
}

/// Greedy growth from the hottest valid cell: repeatedly take the one-step
/// extension that keeps every cell valid and the mean heat at or above
/// min_mean_heat * trace_count, preferring the larger, then hotter, result.
inline RegionResult extract_region(const HeatMap& map, double min_mean_heat) {
  RegionResult out;
  const double need = min_mean_heat * static_cast<double>(map.trace_count);
  std::optional<std::size_t> seed;
  for (std::size_t c = 0; c < map.heat.size(); ++c)
    if (map.valid[c] && (!seed || map.heat[c] > map.heat[*seed])) seed = c;
  if (!seed) {
    out.diagnostic = "heat map has no valid cell";
    return out;
  }
  GainRect r{*seed / map.cols(), *seed / map.cols(), *seed % map.cols(), *seed % map.cols(),
             static_cast<double>(map.heat[*seed])};
  if (r.mean_heat < need) {
    out.diagnostic = "hottest cell has heat " + format_double(r.mean_heat) + ", below the required " +
                     format_double(need);
    return out;
  }
  for (;;) {
    std::optional<GainRect> best;
    const GainRect candidates[4] = {
        {r.kp_lo - (r.kp_lo > 0 ? 1 : 0), r.kp_hi, r.ki_lo, r.ki_hi, 0.0},
        {r.kp_lo, std::min(r.kp_hi + 1, map.rows() - 1), r.ki_lo, r.ki_hi, 0.0},
        {r.kp_lo, r.kp_hi, r.ki_lo - (r.ki_lo > 0 ? 1 : 0), r.ki_hi, 0.0},
        {r.kp_lo, r.kp_hi, r.ki_lo, std::min(r.ki_hi + 1, map.cols() - 1), 0.0},
    };
    for (GainRect c : candidates) {
      if (c.area() == r.area()) continue;
      const auto mean = rect_mean_heat(map, c);
      if (!mean || *mean < need) continue;
      c.mean_heat = *mean;
      if (!best || c.area() > best->area() || (c.area() == best->area() && c.mean_heat > best->mean_heat)) best = c;
    }
    if (!best) break;
    r = *best;
  }
  out.rect = r;
  return out;
}

}  // namespace abrsim
