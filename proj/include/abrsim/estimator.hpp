#pragma once

#include <algorithm>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "abrsim/error.hpp"

namespace abrsim {

enum class EstimatorKind { harmonic_seconds, harmonic_chunks };

struct BandwidthEstimatorSpec {
  EstimatorKind kind = EstimatorKind::harmonic_seconds;
  int window = 20;

  void validate() const {
    if (window < 1) throw ConfigError("estimator window must be >= 1");
  }
};

inline std::string to_string(EstimatorKind k) {
  return k == EstimatorKind::harmonic_seconds ? "harmonic_seconds" : "harmonic_chunks";
}

inline EstimatorKind estimator_kind_from_string(const std::string& s) {
  if (s == "harmonic_seconds") return EstimatorKind::harmonic_seconds;
  if (s == "harmonic_chunks") return EstimatorKind::harmonic_chunks;
  throw ConfigError("unknown estimator kind '" + s + "'");
}

/// Observed throughput so far: one entry per wall-clock second during which
/// bytes were in flight, and one per completed chunk.
struct ThroughputHistory {
  std::vector<double> per_second_kbps;
  std::vector<double> per_chunk_kbps;
  long long last_second = -1;
};

// Floor for estimates, so a zero-bandwidth outage does not yield a zero divisor.
inline constexpr double kMinEstimateKbps = 1.0;

inline double harmonic_mean(std::span<const double> xs) {
  if (xs.empty()) throw DomainError("harmonic mean of empty window");
  double inv = 0.0;
  for (double x : xs) {
    if (x <= 0.0) return 0.0;
    inv += 1.0 / x;
  }
  return static_cast<double>(xs.size()) / inv;
}

/// Harmonic mean over the most recent `window` observations, or nullopt when
/// nothing has been observed yet (caller bootstraps).
inline std::optional<double> estimate_bandwidth(const ThroughputHistory& h, const BandwidthEstimatorSpec& spec) {
  const auto& series = spec.kind == EstimatorKind::harmonic_seconds ? h.per_second_kbps : h.per_chunk_kbps;
  if (series.empty()) return std::nullopt;
  const std::size_t w = std::min(series.size(), static_cast<std::size_t>(spec.window));
  const std::span<const double> tail(series.data() + series.size() - w, w);
  return std::max(kMinEstimateKbps, harmonic_mean(tail));
}

}  // namespace abrsim
