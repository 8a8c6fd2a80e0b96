#pragma once

// Synthetic traces and manifests. Everything is a pure function of its
// arguments; random generators take an explicit seed.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "abrsim/media.hpp"

namespace abrsim {

inline BandwidthTrace constant_trace(double kbps, std::size_t seconds, std::string name = "constant") {
  return BandwidthTrace(std::move(name), std::vector<double>(seconds, kbps));
}

/// `before` for t < switch_at, `after` from then on.
inline BandwidthTrace step_trace(double before, double after, std::size_t switch_at, std::size_t seconds,
                                 std::string name = "step") {
  std::vector<double> v(seconds);
  for (std::size_t t = 0; t < seconds; ++t) v[t] = t < switch_at ? before : after;
  return BandwidthTrace(std::move(name), std::move(v));
}

/// Alternates `high` and `low`, each held for half_period seconds, starting high.
inline BandwidthTrace square_wave_trace(double low, double high, std::size_t half_period, std::size_t seconds,
                                        std::string name = "square") {
  if (half_period == 0) throw ConfigError("square wave half period must be >= 1");
  std::vector<double> v(seconds);
  for (std::size_t t = 0; t < seconds; ++t) v[t] = (t / half_period) % 2 == 0 ? high : low;
  return BandwidthTrace(std::move(name), std::move(v));
}

/// Square wave with levels and period drawn from `seed`.
inline BandwidthTrace random_square_wave_trace(std::uint64_t seed, std::size_t seconds, double low_min = 500.0,
                                               double low_max = 1500.0, double high_min = 2500.0,
                                               double high_max = 6000.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> lo(low_min, low_max), hi(high_min, high_max);
  std::uniform_int_distribution<std::size_t> half(20, 60);
  const double l = std::round(lo(rng));
  const double h = std::round(hi(rng));
  return square_wave_trace(l, h, half(rng), seconds, "square-" + std::to_string(seed));
}

/// Log-normal random walk around `mean_kbps`, resampled every second.
inline BandwidthTrace random_trace(std::uint64_t seed, std::size_t seconds, double mean_kbps, double volatility = 0.3,
                                   std::string name = "") {
  if (!(mean_kbps > 0.0)) throw ConfigError("random trace mean must be > 0");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> step(0.0, volatility);
  std::vector<double> v(seconds);
  double level = 0.0;  // log deviation from the mean
  for (std::size_t t = 0; t < seconds; ++t) {
    level = 0.8 * level + step(rng);
    v[t] = std::round(mean_kbps * std::exp(level));
  }
  if (name.empty()) name = "random-" + std::to_string(seed);
  return BandwidthTrace(std::move(name), std::move(v));
}

/// Quality model used by the synthetic VBR manifests: rises with bits per unit
/// of scene complexity and saturates at 100.
inline double synthetic_quality(double bitrate_kbps, double complexity) {
  const double q = 100.0 * (1.0 - std::exp(-bitrate_kbps / (900.0 * complexity)));
  return std::clamp(std::round(q * 100.0) / 100.0, 0.0, 100.0);
}

/// VBR manifest: each position gets a log-normal complexity factor shared by
/// every track; chunk size scales with it. Log-complexity is AR(1) with
/// coefficient `scene_correlation` so complex scenes span several chunks.
/// Qualities follow synthetic_quality.
inline VideoManifest make_vbr_manifest(std::uint64_t seed, const std::vector<double>& bitrates_kbps,
                                       double chunk_duration_s, std::size_t chunk_count, double spread = 0.4,
                                       double scene_correlation = 0.7, std::string name = "") {
  if (!(scene_correlation >= 0.0 && scene_correlation < 1.0)) throw ConfigError("scene correlation must be in [0,1)");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z(0.0, spread * std::sqrt(1.0 - scene_correlation * scene_correlation));
  std::vector<double> factor(chunk_count);
  double sum = 0.0;
  double level = std::normal_distribution<double>(0.0, spread)(rng);
  for (auto& f : factor) {
    f = std::exp(level);
    sum += f;
    level = scene_correlation * level + z(rng);
  }
  for (auto& f : factor) f *= static_cast<double>(chunk_count) / sum;  // mean 1

  VideoManifest m;
  m.name = name.empty() ? "vbr-" + std::to_string(seed) : std::move(name);
  m.chunk_duration_s = chunk_duration_s;
  m.is_vbr = true;
  for (std::size_t l = 0; l < bitrates_kbps.size(); ++l) {
    Track t;
    t.level = static_cast<int>(l) + 1;
    t.declared_bitrate_kbps = bitrates_kbps[l];
    for (std::size_t i = 0; i < chunk_count; ++i) {
      const double kbps = bitrates_kbps[l] * factor[i];
      const auto bytes = std::max<std::int64_t>(1, std::llround(kbps * 1000.0 * chunk_duration_s / 8.0));
      t.chunks.push_back({bytes, chunk_duration_s, synthetic_quality(bitrates_kbps[l], factor[i])});
    }
    m.tracks.push_back(std::move(t));
  }
  m.validate();
  return m;
}

}  // namespace abrsim
