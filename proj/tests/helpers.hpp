#pragma once

// Small builders shared by the test suites.

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "abrsim/abrsim.hpp"

namespace testutil {

/// Manifest whose chunk sizes are given per track (bytes), each Δ long.
inline abrsim::VideoManifest manifest_from_sizes(const std::vector<std::vector<std::int64_t>>& sizes, double delta,
                                                 const std::vector<std::vector<double>>& quality = {}) {
  abrsim::VideoManifest m;
  m.name = "sizes";
  m.chunk_duration_s = delta;
  m.is_vbr = true;
  for (std::size_t l = 0; l < sizes.size(); ++l) {
    abrsim::Track t;
    t.level = static_cast<int>(l) + 1;
    double kbits = 0.0;
    for (std::size_t i = 0; i < sizes[l].size(); ++i) {
      abrsim::ChunkMeta c{sizes[l][i], delta, std::nullopt};
      if (l < quality.size()) c.quality = quality[l][i];
      kbits += c.kilobits();
      t.chunks.push_back(c);
    }
    t.declared_bitrate_kbps = kbits / (delta * static_cast<double>(sizes[l].size()));
    m.tracks.push_back(std::move(t));
  }
  m.validate();
  return m;
}

/// Random manifest with monotone per-position qualities in [20, 100].
inline abrsim::VideoManifest random_quality_manifest(std::uint64_t seed, int levels, std::size_t chunks,
                                                     double delta = 2.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<std::vector<std::int64_t>> sizes(static_cast<std::size_t>(levels));
  std::vector<std::vector<double>> q(static_cast<std::size_t>(levels));
  for (std::size_t i = 0; i < chunks; ++i) {
    const double scale = 0.5 + u(rng);
    double quality = 20.0 + 30.0 * u(rng);
    for (int l = 0; l < levels; ++l) {
      const double kbps = 300.0 * std::pow(1.8, l) * scale;
      sizes[static_cast<std::size_t>(l)].push_back(static_cast<std::int64_t>(kbps * 1000.0 * delta / 8.0));
      q[static_cast<std::size_t>(l)].push_back(std::round(std::min(quality, 100.0) * 100.0) / 100.0);
      quality += 15.0 * u(rng);
    }
  }
  return manifest_from_sizes(sizes, delta, q);
}

inline abrsim::SimConfig quick_config() {
  abrsim::SimConfig c;
  c.startup = abrsim::StartupRule::latency(0.0);
  c.rtt = 0.0;
  c.max_buffer = abrsim::kInfiniteBuffer;
  return c;
}

}  // namespace testutil
