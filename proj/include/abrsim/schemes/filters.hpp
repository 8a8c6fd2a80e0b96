#pragma once

// Quality-aware prefilters. CBF caps each position at the track whose quality
// is closest to the target; TBF applies one cap from per-track mean quality.

#include <cmath>
#include <string>

#include "abrsim/sim.hpp"

namespace abrsim {

inline void require_quality(const VideoManifest& m, const char* who) {
  if (!m.has_quality()) throw ConfigError(std::string(who) + " needs per-chunk quality in the manifest");
}

inline void require_target(double q) {
  if (!(q > 0.0 && q <= 100.0)) throw ConfigError("target quality must be in (0,100]");
}

inline LevelCaps cbf_filter(const VideoManifest& m, double target_quality) {
  require_quality(m, "CBF");
  require_target(target_quality);
  LevelCaps caps(m.num_chunks(), 1);
  for (std::size_t i = 0; i < m.num_chunks(); ++i) {
    double best = std::abs(m.quality(1, i) - target_quality);
    for (int l = 2; l <= m.num_levels(); ++l) {
      const double d = std::abs(m.quality(l, i) - target_quality);
      if (d < best) {
        best = d;
        caps[i] = l;
      }
    }
  }
  return caps;
}

enum class TbfVariant { minus, plus };

inline double track_mean_quality(const VideoManifest& m, int level) {
  double s = 0.0;
  for (std::size_t i = 0; i < m.num_chunks(); ++i) s += m.quality(level, i);
  return s / static_cast<double>(m.num_chunks());
}

/// l- is the highest track with mean quality <= target (1 if none); l+ = l- + 1,
/// or 1 when every track is above the target, and never beyond the top track.
inline int tbf_filter(const VideoManifest& m, double target_quality, TbfVariant v) {
  require_quality(m, "TBF");
  require_target(target_quality);
  int minus = 0;
  for (int l = 1; l <= m.num_levels(); ++l)
    if (track_mean_quality(m, l) <= target_quality) minus = l;
  if (v == TbfVariant::minus) return std::max(minus, 1);
  return std::min(minus + 1, m.num_levels());
}

struct FilterSpec {
  enum class Kind { none, cbf, tbf_minus, tbf_plus };
  Kind kind = Kind::none;
  double target_quality = 80.0;
};

inline FilterSpec::Kind filter_kind_from_string(const std::string& s) {
  if (s == "none") return FilterSpec::Kind::none;
  if (s == "cbf") return FilterSpec::Kind::cbf;
  if (s == "tbf-") return FilterSpec::Kind::tbf_minus;
  if (s == "tbf+") return FilterSpec::Kind::tbf_plus;
  throw ConfigError("unknown filter '" + s + "' (expected none, cbf, tbf-, tbf+)");
}

inline std::string to_string(FilterSpec::Kind k) {
  switch (k) {
    case FilterSpec::Kind::cbf: return "cbf";
    case FilterSpec::Kind::tbf_minus: return "tbf-";
    case FilterSpec::Kind::tbf_plus: return "tbf+";
    default: return "none";
  }
}

inline LevelCaps apply_filter(const VideoManifest& m, const FilterSpec& f) {
  switch (f.kind) {
    case FilterSpec::Kind::none: return {};
    case FilterSpec::Kind::cbf: return cbf_filter(m, f.target_quality);
    case FilterSpec::Kind::tbf_minus: return LevelCaps(m.num_chunks(), tbf_filter(m, f.target_quality, TbfVariant::minus));
    case FilterSpec::Kind::tbf_plus: return LevelCaps(m.num_chunks(), tbf_filter(m, f.target_quality, TbfVariant::plus));
  }
  return {};
}

}  // namespace abrsim
