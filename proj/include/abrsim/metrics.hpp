#pragma once

// QoE score and per-session metric reports.

#include <cmath>
#include <optional>
#include <string>

#include "json.hpp"

#include "abrsim/format.hpp"
#include "abrsim/sim.hpp"

namespace abrsim {

/// QoE = sum R - mu * sum |dR| - lambda * sum S, with R in Mbps and S in seconds.
struct QoeWeights {
  double mu = 1.0;
  double lambda = 1.0;

  void validate() const {
    if (mu < 0.0 || lambda < 0.0) throw ConfigError("QoE weights must be >= 0");
  }
};

inline constexpr const char* kQoeRateUnit = "Mbps";

/// mu = 1 and lambda = top track bitrate in Mbps.
inline QoeWeights default_qoe_weights(const VideoManifest& m) { return {1.0, m.avg_bitrates().back() / 1000.0}; }

struct QoeComponents {
  double rate_sum = 0.0;    // Mbps
  double change_sum = 0.0;  // Mbps
  double stall_sum = 0.0;   // s
};

inline QoeComponents qoe_components(const SessionLog& log) {
  QoeComponents c;
  for (std::size_t t = 0; t < log.decisions.size(); ++t) {
    const double r = log.decisions[t].bitrate_kbps / 1000.0;
    c.rate_sum += r;
    if (t > 0) c.change_sum += std::abs(r - log.decisions[t - 1].bitrate_kbps / 1000.0);
    c.stall_sum += log.decisions[t].stall_s;
  }
  return c;
}

inline double qoe_score(const SessionLog& log, const QoeWeights& w) {
  w.validate();
  const QoeComponents c = qoe_components(log);
  return c.rate_sum - w.mu * c.change_sum - w.lambda * c.stall_sum;
}

inline constexpr double kLowQualityThreshold = 60.0;

struct MetricsReport {
  double avg_bitrate = 0.0;         // kbps
  double avg_bitrate_change = 0.0;  // kbps per chunk
  double total_stall = 0.0;         // s
  double qoe = 0.0;
  std::optional<double> avg_quality_dev;     // VMAF
  std::optional<double> pct_low_quality;     // fraction in [0,1]
  std::optional<double> avg_quality_change;  // VMAF per chunk
  double data_usage = 0.0;                   // MB
  double startup_latency = 0.0;              // s
  std::size_t chunks = 0;
};

inline MetricsReport session_metrics(const SessionLog& log, const QoeWeights& w,
                                     std::optional<double> target_quality = std::nullopt) {
  MetricsReport r;
  const auto& d = log.decisions;
  const std::size_t n = d.size();
  r.chunks = n;
  r.total_stall = log.total_stall;
  r.startup_latency = log.startup_latency;
  r.qoe = qoe_score(log, w);
  std::int64_t bytes = 0;
  for (const auto& x : d) bytes += x.bytes;
  r.data_usage = static_cast<double>(bytes) / 1e6;
  if (n == 0) return r;

  double rate = 0.0, change = 0.0;
  for (std::size_t t = 0; t < n; ++t) {
    rate += d[t].bitrate_kbps;
    if (t > 0) change += std::abs(d[t].bitrate_kbps - d[t - 1].bitrate_kbps);
  }
  r.avg_bitrate = rate / static_cast<double>(n);
  r.avg_bitrate_change = n > 1 ? change / static_cast<double>(n - 1) : 0.0;

  bool have_q = true;
  for (const auto& x : d) have_q = have_q && x.quality.has_value();
  if (!have_q) return r;
  double low = 0.0, qchange = 0.0;
  for (std::size_t t = 0; t < n; ++t) {
    if (*d[t].quality < kLowQualityThreshold) low += 1.0;
    if (t > 0) qchange += std::abs(*d[t].quality - *d[t - 1].quality);
  }
  r.pct_low_quality = low / static_cast<double>(n);
  r.avg_quality_change = n > 1 ? qchange / static_cast<double>(n - 1) : 0.0;
  if (target_quality) {
    double dev = 0.0;
    for (const auto& x : d) dev += std::abs(*x.quality - *target_quality);
    r.avg_quality_dev = dev / static_cast<double>(n);
  }
  return r;
}

inline nlohmann::json metrics_to_json(const MetricsReport& r) {
  using nlohmann::json;
  auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  return json{{"avg_bitrate_kbps", r.avg_bitrate},
              {"avg_bitrate_change_kbps", r.avg_bitrate_change},
              {"total_stall_s", r.total_stall},
              {"qoe", r.qoe},
              {"qoe_rate_unit", kQoeRateUnit},
              {"avg_quality_dev_vmaf", opt(r.avg_quality_dev)},
              {"pct_low_quality", opt(r.pct_low_quality)},
              {"avg_quality_change_vmaf", opt(r.avg_quality_change)},
              {"data_usage_mb", r.data_usage},
              {"startup_latency_s", r.startup_latency},
              {"chunks", r.chunks}};
}

inline const char* kMetricsCsvHeader =
    "avg_bitrate_kbps,avg_bitrate_change_kbps,total_stall_s,qoe,avg_quality_dev_vmaf,pct_low_quality,"
    "avg_quality_change_vmaf,data_usage_mb,startup_latency_s";

inline std::string metrics_csv_row(const MetricsReport& r) {
  return format_double(r.avg_bitrate) + ',' + format_double(r.avg_bitrate_change) + ',' +
         format_double(r.total_stall) + ',' + format_double(r.qoe) + ',' + format_optional(r.avg_quality_dev) + ',' +
         format_optional(r.pct_low_quality) + ',' + format_optional(r.avg_quality_change) + ',' +
         format_double(r.data_usage) + ',' + format_double(r.startup_latency);
}

inline std::string metrics_to_csv(const MetricsReport& r) {
  return std::string(kMetricsCsvHeader) + '\n' + metrics_csv_row(r) + '\n';
}

}  // namespace abrsim
