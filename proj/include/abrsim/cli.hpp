#pragma once

// Command implementations behind the abrsim executable. Each returns a
// process exit code and writes its outputs under the configured directory.

#include <filesystem>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "abrsim/config.hpp"
#include "abrsim/metrics.hpp"
#include "abrsim/oracle.hpp"
#include "abrsim/schemes/filters.hpp"
#include "abrsim/schemes/registry.hpp"
#include "abrsim/synth.hpp"
#include "abrsim/tuning.hpp"

namespace abrsim {

enum ExitCode : int { kExitOk = 0, kExitRuntime = 1, kExitUsage = 2 };

/// Command-line values that override the config file.
struct CliOverrides {
  std::optional<std::string> out_dir;
  std::optional<int> jobs;
  std::optional<std::string> scheme;
  std::optional<std::string> filter;
  std::optional<double> target_quality;
};

inline void apply_overrides(RunConfig& c, const CliOverrides& o) {
  if (o.out_dir) c.out_dir = *o.out_dir;
  if (o.jobs) {
    if (*o.jobs < 1) throw ConfigError("--jobs must be >= 1");
    c.jobs = *o.jobs;
  }
  if (o.scheme) c.schemes = {*o.scheme};
  if (o.filter) c.filter = filter_kind_from_string(*o.filter);
  if (o.target_quality) c.target_quality = *o.target_quality;
}

inline fs::path out_path(const RunConfig& c) {
  const fs::path p(c.out_dir);
  return p.is_absolute() ? p : fs::current_path() / p;
}

inline nlohmann::json params_for(const RunConfig& c, const std::string& scheme) {
  return c.scheme_params.contains(scheme) ? c.scheme_params.at(scheme) : nlohmann::json::object();
}

inline std::unique_ptr<AbrScheme> scheme_from_config(const RunConfig& c, const std::string& name) {
  return make_scheme(name, params_for(c, name), c.target_quality);
}

inline QoeWeights weights_for(const RunConfig& c, const VideoManifest& m) {
  return c.qoe.value_or(default_qoe_weights(m));
}

inline LevelCaps caps_for(const RunConfig& c, const VideoManifest& m) {
  return apply_filter(m, FilterSpec{c.filter, c.target_quality.value_or(80.0)});
}

inline int cmd_run(const RunConfig& c, std::ostream& log = std::cout) {
  if (c.schemes.size() != 1) throw ConfigError("run needs exactly one scheme (use --scheme or compare)");
  const VideoManifest m = load_manifest(c);
  const auto paths = expand_trace_paths(c);
  const BandwidthTrace trace = load_trace(paths.front());
  auto scheme = scheme_from_config(c, c.schemes.front());
  const SessionLog s = simulate_session(*scheme, trace, m, c.sim, caps_for(c, m));
  const MetricsReport r = session_metrics(s, weights_for(c, m), c.target_quality);
  const fs::path out = out_path(c);
  write_file(out / "decisions.csv", decisions_to_csv(s));
  write_file(out / "session.json", session_to_json(s).dump(2) + "\n");
  write_file(out / "metrics.json", metrics_to_json(r).dump(2) + "\n");
  write_file(out / "metrics.csv", metrics_to_csv(r));
  log << s.scheme << " on " << s.trace << ": avg bitrate " << format_double(r.avg_bitrate) << " kbps, stall "
      << format_double(r.total_stall) << " s, qoe " << format_double(r.qoe) << "\n";
  return kExitOk;
}

inline const std::string kCompareCsvHeader = std::string("scheme,trace,") + kMetricsCsvHeader + ",evaluations";

inline int cmd_compare(const RunConfig& c, std::ostream& log = std::cout) {
  if (c.schemes.empty()) throw ConfigError("compare needs at least one scheme");
  const VideoManifest m = load_manifest(c);
  std::vector<BandwidthTrace> traces;
  for (const auto& p : expand_trace_paths(c)) traces.push_back(load_trace(p));
  for (const auto& s : c.schemes) scheme_from_config(c, s);  // fail fast on bad names/params
  const LevelCaps caps = caps_for(c, m);
  const QoeWeights w = weights_for(c, m);

  const std::size_t columns = c.schemes.size() + (c.include_oracle ? 1 : 0);
  std::vector<std::string> rows(columns * traces.size());
  parallel_for(rows.size(), c.jobs, [&](std::size_t task) {
    const std::size_t k = task / columns;
    const std::size_t s = task % columns;
    SessionLog session;
    if (s < c.schemes.size()) {
      auto scheme = scheme_from_config(c, c.schemes[s]);
      session = simulate_session(*scheme, traces[k], m, c.sim, caps);
    } else {
      const OfflineObjective obj{c.target_quality.value_or(80.0), c.gamma};
      const OracleResult best = offline_optimal(traces[k], m, obj, c.sim);
      FixedSequenceScheme replay(best.levels, "offline_optimal");
      session = simulate_session(replay, traces[k], m, c.sim);
    }
    const MetricsReport r = session_metrics(session, w, c.target_quality);
    rows[task] = session.scheme + ',' + session.trace + ',' + metrics_csv_row(r) + ',' +
                 std::to_string(session.evaluations);
  });

  std::string csv = kCompareCsvHeader + '\n';
  for (const auto& r : rows) csv += r + '\n';
  write_file(out_path(c) / "compare.csv", csv);
  log << "wrote " << rows.size() << " rows to " << (out_path(c) / "compare.csv").string() << "\n";
  return kExitOk;
}

inline int cmd_sweep(const RunConfig& c, std::ostream& log = std::cout) {
  if (!c.grid) throw ConfigError("sweep needs a 'grid' with kp and ki lists");
  const GainGrid grid{c.grid->kp, c.grid->ki};
  grid.validate();
  if (c.schemes.size() != 1) throw ConfigError("sweep needs exactly one scheme");
  const std::string name = c.schemes.front();
  if (name != "pia" && name != "piae" && name != "cava" && name != "quad")
    throw ConfigError("sweep needs a controller-based scheme (pia, piae, cava, quad), got '" + name + "'");
  scheme_from_config(c, name);

  const VideoManifest m = load_manifest(c);
  std::vector<BandwidthTrace> traces;
  for (const auto& p : expand_trace_paths(c)) traces.push_back(load_trace(p));
  const SchemeFactory factory = [&](double kp, double ki) {
    nlohmann::json p = params_for(c, name);
    p["pid"]["kp"] = kp;
    p["pid"]["ki"] = ki;
    return make_scheme(name, p, c.target_quality);
  };
  const HeatMap map = sweep_gains(grid, traces, m, factory, c.sim, weights_for(c, m), c.jobs, c.heat_threshold);
  const RegionResult region = extract_region(map, c.min_mean_heat);

  nlohmann::json rj;
  if (region.rect) {
    const GainRect& r = *region.rect;
    rj = {{"kp_min", map.kp_values[r.kp_lo]}, {"kp_max", map.kp_values[r.kp_hi]},
          {"ki_min", map.ki_values[r.ki_lo]}, {"ki_max", map.ki_values[r.ki_hi]},
          {"mean_heat", r.mean_heat},         {"trace_count", map.trace_count}};
  } else {
    rj = {{"region", nullptr}, {"diagnostic", region.diagnostic}};
  }
  const fs::path out = out_path(c);
  write_file(out / "heatmap.csv", heatmap_to_csv(map));
  write_file(out / "region.json", rj.dump(2) + "\n");
  log << "swept " << grid.valid_count() << " valid cells over " << traces.size() << " traces\n";
  if (!region.rect) log << "no region: " << region.diagnostic << "\n";
  return kExitOk;
}

inline int cmd_oracle(const RunConfig& c, std::ostream& log = std::cout) {
  const VideoManifest m = load_manifest(c);
  const auto paths = expand_trace_paths(c);
  const BandwidthTrace trace = load_trace(paths.front());
  const OfflineObjective obj{c.target_quality.value_or(80.0), c.gamma};
  const OracleResult best = offline_optimal(trace, m, obj, c.sim);
  FixedSequenceScheme replay(best.levels, "offline_optimal");
  const SessionLog s = simulate_session(replay, trace, m, c.sim);
  const fs::path out = out_path(c);
  nlohmann::json j{{"trace", trace.name()},
                   {"target_quality", obj.target_quality},
                   {"gamma", obj.gamma},
                   {"objective", best.objective},
                   {"total_stall_s", best.total_stall},
                   {"exact", best.exact},
                   {"levels", best.levels}};
  write_file(out / "oracle.json", j.dump(2) + "\n");
  write_file(out / "decisions.csv", decisions_to_csv(s));
  log << "offline optimal objective " << format_double(best.objective) << (best.exact ? "" : " (binned)") << "\n";
  return kExitOk;
}

struct TraceSpec {
  std::string kind = "constant";  // constant, step, square, random
  std::size_t seconds = 600;
  double kbps = 3000.0;           // constant level, step 'before', random mean
  double high = 5000.0;           // step 'after', square high
  double low = 1000.0;            // square low
  std::size_t period = 60;        // step switch time, square half period
  std::uint64_t seed = 1;
  std::string name;
};

inline BandwidthTrace generate_trace(const TraceSpec& s) {
  if (s.seconds == 0) throw ConfigError("trace needs at least one second");
  const std::string name = s.name.empty() ? s.kind : s.name;
  if (s.kind == "constant") return constant_trace(s.kbps, s.seconds, name);
  if (s.kind == "step") return step_trace(s.kbps, s.high, s.period, s.seconds, name);
  if (s.kind == "square") return square_wave_trace(s.low, s.high, s.period, s.seconds, name);
  if (s.kind == "random") return random_trace(s.seed, s.seconds, s.kbps, 0.3, name);
  throw ConfigError("unknown trace kind '" + s.kind + "' (expected constant, step, square, random)");
}

inline int cmd_gen_trace(const TraceSpec& spec, const fs::path& out_dir, std::ostream& log = std::cout) {
  const BandwidthTrace t = generate_trace(spec);
  const fs::path file = out_dir / (t.name() + ".csv");
  write_file(file, serialize_trace(t));
  log << "wrote " << t.size() << " s trace to " << file.string() << "\n";
  return kExitOk;
}

}  // namespace abrsim
