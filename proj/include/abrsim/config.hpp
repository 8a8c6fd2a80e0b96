#pragma once

// Declarative run configuration (one JSON document). Relative paths are
// resolved against the directory holding the config file.

#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "abrsim/metrics.hpp"
#include "abrsim/schemes/filters.hpp"
#include "abrsim/sim.hpp"

namespace abrsim {

namespace fs = std::filesystem;

struct GridSpec {
  std::vector<double> kp;
  std::vector<double> ki;
};

struct RunConfig {
  std::vector<std::string> traces;  // files; a directory expands to its *.csv files
  std::string manifest;
  std::vector<std::string> schemes{"pia"};
  nlohmann::json scheme_params = nlohmann::json::object();  // per scheme name
  SimConfig sim;
  std::optional<QoeWeights> qoe;  // default: mu 1, lambda = top bitrate in Mbps
  FilterSpec::Kind filter = FilterSpec::Kind::none;
  std::optional<double> target_quality;
  std::string out_dir = "out";
  bool include_oracle = false;
  double gamma = 10000.0;
  std::optional<GridSpec> grid;
  double heat_threshold = 0.9;
  double min_mean_heat = 0.8;
  int jobs = 1;

  fs::path base_dir;  // not serialized

  fs::path resolve(const std::string& p) const {
    const fs::path path(p);
    return path.is_absolute() || base_dir.empty() ? path : base_dir / path;
  }
};

namespace detail {

template <typename T>
T get_or(const nlohmann::json& j, const char* key, T fallback) {
  if (!j.contains(key) || j.at(key).is_null()) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config field '") + key + "': " + e.what());
  }
}

inline void check_keys(const nlohmann::json& j, std::initializer_list<const char*> keys, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* k : keys) ok = ok || it.key() == k;
    if (!ok) throw ConfigError("unknown config field '" + it.key() + "' in " + where);
  }
}

}  // namespace detail

inline SimConfig sim_config_from_json(const nlohmann::json& j) {
  using detail::get_or;
  detail::check_keys(j,
                     {"startup", "max_buffer_s", "resume_margin_s", "rtt_s", "estimator", "first_level", "loop_trace"},
                     "sim");
  SimConfig c;
  if (j.contains("startup")) {
    const auto& s = j.at("startup");
    detail::check_keys(s, {"latency_s", "chunks"}, "sim.startup");
    if (s.contains("latency_s") == s.contains("chunks"))
      throw ConfigError("sim.startup needs exactly one of latency_s or chunks");
    c.startup = s.contains("latency_s") ? StartupRule::latency(get_or(s, "latency_s", 10.0))
                                        : StartupRule::chunks_buffered(get_or(s, "chunks", 2));
  }
  if (j.contains("max_buffer_s")) {
    const auto& mb = j.at("max_buffer_s");
    c.max_buffer = mb.is_null() ? kInfiniteBuffer : get_or(j, "max_buffer_s", 120.0);
  }
  if (j.contains("resume_margin_s") && !j.at("resume_margin_s").is_null())
    c.resume_margin = get_or(j, "resume_margin_s", 0.0);
  c.rtt = get_or(j, "rtt_s", c.rtt);
  if (j.contains("estimator")) {
    const auto& e = j.at("estimator");
    detail::check_keys(e, {"kind", "window"}, "sim.estimator");
    c.estimator.kind = estimator_kind_from_string(get_or<std::string>(e, "kind", "harmonic_seconds"));
    c.estimator.window = get_or(e, "window", 20);
  }
  if (j.contains("first_level") && !j.at("first_level").is_null()) c.first_level = get_or(j, "first_level", 1);
  c.loop_trace = get_or(j, "loop_trace", true);
  return c;
}

inline nlohmann::json sim_config_to_json(const SimConfig& c) {
  using nlohmann::json;
  json j;
  j["startup"] = c.startup.kind == StartupRule::Kind::latency ? json{{"latency_s", c.startup.latency_s}}
                                                              : json{{"chunks", c.startup.chunks}};
  j["max_buffer_s"] = std::isinf(c.max_buffer) ? json(nullptr) : json(c.max_buffer);
  j["resume_margin_s"] = c.resume_margin ? json(*c.resume_margin) : json(nullptr);
  j["rtt_s"] = c.rtt;
  j["estimator"] = {{"kind", to_string(c.estimator.kind)}, {"window", c.estimator.window}};
  j["first_level"] = c.first_level ? json(*c.first_level) : json(nullptr);
  j["loop_trace"] = c.loop_trace;
  return j;
}

inline RunConfig run_config_from_json(const nlohmann::json& j, fs::path base_dir = {}) {
  using detail::get_or;
  detail::check_keys(j,
                     {"traces", "manifest", "schemes", "scheme_params", "sim", "qoe", "filter", "target_quality",
                      "out_dir", "include_oracle", "gamma", "grid", "heat_threshold", "min_mean_heat", "jobs",
                      "deterministic"},
                     "config");
  RunConfig c;
  c.base_dir = std::move(base_dir);
  if (j.contains("traces")) {
    const auto& t = j.at("traces");
    if (t.is_string())
      c.traces = {t.get<std::string>()};
    else
      c.traces = get_or<std::vector<std::string>>(j, "traces", {});
  }
  c.manifest = get_or<std::string>(j, "manifest", "");
  if (j.contains("schemes")) {
    const auto& s = j.at("schemes");
    c.schemes = s.is_string() ? std::vector<std::string>{s.get<std::string>()}
                              : get_or<std::vector<std::string>>(j, "schemes", {});
  }
  if (j.contains("scheme_params")) {
    c.scheme_params = j.at("scheme_params");
    if (!c.scheme_params.is_object()) throw ConfigError("scheme_params must be an object keyed by scheme name");
  }
  if (j.contains("sim")) c.sim = sim_config_from_json(j.at("sim"));
  if (j.contains("qoe") && !j.at("qoe").is_null()) {
    const auto& q = j.at("qoe");
    detail::check_keys(q, {"mu", "lambda"}, "qoe");
    QoeWeights w;
    w.mu = get_or(q, "mu", 1.0);
    w.lambda = get_or(q, "lambda", 1.0);
    w.validate();
    c.qoe = w;
  }
  c.filter = filter_kind_from_string(get_or<std::string>(j, "filter", "none"));
  if (j.contains("target_quality") && !j.at("target_quality").is_null())
    c.target_quality = get_or(j, "target_quality", 80.0);
  c.out_dir = get_or<std::string>(j, "out_dir", c.out_dir);
  c.include_oracle = get_or(j, "include_oracle", false);
  c.gamma = get_or(j, "gamma", c.gamma);
  if (j.contains("grid") && !j.at("grid").is_null()) {
    const auto& g = j.at("grid");
    detail::check_keys(g, {"kp", "ki"}, "grid");
    c.grid = GridSpec{get_or<std::vector<double>>(g, "kp", {}), get_or<std::vector<double>>(g, "ki", {})};
  }
  c.heat_threshold = get_or(j, "heat_threshold", c.heat_threshold);
  c.min_mean_heat = get_or(j, "min_mean_heat", c.min_mean_heat);
  c.jobs = get_or(j, "jobs", c.jobs);
  if (!get_or(j, "deterministic", true)) throw ConfigError("runs are always deterministic; 'deterministic' must be true");
  if (c.jobs < 1) throw ConfigError("jobs must be >= 1");
  return c;
}

inline nlohmann::json run_config_to_json(const RunConfig& c) {
  using nlohmann::json;
  json j;
  j["traces"] = c.traces;
  j["manifest"] = c.manifest;
  j["schemes"] = c.schemes;
  j["scheme_params"] = c.scheme_params;
  j["sim"] = sim_config_to_json(c.sim);
  j["qoe"] = c.qoe ? json{{"mu", c.qoe->mu}, {"lambda", c.qoe->lambda}} : json(nullptr);
  j["filter"] = to_string(c.filter);
  j["target_quality"] = c.target_quality ? json(*c.target_quality) : json(nullptr);
  j["out_dir"] = c.out_dir;
  j["include_oracle"] = c.include_oracle;
  j["gamma"] = c.gamma;
  j["grid"] = c.grid ? json{{"kp", c.grid->kp}, {"ki", c.grid->ki}} : json(nullptr);
  j["heat_threshold"] = c.heat_threshold;
  j["min_mean_heat"] = c.min_mean_heat;
  j["jobs"] = c.jobs;
  j["deterministic"] = true;
  return j;
}

inline std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw ConfigError("cannot open '" + p.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const fs::path& p, const std::string& text) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error("cannot write '" + p.string() + "'");
  out << text;
}

inline RunConfig load_run_config(const fs::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config '" + path.string() + "' is not valid JSON: " + e.what());
  }
  return run_config_from_json(j, path.parent_path());
}

/// Trace files named by the config; directories contribute their *.csv files in name order.
inline std::vector<fs::path> expand_trace_paths(const RunConfig& c) {
  std::vector<fs::path> out;
  for (const auto& t : c.traces) {
    const fs::path p = c.resolve(t);
    if (fs::is_directory(p)) {
      std::vector<fs::path> found;
      for (const auto& e : fs::directory_iterator(p))
        if (e.is_regular_file() && e.path().extension() == ".csv") found.push_back(e.path());
      std::sort(found.begin(), found.end());
      out.insert(out.end(), found.begin(), found.end());
    } else if (fs::exists(p)) {
      out.push_back(p);
    } else {
      throw ConfigError("trace path '" + p.string() + "' does not exist");
    }
  }
  if (out.empty()) throw ConfigError("config names no traces");
  return out;
}

inline BandwidthTrace load_trace(const fs::path& p) { return parse_trace(read_file(p), p.stem().string()); }

inline VideoManifest load_manifest(const RunConfig& c) {
  if (c.manifest.empty()) throw ConfigError("config names no manifest");
  const fs::path p = c.resolve(c.manifest);
  if (!fs::exists(p)) throw ConfigError("manifest '" + p.string() + "' does not exist");
  return parse_manifest(read_file(p));
}

}  // namespace abrsim
