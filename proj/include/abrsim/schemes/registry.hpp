#pragma once

// Name -> scheme factory with JSON parameter overrides.

#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "abrsim/schemes/baselines.hpp"
#include "abrsim/schemes/cava.hpp"
#include "abrsim/schemes/pia.hpp"
#include "abrsim/schemes/quad.hpp"

namespace abrsim {

class UnknownSchemeError : public ConfigError {
 public:
  explicit UnknownSchemeError(const std::string& name) : ConfigError("unknown scheme \"" + name + "\"") {}
};

inline const std::vector<std::string>& scheme_names() {
  static const std::vector<std::string> names{"rb", "bba0", "rba", "mpc", "robustmpc", "pia", "piae", "cava", "quad"};
  return names;
}

namespace detail {

using nlohmann::json;

inline void reject_unknown(const json& j, const std::set<std::string>& known, const std::string& where) {
  if (j.is_null()) return;
  if (!j.is_object()) throw ConfigError(where + " parameters must be a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!known.count(it.key())) throw ConfigError("unknown parameter '" + it.key() + "' for " + where);
}

template <typename T>
void read(const json& j, const char* key, T& out) {
  if (j.is_object() && j.contains(key)) {
    try {
      out = j.at(key).get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(std::string("bad value for '") + key + "': " + e.what());
    }
  }
}

inline void read_pid(const json& j, PidParams& p) {
  if (!j.is_object() || !j.contains("pid")) return;
  const json& q = j.at("pid");
  reject_unknown(q, {"kp", "ki", "beta", "epsilon", "target_buffer"}, "pid");
  read(q, "kp", p.kp);
  read(q, "ki", p.ki);
  read(q, "beta", p.beta);
  read(q, "epsilon", p.epsilon);
  read(q, "target_buffer", p.target_buffer);
}

}  // namespace detail

/// Builds a scheme by name. `target_quality` feeds QUAD when its parameters do
/// not set one.
inline std::unique_ptr<AbrScheme> make_scheme(const std::string& name, const nlohmann::json& params = {},
                                              std::optional<double> target_quality = std::nullopt) {
  using detail::read;
  const std::string where = "scheme '" + name + "'";
  if (name == "rb") {
    detail::reject_unknown(params, {}, where);
    return std::make_unique<RateBasedScheme>();
  }
  if (name == "bba0") {
    detail::reject_unknown(params, {"theta_low", "theta_high"}, where);
    Bba0Params p;
    read(params, "theta_low", p.theta_low);
    read(params, "theta_high", p.theta_high);
    return std::make_unique<Bba0Scheme>(p);
  }
  if (name == "rba") {
    detail::reject_unknown(params, {"reserve_chunks"}, where);
    RbaParams p;
    read(params, "reserve_chunks", p.reserve_chunks);
    return std::make_unique<RbaScheme>(p);
  }
  if (name == "mpc" || name == "robustmpc") {
    detail::reject_unknown(params, {"horizon", "mu", "lambda", "error_window"}, where);
    MpcParams p;
    p.robust = name == "robustmpc";
    read(params, "horizon", p.horizon);
    read(params, "mu", p.mu);
    if (params.is_object() && params.contains("lambda")) {
      double l = 0.0;
      read(params, "lambda", l);
      p.lambda = l;
    }
    read(params, "error_window", p.error_window);
    return std::make_unique<MpcScheme>(p);
  }
  if (name == "pia" || name == "piae") {
    std::set<std::string> known{"pid", "horizon", "eta"};
    if (name == "piae") known.insert({"alpha", "tau"});
    detail::reject_unknown(params, known, where);
    PiaParams p = name == "piae" ? PiaeScheme::default_params() : PiaParams{};
    detail::read_pid(params, p.pid);
    read(params, "horizon", p.horizon);
    read(params, "eta", p.eta);
    if (name == "pia") return std::make_unique<PiaScheme>(p);
    RampSchedule r;
    read(params, "alpha", r.alpha);
    read(params, "tau", r.tau);
    return std::make_unique<PiaeScheme>(p, r);
  }
  if (name == "cava") {
    detail::reject_unknown(params,
                           {"pid", "horizon", "inner_window", "outer_window", "alpha_q4", "alpha_q123",
                            "low_level_cutoff", "safe_buffer", "base_target_buffer", "reference_level",
                            "q4_low_buffer_heuristic"},
                           where);
    CavaParams p;
    detail::read_pid(params, p.pid);
    read(params, "horizon", p.horizon);
    read(params, "inner_window", p.inner_window);
    read(params, "outer_window", p.outer_window);
    read(params, "alpha_q4", p.alpha_q4);
    read(params, "alpha_q123", p.alpha_q123);
    read(params, "low_level_cutoff", p.low_level_cutoff);
    read(params, "safe_buffer", p.safe_buffer);
    read(params, "base_target_buffer", p.base_target_buffer);
    if (params.is_object() && params.contains("reference_level")) {
      int l = 0;
      read(params, "reference_level", l);
      p.reference_level = l;
    }
    read(params, "q4_low_buffer_heuristic", p.q4_low_buffer_heuristic);
    return std::make_unique<CavaScheme>(p);
  }
  if (name == "quad") {
    detail::reject_unknown(params, {"pid", "target_quality", "alpha", "eta", "fair_level", "low_buffer_multiplier"},
                           where);
    QuadParams p;
    if (target_quality) p.target_quality = *target_quality;
    detail::read_pid(params, p.pid);
    read(params, "target_quality", p.target_quality);
    read(params, "alpha", p.alpha);
    read(params, "eta", p.eta);
    read(params, "fair_level", p.fair_level);
    read(params, "low_buffer_multiplier", p.low_buffer_multiplier);
    return std::make_unique<QuadScheme>(p);
  }
  throw UnknownSchemeError(name);
}

}  // namespace abrsim
