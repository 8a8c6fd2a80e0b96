// abrsim: run, compare, sweep, oracle and gen-trace from the command line.

#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "abrsim/cli.hpp"

namespace {

struct Options {
  std::string config;
  abrsim::CliOverrides overrides;
  abrsim::TraceSpec trace;
  std::string trace_out = ".";
};

abrsim::RunConfig load(const Options& o) {
  abrsim::RunConfig c = abrsim::load_run_config(o.config);
  abrsim::apply_overrides(c, o.overrides);
  return c;
}

void add_common(CLI::App* cmd, Options& o) {
  cmd->add_option("--config", o.config, "run config JSON")->required()->check(CLI::ExistingFile);
  cmd->add_option("--out", o.overrides.out_dir, "output directory");
  cmd->add_option("--jobs", o.overrides.jobs, "worker threads")->check(CLI::PositiveNumber);
  cmd->add_option("--scheme", o.overrides.scheme, "scheme name (overrides the config list)");
  cmd->add_option("--filter", o.overrides.filter, "quality prefilter")
      ->check(CLI::IsMember({"none", "cbf", "tbf-", "tbf+"}));
  cmd->add_option("--target-quality", o.overrides.target_quality, "target VMAF")->check(CLI::Range(0.0, 100.0));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Trace-driven adaptive bitrate streaming simulator"};
  app.require_subcommand(1);
  Options o;

  auto* run = app.add_subcommand("run", "simulate one scheme on one trace");
  auto* compare = app.add_subcommand("compare", "every scheme on every trace, one CSV row each");
  auto* sweep = app.add_subcommand("sweep", "kp/ki heat-map sweep");
  auto* oracle = app.add_subcommand("oracle", "offline-optimal track sequence");
  for (auto* cmd : {run, compare, sweep, oracle}) add_common(cmd, o);

  auto* gen = app.add_subcommand("gen-trace", "write a synthetic bandwidth trace");
  gen->add_option("--kind", o.trace.kind, "constant, step, square or random")
      ->check(CLI::IsMember({"constant", "step", "square", "random"}));
  gen->add_option("--seconds", o.trace.seconds, "trace length");
  gen->add_option("--kbps", o.trace.kbps, "constant level, step start, random mean");
  gen->add_option("--high", o.trace.high, "step end / square high level");
  gen->add_option("--low", o.trace.low, "square low level");
  gen->add_option("--period", o.trace.period, "step time / square half period (s)");
  gen->add_option("--seed", o.trace.seed, "random seed");
  gen->add_option("--name", o.trace.name, "trace name (file stem)");
  gen->add_option("--out", o.trace_out, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? abrsim::kExitOk : abrsim::kExitUsage;
  }

  try {
    if (*run) return abrsim::cmd_run(load(o));
    if (*compare) return abrsim::cmd_compare(load(o));
    if (*sweep) return abrsim::cmd_sweep(load(o));
    if (*oracle) return abrsim::cmd_oracle(load(o));
    if (*gen) return abrsim::cmd_gen_trace(o.trace, o.trace_out);
  } catch (const abrsim::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return abrsim::kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return abrsim::kExitRuntime;
  }
  return abrsim::kExitUsage;
}
