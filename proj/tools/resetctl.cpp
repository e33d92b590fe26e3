// resetctl: run reset-control experiments described by JSON files.
#include <cstdio>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "resetctl/experiment.hpp"

#ifndef RESETCTL_VERSION
#define RESETCTL_VERSION "0.0.0"
#endif

namespace {

using namespace resetctl;

const char* status_name(int status) {
  switch (status) {
    case exit_ok: return "ok";
    case exit_config: return "config-error";
    case exit_divergence: return "divergence";
    case exit_unstable: return "no-certificate";
    default: return "failure";
  }
}

// Diagnostics are single lines: "resetctl: <status>: <field>: <message>".
void print_issue(const char* level, const ConfigIssue& issue, std::FILE* to) {
  std::fprintf(to, "resetctl: %s: %s: %s\n", level, issue.path.empty() ? "-" : issue.path.c_str(),
               issue.message.c_str());
}

int config_failure(const ValidationReport& report) {
  const ConfigIssue& first = report.errors.front();
  std::string msg = first.message;
  if (report.errors.size() > 1) {
    msg += " (+" + std::to_string(report.errors.size() - 1) + " more, see `resetctl validate`)";
  }
  print_issue(status_name(exit_config), {first.path, msg}, stderr);
  return exit_config;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Reset control experiments: describing functions, closed-loop simulation, "
               "reset-band tuning and stability certificates."};
  app.set_version_flag("--version", RESETCTL_VERSION);
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::uint64_t seed = 0;
  bool require_stable = false;

  auto* run = app.add_subcommand("run", "run the experiment and write results");
  run->add_option("config", config_path, "experiment JSON file")->required();
  run->add_option("--out", out_dir, "output directory")->required();
  auto* seed_opt = run->add_option("--seed", seed, "noise seed, overrides noise.seed");
  run->add_flag("--require-stable", require_stable,
                "exit 4 unless an H-beta stability certificate is found");

  auto* validate = app.add_subcommand("validate", "check a config without running it");
  validate->add_option("config", config_path, "experiment JSON file")->required();

  auto* tune = app.add_subcommand("tune-delta", "print the reset band for the config's reference");
  tune->add_option("config", config_path, "experiment JSON file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : exit_config;
  }

  const ParsedConfig parsed = load_config(config_path);

  if (*validate) {
    for (const auto& w : parsed.report.warnings) print_issue("warning", w, stdout);
    for (const auto& e : parsed.report.errors) print_issue("error", e, stdout);
    if (parsed.report.ok()) std::printf("%s: valid\n", config_path.c_str());
    return parsed.report.ok() ? exit_ok : exit_config;
  }

  for (const auto& w : parsed.report.warnings) print_issue("warning", w, stderr);
  if (!parsed.report.ok()) return config_failure(parsed.report);
  const ExperimentConfig& config = *parsed.config;

  if (*tune) {
    if (!config.tuning) {
      print_issue(status_name(exit_config), {"tuning", "is required for tune-delta"}, stderr);
      return exit_config;
    }
    try {
      std::printf("%.12g\n", tune_delta(config));
    } catch (const Error& e) {
      const int status = e.kind() == ErrorKind::guarantee_void ? exit_config : exit_failure;
      print_issue(status_name(status), {"tuning", e.what()}, stderr);
      return status;
    }
    return exit_ok;
  }

  RunOptions opts;
  if (*seed_opt) opts.seed = seed;
  opts.require_stable = require_stable;
  opts.version = RESETCTL_VERSION;
  const RunResult result = run_experiment(config, out_dir, opts);
  if (result.status != exit_ok) {
    std::fprintf(stderr, "resetctl: %s: %s\n", status_name(result.status), result.reason.c_str());
  }
  return result.status;
}
