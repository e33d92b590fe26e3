#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "resetctl/simulation.hpp"
#include "resetctl/stability.hpp"
#include "resetctl/tuning.hpp"

namespace resetctl {

// JSON experiment files. Lengths are in meters and frequencies in rad/s,
// except keys ending in `_hz`, which are in Hz.

enum class ExperimentKind { time_response, s_sigma, df_bode, tune_delta, stability_check, delta_sweep };

std::string to_string(ExperimentKind kind);

struct ExperimentSpec {
  ExperimentKind kind = ExperimentKind::time_response;
  std::vector<double> omegas;      ///< s-sigma, df-bode
  double amplitude = 0;            ///< s-sigma, df-bode, delta-sweep
  double delta = 0;                ///< df-bode band
  bool ideal_curve = true;         ///< s-sigma: also run without quantizer and noise
  std::vector<double> deltas;      ///< delta-sweep
  double omega = 0;                ///< delta-sweep operating frequency
  std::vector<double> hbeta_grid;  ///< stability-check
  bool verify = false;             ///< tune-delta: simulate the tuned band
};

struct TuningBlock {
  double omega_s = 0;
  double k = 1.0;
  double noise_margin = 0;
};

struct ExperimentConfig {
  std::string plant_kind;
  StateSpaced plant;
  CgLpPidParams controller;
  double delta = 0;  ///< reset band; 0 means zero crossing
  Quantizer quantizer;
  ReferenceSignal reference = ReferenceSignal::sine(0.0, 1.0);
  NoiseSpec noise;
  SimConfig sim;
  bool steady_start = false;  ///< time-response: start from the base-linear steady state
  std::optional<TuningBlock> tuning;
  ExperimentSpec experiment;
  std::string source;  ///< the parsed document, re-serialized

  ResetController reset_controller() const;
  DeltaTuningSpec tuning_spec() const;
};

struct ConfigIssue {
  std::string path;  ///< dotted field path, e.g. "controller.omega_r"
  std::string message;
};

struct ValidationReport {
  std::vector<ConfigIssue> errors;
  std::vector<ConfigIssue> warnings;

  bool ok() const { return errors.empty(); }
};

struct ParsedConfig {
  std::optional<ExperimentConfig> config;  ///< set only when report.ok()
  ValidationReport report;
};

/// Parses and validates in one pass, collecting every violation instead of
/// stopping at the first one.
ParsedConfig parse_config(std::string_view json_text);
ParsedConfig load_config(const std::filesystem::path& path);

struct RunOptions {
  std::optional<std::uint64_t> seed;  ///< overrides noise.seed
  bool require_stable = false;
  std::string version = "0.1.0";
};

/// Exit statuses of `resetctl run`.
enum ExitStatus : int {
  exit_ok = 0,
  exit_failure = 1,
  exit_config = 2,
  exit_divergence = 3,
  exit_unstable = 4,
};

struct RunResult {
  int status = exit_ok;
  std::string reason;  ///< one line, empty on success
  std::vector<std::string> files;
};

/// Runs the configured experiment and writes its CSV or JSON result and
/// manifest.json into out_dir.
RunResult run_experiment(const ExperimentConfig& config, const std::filesystem::path& out_dir,
                         const RunOptions& options = {});

/// Band from the config's reference, quantizer and tuning block.
double tune_delta(const ExperimentConfig& config);

}  // namespace resetctl
