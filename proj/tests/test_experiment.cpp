#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

#include <json.hpp>
#include <unistd.h>

#include "resetctl/experiment.hpp"

using namespace resetctl;
namespace fs = std::filesystem;

namespace {

const char* kTimeResponse = R"({
  "plant": {"kind": "mass", "mass": 1.0},
  "controller": {"preset": "mass_stage", "delta": 20e-6},
  "quantizer": {"mode": "rounding", "range": 5000e-6, "bits": 9},
  "reference": {"components": [{"amplitude": 5000e-6, "omega": 50}]},
  "noise": {"kind": "uniform_white", "amplitude": 1e-6, "seed": 3},
  "sim": {"sample_rate_hz": 10000, "substeps": 2, "duration": 0.3},
  "experiment": {"kind": "time-response"}
})";

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("resetctl_test_" + std::to_string(getpid())) / name;
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool has_issue(const std::vector<ConfigIssue>& issues, const std::string& path) {
  for (const auto& i : issues) {
    if (i.path == path) return true;
  }
  return false;
}

ExperimentConfig parse_ok(const std::string& text) {
  const ParsedConfig p = parse_config(text);
  for (const auto& e : p.report.errors) MESSAGE(e.path << ": " << e.message);
  REQUIRE(p.report.ok());
  return *p.config;
}

}  // namespace

TEST_CASE("shipped configs validate") {
  for (const auto& entry : fs::directory_iterator(RESETCTL_CONFIG_DIR)) {
    CAPTURE(entry.path());
    const ParsedConfig p = load_config(entry.path());
    CHECK(p.report.ok());
    CHECK(p.config.has_value());
  }
}

TEST_CASE("config fields and units") {
  const ExperimentConfig c = parse_ok(kTimeResponse);
  CHECK(c.plant_kind == "mass");
  CHECK(c.controller.K == CgLpPidParams::mass_stage().K);
  CHECK(c.delta == 20e-6);
  CHECK(c.quantizer.mode == Quantizer::Mode::rounding);
  CHECK(c.quantizer.level == 5000e-6 / 512);
  CHECK(c.noise.seed == 3);
  CHECK(c.sim.substeps == 2);
  CHECK(c.reset_controller().condition().kind == ResetCondition::Kind::band);

  const ExperimentConfig hz = parse_ok(R"({
    "plant": {"kind": "custom_ss", "A": {"rows": 2, "cols": 2, "entries": [0, 1, -4, -1]},
              "B": {"rows": 2, "cols": 1, "entries": [0, 4]},
              "C": {"rows": 1, "cols": 2, "entries": [1, 0]},
              "D": {"rows": 1, "cols": 1, "entries": [0]}},
    "controller": {"preset": "precision_stage", "gamma": 0.25},
    "reference": {"components": [{"amplitude": 1e-3, "omega_hz": 5}]},
    "experiment": {"kind": "df-bode", "omegas": [1, 10, 100]}
  })");
  CHECK(hz.plant.A(1, 0) == -4);
  CHECK(hz.plant.B(1, 0) == 4);
  CHECK(hz.controller.gamma == 0.25);
  CHECK(hz.reference.components()[0].omega == doctest::Approx(10 * std::numbers::pi));
  CHECK(hz.experiment.omegas.size() == 3);

  const ExperimentConfig grid = parse_ok(R"({
    "plant": {"kind": "mass", "mass": 2},
    "controller": {"preset": "mass_stage"},
    "reference": {"components": [{"amplitude": 1e-3, "omega": 40}]},
    "experiment": {"kind": "delta-sweep", "deltas": {"lo": 1e-6, "hi": 3e-6, "points": 3}, "omega": 40}
  })");
  REQUIRE(grid.experiment.deltas.size() == 3);
  for (int i = 0; i < 3; ++i) CHECK(grid.experiment.deltas[i] == doctest::Approx((i + 1) * 1e-6));
  CHECK(grid.experiment.amplitude == 1e-3);
}

TEST_CASE("validation collects every violation with its path") {
  const ParsedConfig p = parse_config(R"({
    "plant": {"kind": "mass", "mass": -1},
    "controller": {"preset": "mass_stage", "omega_r": -160, "gamma": 3},
    "quantizer": {"mode": "rounding", "level": 1e-6, "bits": 4},
    "reference": {"components": []},
    "sim": {"substeps": 0},
    "experiment": {"kind": "s-sigma"},
    "colour": "blue"
  })");
  CHECK_FALSE(p.report.ok());
  CHECK_FALSE(p.config.has_value());
  CHECK(has_issue(p.report.errors, "plant.mass"));
  CHECK(has_issue(p.report.errors, "controller.omega_r"));
  CHECK(has_issue(p.report.errors, "controller.gamma"));
  CHECK(has_issue(p.report.errors, "quantizer"));
  CHECK(has_issue(p.report.errors, "reference.components"));
  CHECK(has_issue(p.report.errors, "sim.substeps"));
  CHECK(has_issue(p.report.warnings, "colour"));

  CHECK_FALSE(parse_config("{not json").report.ok());
  CHECK_FALSE(load_config("/nonexistent/config.json").report.ok());

  const ParsedConfig order = parse_config(R"({
    "plant": {"kind": "mass", "mass": 1},
    "controller": {"preset": "mass_stage", "omega_d": 2000},
    "reference": {"components": [{"amplitude": 1e-3, "omega": 40}]},
    "experiment": {"kind": "time-response"}
  })");
  CHECK(has_issue(order.report.errors, "controller"));
}

TEST_CASE("a band at or above the amplitude warns about limit cycles") {
  const ParsedConfig p = parse_config(R"({
    "plant": {"kind": "mass", "mass": 1},
    "controller": {"preset": "mass_stage", "delta": 2e-3},
    "reference": {"components": [{"amplitude": 1e-3, "omega": 40}]},
    "experiment": {"kind": "time-response"}
  })");
  CHECK(p.report.ok());
  REQUIRE(has_issue(p.report.warnings, "controller.delta"));
  CHECK(p.report.warnings.front().message.find("limit cycl") != std::string::npos);

  const ParsedConfig df = parse_config(R"({
    "plant": {"kind": "mass", "mass": 1},
    "controller": {"preset": "mass_stage"},
    "reference": {"components": [{"amplitude": 1e-3, "omega": 40}]},
    "experiment": {"kind": "df-bode", "omegas": [10], "amplitude": 1, "delta": 1}
  })");
  CHECK(has_issue(df.report.errors, "experiment.delta"));
}

TEST_CASE("tune-delta cross checks") {
  const ParsedConfig missing = parse_config(R"({
    "plant": {"kind": "mass", "mass": 1},
    "controller": {"preset": "mass_stage"},
    "reference": {"components": [{"amplitude": 1e-3, "omega": 40}]},
    "experiment": {"kind": "tune-delta"}
  })");
  CHECK(has_issue(missing.report.errors, "tuning"));

  const ParsedConfig above = parse_config(R"({
    "plant": {"kind": "mass", "mass": 1},
    "controller": {"preset": "mass_stage"},
    "reference": {"components": [{"amplitude": 1e-3, "omega": 40}]},
    "tuning": {"omega_s": 30},
    "experiment": {"kind": "tune-delta"}
  })");
  CHECK(has_issue(above.report.errors, "reference.components[0].omega"));

  const ExperimentConfig c = load_config(fs::path(RESETCTL_CONFIG_DIR) / "mass_tune_delta.json").config.value();
  CHECK(tune_delta(c) == doctest::Approx(10.11e-6).epsilon(1e-3));
}

TEST_CASE("runs are deterministic and the manifest reproduces them") {
  const ExperimentConfig c = parse_ok(kTimeResponse);
  const fs::path a = scratch("det_a"), b = scratch("det_b"), s = scratch("det_seed");
  RunOptions opts;
  REQUIRE(run_experiment(c, a, opts).status == exit_ok);
  REQUIRE(run_experiment(c, b, opts).status == exit_ok);
  const std::string trace = slurp(a / "trace.csv");
  CHECK(trace.rfind("t,r,e,y,y_q,u,reset\n", 0) == 0);
  CHECK(trace == slurp(b / "trace.csv"));

  opts.seed = 12345;
  const RunResult seeded = run_experiment(c, s, opts);
  REQUIRE(seeded.status == exit_ok);
  CHECK(slurp(s / "trace.csv") != trace);

  const auto manifest = nlohmann::json::parse(slurp(s / "manifest.json"));
  CHECK(manifest["seed"] == 12345);
  CHECK(manifest["status"] == 0);
  CHECK(manifest["tool"] == "resetctl");
  CHECK(manifest["config"]["noise"]["seed"] == 12345);
  CHECK(manifest.contains("wall_time_s"));

  // Re-running the echoed config without a seed override gives the same bytes.
  const ExperimentConfig echoed = parse_ok(manifest["config"].dump());
  const fs::path r = scratch("det_replay");
  REQUIRE(run_experiment(echoed, r, {}).status == exit_ok);
  CHECK(slurp(r / "trace.csv") == slurp(s / "trace.csv"));
}

TEST_CASE("output formats and exit statuses") {
  const ExperimentConfig bode = parse_ok(R"({
    "plant": {"kind": "mass", "mass": 1},
    "controller": {"preset": "mass_stage"},
    "reference": {"components": [{"amplitude": 1e-3, "omega": 40}]},
    "experiment": {"kind": "df-bode", "omegas": {"lo": 10, "hi": 1000, "points": 3}, "delta": 0.5}
  })");
  const fs::path d = scratch("bode");
  REQUIRE(run_experiment(bode, d).status == exit_ok);
  const std::string csv = slurp(d / "df_bode.csv");
  CHECK(csv.rfind("omega,re,im\n10,", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);

  const ExperimentConfig diverging = parse_ok(R"({
    "plant": {"kind": "second_order", "gain": -3.0e4, "a1": 0.7, "a0": 243},
    "controller": {"preset": "precision_stage"},
    "reference": {"components": [{"amplitude": 1e-3, "omega": 40}]},
    "sim": {"sample_rate_hz": 10000, "substeps": 1, "duration": 20},
    "experiment": {"kind": "time-response"}
  })");
  const fs::path v = scratch("diverge");
  const RunResult dr = run_experiment(diverging, v);
  CHECK(dr.status == exit_divergence);
  CHECK(dr.reason.find("diverged") != std::string::npos);
  CHECK(fs::exists(v / "manifest.json"));

  const ExperimentConfig unstable = parse_ok(R"({
    "plant": {"kind": "mass", "mass": 1},
    "controller": {"preset": "mass_stage"},
    "reference": {"components": [{"amplitude": 1e-3, "omega": 40}]},
    "sim": {"duration": 0.1},
    "experiment": {"kind": "time-response"}
  })");
  const fs::path u = scratch("require");
  RunOptions strict;
  strict.require_stable = true;
  const RunResult ur = run_experiment(unstable, u, strict);
  // The beta/P conditions for this loop are infeasible on the grid, so the
  // run stops before simulating.
  CHECK(ur.status == exit_unstable);
  CHECK(fs::exists(u / "certificate.json"));
  CHECK_FALSE(fs::exists(u / "trace.csv"));
}

TEST_CASE("time responses can start from the base-linear steady state") {
  const std::string base = R"({
    "plant": {"kind": "mass", "mass": 1.0},
    "controller": {"preset": "mass_stage", "delta": 20e-6},
    "quantizer": {"mode": "rounding", "range": 5000e-6, "bits": 9},
    "reference": {"components": [{"amplitude": 5000e-6, "omega": 50}]},
    "sim": {"sample_rate_hz": 100000, "substeps": 1, "duration": 1.0, "start": "%s"},
    "experiment": {"kind": "time-response"}
  })";
  auto with_start = [&](const std::string& start) {
    std::string text = base;
    text.replace(text.find("%s"), 2, start);
    return text;
  };
  auto steady_resets = [](const fs::path& dir) {
    return nlohmann::json::parse(slurp(dir / "manifest.json"))["summary"]["steady_state_resets"]
        .get<int>();
  };
  const fs::path rest = scratch("start_rest");
  const fs::path steady = scratch("start_steady");
  REQUIRE(run_experiment(parse_ok(with_start("rest")), rest).status == exit_ok);
  REQUIRE(run_experiment(parse_ok(with_start("base_linear")), steady).status == exit_ok);
  // Start-up transients lock the loop into resetting; the steady orbit stays
  // inside the band.
  CHECK(steady_resets(rest) > 0);
  CHECK(steady_resets(steady) == 0);

  const ParsedConfig bad = parse_config(with_start("later"));
  CHECK(has_issue(bad.report.errors, "sim.start"));
  std::string sweep = with_start("base_linear");
  sweep.replace(sweep.find(R"({"kind": "time-response"})"), 26,
                R"({"kind": "s-sigma", "omegas": [50], "amplitude": 1e-3})");
  CHECK(has_issue(parse_config(sweep).report.errors, "sim.start"));
}

TEST_CASE("validated configs never fail with a config status") {
  for (const auto& entry : fs::directory_iterator(RESETCTL_CONFIG_DIR)) {
    ParsedConfig p = load_config(entry.path());
    REQUIRE(p.report.ok());
    ExperimentConfig c = *p.config;
    // Shorten the expensive kinds: the point here is the status, not the data.
    c.sim.sample_rate = 2000;
    c.sim.substeps = 1;
    c.sim.duration = 0.05;
    if (c.experiment.omegas.size() > 2) c.experiment.omegas.resize(2);
    if (c.experiment.deltas.size() > 2) c.experiment.deltas.resize(2);
    if (c.experiment.kind == ExperimentKind::stability_check) {
      c.experiment.hbeta_grid = log_grid(1, 1e4, 5);
    }
    CAPTURE(entry.path());
    const RunResult r = run_experiment(c, scratch(entry.path().stem().string()));
    CHECK(r.status != exit_config);
  }
}

TEST_CASE("cleanup") { fs::remove_all(fs::temp_directory_path() / ("resetctl_test_" + std::to_string(getpid()))); }
