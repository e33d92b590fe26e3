#include "resetctl/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numbers>
#include <set>
#include <sstream>

#include <json.hpp>

#include "resetctl/describing_function.hpp"

namespace resetctl {

using json = nlohmann::json;

std::string to_string(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::time_response: return "time-response";
    case ExperimentKind::s_sigma: return "s-sigma";
    case ExperimentKind::df_bode: return "df-bode";
    case ExperimentKind::tune_delta: return "tune-delta";
    case ExperimentKind::stability_check: return "stability-check";
    case ExperimentKind::delta_sweep: return "delta-sweep";
  }
  return "unknown";
}

ResetController ExperimentConfig::reset_controller() const {
  return with_band(make_cglp_pid(controller), delta);
}

DeltaTuningSpec ExperimentConfig::tuning_spec() const {
  if (!tuning) throw Error(ErrorKind::config, "config has no tuning block");
  DeltaTuningSpec spec;
  spec.omega_s = tuning->omega_s;
  spec.k = tuning->k;
  spec.noise_margin = tuning->noise_margin;
  spec.reference = reference;
  spec.Q = quantizer.mode == Quantizer::Mode::none ? 0.0 : quantizer.level;
  return spec;
}

double tune_delta(const ExperimentConfig& config) {
  return tune_delta(config.plant, config.reset_controller(), config.tuning_spec());
}

namespace {

std::string join(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

// Walks the document once and records every problem with its field path.
class Reader {
 public:
  explicit Reader(ValidationReport& report) : report_(report) {}

  void error(const std::string& path, const std::string& msg) {
    report_.errors.push_back({path, msg});
  }
  void warn(const std::string& path, const std::string& msg) {
    report_.warnings.push_back({path, msg});
  }

  bool object(const json& j, const std::string& path) {
    if (j.is_object()) return true;
    error(path, "must be an object");
    return false;
  }

  void known_keys(const json& j, const std::string& path, std::initializer_list<const char*> keys) {
    const std::set<std::string> allowed(keys.begin(), keys.end());
    for (const auto& [key, _] : j.items()) {
      if (!allowed.count(key)) warn(join(path, key), "unknown field ignored");
    }
  }

  std::optional<double> number(const json& j, const std::string& path, const char* key,
                               std::optional<double> fallback = std::nullopt) {
    const std::string p = join(path, key);
    if (!j.contains(key)) {
      if (!fallback) error(p, "is required");
      return fallback;
    }
    const json& v = j.at(key);
    if (!v.is_number()) {
      error(p, "must be a number");
      return std::nullopt;
    }
    const double x = v.get<double>();
    if (!std::isfinite(x)) {
      error(p, "must be finite");
      return std::nullopt;
    }
    return x;
  }

  std::optional<double> positive(const json& j, const std::string& path, const char* key,
                                 std::optional<double> fallback = std::nullopt) {
    auto x = number(j, path, key, fallback);
    if (x && !(*x > 0)) {
      error(join(path, key), "must be positive");
      return std::nullopt;
    }
    return x;
  }

  std::optional<double> nonnegative(const json& j, const std::string& path, const char* key,
                                    std::optional<double> fallback = std::nullopt) {
    auto x = number(j, path, key, fallback);
    if (x && !(*x >= 0)) {
      error(join(path, key), "must be >= 0");
      return std::nullopt;
    }
    return x;
  }

  std::optional<long long> integer(const json& j, const std::string& path, const char* key,
                                   std::optional<long long> fallback = std::nullopt) {
    const std::string p = join(path, key);
    if (!j.contains(key)) {
      if (!fallback) error(p, "is required");
      return fallback;
    }
    const json& v = j.at(key);
    if (!v.is_number_integer()) {
      error(p, "must be an integer");
      return std::nullopt;
    }
    return v.get<long long>();
  }

  std::optional<std::string> string(const json& j, const std::string& path, const char* key,
                                    std::optional<std::string> fallback = std::nullopt) {
    const std::string p = join(path, key);
    if (!j.contains(key)) {
      if (!fallback) error(p, "is required");
      return fallback;
    }
    if (!j.at(key).is_string()) {
      error(p, "must be a string");
      return std::nullopt;
    }
    return j.at(key).get<std::string>();
  }

  std::optional<bool> boolean(const json& j, const std::string& path, const char* key,
                              bool fallback) {
    if (!j.contains(key)) return fallback;
    if (!j.at(key).is_boolean()) {
      error(join(path, key), "must be true or false");
      return std::nullopt;
    }
    return j.at(key).get<bool>();
  }

  // Either an explicit array or {lo, hi, points, spacing}.
  std::optional<std::vector<double>> grid(const json& j, const std::string& path, const char* key,
                                          bool log_default) {
    const std::string p = join(path, key);
    if (!j.contains(key)) {
      error(p, "is required");
      return std::nullopt;
    }
    const json& g = j.at(key);
    std::vector<double> out;
    if (g.is_array()) {
      for (std::size_t i = 0; i < g.size(); ++i) {
        if (!g[i].is_number() || !std::isfinite(g[i].get<double>())) {
          error(p + "[" + std::to_string(i) + "]", "must be a finite number");
          return std::nullopt;
        }
        out.push_back(g[i].get<double>());
      }
    } else if (g.is_object()) {
      known_keys(g, p, {"lo", "hi", "points", "spacing"});
      auto lo = positive(g, p, "lo");
      auto hi = positive(g, p, "hi");
      auto n = integer(g, p, "points");
      auto spacing = string(g, p, "spacing", log_default ? "log" : "linear");
      if (!lo || !hi || !n || !spacing) return std::nullopt;
      if (*spacing != "log" && *spacing != "linear") {
        error(p + ".spacing", "must be \"log\" or \"linear\"");
        return std::nullopt;
      }
      if (*n < 1 || *n > 100000) {
        error(p + ".points", "must lie in [1, 100000]");
        return std::nullopt;
      }
      if (*n > 1 && !(*hi > *lo)) {
        error(p + ".hi", "must exceed lo");
        return std::nullopt;
      }
      for (long long i = 0; i < *n; ++i) {
        const double f = *n == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(*n - 1);
        out.push_back(*spacing == "log" ? *lo * std::pow(*hi / *lo, f) : *lo + (*hi - *lo) * f);
      }
    } else {
      error(p, "must be an array or a {lo, hi, points} object");
      return std::nullopt;
    }
    if (out.empty()) {
      error(p, "must not be empty");
      return std::nullopt;
    }
    if (!(out.front() > 0)) {
      error(p, "entries must be positive");
      return std::nullopt;
    }
    if (!std::is_sorted(out.begin(), out.end())) {
      error(p, "entries must be sorted ascending");
      return std::nullopt;
    }
    return out;
  }

  // {rows, cols, entries} with entries in row-major order.
  std::optional<Matrix> matrix(const json& j, const std::string& path, const char* key) {
    const std::string p = join(path, key);
    if (!j.contains(key)) {
      error(p, "is required");
      return std::nullopt;
    }
    const json& m = j.at(key);
    if (!object(m, p)) return std::nullopt;
    auto rows = integer(m, p, "rows");
    auto cols = integer(m, p, "cols");
    if (!rows || !cols) return std::nullopt;
    if (*rows < 0 || *cols < 0) {
      error(p, "rows and cols must be >= 0");
      return std::nullopt;
    }
    if (!m.contains("entries") || !m.at("entries").is_array()) {
      error(p + ".entries", "must be an array");
      return std::nullopt;
    }
    const json& e = m.at("entries");
    if (static_cast<long long>(e.size()) != *rows * *cols) {
      error(p + ".entries", "needs rows*cols = " + std::to_string(*rows * *cols) + " values");
      return std::nullopt;
    }
    Matrix out(*rows, *cols);
    for (long long r = 0; r < *rows; ++r) {
      for (long long c = 0; c < *cols; ++c) {
        const json& v = e[static_cast<std::size_t>(r * *cols + c)];
        if (!v.is_number() || !std::isfinite(v.get<double>())) {
          error(p + ".entries", "values must be finite numbers");
          return std::nullopt;
        }
        out(r, c) = v.get<double>();
      }
    }
    return out;
  }

 private:
  ValidationReport& report_;
};

std::optional<StateSpaced> read_plant(Reader& rd, const json& root, std::string& kind) {
  if (!root.contains("plant")) {
    rd.error("plant", "is required");
    return std::nullopt;
  }
  const json& j = root.at("plant");
  if (!rd.object(j, "plant")) return std::nullopt;
  auto k = rd.string(j, "plant", "kind");
  if (!k) return std::nullopt;
  kind = *k;
  if (kind == "mass") {
    rd.known_keys(j, "plant", {"kind", "mass"});
    auto m = rd.positive(j, "plant", "mass");
    if (!m) return std::nullopt;
    return mass_plant(*m);
  }
  if (kind == "second_order") {
    rd.known_keys(j, "plant", {"kind", "gain", "a1", "a0"});
    auto g = rd.number(j, "plant", "gain");
    auto a1 = rd.number(j, "plant", "a1");
    auto a0 = rd.number(j, "plant", "a0");
    if (!g || !a1 || !a0) return std::nullopt;
    return second_order_plant(*g, *a1, *a0);
  }
  if (kind == "custom_ss") {
    rd.known_keys(j, "plant", {"kind", "A", "B", "C", "D"});
    auto a = rd.matrix(j, "plant", "A");
    auto b = rd.matrix(j, "plant", "B");
    auto c = rd.matrix(j, "plant", "C");
    auto d = rd.matrix(j, "plant", "D");
    if (!a || !b || !c || !d) return std::nullopt;
    try {
      StateSpaced sys(*a, *b, *c, *d);
      if (sys.inputs() != 1 || sys.outputs() != 1) {
        rd.error("plant", "must be single-input single-output");
        return std::nullopt;
      }
      return sys;
    } catch (const Error& e) {
      rd.error("plant", e.what());
      return std::nullopt;
    }
  }
  rd.error("plant.kind", "must be mass, second_order or custom_ss");
  return std::nullopt;
}

std::optional<CgLpPidParams> read_controller(Reader& rd, const json& root, double& delta) {
  if (!root.contains("controller")) {
    rd.error("controller", "is required");
    return std::nullopt;
  }
  const json& j = root.at("controller");
  if (!rd.object(j, "controller")) return std::nullopt;
  rd.known_keys(j, "controller", {"preset", "K", "omega_c", "omega_i", "omega_d", "omega_t",
                                  "omega_r_alpha", "omega_r", "omega_f", "gamma", "delta"});
  std::optional<CgLpPidParams> base;
  if (j.contains("preset")) {
    auto name = rd.string(j, "controller", "preset");
    if (!name) return std::nullopt;
    if (*name == "mass_stage") {
      base = CgLpPidParams::mass_stage();
    } else if (*name == "precision_stage") {
      base = CgLpPidParams::precision_stage();
    } else {
      rd.error("controller.preset", "must be mass_stage or precision_stage");
      return std::nullopt;
    }
  }
  auto field = [&](const char* key, double CgLpPidParams::*member) {
    return rd.positive(j, "controller", key,
                       base ? std::optional<double>((*base).*member) : std::nullopt);
  };
  CgLpPidParams p;
  bool ok = true;
  const std::pair<const char*, double CgLpPidParams::*> fields[] = {
      {"K", &CgLpPidParams::K},
      {"omega_c", &CgLpPidParams::omega_c},
      {"omega_i", &CgLpPidParams::omega_i},
      {"omega_d", &CgLpPidParams::omega_d},
      {"omega_t", &CgLpPidParams::omega_t},
      {"omega_r_alpha", &CgLpPidParams::omega_r_alpha},
      {"omega_r", &CgLpPidParams::omega_r},
      {"omega_f", &CgLpPidParams::omega_f},
  };
  for (const auto& [key, member] : fields) {
    auto v = field(key, member);
    if (v) {
      p.*member = *v;
    } else {
      ok = false;
    }
  }
  auto gamma = rd.number(j, "controller", "gamma",
                         base ? std::optional<double>(base->gamma) : std::nullopt);
  if (gamma && !(*gamma >= -1 && *gamma <= 1)) {
    rd.error("controller.gamma", "must lie in [-1, 1]");
    gamma.reset();
  }
  auto d = rd.nonnegative(j, "controller", "delta", 0.0);
  if (!gamma || !d || !ok) return std::nullopt;
  p.gamma = *gamma;
  delta = *d;
  try {
    p.validate();
  } catch (const Error& e) {
    rd.error("controller", e.what());
    return std::nullopt;
  }
  return p;
}

std::optional<Quantizer> read_quantizer(Reader& rd, const json& root) {
  if (!root.contains("quantizer")) return Quantizer::none();
  const json& j = root.at("quantizer");
  if (!rd.object(j, "quantizer")) return std::nullopt;
  rd.known_keys(j, "quantizer", {"mode", "level", "range", "bits"});
  auto mode = rd.string(j, "quantizer", "mode", "none");
  if (!mode) return std::nullopt;
  if (*mode == "none") return Quantizer::none();
  if (*mode != "rounding" && *mode != "truncation") {
    rd.error("quantizer.mode", "must be none, rounding or truncation");
    return std::nullopt;
  }
  const auto m = *mode == "rounding" ? Quantizer::Mode::rounding : Quantizer::Mode::truncation;
  if (j.contains("level")) {
    if (j.contains("range") || j.contains("bits")) {
      rd.error("quantizer", "give either level or range and bits, not both");
      return std::nullopt;
    }
    auto q = rd.positive(j, "quantizer", "level");
    if (!q) return std::nullopt;
    return m == Quantizer::Mode::rounding ? Quantizer::rounding(*q) : Quantizer::truncation(*q);
  }
  auto range = rd.positive(j, "quantizer", "range");
  auto bits = rd.integer(j, "quantizer", "bits");
  if (bits && (*bits < 1 || *bits > 62)) {
    rd.error("quantizer.bits", "must lie in [1, 62]");
    return std::nullopt;
  }
  if (!range || !bits) return std::nullopt;
  return Quantizer::from_range(m, *range, static_cast<int>(*bits));
}

std::optional<ReferenceSignal> read_reference(Reader& rd, const json& root) {
  if (!root.contains("reference")) {
    rd.error("reference", "is required");
    return std::nullopt;
  }
  const json& j = root.at("reference");
  if (!rd.object(j, "reference")) return std::nullopt;
  rd.known_keys(j, "reference", {"components"});
  if (!j.contains("components") || !j.at("components").is_array()) {
    rd.error("reference.components", "must be an array");
    return std::nullopt;
  }
  const json& list = j.at("components");
  if (list.empty()) {
    rd.error("reference.components", "needs at least one sine component");
    return std::nullopt;
  }
  std::vector<SineComponent> comps;
  bool ok = true;
  for (std::size_t i = 0; i < list.size(); ++i) {
    const std::string p = "reference.components[" + std::to_string(i) + "]";
    if (!rd.object(list[i], p)) {
      ok = false;
      continue;
    }
    rd.known_keys(list[i], p, {"amplitude", "omega", "omega_hz", "phase"});
    auto a = rd.nonnegative(list[i], p, "amplitude");
    std::optional<double> w;
    if (list[i].contains("omega_hz")) {
      if (list[i].contains("omega")) rd.error(p, "give omega or omega_hz, not both");
      w = rd.positive(list[i], p, "omega_hz");
      if (w) *w *= 2 * std::numbers::pi;
    } else {
      w = rd.positive(list[i], p, "omega");
    }
    auto ph = rd.number(list[i], p, "phase", 0.0);
    if (!a || !w || !ph) {
      ok = false;
      continue;
    }
    comps.push_back({*a, *w, *ph});
  }
  if (!ok) return std::nullopt;
  return ReferenceSignal(std::move(comps));
}

std::optional<NoiseSpec> read_noise(Reader& rd, const json& root) {
  NoiseSpec n;
  if (!root.contains("noise")) return n;
  const json& j = root.at("noise");
  if (!rd.object(j, "noise")) return std::nullopt;
  rd.known_keys(j, "noise", {"kind", "amplitude", "seed"});
  auto kind = rd.string(j, "noise", "kind", "none");
  auto amp = rd.nonnegative(j, "noise", "amplitude", 0.0);
  std::optional<std::uint64_t> seed = 0;
  if (j.contains("seed")) {
    if (!j.at("seed").is_number_unsigned() && !(j.at("seed").is_number_integer() &&
                                                 j.at("seed").get<long long>() >= 0)) {
      rd.error("noise.seed", "must be a nonnegative integer");
      seed.reset();
    } else {
      seed = j.at("seed").get<std::uint64_t>();
    }
  }
  if (!kind || !amp || !seed) return std::nullopt;
  if (*kind == "none") {
    n.kind = NoiseSpec::Kind::none;
  } else if (*kind == "uniform_white") {
    n.kind = NoiseSpec::Kind::uniform_white;
  } else {
    rd.error("noise.kind", "must be none or uniform_white");
    return std::nullopt;
  }
  n.amplitude = *amp;
  n.seed = *seed;
  return n;
}

std::optional<SimConfig> read_sim(Reader& rd, const json& root, bool& steady_start) {
  SimConfig s;
  if (!root.contains("sim")) return s;
  const json& j = root.at("sim");
  if (!rd.object(j, "sim")) return std::nullopt;
  rd.known_keys(j, "sim", {"sample_rate_hz", "substeps", "duration", "periods", "transient_discard",
                           "start"});
  auto start = rd.string(j, "sim", "start", "rest");
  if (start && *start != "rest" && *start != "base_linear") {
    rd.error("sim.start", "must be rest or base_linear");
    start.reset();
  }
  if (start) steady_start = *start == "base_linear";
  auto fs = rd.positive(j, "sim", "sample_rate_hz", s.sample_rate);
  auto sub = rd.integer(j, "sim", "substeps", s.substeps);
  auto dur = rd.nonnegative(j, "sim", "duration", s.duration);
  auto per = rd.nonnegative(j, "sim", "periods", s.periods);
  auto disc = rd.number(j, "sim", "transient_discard", s.transient_discard);
  bool sub_ok = sub.has_value();
  if (sub_ok && (*sub < 1 || *sub > 10000)) {
    rd.error("sim.substeps", "must lie in [1, 10000]");
    sub_ok = false;
  }
  if (disc && !(*disc >= 0 && *disc < 1)) {
    rd.error("sim.transient_discard", "must lie in [0, 1)");
    disc.reset();
  }
  if (!fs || !sub_ok || !dur || !per || !disc || !start) return std::nullopt;
  if (!(*dur > 0) && !(*per > 0)) {
    rd.error("sim", "either duration or periods must be positive");
    return std::nullopt;
  }
  s.sample_rate = *fs;
  s.substeps = static_cast<int>(*sub);
  s.duration = *dur;
  s.periods = *per;
  s.transient_discard = *disc;
  return s;
}

std::optional<TuningBlock> read_tuning(Reader& rd, const json& root, bool& present) {
  present = root.contains("tuning");
  if (!present) return std::nullopt;
  const json& j = root.at("tuning");
  if (!rd.object(j, "tuning")) return std::nullopt;
  rd.known_keys(j, "tuning", {"omega_s", "omega_s_hz", "k", "noise_margin"});
  std::optional<double> ws;
  if (j.contains("omega_s_hz")) {
    ws = rd.positive(j, "tuning", "omega_s_hz");
    if (ws) *ws *= 2 * std::numbers::pi;
  } else {
    ws = rd.positive(j, "tuning", "omega_s");
  }
  auto k = rd.number(j, "tuning", "k", 1.0);
  if (k && !(*k >= 1)) {
    rd.error("tuning.k", "safety factor must be >= 1");
    k.reset();
  }
  auto nm = rd.nonnegative(j, "tuning", "noise_margin", 0.0);
  if (!ws || !k || !nm) return std::nullopt;
  return TuningBlock{*ws, *k, *nm};
}

double largest_amplitude(const ReferenceSignal& ref) {
  double a = 0;
  for (const auto& c : ref.components()) a = std::max(a, c.amplitude);
  return a;
}

std::optional<ExperimentSpec> read_experiment(Reader& rd, const json& root,
                                              const std::optional<ReferenceSignal>& ref,
                                              double controller_delta) {
  if (!root.contains("experiment")) {
    rd.error("experiment", "is required");
    return std::nullopt;
  }
  const json& j = root.at("experiment");
  if (!rd.object(j, "experiment")) return std::nullopt;
  auto kind = rd.string(j, "experiment", "kind");
  if (!kind) return std::nullopt;
  const std::string p = "experiment";
  const double ref_amp = ref ? largest_amplitude(*ref) : 0.0;
  ExperimentSpec e;
  if (*kind == "time-response") {
    rd.known_keys(j, p, {"kind"});
    e.kind = ExperimentKind::time_response;
  } else if (*kind == "s-sigma") {
    rd.known_keys(j, p, {"kind", "omegas", "amplitude", "ideal_curve"});
    e.kind = ExperimentKind::s_sigma;
    auto w = rd.grid(j, p, "omegas", true);
    auto a = rd.positive(j, p, "amplitude", ref_amp > 0 ? std::optional(ref_amp) : std::nullopt);
    auto ideal = rd.boolean(j, p, "ideal_curve", true);
    if (!w || !a || !ideal) return std::nullopt;
    e.omegas = *w;
    e.amplitude = *a;
    e.ideal_curve = *ideal;
  } else if (*kind == "df-bode") {
    rd.known_keys(j, p, {"kind", "omegas", "amplitude", "delta"});
    e.kind = ExperimentKind::df_bode;
    auto w = rd.grid(j, p, "omegas", true);
    auto a = rd.positive(j, p, "amplitude", 1.0);
    auto d = rd.nonnegative(j, p, "delta", controller_delta);
    if (!w || !a || !d) return std::nullopt;
    if (!(*d < *a)) {
      rd.error("experiment.delta", "must be below experiment.amplitude: the band is never reached");
      return std::nullopt;
    }
    if (limit_cycle_risk(*d, *a)) {
      rd.warn("experiment.delta", "delta/E above 0.9: limit cycling is likely near this ratio");
    }
    e.omegas = *w;
    e.amplitude = *a;
    e.delta = *d;
  } else if (*kind == "tune-delta") {
    rd.known_keys(j, p, {"kind", "verify"});
    e.kind = ExperimentKind::tune_delta;
    auto v = rd.boolean(j, p, "verify", false);
    if (!v) return std::nullopt;
    e.verify = *v;
  } else if (*kind == "stability-check") {
    rd.known_keys(j, p, {"kind", "grid"});
    e.kind = ExperimentKind::stability_check;
    if (j.contains("grid")) {
      auto g = rd.grid(j, p, "grid", true);
      if (!g) return std::nullopt;
      e.hbeta_grid = *g;
    } else {
      e.hbeta_grid = default_hbeta_grid();
    }
  } else if (*kind == "delta-sweep") {
    rd.known_keys(j, p, {"kind", "deltas", "omega", "omega_hz", "amplitude"});
    e.kind = ExperimentKind::delta_sweep;
    auto d = rd.grid(j, p, "deltas", false);
    std::optional<double> w;
    if (j.contains("omega_hz")) {
      w = rd.positive(j, p, "omega_hz");
      if (w) *w *= 2 * std::numbers::pi;
    } else {
      w = rd.positive(j, p, "omega");
    }
    auto a = rd.positive(j, p, "amplitude", ref_amp > 0 ? std::optional(ref_amp) : std::nullopt);
    if (!d || !w || !a) return std::nullopt;
    if (limit_cycle_risk(d->back(), *a)) {
      rd.warn("experiment.deltas", "largest delta/E above 0.9: limit cycling is likely");
    }
    e.deltas = *d;
    e.omega = *w;
    e.amplitude = *a;
  } else {
    rd.error("experiment.kind",
             "must be time-response, s-sigma, df-bode, tune-delta, stability-check or delta-sweep");
    return std::nullopt;
  }
  return e;
}

bool simulates(const ExperimentSpec& e) {
  switch (e.kind) {
    case ExperimentKind::time_response:
    case ExperimentKind::s_sigma:
    case ExperimentKind::delta_sweep: return true;
    case ExperimentKind::tune_delta: return e.verify;
    default: return false;
  }
}

// Checks that need several sections at once.
void cross_checks(Reader& rd, ExperimentConfig& c) {
  if (c.plant.D(0, 0) != 0 && simulates(c.experiment)) {
    rd.error("plant.D", "the simulator needs a strictly proper plant");
  }
  if (c.steady_start && c.experiment.kind != ExperimentKind::time_response) {
    rd.error("sim.start", "base_linear applies to time-response experiments only");
  }
  bool linear_loop_ok = true;
  try {
    linear_loop_ok = base_linear_loop_stable(c.plant, c.reset_controller());
  } catch (const Error& e) {
    rd.error("plant", e.what());
    return;
  }
  if (c.delta > 0) {
    for (std::size_t i = 0; i < c.reference.components().size(); ++i) {
      const double a = c.reference.components()[i].amplitude;
      if (a > 0 && limit_cycle_risk(c.delta, a)) {
        rd.warn("controller.delta", "delta/E above 0.9 against reference.components[" +
                                        std::to_string(i) + "]: limit cycling risk");
      }
    }
  }
  const bool tunes = c.experiment.kind == ExperimentKind::tune_delta;
  if (tunes && !c.tuning) rd.error("tuning", "is required for tune-delta");
  if (tunes && !linear_loop_ok) {
    rd.error("controller", "the loop with resets disabled is unstable, so tuning has no meaning");
  }
  if (tunes && c.tuning) {
    for (std::size_t i = 0; i < c.reference.components().size(); ++i) {
      if (c.reference.components()[i].omega >= c.tuning->omega_s) {
        rd.error("reference.components[" + std::to_string(i) + "].omega",
                 "must be below tuning.omega_s for the no-reset guarantee");
      }
    }
  }
  if (!linear_loop_ok && !tunes) {
    rd.warn("controller", "the loop with resets disabled is unstable");
  }
}

}  // namespace

ParsedConfig parse_config(std::string_view text) {
  ParsedConfig out;
  Reader rd(out.report);
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    rd.error("", std::string("not valid JSON: ") + e.what());
    return out;
  }
  if (!rd.object(root, "")) return out;
  rd.known_keys(root, "", {"plant", "controller", "quantizer", "reference", "noise", "sim",
                           "tuning", "experiment"});

  std::string plant_kind;
  double delta = 0;
  bool tuning_present = false;
  bool steady_start = false;
  auto plant = read_plant(rd, root, plant_kind);
  auto ctrl = read_controller(rd, root, delta);
  auto q = read_quantizer(rd, root);
  auto ref = read_reference(rd, root);
  auto noise = read_noise(rd, root);
  auto sim = read_sim(rd, root, steady_start);
  auto tuning = read_tuning(rd, root, tuning_present);
  auto exp = read_experiment(rd, root, ref, delta);
  if (!plant || !ctrl || !q || !ref || !noise || !sim || (tuning_present && !tuning) || !exp) {
    return out;
  }
  ExperimentConfig c;
  c.plant_kind = plant_kind;
  c.plant = *plant;
  c.controller = *ctrl;
  c.delta = delta;
  c.quantizer = *q;
  c.reference = *ref;
  c.noise = *noise;
  c.sim = *sim;
  c.steady_start = steady_start;
  c.tuning = tuning;
  c.experiment = *exp;
  c.source = root.dump();
  cross_checks(rd, c);
  if (out.report.ok()) out.config = std::move(c);
  return out;
}

ParsedConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    ParsedConfig out;
    out.report.errors.push_back({"", "cannot read " + path.string()});
    return out;
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

json to_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json r = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) r.push_back(m(i, j));
    rows.push_back(r);
  }
  return rows;
}

// JSON has no infinity; keep such values as strings.
json number_or_string(double v) {
  if (std::isfinite(v)) return v;
  return fmt(v);
}

json certificate_json(const HBetaCertificate& c) {
  json j;
  j["valid"] = c.valid();
  j["min_real_margin"] = number_or_string(c.min_real_margin);
  j["hurwitz_ok"] = c.hurwitz_ok;
  j["partial_ok"] = c.partial_ok;
  j["beta"] = to_json(c.beta);
  j["P_rho"] = to_json(c.P_rho);
  j["grid"] = {{"lo", c.freq_grid.empty() ? 0.0 : c.freq_grid.front()},
               {"hi", c.freq_grid.empty() ? 0.0 : c.freq_grid.back()},
               {"points", c.freq_grid.size()}};
  j["skipped"] = c.skipped;
  return j;
}

class Outputs {
 public:
  explicit Outputs(std::filesystem::path dir) : dir_(std::move(dir)) {}

  void write(const std::string& name, const std::string& body) {
    std::ofstream out(dir_ / name, std::ios::binary);
    out << body;
    if (!out) throw Error(ErrorKind::config, "cannot write " + (dir_ / name).string());
    files_.push_back(name);
  }
  const std::vector<std::string>& files() const { return files_; }
  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::filesystem::path dir_;
  std::vector<std::string> files_;
};

std::string curve_csv(const SigmaCurve& curve) {
  std::string s = "omega,value\n";
  for (const auto& p : curve) s += fmt(p.omega) + "," + fmt(p.value) + "\n";
  return s;
}

bool any_diverged(const SigmaCurve& curve) {
  return std::any_of(curve.begin(), curve.end(), [](const SigmaPoint& p) { return p.diverged; });
}

}  // namespace

RunResult run_experiment(const ExperimentConfig& config, const std::filesystem::path& out_dir,
                         const RunOptions& options) {
  const auto started = std::chrono::steady_clock::now();
  ExperimentConfig cfg = config;
  if (options.seed) cfg.noise.seed = *options.seed;
  const ResetController rc = cfg.reset_controller();
  const ExperimentSpec& ex = cfg.experiment;

  RunResult result;
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) {
    result.status = exit_failure;
    result.reason = "cannot create output directory " + out_dir.string() + ": " + ec.message();
    return result;
  }
  Outputs out(out_dir);
  json extra = json::object();

  try {
    std::optional<HBetaCertificate> cert;
    if (options.require_stable || ex.kind == ExperimentKind::stability_check) {
      const auto& grid = ex.kind == ExperimentKind::stability_check ? ex.hbeta_grid
                                                                    : default_hbeta_grid();
      cert = search_hbeta(cfg.plant, rc, grid);
      out.write("certificate.json", certificate_json(*cert).dump(2) + "\n");
      if (options.require_stable && !cert->valid()) {
        result.status = exit_unstable;
        result.reason = "no H_beta certificate found (min real margin " +
                        fmt(cert->min_real_margin) + ")";
      }
    }

    if (result.status == exit_ok) {
      switch (ex.kind) {
        case ExperimentKind::time_response: {
          try {
            SimulationTrace tr;
            if (cfg.steady_start) {
              const SteadyStart start = base_linear_steady_start(
                  cfg.plant, rc, cfg.quantizer, cfg.reference, cfg.noise, cfg.sim);
              tr = simulate(cfg.plant, rc, cfg.quantizer, start.reference, cfg.noise, cfg.sim,
                            start.state);
            } else {
              tr = simulate(cfg.plant, rc, cfg.quantizer, cfg.reference, cfg.noise, cfg.sim);
            }
            std::ostringstream csv;
            write_trace_csv(csv, tr);
            out.write("trace.csv", csv.str());
            extra["steady_state_max_error"] = steady_state_max_error(tr);
            extra["steady_state_resets"] = steady_state_resets(tr);
          } catch (const DivergenceError& e) {
            result.status = exit_divergence;
            result.reason = e.what();
          }
          break;
        }
        case ExperimentKind::s_sigma: {
          const SigmaCurve curve = sigma_sensitivity(cfg.plant, rc, cfg.quantizer, cfg.noise,
                                                     cfg.sim, ex.omegas, ex.amplitude);
          out.write("s_sigma.csv", curve_csv(curve));
          bool diverged = any_diverged(curve);
          if (ex.ideal_curve) {
            const SigmaCurve ideal = sigma_sensitivity(cfg.plant, rc, Quantizer::none(), {},
                                                       cfg.sim, ex.omegas, ex.amplitude);
            out.write("s_sigma_ideal.csv", curve_csv(ideal));
            diverged = diverged || any_diverged(ideal);
          }
          if (diverged) {
            result.status = exit_divergence;
            result.reason = "simulation diverged at one or more grid frequencies";
          }
          break;
        }
        case ExperimentKind::df_bode: {
          std::string s = "omega,re,im\n";
          for (double w : ex.omegas) {
            const Complex g = ex.delta > 0 ? sidf_band(rc, w, ex.amplitude, ex.delta) : sidf(rc, w);
            s += fmt(w) + "," + fmt(g.real()) + "," + fmt(g.imag()) + "\n";
          }
          out.write("df_bode.csv", s);
          break;
        }
        case ExperimentKind::tune_delta: {
          const DeltaTuningSpec spec = cfg.tuning_spec();
          const double delta = resetctl::tune_delta(cfg.plant, rc, spec);
          json j;
          j["delta"] = delta;
          j["omega_s"] = spec.omega_s;
          j["k"] = spec.k;
          j["Q"] = spec.Q;
          j["noise_margin"] = spec.noise_margin;
          json comps = json::array();
          for (const auto& c : spec.reference.components()) {
            comps.push_back({{"omega", c.omega},
                             {"amplitude", c.amplitude},
                             {"s_bls", bls_sensitivity(cfg.plant, rc, c.omega)}});
          }
          j["components"] = comps;
          if (ex.verify) {
            const NoResetVerdict v =
                verify_no_reset(cfg.plant, rc, cfg.quantizer, spec, delta, cfg.sim, cfg.noise);
            j["verified"] = v.ok;
            j["checked_omegas"] = v.checked_omegas;
            if (!v.ok) {
              j["offending_omega"] = v.offending_omega;
              j["observed_max_error"] = number_or_string(v.observed_max_error);
              j["resets"] = v.resets;
            }
          }
          out.write("tune_delta.json", j.dump(2) + "\n");
          break;
        }
        case ExperimentKind::stability_check:
          // certificate.json is already written
          break;
        case ExperimentKind::delta_sweep: {
          std::string s = "delta,S_sigma\n";
          bool diverged = false;
          for (double d : ex.deltas) {
            const SigmaPoint p = sigma_point(cfg.plant, with_band(rc, d), cfg.quantizer,
                                             cfg.noise, cfg.sim, ex.omega, ex.amplitude);
            diverged = diverged || p.diverged;
            s += fmt(d) + "," + fmt(p.value) + "\n";
          }
          out.write("delta_sweep.csv", s);
          if (diverged) {
            result.status = exit_divergence;
            result.reason = "simulation diverged for one or more deltas";
          }
          break;
        }
      }
    }
  } catch (const Error& e) {
    result.status = exit_failure;
    result.reason = std::string(to_string(e.kind())) + ": " + e.what();
  }

  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  json manifest;
  manifest["tool"] = "resetctl";
  manifest["version"] = options.version;
  manifest["experiment"] = to_string(ex.kind);
  manifest["seed"] = cfg.noise.seed;
  manifest["status"] = result.status;
  if (!result.reason.empty()) manifest["reason"] = result.reason;
  manifest["wall_time_s"] = wall;
  manifest["files"] = out.files();
  if (!extra.empty()) manifest["summary"] = extra;
  json echoed = json::parse(cfg.source);
  if (options.seed) echoed["noise"]["seed"] = *options.seed;
  manifest["config"] = echoed;
  try {
    out.write("manifest.json", manifest.dump(2) + "\n");
  } catch (const Error& e) {
    result.status = exit_failure;
    result.reason = e.what();
  }
  result.files = out.files();
  return result;
}

}  // namespace resetctl
