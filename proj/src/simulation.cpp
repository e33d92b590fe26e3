#include "resetctl/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <ostream>
#include <random>
#include <string>

namespace resetctl {

Quantizer Quantizer::rounding(double level) {
  if (!(level > 0) || !std::isfinite(level)) throw Error(ErrorKind::domain, "Q must be positive");
  return {Mode::rounding, level};
}

Quantizer Quantizer::truncation(double level) {
  if (!(level > 0) || !std::isfinite(level)) throw Error(ErrorKind::domain, "Q must be positive");
  return {Mode::truncation, level};
}

Quantizer Quantizer::from_range(Mode mode, double range, int bits) {
  if (!(range > 0) || bits < 1) throw Error(ErrorKind::domain, "need range > 0 and bits >= 1");
  const double level = std::ldexp(range, -bits);
  if (mode == Mode::none) return none();
  return mode == Mode::rounding ? rounding(level) : truncation(level);
}

double quantize(double v, const Quantizer& q) {
  switch (q.mode) {
    case Quantizer::Mode::none: return v;
    case Quantizer::Mode::rounding: return q.level * std::round(v / q.level);
    case Quantizer::Mode::truncation: return q.level * std::floor(v / q.level);
  }
  return v;
}

ReferenceSignal::ReferenceSignal(std::vector<SineComponent> components)
    : components_(std::move(components)) {
  if (components_.empty()) throw Error(ErrorKind::domain, "reference needs at least one sine");
  for (const auto& c : components_) {
    if (!(c.amplitude >= 0) || !std::isfinite(c.amplitude)) {
      throw Error(ErrorKind::domain, "reference amplitudes must be >= 0");
    }
    if (!(c.omega > 0) || !std::isfinite(c.omega)) {
      throw Error(ErrorKind::domain, "reference frequencies must be > 0");
    }
  }
}

ReferenceSignal ReferenceSignal::sine(double amplitude, double omega, double phase) {
  return ReferenceSignal({{amplitude, omega, phase}});
}

ReferenceSignal ReferenceSignal::advanced(double dt) const {
  std::vector<SineComponent> shifted = components_;
  for (auto& c : shifted) c.phase = std::remainder(c.phase + c.omega * dt, 2 * std::numbers::pi);
  return ReferenceSignal(std::move(shifted));
}

double ReferenceSignal::operator()(double t) const {
  double r = 0;
  for (const auto& c : components_) r += c.amplitude * std::sin(c.omega * t + c.phase);
  return r;
}

double ReferenceSignal::slowest_omega() const {
  return std::min_element(components_.begin(), components_.end(),
                          [](const auto& a, const auto& b) { return a.omega < b.omega; })
      ->omega;
}

void SimConfig::validate() const {
  if (!(sample_rate > 0)) throw Error(ErrorKind::domain, "sample rate must be positive");
  if (substeps < 1) throw Error(ErrorKind::domain, "substeps must be >= 1");
  if (!(transient_discard >= 0 && transient_discard < 1)) {
    throw Error(ErrorKind::domain, "transient_discard must lie in [0, 1)");
  }
  if (!(duration > 0) && !(periods > 0)) {
    throw Error(ErrorKind::domain, "either duration or periods must be positive");
  }
}

double SimConfig::run_length(const ReferenceSignal& ref) const {
  if (duration > 0) return duration;
  return periods * 2 * std::numbers::pi / ref.slowest_omega();
}

bool reset_triggered(const ResetCondition& cond, double e_prev, double e_now) {
  if (cond.kind == ResetCondition::Kind::zero_crossing) {
    return e_prev != 0 && e_prev * e_now <= 0;
  }
  const double d = cond.delta;
  return (e_prev > d && e_now <= d) || (e_prev < -d && e_now >= -d);
}

SimulationTrace simulate(const StateSpaced& plant, const ResetController& rc,
                         const Quantizer& q, const ReferenceSignal& ref, const NoiseSpec& noise,
                         const SimConfig& cfg, const std::optional<InitialState>& initial) {
  cfg.validate();
  if (plant.inputs() != 1 || plant.outputs() != 1) {
    throw Error(ErrorKind::dimension, "simulate: plant must be SISO");
  }
  if (plant.D(0, 0) != 0) {
    throw Error(ErrorKind::unsupported_topology,
                "simulate: plant must be strictly proper (the sampled controller has feedthrough)");
  }
  const double T = 1.0 / cfg.sample_rate;
  const DiscreteStateSpaced ctrl = c2d_tustin(rc.base(), T);
  const Matrix offset = tustin_input_offset(rc.base(), T);
  const DiscreteStateSpaced pl = c2d_zoh(plant, T / cfg.substeps);
  const Vector& rho = rc.reset_values();
  const std::vector<Eigen::Index> jumping = rc.resetting_states();

  Vector xp = Vector::Zero(plant.states());
  Vector z = Vector::Zero(rc.states());
  if (initial) {
    if (initial->plant.size() != xp.size() || initial->controller.size() != z.size()) {
      throw Error(ErrorKind::dimension, "initial state sizes do not match the loop");
    }
    xp = initial->plant;
    z = initial->controller;  // e[0] is folded in after the first error sample
  }

  const auto samples = static_cast<std::size_t>(std::llround(cfg.run_length(ref) * cfg.sample_rate));
  SimulationTrace tr;
  for (auto* v : {&tr.t, &tr.r, &tr.e, &tr.y, &tr.y_q, &tr.u}) v->reserve(samples);
  tr.reset.reserve(samples);
  tr.steady_start = cfg.transient_discard * static_cast<double>(samples) * T;

  std::mt19937_64 rng(noise.seed);
  std::uniform_real_distribution<double> dist(-noise.amplitude, noise.amplitude);
  const bool noisy = noise.kind == NoiseSpec::Kind::uniform_white && noise.amplitude > 0;

  Vector xp_next(xp.size());
  Vector z_next(z.size());
  double e_prev = 0;
  for (std::size_t k = 0; k < samples; ++k) {
    const double t = static_cast<double>(k) * T;
    const double y = plant.states() > 0 ? (plant.C * xp)(0, 0) : 0.0;
    const double n = noisy ? dist(rng) : 0.0;
    const double yq = quantize(y + n, q);
    const double r = ref(t);
    const double e = r - yq;

    if (k == 0 && initial) {
      // The given controller state is the continuous state at t = 0.
      z -= offset.col(0) * e;
    }

    bool fired = false;
    if (k > 0 && reset_triggered(rc.condition(), e_prev, e)) {
      fired = true;
      tr.reset_times.push_back(t);
      for (Eigen::Index i : jumping) {
        const double x = z[i] + offset(i, 0) * e;
        z[i] = rho[i] * x - offset(i, 0) * e;
      }
    }

    const double u = (ctrl.Cd * z)(0, 0) + ctrl.Dd(0, 0) * e;
    z_next.noalias() = ctrl.Ad * z;
    z_next += ctrl.Bd.col(0) * e;
    z.swap(z_next);
    for (int s = 0; s < cfg.substeps; ++s) {
      xp_next.noalias() = pl.Ad * xp;
      xp_next += pl.Bd.col(0) * u;
      xp.swap(xp_next);
    }
    if (!std::isfinite(u) || !std::isfinite(y) || !z.allFinite() || !xp.allFinite()) {
      throw DivergenceError(t, "simulation diverged at t = " + std::to_string(t) + " s");
    }

    tr.t.push_back(t);
    tr.r.push_back(r);
    tr.e.push_back(e);
    tr.y.push_back(y);
    tr.y_q.push_back(yq);
    tr.u.push_back(u);
    tr.reset.push_back(fired ? 1 : 0);
    e_prev = e;
  }
  const double t_end = static_cast<double>(samples) * T;
  const double y_end = plant.states() > 0 ? (plant.C * xp)(0, 0) : 0.0;
  const double e_end = ref(t_end) - quantize(y_end, q);
  tr.final_state = {xp, z + offset.col(0) * e_end};
  tr.end_time = t_end;
  return tr;
}

SteadyStart base_linear_steady_start(const StateSpaced& plant, const ResetController& rc,
                                     const Quantizer& q, const ReferenceSignal& ref,
                                     const NoiseSpec& noise, const SimConfig& cfg) {
  const SimulationTrace warm = simulate(plant, without_reset(rc), q, ref, noise, cfg);
  return {warm.final_state, ref.advanced(warm.end_time)};
}

std::size_t reset_count_in_window(const SimulationTrace& trace, double t0, double t1) {
  if (trace.t.empty()) throw Error(ErrorKind::window, "empty trace");
  const double slack = 1e-9 * std::max(1.0, std::abs(trace.t.back()));
  if (!(t0 < t1) || t0 < trace.t.front() - slack || t1 > trace.t.back() + slack) {
    throw Error(ErrorKind::window, "window outside the simulated interval");
  }
  return static_cast<std::size_t>(
      std::count_if(trace.reset_times.begin(), trace.reset_times.end(),
                    [&](double t) { return t >= t0 && t <= t1; }));
}

double steady_state_max_error(const SimulationTrace& trace) {
  double m = 0;
  for (std::size_t k = 0; k < trace.size(); ++k) {
    if (trace.t[k] >= trace.steady_start) m = std::max(m, std::abs(trace.e[k]));
  }
  return m;
}

std::size_t steady_state_resets(const SimulationTrace& trace) {
  return static_cast<std::size_t>(
      std::count_if(trace.reset_times.begin(), trace.reset_times.end(),
                    [&](double t) { return t >= trace.steady_start; }));
}

namespace {

// max |e| over one period ending `periods_back` periods before the end.
double period_peak(const SimulationTrace& tr, double period, int periods_back) {
  const double end = tr.t.back() - periods_back * period;
  const double start = end - period;
  double m = 0;
  for (std::size_t k = 0; k < tr.size(); ++k) {
    if (tr.t[k] > start && tr.t[k] <= end) m = std::max(m, std::abs(tr.e[k]));
  }
  return m;
}

}  // namespace

SigmaPoint sigma_point(const StateSpaced& plant, const ResetController& rc, const Quantizer& q,
                       const NoiseSpec& noise, const SimConfig& cfg, double omega,
                       double amplitude) {
  if (!(amplitude > 0)) throw Error(ErrorKind::domain, "S_sigma amplitude must be positive");
  const ReferenceSignal ref = ReferenceSignal::sine(amplitude, omega);
  const double period = 2 * std::numbers::pi / omega;
  const double base = std::max({20 * period, 2.0, cfg.duration});

  SigmaPoint pt;
  pt.omega = omega;
  for (double factor : {1.0, 2.0, 3.0}) {
    SimConfig run = cfg;
    run.duration = base * factor;
    SimulationTrace tr;
    try {
      tr = simulate(plant, rc, q, ref, noise, run);
    } catch (const DivergenceError&) {
      pt.diverged = true;
      pt.value = std::numeric_limits<double>::infinity();
      return pt;
    }
    pt.value = steady_state_max_error(tr) / amplitude;
    const double kept = tr.t.back() - tr.steady_start;
    pt.steady_resets_per_period = static_cast<double>(steady_state_resets(tr)) * period / kept;
    const double last = period_peak(tr, period, 0);
    const double prev = period_peak(tr, period, 1);
    if (std::abs(last - prev) <= 0.02 * std::max(last, prev)) break;
  }
  return pt;
}

SigmaCurve sigma_sensitivity(const StateSpaced& plant, const ResetController& rc,
                             const Quantizer& q, const NoiseSpec& noise, const SimConfig& cfg,
                             const std::vector<double>& omega_grid, double amplitude) {
  if (!std::is_sorted(omega_grid.begin(), omega_grid.end()) ||
      (!omega_grid.empty() && !(omega_grid.front() > 0))) {
    throw Error(ErrorKind::domain, "frequency grid must be sorted and positive");
  }
  SigmaCurve curve;
  curve.reserve(omega_grid.size());
  for (double w : omega_grid) curve.push_back(sigma_point(plant, rc, q, noise, cfg, w, amplitude));
  return curve;
}

void write_trace_csv(std::ostream& os, const SimulationTrace& tr) {
  os << "t,r,e,y,y_q,u,reset\n";
  char buf[256];
  for (std::size_t k = 0; k < tr.size(); ++k) {
    std::snprintf(buf, sizeof buf, "%.12g,%.12g,%.12g,%.12g,%.12g,%.12g,%d\n", tr.t[k], tr.r[k],
                  tr.e[k], tr.y[k], tr.y_q[k], tr.u[k], static_cast<int>(tr.reset[k]));
    os << buf;
  }
}

}  // namespace resetctl
