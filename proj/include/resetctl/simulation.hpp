#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <vector>

#include "resetctl/reset_elements.hpp"

namespace resetctl {

/// Sensor quantizer with level Q in output units.
struct Quantizer {
  enum class Mode { none, rounding, truncation };

  Mode mode = Mode::none;
  double level = 0.0;

  static Quantizer none() { return {}; }
  static Quantizer rounding(double level);
  static Quantizer truncation(double level);
  /// Level Q = range / 2^bits.
  static Quantizer from_range(Mode mode, double range, int bits);
};

/// Rounding: Q round(v/Q), ties away from zero. Truncation: Q floor(v/Q).
double quantize(double v, const Quantizer& q);

struct SineComponent {
  double amplitude = 0;  ///< output units
  double omega = 0;      ///< rad/s
  double phase = 0;      ///< rad
};

/// Sum of sines r(t) = sum A_i sin(w_i t + phase_i).
class ReferenceSignal {
 public:
  explicit ReferenceSignal(std::vector<SineComponent> components);
  static ReferenceSignal sine(double amplitude, double omega, double phase = 0.0);
  /// The same signal started dt seconds later: r'(t) = r(t + dt).
  ReferenceSignal advanced(double dt) const;

  double operator()(double t) const;
  const std::vector<SineComponent>& components() const { return components_; }
  double slowest_omega() const;

 private:
  std::vector<SineComponent> components_;
};

/// Measurement noise added to y before the quantizer.
struct NoiseSpec {
  enum class Kind { none, uniform_white };

  Kind kind = Kind::none;
  double amplitude = 0.0;  ///< uniform on [-amplitude, amplitude]
  std::uint64_t seed = 0;
};

struct SimConfig {
  double sample_rate = 10e3;  ///< controller rate F_s, Hz
  int substeps = 10;          ///< plant ZOH substeps per controller sample
  double duration = 0.0;      ///< seconds; used when > 0
  double periods = 20.0;      ///< otherwise: periods of the slowest reference component
  double transient_discard = 0.6;

  void validate() const;
  double run_length(const ReferenceSignal& ref) const;
};

/// Optional nonzero initial states (plant, continuous controller state).
struct InitialState {
  Vector plant;
  Vector controller;
};

struct SimulationTrace {
  std::vector<double> t, r, e, y, y_q, u;
  std::vector<std::uint8_t> reset;  ///< 1 where a reset fired at that sample
  std::vector<double> reset_times;
  double steady_start = 0.0;  ///< first time of the retained (steady-state) window
  /// State one sample past the end, at end_time. Passing it back as the
  /// initial state with ref.advanced(end_time) continues the run exactly
  /// when there is no noise.
  InitialState final_state;
  double end_time = 0.0;

  std::size_t size() const { return t.size(); }
  std::size_t reset_count() const { return reset_times.size(); }
};

/// Sampled closed loop: e[k] = r[k] - y_q[k]; the reset decision on
/// (e[k-1], e[k]) acts on the controller state before its Tustin update;
/// the plant is advanced `substeps` ZOH steps under the held u[k].
/// Throws DivergenceError when the loop blows up.
SimulationTrace simulate(const StateSpaced& plant, const ResetController& rc,
                         const Quantizer& q, const ReferenceSignal& ref, const NoiseSpec& noise,
                         const SimConfig& cfg,
                         const std::optional<InitialState>& initial = std::nullopt);

struct SteadyStart {
  InitialState state;
  ReferenceSignal reference;  ///< the input reference advanced to match the state
};

/// End state of a base-linear run from rest over cfg's run length. Starting
/// a reset loop there puts it on the base-linear steady-state orbit, which a
/// run from rest need not reach once start-up transients trigger resets.
SteadyStart base_linear_steady_start(const StateSpaced& plant, const ResetController& rc,
                                     const Quantizer& q, const ReferenceSignal& ref,
                                     const NoiseSpec& noise, const SimConfig& cfg);

/// Whether the reset condition fires between two consecutive error samples.
bool reset_triggered(const ResetCondition& cond, double e_prev, double e_now);

/// Resets recorded in [t0, t1].
std::size_t reset_count_in_window(const SimulationTrace& trace, double t0, double t1);

/// max |e| over the retained window.
double steady_state_max_error(const SimulationTrace& trace);
/// Resets in the retained window.
std::size_t steady_state_resets(const SimulationTrace& trace);

struct SigmaPoint {
  double omega = 0;
  double value = 0;  ///< max |e| / R over the retained window
  bool diverged = false;
  double steady_resets_per_period = 0;
};
using SigmaCurve = std::vector<SigmaPoint>;

/// S_sigma(w) = max |e(t)| / R for t >= t_ss, one simulation per grid point.
SigmaCurve sigma_sensitivity(const StateSpaced& plant, const ResetController& rc,
                             const Quantizer& q, const NoiseSpec& noise, const SimConfig& cfg,
                             const std::vector<double>& omega_grid, double amplitude);

/// Single-frequency S_sigma, same procedure as one point of the curve.
SigmaPoint sigma_point(const StateSpaced& plant, const ResetController& rc, const Quantizer& q,
                       const NoiseSpec& noise, const SimConfig& cfg, double omega,
                       double amplitude);

/// CSV with header `t,r,e,y,y_q,u,reset`, 12 significant digits.
void write_trace_csv(std::ostream& os, const SimulationTrace& trace);

}  // namespace resetctl
