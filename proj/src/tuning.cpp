#include "resetctl/tuning.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "resetctl/stability.hpp"

namespace resetctl {
namespace {

Complex loop_gain(const StateSpaced& plant, const ResetController& rc, double omega) {
  return freq_response(base_linear(rc), omega) * freq_response(plant, omega);
}

void require_stable_loop(const StateSpaced& plant, const ResetController& rc) {
  if (!base_linear_loop_stable(plant, rc)) {
    throw Error(ErrorKind::invalid_context, "base-linear closed loop is not stable");
  }
}

}  // namespace

void DeltaTuningSpec::validate() const {
  if (!(omega_s > 0)) throw Error(ErrorKind::domain, "omega_s must be positive");
  if (!(k >= 1)) throw Error(ErrorKind::domain, "safety factor k must be >= 1");
  if (!(Q >= 0)) throw Error(ErrorKind::domain, "Q must be >= 0");
  if (!(noise_margin >= 0)) throw Error(ErrorKind::domain, "noise margin must be >= 0");
}

bool base_linear_loop_stable(const StateSpaced& plant, const ResetController& rc) {
  return spectral_abscissa(closed_loop_A(plant, without_reset(rc))) < -kStabilityTolerance;
}

double bls_sensitivity(const StateSpaced& plant, const ResetController& rc, double omega) {
  require_stable_loop(plant, rc);
  return 1.0 / std::abs(1.0 + loop_gain(plant, rc, omega));
}

double tune_delta(const StateSpaced& plant, const ResetController& rc,
                  const DeltaTuningSpec& spec, bool force) {
  spec.validate();
  require_stable_loop(plant, rc);
  double bound = 0;
  for (const auto& c : spec.reference.components()) {
    if (c.omega >= spec.omega_s && !force) {
      throw Error(ErrorKind::guarantee_void, "reference component at w = " +
                                                 std::to_string(c.omega) +
                                                 " rad/s is not below omega_s");
    }
    if (c.amplitude > 0) bound += bls_sensitivity(plant, rc, c.omega) * c.amplitude;
  }
  return spec.k * (bound + 0.5 * spec.Q + spec.noise_margin);
}

NoResetVerdict verify_no_reset(const StateSpaced& plant, const ResetController& rc,
                               const Quantizer& q, const DeltaTuningSpec& spec, double delta,
                               const SimConfig& cfg, const NoiseSpec& noise) {
  if (!(delta > 0)) throw Error(ErrorKind::domain, "verify_no_reset needs delta > 0");
  const ResetController banded = with_band(rc, delta);
  NoResetVerdict verdict;
  for (const auto& c : spec.reference.components()) {
    if (c.amplitude == 0) continue;
    std::vector<double> omegas{c.omega};
    for (int i = 0; i < 5; ++i) omegas.push_back(c.omega * std::pow(10.0, -1.0 + 0.2 * i));
    for (double w : omegas) {
      verdict.checked_omegas.push_back(w);
      SimConfig run = cfg;
      run.duration = std::max({cfg.duration, 2.0, 20 * 2 * std::numbers::pi / w});
      SimulationTrace tr;
      try {
        tr = simulate(plant, banded, q, ReferenceSignal::sine(c.amplitude, w), noise, run);
      } catch (const DivergenceError&) {
        return {false, w, std::numeric_limits<double>::infinity(), 0, verdict.checked_omegas};
      }
      const std::size_t resets = steady_state_resets(tr);
      if (verdict.ok) {
        verdict.observed_max_error = std::max(verdict.observed_max_error, steady_state_max_error(tr));
      }
      if (resets > 0 && verdict.ok) {
        verdict.ok = false;
        verdict.offending_omega = w;
        verdict.observed_max_error = steady_state_max_error(tr);
        verdict.resets = resets;
      }
    }
  }
  return verdict;
}

double error_from_disturbance(const StateSpaced& plant, const ResetController& rc,
                              double d_amplitude, double omega) {
  require_stable_loop(plant, rc);
  if (d_amplitude == 0) return 0;
  const Complex p = freq_response(plant, omega);
  return std::abs(p / (1.0 + loop_gain(plant, rc, omega))) * std::abs(d_amplitude);
}

}  // namespace resetctl
