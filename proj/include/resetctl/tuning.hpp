#pragma once

#include <vector>

#include "resetctl/simulation.hpp"

namespace resetctl {

struct DeltaTuningSpec {
  double omega_s = 0;  ///< upper edge of the intended linear range, rad/s
  ReferenceSignal reference = ReferenceSignal::sine(0.0, 1.0);
  double Q = 0;             ///< quantization level
  double k = 1.0;           ///< safety factor, >= 1
  double noise_margin = 0;  ///< added error allowance, output units

  void validate() const;
};

/// |1 / (1 + L(jw))| of the loop with resets disabled. Throws
/// ErrorKind::invalid_context when that loop is not stable.
double bls_sensitivity(const StateSpaced& plant, const ResetController& rc, double omega);

/// Reset band keeping every reference component inside the linear range:
///   delta = k * (sum_i |S_bls(w_i)| A_i + Q/2 + noise_margin).
/// Throws ErrorKind::guarantee_void when a component is at or above omega_s
/// unless `force` is set.
double tune_delta(const StateSpaced& plant, const ResetController& rc,
                  const DeltaTuningSpec& spec, bool force = false);

struct NoResetVerdict {
  bool ok = true;
  double offending_omega = 0;
  double observed_max_error = 0;  ///< at the offending run, or the largest seen when ok
  std::size_t resets = 0;
  std::vector<double> checked_omegas;
};

/// Simulates the band controller at every reference component and at five
/// log-spaced frequencies in [w_i/10, w_i) below each component, each with
/// that component's amplitude, and reports whether any steady-state reset
/// occurred.
NoResetVerdict verify_no_reset(const StateSpaced& plant, const ResetController& rc,
                               const Quantizer& q, const DeltaTuningSpec& spec, double delta,
                               const SimConfig& cfg = {}, const NoiseSpec& noise = {});

/// |P(jw) S(jw)| * d: error amplitude caused by an input disturbance.
double error_from_disturbance(const StateSpaced& plant, const ResetController& rc,
                              double d_amplitude, double omega);

/// Whether plant and base-linear controller form a stable loop.
bool base_linear_loop_stable(const StateSpaced& plant, const ResetController& rc);

}  // namespace resetctl
