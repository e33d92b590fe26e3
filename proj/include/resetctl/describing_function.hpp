#pragma once

#include "resetctl/reset_elements.hpp"

namespace resetctl {

/// One evaluated describing-function sample.
struct DfPoint {
  double omega = 0;
  double amplitude = 0;
  double delta = 0;
  Complex value;
};

/// Sinusoidal-input describing function of a zero-crossing reset element:
///   G(jw) = C (jwI - A)^-1 (I + j Theta(w)) B + D
///   Theta(w) = 2/pi (I + e^{pi A/w}) (I + R e^{pi A/w})^-1 (I - R) ((A/w)^2 + I)^-1
/// with R the reset matrix. Returned as the phasor ratio (fundamental of u)/E
/// for e = E sin(wt).
Complex sidf(const ResetController& rc, double omega);

/// Describing function with a reset band. Resets happen at phase
/// phi = pi - asin(delta/E) of every half period, which gives
///   G(jw) = C (jwI - A)^-1 (I + j e^{-j phi} Theta(w) (cos(phi) I + sin(phi) A/w)) B + D.
/// Depends on (E, delta) only through delta/E; delta = 0 reduces to sidf().
Complex sidf_band(const ResetController& rc, double omega, double amplitude, double delta);

/// Limit cycling becomes likely as delta/E approaches 1.
inline constexpr double kBandRatioWarning = 0.9;
inline bool limit_cycle_risk(double delta, double amplitude) {
  return delta > kBandRatioWarning * amplitude;
}

struct OracleOptions {
  int samples_per_period = 2000;
  int periods = 20;
  int discard_periods = 15;
  double settle_tolerance = 0.01;
};

/// Time-domain estimate of the describing function: drives the element
/// open loop with e = E sin(wt), locates every reset instant exactly, and
/// extracts the fundamental of u over the retained periods. Throws
/// ErrorKind::oracle_unsettled when the last two periods differ by more than
/// settle_tolerance in RMS.
Complex df_oracle(const ResetController& rc, double omega, double amplitude, double delta,
                  const OracleOptions& options = {});

}  // namespace resetctl
