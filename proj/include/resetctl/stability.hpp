#pragma once

#include <vector>

#include "resetctl/reset_elements.hpp"

namespace resetctl {

/// Numerical evidence for quadratic stability of a reset loop: a (beta, P)
/// pair for which H_beta(jw) has a positive-definite Hermitian part on every
/// grid point, together with the Hurwitz and partial-reset side conditions.
/// This is sampled evidence, not a proof.
struct HBetaCertificate {
  Vector beta;
  Matrix P_rho;
  double min_real_margin = -std::numeric_limits<double>::infinity();
  std::vector<double> freq_grid;
  std::vector<double> skipped;  ///< grid points where the resolvent was singular
  bool hurwitz_ok = false;
  bool partial_ok = false;

  bool valid() const { return min_real_margin > 0 && hurwitz_ok && partial_ok; }
};

/// Strictness tolerance shared by the Hurwitz and partial-reset checks.
inline constexpr double kStabilityTolerance = 1e-9;

/// Closed-loop A matrix with state order (plant, controller). The controller
/// states keep their own order here.
Matrix closed_loop_A(const StateSpaced& plant, const ResetController& rc);

/// Permutation of controller states putting non-resetting states first.
std::vector<Eigen::Index> reset_ordering(const ResetController& rc);

/// H_beta(jw) = [beta C_p, 0, P_rho] (jwI - A_cl)^-1 [0; 0; I], evaluated on the
/// closed loop whose controller states are reordered by reset_ordering().
ComplexMatrix hbeta_response(const StateSpaced& plant, const ResetController& rc,
                             const Vector& beta, const Matrix& P_rho, double omega);

/// Log grid with `per_decade` points per decade over [lo, hi].
std::vector<double> log_grid(double lo, double hi, int per_decade);
/// Default certificate grid: 400 points/decade over [1e-2, 1e6] rad/s.
std::vector<double> default_hbeta_grid();

HBetaCertificate check_certificate(const StateSpaced& plant, const ResetController& rc,
                                   const Vector& beta, const Matrix& P_rho,
                                   const std::vector<double>& grid);

struct HBetaSearchOptions {
  int restarts = 6;
  int max_evaluations = 1500;
};

/// Derivative-free search over (beta, P_rho = L L^T) maximizing the
/// normalized real margin. Returns the best candidate; check valid() for the
/// outcome. A failed search does not prove instability.
HBetaCertificate search_hbeta(const StateSpaced& plant, const ResetController& rc,
                              const std::vector<double>& grid,
                              const HBetaSearchOptions& options = {});

}  // namespace resetctl
