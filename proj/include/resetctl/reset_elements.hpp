#pragma once

#include <vector>

#include "resetctl/linear.hpp"

namespace resetctl {

/// When the controller states jump. A zero-crossing condition fires when the
/// error crosses zero; a band condition fires when the error enters
/// [-delta, delta] from outside (from above through +delta or from below
/// through -delta).
struct ResetCondition {
  enum class Kind { zero_crossing, band };

  Kind kind = Kind::zero_crossing;
  double delta = 0.0;

  static ResetCondition zero_crossing() { return {}; }
  static ResetCondition band(double delta);

  /// Band width seen by the describing function (0 for zero crossing).
  double effective_delta() const { return kind == Kind::band ? delta : 0.0; }
};

/// Base-linear system plus a diagonal reset map x <- diag(rho) x.
class ResetController {
 public:
  ResetController(StateSpaced base, Vector reset_values,
                  ResetCondition condition = ResetCondition::zero_crossing());

  const StateSpaced& base() const { return base_; }
  /// Diagonal of the reset matrix.
  const Vector& reset_values() const { return rho_; }
  Matrix reset_matrix() const { return rho_.asDiagonal(); }
  const ResetCondition& condition() const { return condition_; }
  Eigen::Index states() const { return base_.states(); }

  /// Indices of states whose reset value differs from 1.
  std::vector<Eigen::Index> resetting_states() const;

 private:
  StateSpaced base_;
  Vector rho_;
  ResetCondition condition_;
};

struct CgLpPidParams {
  double K = 0;
  double omega_c = 0;
  double omega_i = 0;
  double omega_d = 0;
  double omega_t = 0;
  double omega_r_alpha = 0;
  double omega_r = 0;
  double omega_f = 0;
  double gamma = 0;

  /// Throws a domain error when an invariant is violated.
  void validate() const;

  /// Mass-stage settings (crossover 150 Hz).
  static CgLpPidParams mass_stage();
  /// Settings for the fitted precision stage.
  static CgLpPidParams precision_stage();
};

/// State index of the resetting FORE state in make_cglp_pid. The state order
/// is CgLp FORE, CgLp lead, PI integrator, lead filter: the reset filter sees
/// the error directly, as in the usual CgLp block diagram.
inline constexpr Eigen::Index kCgLpPidResetState = 0;

ResetController make_clegg(double gamma);
ResetController make_fore(double omega_r, double gamma);
ResetController make_sore(double omega_r, double beta_r, double gamma);
ResetController make_cglp(double omega_r_alpha, double omega_r, double omega_f, double gamma);
ResetController make_cglp_pid(const CgLpPidParams& p);

/// The controller with resets disabled.
StateSpaced base_linear(const ResetController& rc);
/// Same dynamics with a band condition (zero crossing when delta == 0).
ResetController with_band(const ResetController& rc, double delta);
/// Same dynamics and condition with every reset value set to 1.
ResetController without_reset(const ResetController& rc);

/// Linear pieces of the CgLp-PID chain, exposed for composition and tests.
StateSpaced pi_block(double K, double omega_i);
StateSpaced lead_block(double omega_d, double omega_t);

}  // namespace resetctl
