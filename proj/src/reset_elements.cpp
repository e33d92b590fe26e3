#include "resetctl/reset_elements.hpp"

#include <cmath>
#include <string>

namespace resetctl {
namespace {

void require_gamma(double gamma) {
  if (!(gamma >= -1.0 && gamma <= 1.0)) {
    throw Error(ErrorKind::domain, "reset value must lie in [-1, 1], got " + std::to_string(gamma));
  }
}

void require_positive(double v, const char* name) {
  if (!(v > 0) || !std::isfinite(v)) {
    throw Error(ErrorKind::domain, std::string(name) + " must be positive and finite");
  }
}

}  // namespace

ResetCondition ResetCondition::band(double delta) {
  if (!(delta > 0) || !std::isfinite(delta)) {
    throw Error(ErrorKind::domain, "reset band requires delta > 0");
  }
  return {Kind::band, delta};
}

ResetController::ResetController(StateSpaced base, Vector reset_values, ResetCondition condition)
    : base_(std::move(base)), rho_(std::move(reset_values)), condition_(condition) {
  if (base_.inputs() != 1 || base_.outputs() != 1) {
    throw Error(ErrorKind::dimension, "reset controllers are SISO");
  }
  if (rho_.size() != base_.states()) {
    throw Error(ErrorKind::dimension, "reset matrix size must equal the state count");
  }
  for (Eigen::Index i = 0; i < rho_.size(); ++i) require_gamma(rho_[i]);
}

std::vector<Eigen::Index> ResetController::resetting_states() const {
  std::vector<Eigen::Index> idx;
  for (Eigen::Index i = 0; i < rho_.size(); ++i) {
    if (rho_[i] != 1.0) idx.push_back(i);
  }
  return idx;
}

void CgLpPidParams::validate() const {
  if (!(K > 0) || !std::isfinite(K)) throw Error(ErrorKind::domain, "K must be positive");
  require_positive(omega_c, "omega_c");
  require_positive(omega_i, "omega_i");
  require_positive(omega_d, "omega_d");
  require_positive(omega_t, "omega_t");
  require_positive(omega_r_alpha, "omega_r_alpha");
  require_positive(omega_r, "omega_r");
  require_positive(omega_f, "omega_f");
  require_gamma(gamma);
  if (!(omega_i < omega_d && omega_d < omega_c && omega_c < omega_t && omega_t < omega_f)) {
    throw Error(ErrorKind::domain,
                "frequencies must satisfy omega_i < omega_d < omega_c < omega_t < omega_f");
  }
  if (!(omega_r_alpha <= omega_r && omega_r < omega_f)) {
    throw Error(ErrorKind::domain, "CgLp requires omega_r_alpha <= omega_r < omega_f");
  }
}

CgLpPidParams CgLpPidParams::mass_stage() {
  return {6.0954e5, 942.0, 94.0, 530.0, 1.68e3, 160.0, 172.0, 9.42e3, 0.5};
}

CgLpPidParams CgLpPidParams::precision_stage() {
  return {16.41, 942.5, 94.25, 529.2, 1679.0, 697.6, 812.1, 9420.0, 0.0};
}

ResetController make_clegg(double gamma) {
  require_gamma(gamma);
  return ResetController(integrator(), Vector::Constant(1, gamma));
}

ResetController make_fore(double omega_r, double gamma) {
  require_positive(omega_r, "omega_r");
  require_gamma(gamma);
  StateSpaced base(scalar_matrix(-omega_r), scalar_matrix(omega_r), scalar_matrix(1.0),
                   scalar_matrix(0.0));
  return ResetController(std::move(base), Vector::Constant(1, gamma));
}

ResetController make_sore(double omega_r, double beta_r, double gamma) {
  require_positive(omega_r, "omega_r");
  if (!(beta_r >= 0) || !std::isfinite(beta_r)) {
    throw Error(ErrorKind::domain, "damping must be nonnegative");
  }
  require_gamma(gamma);
  Matrix a(2, 2), b(2, 1), c(1, 2);
  a << 0, 1, -omega_r * omega_r, -2 * beta_r * omega_r;
  b << 0, omega_r * omega_r;
  c << 1, 0;
  return ResetController(StateSpaced(a, b, c, scalar_matrix(0.0)), Vector::Constant(2, gamma));
}

ResetController make_cglp(double omega_r_alpha, double omega_r, double omega_f, double gamma) {
  require_positive(omega_r_alpha, "omega_r_alpha");
  require_positive(omega_r, "omega_r");
  require_positive(omega_f, "omega_f");
  require_gamma(gamma);
  if (!(omega_r_alpha <= omega_r && omega_r < omega_f)) {
    throw Error(ErrorKind::domain, "CgLp requires omega_r_alpha <= omega_r < omega_f");
  }
  Matrix a(2, 2), b(2, 1), c(1, 2);
  a << -omega_r_alpha, 0, omega_f, -omega_f;
  b << omega_r_alpha, 0;
  c << omega_f / omega_r, 1 - omega_f / omega_r;
  Vector rho(2);
  rho << gamma, 1.0;
  return ResetController(StateSpaced(a, b, c, scalar_matrix(0.0)), rho);
}

StateSpaced pi_block(double K, double omega_i) {
  // K (1 + wi/s): state integrates wi*e, output K (x + e).
  return {scalar_matrix(0.0), scalar_matrix(omega_i), scalar_matrix(K), scalar_matrix(K)};
}

namespace {

StateSpaced scaled_output(StateSpaced sys, double k) {
  sys.C *= k;
  sys.D *= k;
  return sys;
}

}  // namespace

StateSpaced lead_block(double omega_d, double omega_t) {
  // (s/wd + 1) / (s/wt + 1) = wt/wd + (1 - wt/wd) * wt / (s + wt)
  return {scalar_matrix(-omega_t), scalar_matrix(omega_t), scalar_matrix(1 - omega_t / omega_d),
          scalar_matrix(omega_t / omega_d)};
}

ResetController make_cglp_pid(const CgLpPidParams& p) {
  p.validate();
  const ResetController cglp = make_cglp(p.omega_r_alpha, p.omega_r, p.omega_f, p.gamma);
  // K goes on the output so the states stay on the scale of e. The CgLp
  // comes first: for the reset system the order matters, and a FORE fed by
  // the integrated error chatters badly around zero crossings.
  StateSpaced chain = scaled_output(
      series(series(cglp.base(), pi_block(1.0, p.omega_i)), lead_block(p.omega_d, p.omega_t)),
      p.K);
  Vector rho = Vector::Ones(chain.states());
  rho[kCgLpPidResetState] = p.gamma;
  return ResetController(std::move(chain), std::move(rho));
}

StateSpaced base_linear(const ResetController& rc) { return rc.base(); }

ResetController with_band(const ResetController& rc, double delta) {
  if (!(delta >= 0) || !std::isfinite(delta)) {
    throw Error(ErrorKind::domain, "reset band must be nonnegative");
  }
  const ResetCondition cond =
      delta > 0 ? ResetCondition::band(delta) : ResetCondition::zero_crossing();
  return ResetController(rc.base(), rc.reset_values(), cond);
}

ResetController without_reset(const ResetController& rc) {
  return ResetController(rc.base(), Vector::Ones(rc.states()), rc.condition());
}

}  // namespace resetctl
