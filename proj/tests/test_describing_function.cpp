#include <doctest.h>

#include <cmath>
#include <numbers>

#include "resetctl/describing_function.hpp"
#include "support.hpp"

using namespace resetctl;
using testing::phase_deg;
using testing::rel_err;

namespace {

const double kCleggPhase = -90.0 + testing::deg(std::atan(4.0 / std::numbers::pi));

// Random stable element with a random diagonal reset map.
ResetController random_element(std::mt19937_64& rng) {
  const int n = 1 + static_cast<int>(rng() % 4);
  const StateSpaced base = testing::random_siso(rng, n);
  Vector rho(n);
  for (int i = 0; i < n; ++i) rho[i] = testing::uniform(rng, -1.0, 1.0);
  if (n > 1) rho[rng() % n] = 1.0;
  return ResetController(base, rho);
}

void check_oracle(const ResetController& rc, double w, double ratio, double mag_tol, double deg_tol) {
  const double E = 2.0;
  const Complex a = sidf_band(rc, w, E, ratio * E);
  const Complex o = df_oracle(rc, w, E, ratio * E);
  CAPTURE(w);
  CAPTURE(ratio);
  CHECK(std::abs(std::abs(a) / std::abs(o) - 1) <= mag_tol);
  CHECK(std::abs(testing::wrap_deg(phase_deg(a) - phase_deg(o))) <= deg_tol);
}

}  // namespace

TEST_CASE("clegg phase is -38.15 degrees") {
  CHECK(kCleggPhase == doctest::Approx(-38.146).epsilon(1e-4));
  for (double w : {0.1, 1.0, 10.0, 100.0}) {
    const Complex g = sidf(make_clegg(0), w);
    CHECK(std::abs(phase_deg(g) - kCleggPhase) < 1e-9);
    // Gain of the CI is sqrt(1 + 16/pi^2)/w.
    CHECK(std::abs(g) * w == doctest::Approx(std::hypot(1.0, 4 / std::numbers::pi)).epsilon(1e-12));
  }
  for (double w : {1.0, 10.0}) {
    CHECK(std::abs(phase_deg(df_oracle(make_clegg(0), w, 1.0, 0.0)) - kCleggPhase) < 0.3);
  }
}

TEST_CASE("zero band reduces to the plain SIDF") {
  std::mt19937_64 rng(41);
  for (int trial = 0; trial < 50; ++trial) {
    const ResetController rc = random_element(rng);
    for (double w : {0.05, 0.7, 3.0, 20.0}) {
      CHECK(rel_err(sidf_band(rc, w, 1.3, 0.0), sidf(rc, w)) < 1e-14);
    }
  }
}

TEST_CASE("identity reset map gives the linear response") {
  std::mt19937_64 rng(43);
  for (int trial = 0; trial < 20; ++trial) {
    const StateSpaced base = testing::random_siso(rng, 1 + trial % 4);
    const ResetController rc(base, Vector::Ones(base.states()));
    for (double w : {0.1, 1.0, 10.0}) {
      const Complex lin = freq_response(base, w);
      CHECK(rel_err(sidf(rc, w), lin) < 1e-12);
      CHECK(rel_err(sidf_band(rc, w, 1.0, 0.6), lin) < 1e-12);
    }
  }
}

TEST_CASE("band DF depends only on delta/E") {
  std::mt19937_64 rng(47);
  for (int trial = 0; trial < 20; ++trial) {
    const ResetController rc = random_element(rng);
    const double E = testing::log_uniform(rng, 1e-6, 10);
    const double d = E * testing::uniform(rng, 0.0, 0.95);
    const double w = testing::log_uniform(rng, 0.1, 100);
    CHECK(rel_err(sidf_band(rc, w, 10 * E, 10 * d), sidf_band(rc, w, E, d)) < 1e-13);
  }
}

TEST_CASE("band DF domain") {
  const ResetController f = make_fore(100, 0);
  CHECK_THROWS_AS(sidf_band(f, 100, 1.0, 1.0), Error);
  CHECK_THROWS_AS(sidf_band(f, 100, 1.0, -0.1), Error);
  CHECK_THROWS_AS(sidf(f, 0.0), Error);
  CHECK(limit_cycle_risk(0.95, 1.0));
  CHECK_FALSE(limit_cycle_risk(0.5, 1.0));
}

TEST_CASE("oracle agrees with the analytic DF") {
  const ResetController f = make_fore(100, 0);
  check_oracle(f, 100, 0.0, 0.01, 1.0);
  for (double ratio : {0.25, 0.5}) check_oracle(f, 100, ratio, 0.02, 2.0);
  check_oracle(make_fore(100, 0.5), 30, 0.25, 0.02, 2.0);
  check_oracle(make_cglp(160, 172, 9420, 0.5), 400, 0.0, 0.02, 2.0);

  // Linear element: the oracle is a plain Fourier projection.
  const ResetController lin = make_fore(100, 1.0);
  for (double w : {10.0, 100.0, 1000.0}) {
    CHECK(rel_err(df_oracle(lin, w, 1.0, 0.0), freq_response(lin.base(), w)) < 1e-3);
  }
}

TEST_CASE("oracle reports an unsettled response") {
  // An undamped oscillator never settles when driven off resonance.
  Matrix a(2, 2);
  a << 0, 1, -100, 0;
  const ResetController osc(StateSpaced(a, Matrix::Constant(2, 1, 1.0), Matrix::Constant(1, 2, 1.0),
                                        scalar_matrix(0.0)),
                            Vector::Ones(2));
  OracleOptions opts;
  opts.periods = 6;
  opts.discard_periods = 3;
  try {
    df_oracle(osc, 3.3, 1.0, 0.0, opts);
    FAIL("expected an unsettled oracle");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::oracle_unsettled);
  }
}
