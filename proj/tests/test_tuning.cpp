#include <doctest.h>

#include <cmath>
#include <numbers>

#include "resetctl/tuning.hpp"
#include "support.hpp"

using namespace resetctl;

namespace {

// Loop gain of mass plant and CgLp-PID, factor by factor.
Complex table1_loop(double w) {
  const CgLpPidParams p = CgLpPidParams::mass_stage();
  const Complex s(0, w);
  return p.K * (1.0 + p.omega_i / s) * (s / p.omega_d + 1.0) / (s / p.omega_t + 1.0) *
         (s / p.omega_r + 1.0) / (s / p.omega_r_alpha + 1.0) / (s / p.omega_f + 1.0) / (s * s);
}

struct Setup {
  StateSpaced plant = mass_plant(1.0);
  ResetController rc = make_cglp_pid(CgLpPidParams::mass_stage());
};

}  // namespace

TEST_CASE("base-linear sensitivity") {
  const Setup s;
  for (double w : {1e-3, 1.0, 40.0, 40.2, 300.0, 1027.0, 5000.0}) {
    CHECK(bls_sensitivity(s.plant, s.rc, w) ==
          doctest::Approx(1 / std::abs(1.0 + table1_loop(w))).epsilon(1e-10));
  }
  CHECK(bls_sensitivity(s.plant, s.rc, 1e-4) < 1e-12);
  // The published value near 40 rad/s is 0.00117; these parameters give 0.00104.
  CHECK(bls_sensitivity(s.plant, s.rc, 40.2) == doctest::Approx(0.00104).epsilon(0.01));

  // At crossover |S| = 1 / (2 sin(PM/2)).
  double a = 500, b = 2000;
  for (int i = 0; i < 80; ++i) {
    const double m = std::sqrt(a * b);
    (std::abs(table1_loop(m)) > 1 ? a : b) = m;
  }
  const double pm = std::numbers::pi + std::arg(table1_loop(a));
  const double sc = bls_sensitivity(s.plant, s.rc, a);
  CHECK(sc == doctest::Approx(1 / (2 * std::sin(pm / 2))).epsilon(1e-8));
  CHECK(sc >= 0.5);

  const ResetController unstable(StateSpaced(scalar_matrix(0.0), scalar_matrix(-1.0),
                                             scalar_matrix(1.0), scalar_matrix(0.0)),
                                 Vector::Zero(1));
  try {
    bls_sensitivity(integrator(), unstable, 1.0);
    FAIL("expected invalid-context");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::invalid_context);
  }
  CHECK_FALSE(base_linear_loop_stable(integrator(), unstable));
  CHECK(base_linear_loop_stable(s.plant, s.rc));
}

TEST_CASE("tune_delta formula") {
  const Setup s;
  DeltaTuningSpec spec;
  spec.omega_s = 50;
  spec.reference = ReferenceSignal::sine(0.0, 40);
  CHECK(tune_delta(s.plant, s.rc, spec) == 0.0);

  const double R = 5000e-6;
  const double Q = R / 512;
  spec.reference = ReferenceSignal::sine(R, 40);
  spec.Q = Q;
  const double expected = R / std::abs(1.0 + table1_loop(40)) + Q / 2;
  CHECK(tune_delta(s.plant, s.rc, spec) == doctest::Approx(expected).epsilon(1e-10));
  // Even |S| = 0.00117 gives 10.73 um with this formula, not the published 16 um.
  CHECK(R * 0.00117 + Q / 2 == doctest::Approx(10.73e-6).epsilon(1e-3));

  spec.k = 1.2;
  spec.noise_margin = 1e-6;
  CHECK(tune_delta(s.plant, s.rc, spec) ==
        doctest::Approx(1.2 * (expected + 1e-6)).epsilon(1e-10));

  // Double sine: per-component bounds are summed.
  DeltaTuningSpec two;
  two.omega_s = 200;
  two.reference = ReferenceSignal({{R, 2 * std::numbers::pi * 5, 0}, {R / 3, 2 * std::numbers::pi * 25, 0}});
  two.Q = Q;
  const double sum = R / std::abs(1.0 + table1_loop(2 * std::numbers::pi * 5)) +
                     R / 3 / std::abs(1.0 + table1_loop(2 * std::numbers::pi * 25)) + Q / 2;
  CHECK(tune_delta(s.plant, s.rc, two) == doctest::Approx(sum).epsilon(1e-10));
}

TEST_CASE("tune_delta guards") {
  const Setup s;
  DeltaTuningSpec spec;
  spec.omega_s = 30;
  spec.reference = ReferenceSignal::sine(1e-3, 40);
  try {
    tune_delta(s.plant, s.rc, spec);
    FAIL("expected guarantee-void");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::guarantee_void);
  }
  CHECK(tune_delta(s.plant, s.rc, spec, true) > 0);
  spec.omega_s = 50;
  spec.k = 0.5;
  CHECK_THROWS_AS(tune_delta(s.plant, s.rc, spec), Error);
  spec.k = 1;
  spec.Q = -1;
  CHECK_THROWS_AS(tune_delta(s.plant, s.rc, spec), Error);
}

TEST_CASE("tune_delta is monotone in its inputs") {
  const Setup s;
  std::mt19937_64 rng(67);
  for (int trial = 0; trial < 25; ++trial) {
    DeltaTuningSpec spec;
    spec.omega_s = 100;
    const double a1 = testing::log_uniform(rng, 1e-6, 1e-2);
    const double a2 = testing::log_uniform(rng, 1e-6, 1e-2);
    spec.reference = ReferenceSignal({{a1, 10, 0}, {a2, 70, 0}});
    spec.Q = testing::log_uniform(rng, 1e-9, 1e-5);
    spec.k = testing::uniform(rng, 1, 3);
    spec.noise_margin = testing::log_uniform(rng, 1e-9, 1e-5);
    const double base = tune_delta(s.plant, s.rc, spec);

    DeltaTuningSpec more = spec;
    more.Q *= 1.5;
    CHECK(tune_delta(s.plant, s.rc, more) >= base);
    more = spec;
    more.k *= 1.1;
    CHECK(tune_delta(s.plant, s.rc, more) >= base);
    more = spec;
    more.noise_margin *= 2;
    CHECK(tune_delta(s.plant, s.rc, more) >= base);
    more = spec;
    more.reference = ReferenceSignal({{a1 * 2, 10, 0}, {a2, 70, 0}});
    CHECK(tune_delta(s.plant, s.rc, more) >= base);
    more.reference = ReferenceSignal({{a1, 10, 0}, {a2 * 2, 70, 0}});
    CHECK(tune_delta(s.plant, s.rc, more) >= base);
  }
}

TEST_CASE("disturbance error") {
  const Setup s;
  CHECK(error_from_disturbance(s.plant, s.rc, 0.0, 50) == 0.0);
  const Complex P = -1.0 / (50.0 * 50.0);
  CHECK(error_from_disturbance(s.plant, s.rc, 1.0, 50) ==
        doctest::Approx(std::abs(P / (1.0 + table1_loop(50)))).epsilon(1e-10));
  const double low = error_from_disturbance(s.plant, s.rc, 1.0, 1e-4);
  CHECK(std::isfinite(low));
  // PS -> 1/C ~ s / (K w_i) at low frequency.
  CHECK(low == doctest::Approx(1e-4 / (CgLpPidParams::mass_stage().K * 94.0)).epsilon(1e-2));
}

TEST_CASE("no-reset verification") {
  // Mass-stage ratios at a 100 rad/s crossover keep the runs short.
  const StateSpaced plant = mass_plant(1.0);
  const ResetController rc = make_cglp_pid(testing::scaled_mass_stage(100));
  SimConfig cfg;
  cfg.sample_rate = 1e4;
  cfg.substeps = 1;
  // Sensor quantization is left out: the |S| peak amplifies it beyond Q/2.
  const Quantizer q = Quantizer::none();

  DeltaTuningSpec spec;
  spec.omega_s = 5;
  spec.reference = ReferenceSignal::sine(1e-3, 2);
  spec.Q = q.level;
  spec.k = 1.5;
  const double delta = tune_delta(plant, rc, spec);
  const NoResetVerdict ok = verify_no_reset(plant, rc, q, spec, delta, cfg);
  CHECK(ok.ok);
  CHECK(ok.resets == 0);
  CHECK(ok.checked_omegas.size() == 6);
  CHECK(ok.observed_max_error < delta);

  const NoResetVerdict bad = verify_no_reset(plant, rc, q, spec, delta / 4, cfg);
  CHECK_FALSE(bad.ok);
  CHECK(bad.resets > 0);
  CHECK(bad.offending_omega > 0);

  DeltaTuningSpec zero = spec;
  zero.reference = ReferenceSignal::sine(0.0, 2);
  CHECK(verify_no_reset(plant, rc, q, zero, 1e-9, cfg).ok);
}

TEST_CASE("summed bound covers the double-sine base-linear error") {
  const Setup s;
  const double R = 5000e-6;
  const double Q = R / 512;
  DeltaTuningSpec spec;
  spec.omega_s = 200;
  spec.reference = ReferenceSignal({{R, 2 * std::numbers::pi * 5, 0}, {R / 3, 2 * std::numbers::pi * 25, 0}});
  spec.Q = Q;
  const double bound = tune_delta(s.plant, s.rc, spec);
  SimConfig cfg;
  cfg.sample_rate = 1e5;
  cfg.substeps = 1;
  cfg.duration = 2.0;
  const SimulationTrace tr = simulate(s.plant, without_reset(s.rc), Quantizer::rounding(Q),
                                      spec.reference, {}, cfg);
  CHECK(steady_state_max_error(tr) <= bound);
}
