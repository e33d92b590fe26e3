#pragma once

// Random systems and small helpers shared by the unit tests.
#include <cmath>
#include <complex>
#include <numbers>
#include <random>

#include "resetctl/linear.hpp"

namespace testing {

using namespace resetctl;

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline double log_uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::exp(uniform(rng, std::log(lo), std::log(hi)));
}

inline Matrix random_matrix(std::mt19937_64& rng, Eigen::Index r, Eigen::Index c, double scale = 1.0) {
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = uniform(rng, -scale, scale);
  return m;
}

// Random SISO system. With `stable` the spectrum is shifted into the open
// left half-plane, otherwise at least one eigenvalue is pushed to the right.
inline StateSpaced random_siso(std::mt19937_64& rng, int n, bool stable = true) {
  Matrix a = random_matrix(rng, n, n, 2.0);
  const double shift = spectral_abscissa(a);
  if (stable) {
    a -= (shift + uniform(rng, 0.1, 2.0)) * Matrix::Identity(n, n);
  } else {
    a -= (shift - uniform(rng, 0.1, 2.0)) * Matrix::Identity(n, n);
  }
  return {a, random_matrix(rng, n, 1), random_matrix(rng, 1, n), random_matrix(rng, 1, 1)};
}

inline double rel_err(std::complex<double> a, std::complex<double> b) {
  return std::abs(a - b) / std::max(std::abs(b), 1e-300);
}

inline double deg(double rad) { return rad * 180.0 / std::numbers::pi; }

inline double phase_deg(std::complex<double> z) { return deg(std::arg(z)); }

inline double wrap_deg(double d) {
  while (d > 180) d -= 360;
  while (d <= -180) d += 360;
  return d;
}

}  // namespace testing

#include "resetctl/reset_elements.hpp"

namespace testing {

// The mass-stage CgLp-PID with every corner frequency scaled so that the
// nominal crossover lands at wc on a mass of m kg.
inline resetctl::CgLpPidParams scaled_mass_stage(double wc, double m = 1.0) {
  resetctl::CgLpPidParams p = resetctl::CgLpPidParams::mass_stage();
  const double s = wc / p.omega_c;
  p.K *= s * s * m;
  for (double* w : {&p.omega_c, &p.omega_i, &p.omega_d, &p.omega_t, &p.omega_r_alpha, &p.omega_r,
                    &p.omega_f}) {
    *w *= s;
  }
  return p;
}

}  // namespace testing
