#pragma once

// Dense LTI machinery for small SISO systems: state-space containers,
// composition, frequency response, matrix exponential and discretization.
// Everything is templated on the scalar type; the rest of the library uses
// the double aliases at the bottom of this file.

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <limits>
#include <string>

#include "resetctl/error.hpp"

namespace resetctl {

template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Reciprocal condition below which a linear solve is reported as singular.
inline constexpr double kSingularRcond = 1e-12;

/// Continuous LTI system  dx/dt = A x + B u,  y = C x + D u.
/// A system with zero states is a static gain D.
template <typename Scalar>
struct StateSpace {
  Mat<Scalar> A, B, C, D;

  StateSpace() : StateSpace(Mat<Scalar>(0, 0), Mat<Scalar>(0, 1), Mat<Scalar>(1, 0), Mat<Scalar>::Zero(1, 1)) {}

  StateSpace(Mat<Scalar> a, Mat<Scalar> b, Mat<Scalar> c, Mat<Scalar> d)
      : A(std::move(a)), B(std::move(b)), C(std::move(c)), D(std::move(d)) {
    if (A.rows() != A.cols() || B.rows() != A.rows() || C.cols() != A.rows() ||
        D.rows() != C.rows() || D.cols() != B.cols() || D.rows() < 1 || D.cols() < 1) {
      throw Error(ErrorKind::dimension, "inconsistent state-space dimensions");
    }
    if (!A.allFinite() || !B.allFinite() || !C.allFinite() || !D.allFinite()) {
      throw Error(ErrorKind::domain, "state-space matrices must be finite");
    }
  }

  static StateSpace gain(Scalar k) {
    return StateSpace(Mat<Scalar>(0, 0), Mat<Scalar>(0, 1), Mat<Scalar>(1, 0),
                      Mat<Scalar>::Constant(1, 1, k));
  }

  Eigen::Index states() const { return A.rows(); }
  Eigen::Index inputs() const { return B.cols(); }
  Eigen::Index outputs() const { return C.rows(); }
};

/// Discrete LTI system  x[k+1] = Ad x[k] + Bd u[k],  y[k] = Cd x[k] + Dd u[k].
template <typename Scalar>
struct DiscreteStateSpace {
  Mat<Scalar> Ad, Bd, Cd, Dd;
  Scalar T{};

  Eigen::Index states() const { return Ad.rows(); }
};

namespace detail {

template <typename Derived>
typename Derived::RealScalar norm1(const Eigen::MatrixBase<Derived>& m) {
  if (m.size() == 0) return 0;
  return m.cwiseAbs().colwise().sum().maxCoeff();
}

/// Diagonal similarity scaling (powers of two) that roughly equalizes row
/// and column norms of a, in the spirit of LAPACK's gebal without
/// permutations. Returns d such that diag(d)^-1 a diag(d) is balanced.
template <typename Scalar>
Vec<typename Eigen::NumTraits<Scalar>::Real> balance(Mat<Scalar> a) {
  using Real = typename Eigen::NumTraits<Scalar>::Real;
  const Eigen::Index n = a.rows();
  Vec<Real> d = Vec<Real>::Ones(n);
  for (int sweep = 0; sweep < 100; ++sweep) {
    bool changed = false;
    for (Eigen::Index i = 0; i < n; ++i) {
      Real c = 0, r = 0;
      for (Eigen::Index j = 0; j < n; ++j) {
        if (j == i) continue;
        c += std::abs(a(j, i));
        r += std::abs(a(i, j));
      }
      if (c == 0 || r == 0) continue;
      const Real f = std::exp2(std::round(std::log2(std::sqrt(r / c))));
      if (f != 1 && c * f + r / f < Real(0.95) * (c + r)) {
        a.col(i) *= f;
        a.row(i) /= f;
        d[i] *= f;
        changed = true;
      }
    }
    if (!changed) break;
  }
  return d;
}

}  // namespace detail

/// Matrix exponential by scaling and squaring with a degree-13 Pade
/// approximant. The argument is scaled until its 1-norm is at most 0.5.
template <typename Derived>
typename Derived::PlainObject mat_exp(const Eigen::MatrixBase<Derived>& m) {
  using Plain = typename Derived::PlainObject;
  using Real = typename Derived::RealScalar;
  if (m.rows() != m.cols()) throw Error(ErrorKind::dimension, "mat_exp: matrix is not square");
  if (!m.allFinite()) throw Error(ErrorKind::domain, "mat_exp: non-finite entries");
  const Eigen::Index n = m.rows();
  if (n == 0) return Plain(0, 0);

  static constexpr double b[] = {64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
                                 1187353796428800.0,  129060195264000.0,   10559470521600.0,
                                 670442572800.0,      33522128640.0,       1323241920.0,
                                 40840800.0,          960960.0,            16380.0,
                                 182.0,               1.0};

  const Real norm = detail::norm1(m);
  int squarings = 0;
  if (norm > Real(0.5)) squarings = static_cast<int>(std::ceil(std::log2(norm / Real(0.5))));
  const Plain a = m.derived() / std::ldexp(Real(1), squarings);

  const Plain id = Plain::Identity(n, n);
  const Plain a2 = a * a;
  const Plain a4 = a2 * a2;
  const Plain a6 = a4 * a2;
  const Plain u_inner = a6 * (b[13] * a6 + b[11] * a4 + b[9] * a2) + b[7] * a6 + b[5] * a4 +
                        b[3] * a2 + b[1] * id;
  const Plain u = a * u_inner;
  const Plain v = a6 * (b[12] * a6 + b[10] * a4 + b[8] * a2) + b[6] * a6 + b[4] * a4 +
                  b[2] * a2 + b[0] * id;
  Plain r = (v - u).partialPivLu().solve(v + u);
  for (int i = 0; i < squarings; ++i) r = (r * r).eval();
  return r;
}

/// Solves (jw I - A) X = rhs. Throws a singularity error when the
/// resolvent is numerically singular at this frequency.
template <typename Scalar, typename Rhs>
Mat<std::complex<Scalar>> resolvent_solve(const Mat<Scalar>& A, const Eigen::MatrixBase<Rhs>& rhs,
                                          Scalar omega) {
  using Cx = std::complex<Scalar>;
  const Eigen::Index n = A.rows();
  if (n == 0) return Mat<Cx>(0, rhs.cols());
  // Solve the balanced system diag(d)^-1 (jwI - A) diag(d) y = diag(d)^-1 rhs.
  const Vec<Scalar> d = detail::balance<Scalar>(A);
  Mat<Cx> m = -(d.cwiseInverse().asDiagonal() * A * d.asDiagonal()).template cast<Cx>();
  m.diagonal().array() += Cx(0, omega);
  Eigen::PartialPivLU<Mat<Cx>> lu(m);
  if (!(lu.rcond() >= kSingularRcond)) {
    throw Error(ErrorKind::singular,
                "resolvent (jwI - A) is singular at w = " + std::to_string(omega));
  }
  const Mat<Cx> y = lu.solve(d.cwiseInverse().template cast<Cx>().asDiagonal() *
                             rhs.template cast<Cx>());
  return d.template cast<Cx>().asDiagonal() * y;
}

/// Matrix-valued transfer C (jw I - A)^-1 B + D.
template <typename Scalar>
Mat<std::complex<Scalar>> freq_response_matrix(const StateSpace<Scalar>& sys, Scalar omega) {
  using Cx = std::complex<Scalar>;
  Mat<Cx> g = sys.D.template cast<Cx>();
  if (sys.states() > 0) g += sys.C.template cast<Cx>() * resolvent_solve(sys.A, sys.B, omega);
  return g;
}

/// SISO frequency response at w > 0.
template <typename Scalar>
std::complex<Scalar> freq_response(const StateSpace<Scalar>& sys, Scalar omega) {
  if (!(omega > 0)) throw Error(ErrorKind::domain, "freq_response: w must be positive");
  return freq_response_matrix(sys, omega)(0, 0);
}

/// Cascade `second` after `first`. States of `first` come first.
template <typename Scalar>
StateSpace<Scalar> series(const StateSpace<Scalar>& first, const StateSpace<Scalar>& second) {
  if (first.outputs() != second.inputs()) {
    throw Error(ErrorKind::dimension, "series: output/input dimension mismatch");
  }
  const Eigen::Index n1 = first.states(), n2 = second.states();
  Mat<Scalar> a = Mat<Scalar>::Zero(n1 + n2, n1 + n2);
  a.topLeftCorner(n1, n1) = first.A;
  a.bottomLeftCorner(n2, n1) = second.B * first.C;
  a.bottomRightCorner(n2, n2) = second.A;
  Mat<Scalar> b(n1 + n2, first.inputs());
  b << first.B, second.B * first.D;
  Mat<Scalar> c(second.outputs(), n1 + n2);
  c << second.D * first.C, second.C;
  return StateSpace<Scalar>(std::move(a), std::move(b), std::move(c), second.D * first.D);
}

/// Bilinear (Tustin) discretization. The realization keeps Cd = C so that the
/// discrete state z[k] relates to the trapezoidal estimate of the continuous
/// state by x[k] = z[k] + G u[k], with G = tustin_input_offset(sys, T).
template <typename Scalar>
DiscreteStateSpace<Scalar> c2d_tustin(const StateSpace<Scalar>& sys, Scalar T) {
  if (!(T > 0)) throw Error(ErrorKind::domain, "c2d_tustin: sample period must be positive");
  const Eigen::Index n = sys.states();
  if (n == 0) return {sys.A, sys.B, sys.C, sys.D, T};
  const Mat<Scalar> id = Mat<Scalar>::Identity(n, n);
  Eigen::PartialPivLU<Mat<Scalar>> lu(id - (T / 2) * sys.A);
  const Vec<Scalar> d = detail::balance<Scalar>(sys.A);
  const Mat<Scalar> balanced = id - (T / 2) * (d.cwiseInverse().asDiagonal() * sys.A * d.asDiagonal());
  if (!(balanced.partialPivLu().rcond() >= kSingularRcond)) {
    throw Error(ErrorKind::discretization, "c2d_tustin: (I - T/2 A) is singular");
  }
  const Mat<Scalar> ad = lu.solve(id + (T / 2) * sys.A);
  const Mat<Scalar> mb = lu.solve(sys.B);
  const Mat<Scalar> bd = T * lu.solve(mb);
  const Mat<Scalar> dd = sys.D + (T / 2) * sys.C * mb;
  return {ad, bd, sys.C, dd, T};
}

/// Offset G with x[k] = z[k] + G u[k] for the realization of c2d_tustin.
template <typename Scalar>
Mat<Scalar> tustin_input_offset(const StateSpace<Scalar>& sys, Scalar T) {
  const Eigen::Index n = sys.states();
  const Mat<Scalar> id = Mat<Scalar>::Identity(n, n);
  return (T / 2) * (id - (T / 2) * sys.A).partialPivLu().solve(sys.B);
}

/// Zero-order-hold discretization through the augmented exponential
/// exp([[A, B], [0, 0]] T).
template <typename Scalar>
DiscreteStateSpace<Scalar> c2d_zoh(const StateSpace<Scalar>& sys, Scalar T) {
  if (!(T > 0)) throw Error(ErrorKind::domain, "c2d_zoh: sample period must be positive");
  const Eigen::Index n = sys.states(), m = sys.inputs();
  Mat<Scalar> aug = Mat<Scalar>::Zero(n + m, n + m);
  aug.topLeftCorner(n, n) = sys.A * T;
  aug.topRightCorner(n, m) = sys.B * T;
  const Mat<Scalar> e = mat_exp(aug);
  return {e.topLeftCorner(n, n), e.topRightCorner(n, m), sys.C, sys.D, T};
}

/// Spectral abscissa: largest real part among the eigenvalues of a.
template <typename Scalar>
Scalar spectral_abscissa(const Mat<Scalar>& a) {
  if (a.rows() == 0) return -std::numeric_limits<Scalar>::infinity();
  return Eigen::EigenSolver<Mat<Scalar>>(a, false).eigenvalues().real().maxCoeff();
}

/// Largest eigenvalue modulus.
template <typename Scalar>
Scalar spectral_radius(const Mat<Scalar>& a) {
  if (a.rows() == 0) return 0;
  return Eigen::EigenSolver<Mat<Scalar>>(a, false).eigenvalues().cwiseAbs().maxCoeff();
}

using Matrix = Mat<double>;
using Vector = Vec<double>;
using Complex = std::complex<double>;
using ComplexMatrix = Mat<Complex>;
using StateSpaced = StateSpace<double>;
using DiscreteStateSpaced = DiscreteStateSpace<double>;

/// Small helpers for building SISO systems from scalars.
inline Matrix scalar_matrix(double v) { return Matrix::Constant(1, 1, v); }

inline StateSpaced integrator() {
  return {scalar_matrix(0.0), scalar_matrix(1.0), scalar_matrix(1.0), scalar_matrix(0.0)};
}

/// Mass plant 1/(m s^2) with states (position, velocity).
inline StateSpaced mass_plant(double mass) {
  if (!(mass > 0)) throw Error(ErrorKind::domain, "mass must be positive");
  Matrix a(2, 2), b(2, 1), c(1, 2);
  a << 0, 1, 0, 0;
  b << 0, 1.0 / mass;
  c << 1, 0;
  return {a, b, c, scalar_matrix(0.0)};
}

/// gain / (s^2 + a1 s + a0) in controllable-companion-like form with
/// position output.
inline StateSpaced second_order_plant(double gain, double a1, double a0) {
  Matrix a(2, 2), b(2, 1), c(1, 2);
  a << 0, 1, -a0, -a1;
  b << 0, gain;
  c << 1, 0;
  return {a, b, c, scalar_matrix(0.0)};
}

}  // namespace resetctl
