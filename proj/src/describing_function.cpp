#include "resetctl/describing_function.hpp"

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

namespace resetctl {
namespace {

using std::numbers::pi;

Matrix lu_solve_guarded(const Matrix& m, const Matrix& rhs, const char* what) {
  Eigen::PartialPivLU<Matrix> lu(m);
  if (!(lu.rcond() >= kSingularRcond)) {
    throw Error(ErrorKind::singular, std::string(what) + " is singular at this frequency");
  }
  return lu.solve(rhs);
}

// Theta(w) without the trailing phase factor of the band case.
Matrix theta(const ResetController& rc, double omega) {
  const StateSpaced& sys = rc.base();
  const Eigen::Index n = sys.states();
  const Matrix id = Matrix::Identity(n, n);
  const Matrix rho = rc.reset_matrix();
  const Matrix e = mat_exp((pi / omega) * sys.A);
  const Matrix scaled = sys.A / omega;
  const Matrix jump = lu_solve_guarded(id + rho * e, id - rho, "I + A_rho e^{pi A/w}");
  const Matrix shape = (scaled * scaled + id).transpose();
  // X (S)^-1 computed as ((S^T)^-1 X^T)^T
  const Matrix right = lu_solve_guarded(shape, ((2.0 / pi) * (id + e) * jump).transpose(),
                                        "(A/w)^2 + I");
  return right.transpose();
}

Complex evaluate(const ResetController& rc, double omega, const ComplexMatrix& inner) {
  const StateSpaced& sys = rc.base();
  const ComplexMatrix rhs = inner * sys.B.cast<Complex>();
  const ComplexMatrix x = resolvent_solve(sys.A, rhs, omega);
  return (sys.C.cast<Complex>() * x)(0, 0) + sys.D(0, 0);
}

void require_frequency(double omega) {
  if (!(omega > 0) || !std::isfinite(omega)) {
    throw Error(ErrorKind::domain, "describing function needs w > 0");
  }
}

}  // namespace

Complex sidf(const ResetController& rc, double omega) {
  require_frequency(omega);
  const Eigen::Index n = rc.states();
  if (n == 0) return rc.base().D(0, 0);
  const ComplexMatrix inner =
      ComplexMatrix::Identity(n, n) + Complex(0, 1) * theta(rc, omega).cast<Complex>();
  return evaluate(rc, omega, inner);
}

Complex sidf_band(const ResetController& rc, double omega, double amplitude, double delta) {
  require_frequency(omega);
  if (!(amplitude > 0)) throw Error(ErrorKind::domain, "input amplitude must be positive");
  if (!(delta >= 0)) throw Error(ErrorKind::domain, "reset band must be nonnegative");
  if (!(delta < amplitude)) {
    throw Error(ErrorKind::domain, "delta >= E: the input never enters the reset band");
  }
  const Eigen::Index n = rc.states();
  if (n == 0) return rc.base().D(0, 0);
  const double phi = pi - std::asin(delta / amplitude);
  const Matrix id = Matrix::Identity(n, n);
  const Matrix shift = std::cos(phi) * id + std::sin(phi) * rc.base().A / omega;
  const Matrix theta_s = theta(rc, omega) * shift;
  const Complex factor = Complex(0, 1) * std::exp(Complex(0, -phi));
  const ComplexMatrix inner = ComplexMatrix::Identity(n, n) + factor * theta_s.cast<Complex>();
  return evaluate(rc, omega, inner);
}

Complex df_oracle(const ResetController& rc, double omega, double amplitude, double delta,
                  const OracleOptions& opt) {
  require_frequency(omega);
  if (!(amplitude > 0)) throw Error(ErrorKind::domain, "input amplitude must be positive");
  if (!(delta >= 0 && delta < amplitude)) throw Error(ErrorKind::domain, "need 0 <= delta < E");
  if (opt.samples_per_period < 1000 || opt.discard_periods < 0 ||
      opt.periods < opt.discard_periods + 2) {
    throw Error(ErrorKind::domain, "oracle needs >= 1000 samples/period and >= 2 kept periods");
  }

  const StateSpaced& sys = rc.base();
  const Eigen::Index n = sys.states();
  const Vector& rho = rc.reset_values();
  const double c_d = sys.D(0, 0);

  // Flow of (x, E sin wt, E cos wt) is linear and autonomous.
  Matrix flow = Matrix::Zero(n + 2, n + 2);
  flow.topLeftCorner(n, n) = sys.A;
  flow.block(0, n, n, 1) = sys.B;
  flow(n, n + 1) = omega;
  flow(n + 1, n) = -omega;

  const int per = opt.samples_per_period;
  const double period = 2 * pi / omega;
  const double h = period / per;
  const Matrix step = mat_exp(flow * h);

  auto input = [&](double t) { return amplitude * std::sin(omega * t); };
  auto output = [&](const Vector& w) {
    return n > 0 ? (sys.C * w.head(n))(0, 0) + c_d * w[n] : c_d * w[n];
  };
  auto crossing = [&](double e0, double e1, double& level) {
    if (delta == 0) {
      level = 0;
      return e0 != 0 && e0 * e1 <= 0;
    }
    if (e0 > delta && e1 <= delta) {
      level = delta;
      return true;
    }
    if (e0 < -delta && e1 >= -delta) {
      level = -delta;
      return true;
    }
    return false;
  };

  // Samples sit half a step off the zero crossings so a reset never lands
  // on a sample boundary, where rounding would move it between steps.
  const double t_start = 0.5 * h;
  Vector w = Vector::Zero(n + 2);
  w[n] = amplitude * std::sin(omega * t_start);
  w[n + 1] = amplitude * std::cos(omega * t_start);

  const long long total = static_cast<long long>(per) * opt.periods;
  const long long keep_from = static_cast<long long>(per) * opt.discard_periods;
  const long long tail_from = total - 2LL * per;
  std::vector<double> tail;
  tail.reserve(2 * per);

  Complex integral = 0;
  auto accumulate = [&](double ta, double ua, double tb, double ub) {
    integral += 0.5 * (tb - ta) *
                (ua * std::exp(Complex(0, -omega * ta)) + ub * std::exp(Complex(0, -omega * tb)));
  };

  for (long long k = 0; k < total; ++k) {
    const double t0 = t_start + static_cast<double>(k) * h;
    const double t1 = t_start + static_cast<double>(k + 1) * h;
    const bool in_window = k >= keep_from;
    if (k >= tail_from) tail.push_back(output(w));
    const double u0 = output(w);

    double level = 0;
    if (crossing(input(t0), input(t1), level)) {
      double lo = t0, hi = t1;
      const double sign0 = input(t0) - level;
      for (int it = 0; it < 200 && hi - lo > 4 * std::numeric_limits<double>::epsilon() * hi;
           ++it) {
        const double mid = 0.5 * (lo + hi);
        if ((input(mid) - level) * sign0 > 0) lo = mid; else hi = mid;
      }
      const double te = hi;
      w = mat_exp(flow * (te - t0)) * w;
      const double u_minus = output(w);
      for (Eigen::Index i = 0; i < n; ++i) w[i] *= rho[i];
      const double u_plus = output(w);
      w = mat_exp(flow * (t1 - te)) * w;
      if (in_window) {
        accumulate(t0, u0, te, u_minus);
        accumulate(te, u_plus, t1, output(w));
      }
    } else {
      w = step * w;
      if (in_window) accumulate(t0, u0, t1, output(w));
    }
    if (!w.allFinite()) throw Error(ErrorKind::oracle_unsettled, "oracle state diverged");
  }

  double diff2 = 0, ref2 = 0;
  for (int i = 0; i < per; ++i) {
    const double d = tail[per + i] - tail[i];
    diff2 += d * d;
    ref2 += tail[per + i] * tail[per + i];
  }
  if (ref2 > 0 && std::sqrt(diff2 / ref2) > opt.settle_tolerance) {
    throw Error(ErrorKind::oracle_unsettled,
                "oracle output not periodic over the last two periods");
  }

  const double window = period * (opt.periods - opt.discard_periods);
  return Complex(0, 1) * (2.0 / (amplitude * window)) * integral;
}

}  // namespace resetctl
