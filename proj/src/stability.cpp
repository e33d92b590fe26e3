#include "resetctl/stability.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

namespace resetctl {
namespace {

// Plain Nelder-Mead minimizer; returns the best vertex.
Vector nelder_mead(const std::function<double(const Vector&)>& f, const Vector& start,
                   double initial_step, int max_evals) {
  const Eigen::Index dim = start.size();
  std::vector<Vector> simplex(dim + 1, start);
  std::vector<double> values(dim + 1);
  for (Eigen::Index i = 0; i < dim; ++i) simplex[i + 1][i] += initial_step;
  int evals = 0;
  for (Eigen::Index i = 0; i <= dim; ++i, ++evals) values[i] = f(simplex[i]);

  std::vector<std::size_t> order(dim + 1);
  while (evals < max_evals) {
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return values[a] < values[b]; });
    const std::size_t best = order.front(), worst = order.back(), second = order[dim - 1];
    if (std::abs(values[worst] - values[best]) < 1e-14 * (1 + std::abs(values[best]))) break;

    Vector centroid = Vector::Zero(dim);
    for (std::size_t i = 0; i < order.size() - 1; ++i) centroid += simplex[order[i]];
    centroid /= static_cast<double>(dim);

    const Vector reflected = centroid + (centroid - simplex[worst]);
    const double fr = f(reflected);
    ++evals;
    if (fr < values[best]) {
      const Vector expanded = centroid + 2.0 * (centroid - simplex[worst]);
      const double fe = f(expanded);
      ++evals;
      if (fe < fr) {
        simplex[worst] = expanded;
        values[worst] = fe;
      } else {
        simplex[worst] = reflected;
        values[worst] = fr;
      }
    } else if (fr < values[second]) {
      simplex[worst] = reflected;
      values[worst] = fr;
    } else {
      const Vector contracted = centroid + 0.5 * (simplex[worst] - centroid);
      const double fc = f(contracted);
      ++evals;
      if (fc < values[worst]) {
        simplex[worst] = contracted;
        values[worst] = fc;
      } else {
        for (std::size_t i = 0; i <= static_cast<std::size_t>(dim); ++i) {
          if (i == best) continue;
          simplex[i] = simplex[best] + 0.5 * (simplex[i] - simplex[best]);
          values[i] = f(simplex[i]);
          ++evals;
        }
      }
    }
  }
  return simplex[static_cast<std::size_t>(
      std::min_element(values.begin(), values.end()) - values.begin())];
}

struct Split {
  Matrix a;              // permuted closed-loop matrix
  Matrix c_plant;        // 1 x n_p
  Eigen::Index n_p = 0;  // plant states
  Eigen::Index n_nr = 0;
  Eigen::Index n_r = 0;
  Vector reset_values;   // reset values of the resetting states
};

Split split_loop(const StateSpaced& plant, const ResetController& rc) {
  const Matrix a_cl = closed_loop_A(plant, rc);
  const std::vector<Eigen::Index> order = reset_ordering(rc);
  const Eigen::Index n_p = plant.states();
  const Eigen::Index n_c = rc.states();
  Eigen::VectorXi perm(n_p + n_c);
  for (Eigen::Index i = 0; i < n_p; ++i) perm[i] = static_cast<int>(i);
  for (Eigen::Index i = 0; i < n_c; ++i) perm[n_p + i] = static_cast<int>(n_p + order[i]);

  Split s;
  s.a.resize(n_p + n_c, n_p + n_c);
  for (Eigen::Index i = 0; i < perm.size(); ++i) {
    for (Eigen::Index j = 0; j < perm.size(); ++j) s.a(i, j) = a_cl(perm[i], perm[j]);
  }
  s.c_plant = plant.C;
  s.n_p = n_p;
  s.n_r = static_cast<Eigen::Index>(rc.resetting_states().size());
  s.n_nr = n_c - s.n_r;
  s.reset_values.resize(s.n_r);
  for (Eigen::Index i = 0; i < s.n_r; ++i) s.reset_values[i] = rc.reset_values()[order[s.n_nr + i]];
  return s;
}

// (jwI - A)^-1 [0; 0; I]
ComplexMatrix reset_columns(const Split& s, double omega) {
  const Eigen::Index n = s.a.rows();
  Matrix right = Matrix::Zero(n, s.n_r);
  right.bottomRows(s.n_r).setIdentity();
  return resolvent_solve(s.a, right, omega);
}

ComplexMatrix assemble(const Split& s, const ComplexMatrix& cols, const Vector& beta,
                       const Matrix& P) {
  const ComplexMatrix plant_part = s.c_plant.cast<Complex>() * cols.topRows(s.n_p);  // 1 x n_r
  return beta.cast<Complex>() * plant_part + P.cast<Complex>() * cols.bottomRows(s.n_r);
}

double hermitian_min_eig(const ComplexMatrix& h) {
  const ComplexMatrix herm = 0.5 * (h + h.adjoint());
  return Eigen::SelfAdjointEigenSolver<ComplexMatrix>(herm, Eigen::EigenvaluesOnly)
      .eigenvalues()
      .minCoeff();
}

bool partial_condition(const Vector& reset_values, const Matrix& P) {
  const Matrix r = reset_values.asDiagonal();
  const Matrix m = r * P * r - P;
  return Eigen::SelfAdjointEigenSolver<Matrix>(0.5 * (m + m.transpose()), Eigen::EigenvaluesOnly)
             .eigenvalues()
             .maxCoeff() <= kStabilityTolerance;
}

void require_spd(const Matrix& P, Eigen::Index n_r) {
  if (P.rows() != n_r || P.cols() != n_r) {
    throw Error(ErrorKind::dimension, "P_rho must be n_r x n_r");
  }
  if ((P - P.transpose()).cwiseAbs().maxCoeff() > 1e-12 * (1 + P.cwiseAbs().maxCoeff())) {
    throw Error(ErrorKind::domain, "P_rho must be symmetric");
  }
  if (Eigen::SelfAdjointEigenSolver<Matrix>(P, Eigen::EigenvaluesOnly).eigenvalues().minCoeff() <=
      0) {
    throw Error(ErrorKind::domain, "P_rho must be positive definite");
  }
}

}  // namespace

Matrix closed_loop_A(const StateSpaced& plant, const ResetController& rc) {
  const StateSpaced& c = rc.base();
  if (plant.inputs() != 1 || plant.outputs() != 1) {
    throw Error(ErrorKind::dimension, "closed_loop_A: plant must be SISO");
  }
  const double dp = plant.D(0, 0), dr = c.D(0, 0);
  if (dp != 0 && dr != 0) {
    throw Error(ErrorKind::unsupported_topology,
                "algebraic loop: plant and controller both have feedthrough");
  }
  const Eigen::Index np = plant.states(), nc = c.states();
  Matrix a(np + nc, np + nc);
  a.topLeftCorner(np, np) = plant.A - plant.B * dr * plant.C;
  a.topRightCorner(np, nc) = plant.B * c.C;
  a.bottomLeftCorner(nc, np) = -c.B * plant.C;
  a.bottomRightCorner(nc, nc) = c.A - c.B * dp * c.C;
  return a;
}

std::vector<Eigen::Index> reset_ordering(const ResetController& rc) {
  std::vector<Eigen::Index> order;
  const Vector& rho = rc.reset_values();
  for (Eigen::Index i = 0; i < rho.size(); ++i) {
    if (rho[i] == 1.0) order.push_back(i);
  }
  for (Eigen::Index i = 0; i < rho.size(); ++i) {
    if (rho[i] != 1.0) order.push_back(i);
  }
  return order;
}

ComplexMatrix hbeta_response(const StateSpaced& plant, const ResetController& rc,
                             const Vector& beta, const Matrix& P_rho, double omega) {
  if (!(omega >= 0)) throw Error(ErrorKind::domain, "hbeta_response: w must be >= 0");
  const Split s = split_loop(plant, rc);
  if (s.n_r == 0) throw Error(ErrorKind::domain, "controller has no resetting states");
  if (beta.size() != s.n_r || P_rho.rows() != s.n_r || P_rho.cols() != s.n_r) {
    throw Error(ErrorKind::dimension, "beta and P_rho must match the resetting state count");
  }
  return assemble(s, reset_columns(s, omega), beta, P_rho);
}

std::vector<double> log_grid(double lo, double hi, int per_decade) {
  if (!(lo > 0 && hi > lo && per_decade >= 1)) {
    throw Error(ErrorKind::domain, "log_grid: need 0 < lo < hi and per_decade >= 1");
  }
  const double decades = std::log10(hi / lo);
  const auto count = static_cast<int>(std::lround(decades * per_decade));
  std::vector<double> grid(static_cast<std::size_t>(count) + 1);
  for (int i = 0; i <= count; ++i) {
    grid[static_cast<std::size_t>(i)] = lo * std::pow(10.0, decades * i / count);
  }
  return grid;
}

std::vector<double> default_hbeta_grid() { return log_grid(1e-2, 1e6, 400); }

HBetaCertificate check_certificate(const StateSpaced& plant, const ResetController& rc,
                                   const Vector& beta, const Matrix& P_rho,
                                   const std::vector<double>& grid) {
  if (grid.empty()) throw Error(ErrorKind::domain, "certificate grid is empty");
  if (!std::is_sorted(grid.begin(), grid.end())) {
    throw Error(ErrorKind::domain, "certificate grid must be sorted");
  }
  const Split s = split_loop(plant, rc);
  if (s.n_r == 0) throw Error(ErrorKind::domain, "controller has no resetting states");
  if (beta.size() != s.n_r) throw Error(ErrorKind::dimension, "beta must have n_r entries");
  require_spd(P_rho, s.n_r);

  HBetaCertificate cert;
  cert.beta = beta;
  cert.P_rho = P_rho;
  cert.freq_grid = grid;
  cert.hurwitz_ok = spectral_abscissa(s.a) < -kStabilityTolerance;
  cert.partial_ok = partial_condition(s.reset_values, P_rho);
  double margin = std::numeric_limits<double>::infinity();
  for (double w : grid) {
    try {
      margin = std::min(margin, hermitian_min_eig(assemble(s, reset_columns(s, w), beta, P_rho)));
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::singular) throw;
      cert.skipped.push_back(w);
    }
  }
  cert.min_real_margin = margin;
  return cert;
}

HBetaCertificate search_hbeta(const StateSpaced& plant, const ResetController& rc,
                              const std::vector<double>& grid, const HBetaSearchOptions& opt) {
  if (grid.empty()) throw Error(ErrorKind::domain, "certificate grid is empty");
  const Split s = split_loop(plant, rc);
  const Eigen::Index n_r = s.n_r;
  if (n_r == 0) throw Error(ErrorKind::domain, "controller has no resetting states");

  HBetaCertificate fallback;
  fallback.beta = Vector::Zero(n_r);
  fallback.P_rho = Matrix::Identity(n_r, n_r);
  fallback.freq_grid = grid;
  fallback.partial_ok = partial_condition(s.reset_values, fallback.P_rho);
  if (spectral_abscissa(s.a) >= -kStabilityTolerance) return fallback;

  // H(w) is linear in (beta, P): cache the resolvent columns once.
  std::vector<ComplexMatrix> cache;
  cache.reserve(grid.size());
  for (double w : grid) {
    try {
      cache.push_back(reset_columns(s, w));
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::singular) throw;
    }
  }

  const Eigen::Index n_l = n_r * (n_r + 1) / 2;
  auto decode = [&](const Vector& z, Vector& beta, Matrix& P) {
    beta.resize(n_r);
    for (Eigen::Index i = 0; i < n_r; ++i) {
      const double m = std::min(std::abs(z[i]), 6.0);
      beta[i] = std::copysign(std::pow(10.0, m) - 1.0, z[i]);
    }
    Matrix L = Matrix::Zero(n_r, n_r);
    Eigen::Index k = n_r;
    for (Eigen::Index i = 0; i < n_r; ++i) {
      for (Eigen::Index j = 0; j <= i; ++j, ++k) {
        L(i, j) = i == j ? std::exp(std::clamp(z[k], -30.0, 30.0)) : z[k];
      }
    }
    P = L * L.transpose();
    const double scale = beta.lpNorm<1>() + P.trace();
    beta /= scale;
    P /= scale;
  };
  auto objective = [&](const Vector& z) {
    Vector beta;
    Matrix P;
    decode(z, beta, P);
    double margin = std::numeric_limits<double>::infinity();
    for (const ComplexMatrix& cols : cache) {
      margin = std::min(margin, hermitian_min_eig(assemble(s, cols, beta, P)));
    }
    return -margin;
  };

  Vector best_z;
  double best_val = std::numeric_limits<double>::infinity();
  const double starts[] = {0.0, 1.0, -1.0, 3.0, -3.0, 5.0, -5.0, 2.0, -2.0};
  const int restarts = std::clamp(opt.restarts, 1, static_cast<int>(std::size(starts)));
  for (int r = 0; r < restarts; ++r) {
    Vector z = Vector::Zero(n_r + n_l);
    z.head(n_r).setConstant(starts[r]);
    z = nelder_mead(objective, z, 0.5, opt.max_evaluations);
    // polish from the found point
    z = nelder_mead(objective, z, 0.05, opt.max_evaluations / 2);
    const double v = objective(z);
    if (v < best_val) {
      best_val = v;
      best_z = z;
    }
  }

  Vector beta;
  Matrix P;
  decode(best_z, beta, P);
  P = 0.5 * (P + P.transpose());
  return check_certificate(plant, rc, beta, P, grid);
}

}  // namespace resetctl
