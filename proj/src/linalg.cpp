#include "eblime/linalg.hpp"

#include "eblime/errors.hpp"

#include <cmath>
#include <sstream>

namespace eblime::linalg {

namespace {

void require_lambda(double lambda) {
  if (!(lambda > 0.0) || !std::isfinite(lambda)) {
    std::ostringstream os;
    os << "ridge parameter must be positive and finite, got " << lambda;
    throw InvalidInput(os.str());
  }
}

Matrix shifted_gram(const SufficientStats& stats, double lambda) {
  Matrix A = stats.G;
  A.diagonal().array() += lambda;
  return A;
}

}  // namespace

void validate(const WeightedDesign& design) {
  const auto N = design.Z.rows();
  const auto p = design.Z.cols();
  if (N < 1 || p < 1) throw InvalidInput("design needs N >= 1 and p >= 1");
  if (design.weights.size() != N || design.Y.size() != N) {
    throw InvalidInput("design weights and responses must have one entry per row of Z");
  }
  for (Eigen::Index i = 0; i < N; ++i) {
    for (Eigen::Index j = 0; j < p; ++j) {
      const double z = design.Z(i, j);
      if (!std::isfinite(z)) throw InvalidInput("non-finite entry in Z");
      if (z != 0.0 && z != 1.0) throw InvalidInput("Z entries must be 0 or 1");
    }
    const double w = design.weights[i];
    if (!std::isfinite(w)) throw InvalidInput("non-finite kernel weight");
    if (!(w > 0.0)) throw InvalidInput("kernel weights must be strictly positive");
    if (!std::isfinite(design.Y[i])) throw InvalidInput("non-finite response");
  }
}

void symmetrize(Matrix& A) {
  const Matrix At = A.transpose();
  A = 0.5 * (A + At);
}

SufficientStats compute_sufficient_stats(const WeightedDesign& design) {
  validate(design);
  SufficientStats s;
  s.N = design.Z.rows();
  s.p = design.Z.cols();
  const Matrix WZ = design.weights.asDiagonal() * design.Z;
  s.G = design.Z.transpose() * WZ;
  symmetrize(s.G);
  s.h = WZ.transpose() * design.Y;
  s.y_w = (design.weights.array() * design.Y.array().square()).sum();
  s.sum_log_w = design.weights.array().log().sum();
  return s;
}

CholeskyResult cholesky(const Matrix& A) {
  const auto n = A.rows();
  CholeskyResult r;
  r.L = Matrix::Zero(n, n);
  Matrix& L = r.L;
  for (Eigen::Index j = 0; j < n; ++j) {
    double d = A(j, j);
    for (Eigen::Index k = 0; k < j; ++k) d -= L(j, k) * L(j, k);
    if (!(d > 0.0) || !std::isfinite(d)) {
      r.failed_pivot = j;
      r.failed_value = d;
      return r;
    }
    const double ljj = std::sqrt(d);
    L(j, j) = ljj;
    for (Eigen::Index i = j + 1; i < n; ++i) {
      double v = A(i, j);
      for (Eigen::Index k = 0; k < j; ++k) v -= L(i, k) * L(j, k);
      L(i, j) = v / ljj;
    }
  }
  return r;
}

Matrix cholesky_or_throw(const Matrix& A, const char* what, double lambda) {
  CholeskyResult r = cholesky(A);
  if (!r.ok()) {
    std::ostringstream os;
    os << "Cholesky of " << what << " failed at lambda=" << lambda << ": pivot "
       << *r.failed_pivot << " = " << r.failed_value;
    throw NumericDegeneracy(os.str());
  }
  return std::move(r.L);
}

RidgeSolution solve_ridge(const SufficientStats& stats, double lambda) {
  require_lambda(lambda);
  const Matrix L = cholesky_or_throw(shifted_gram(stats, lambda), "G + lambda*I", lambda);
  const auto tri = L.triangularView<Eigen::Lower>();
  RidgeSolution sol;
  sol.lambda = lambda;
  // V = L^-T L^-1
  Matrix Linv = Matrix::Identity(stats.p, stats.p);
  tri.solveInPlace(Linv);
  sol.V_lambda = Linv.transpose() * Linv;
  symmetrize(sol.V_lambda);
  sol.beta_hat = sol.V_lambda * stats.h;
  return sol;
}

MarginalTerms marginal_terms(const SufficientStats& stats, double lambda, double b) {
  require_lambda(lambda);
  if (!(b >= 0.0)) throw InvalidInput("prior scale b must be non-negative");
  const Matrix L = cholesky_or_throw(shifted_gram(stats, lambda), "lambda*I + G", lambda);

  MarginalTerms t;
  const double logdet_shifted = 2.0 * L.diagonal().array().log().sum();
  t.logdet_m = -stats.sum_log_w - static_cast<double>(stats.p) * std::log(lambda) + logdet_shifted;
  if (!std::isfinite(t.logdet_m)) {
    std::ostringstream os;
    os << "log|M_lambda| is not finite at lambda=" << lambda;
    throw NumericDegeneracy(os.str());
  }

  const Vector u = L.triangularView<Eigen::Lower>().solve(stats.h);
  const double quad = stats.y_w - u.squaredNorm();
  if (!(quad >= 0.0) || !std::isfinite(quad)) {
    std::ostringstream os;
    os << "Y'M^-1 Y is negative (" << quad << ") at lambda=" << lambda;
    throw NumericDegeneracy(os.str());
  }
  t.q = quad + 2.0 * b;
  return t;
}

double m_lambda_logdet(const SufficientStats& stats, double lambda) {
  return marginal_terms(stats, lambda, 0.0).logdet_m;
}

double q_lambda(const SufficientStats& stats, double lambda, double b) {
  return marginal_terms(stats, lambda, b).q;
}

}  // namespace eblime::linalg
