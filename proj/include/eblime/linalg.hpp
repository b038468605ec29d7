#pragma once

#include <Eigen/Dense>

#include <optional>

namespace eblime::linalg {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Binary design Z (N x p), locality weights pi_x(Z_i) and responses Y.
struct WeightedDesign {
  Matrix Z;
  Vector weights;
  Vector Y;

  Eigen::Index rows() const { return Z.rows(); }
  Eigen::Index features() const { return Z.cols(); }
};

// Throws InvalidInput unless N, p >= 1, Z is 0/1, weights are finite and
// strictly positive and every entry is finite.
void validate(const WeightedDesign& design);

// Everything the posterior needs from a design, reduced once:
//   G = Z'WZ, h = Z'WY, y_w = Y'WY, sum_log_w = sum log pi_i.
struct SufficientStats {
  Matrix G;
  Vector h;
  double y_w = 0.0;
  double sum_log_w = 0.0;
  Eigen::Index N = 0;
  Eigen::Index p = 0;
};

SufficientStats compute_sufficient_stats(const WeightedDesign& design);

// Weighted ridge solution at one lambda. V_lambda = (G + lambda I)^-1.
struct RidgeSolution {
  Vector beta_hat;
  Matrix V_lambda;
  double lambda = 0.0;
};

RidgeSolution solve_ridge(const SufficientStats& stats, double lambda);

// Lower Cholesky factor of a symmetric positive definite matrix. Returns the
// index of the first non-positive pivot on failure.
struct CholeskyResult {
  Matrix L;
  std::optional<Eigen::Index> failed_pivot;
  double failed_value = 0.0;

  bool ok() const { return !failed_pivot.has_value(); }
};

CholeskyResult cholesky(const Matrix& A);

// Throwing wrapper; `what` names the matrix in the error message.
Matrix cholesky_or_throw(const Matrix& A, const char* what, double lambda);

// log|M_lambda| for M_lambda = diag^-1(pi) + Z Z' / lambda, via the
// determinant lemma:  -sum log pi - p log lambda + log|lambda I + G|.
double m_lambda_logdet(const SufficientStats& stats, double lambda);

// Q_lambda = Y' M_lambda^-1 Y + 2b, with the quadratic form taken through
// Woodbury:  y_w - h' (lambda I + G)^-1 h.
double q_lambda(const SufficientStats& stats, double lambda, double b);

// Both marginal quantities from a single factorization of (lambda I + G).
struct MarginalTerms {
  double logdet_m = 0.0;
  double q = 0.0;
};

MarginalTerms marginal_terms(const SufficientStats& stats, double lambda, double b);

// In-place (A + A') / 2.
void symmetrize(Matrix& A);

}  // namespace eblime::linalg
