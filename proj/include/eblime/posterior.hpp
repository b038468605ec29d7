#pragma once

#include "eblime/explanation.hpp"
#include "eblime/linalg.hpp"
#include "eblime/rng.hpp"

#include <cstdint>
#include <vector>

namespace eblime::posterior {

using linalg::Matrix;
using linalg::RidgeSolution;
using linalg::SufficientStats;
using linalg::Vector;

// Hyperparameters of the hierarchy and of the sampler.
//   sigma^2 ~ Inverse-Gamma(a, b), lambda^(-1/2) ~ half-Cauchy(0, 1),
//   lambda discretised on grid_size uniform points of (0, grid_max].
struct PriorConfig {
  double a = 1.0;
  double b = 1.0;
  double grid_max = 1.0;
  int grid_size = 20000;
  int samples = 2500;
  double ci_level = 0.95;

  void validate() const;
  nlohmann::json to_json() const;
};

// Discretised lambda posterior. log_posterior is empty until filled.
struct LambdaGrid {
  std::vector<double> values;
  std::vector<double> log_prior;      // normalised over the grid
  std::vector<double> log_posterior;  // normalised over the grid

  std::size_t size() const { return values.size(); }
  bool filled() const { return !log_posterior.empty(); }
};

// log of the half-Cauchy-induced density  lambda^(-1/2) (1 + lambda)^(-1) / pi.
double lambda_log_prior(double lambda);

// Grid values l * r / L for l = 1..L with the prior renormalised over them.
LambdaGrid make_grid(const PriorConfig& prior);

// Fills log_posterior with
//   g_l = log P'(lambda_l) - 1/2 log|M_l| - (a + N/2) log Q_l
// normalised by logsumexp. Grid points are independent; `threads` only
// splits the work.
LambdaGrid grid_posterior(const SufficientStats& stats, const PriorConfig& prior, unsigned threads = 1);

// Normalises unnormalised log-weights in place.
void normalize_log_weights(std::vector<double>& g);

// sum_l lambda_l exp(log_posterior_l)
double lambda_posterior_mean(const LambdaGrid& grid);

// Gumbel-max draws of grid indices. Draw i uses the counter stream
// ("gumbel", i) of `seed`: l* = argmax_l g_l - log(mu_l), mu_l ~ Exp(1).
// Ties go to the lowest index.
std::vector<std::size_t> gumbel_sample_indices(const LambdaGrid& grid, std::size_t s, std::uint64_t seed,
                                               unsigned threads = 1);
std::vector<double> gumbel_sample_lambda(const LambdaGrid& grid, std::size_t s, std::uint64_t seed,
                                         unsigned threads = 1);

// Inverse-Gamma(shape, scale) draw: scale / Gamma(shape, 1).
double sample_inverse_gamma(double shape, double scale, CounterRng& rng);

// sigma^2 | lambda, Y ~ Inverse-Gamma(a + N/2, Q_lambda / 2)
double sample_sigma2(const SufficientStats& stats, double lambda, const PriorConfig& prior, CounterRng& rng);

// beta | sigma^2, lambda, Y ~ N(beta_hat, V_lambda sigma^2). Factorises V_lambda
// on every call; use BetaSampler when drawing repeatedly at one lambda.
Vector sample_beta(const RidgeSolution& solution, double sigma2, CounterRng& rng);

// Conditional Gaussian at one lambda with the Cholesky factor of V_lambda cached.
class BetaSampler {
 public:
  explicit BetaSampler(RidgeSolution solution);

  Vector draw(double sigma2, CounterRng& rng) const;
  const RidgeSolution& solution() const { return solution_; }

 private:
  RidgeSolution solution_;
  Matrix chol_v_;
};

struct SamplerOptions {
  unsigned threads = 1;
};

// Full posterior sampler: lambda by Gumbel-max over the grid, then sigma^2 and
// beta from their conditionals; moments and equal-tailed intervals from the
// s draws.
Explanation explain_eblime(const linalg::WeightedDesign& design, const PriorConfig& prior, std::uint64_t seed,
                           const SamplerOptions& options = {});

// Same, from precomputed statistics.
Explanation explain_eblime(const SufficientStats& stats, const PriorConfig& prior, std::uint64_t seed,
                           const SamplerOptions& options = {});

// Grid-weighted conditional mean  sum_l P(lambda_l | Y) beta_hat(lambda_l).
Vector grid_averaged_beta_hat(const SufficientStats& stats, const LambdaGrid& grid);

}  // namespace eblime::posterior
