#include "eblime/posterior.hpp"

#include "eblime/errors.hpp"
#include "eblime/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <sstream>

namespace eblime::posterior {

void PriorConfig::validate() const {
  if (!(a > 0.0) || !(b > 0.0)) throw InvalidInput("prior a and b must be positive");
  if (!(grid_max > 0.0) || !std::isfinite(grid_max)) throw InvalidInput("grid max r must be positive");
  if (grid_size < 1) throw InvalidInput("grid size L must be >= 1");
  if (samples < 2) throw InvalidInput("posterior samples s must be >= 2");
  if (!(ci_level > 0.0 && ci_level < 1.0)) throw InvalidInput("ci level must lie in (0, 1)");
}

nlohmann::json PriorConfig::to_json() const {
  return {{"a", a},           {"b", b},           {"grid_max", grid_max},
          {"grid_size", grid_size}, {"samples", samples}, {"ci_level", ci_level}};
}

double lambda_log_prior(double lambda) {
  if (!(lambda > 0.0)) throw InvalidInput("lambda prior is defined for lambda > 0 only");
  return -0.5 * std::log(lambda) - std::log1p(lambda) - std::log(std::numbers::pi);
}

void normalize_log_weights(std::vector<double>& g) {
  if (g.empty()) return;
  const double m = *std::max_element(g.begin(), g.end());
  if (!std::isfinite(m)) throw NumericDegeneracy("log-weights have no finite maximum");
  double sum = 0.0;
  for (double v : g) sum += std::exp(v - m);
  const double lse = m + std::log(sum);
  for (double& v : g) v -= lse;
}

LambdaGrid make_grid(const PriorConfig& prior) {
  prior.validate();
  const auto L = static_cast<std::size_t>(prior.grid_size);
  LambdaGrid grid;
  grid.values.resize(L);
  grid.log_prior.resize(L);
  for (std::size_t l = 0; l < L; ++l) {
    grid.values[l] = static_cast<double>(l + 1) * prior.grid_max / static_cast<double>(L);
    grid.log_prior[l] = lambda_log_prior(grid.values[l]);
  }
  normalize_log_weights(grid.log_prior);
  return grid;
}

LambdaGrid grid_posterior(const SufficientStats& stats, const PriorConfig& prior, unsigned threads) {
  LambdaGrid grid = make_grid(prior);
  const double shape = prior.a + 0.5 * static_cast<double>(stats.N);
  std::vector<double> g(grid.size());
  parallel_for(grid.size(), threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t l = begin; l < end; ++l) {
      try {
        const auto t = linalg::marginal_terms(stats, grid.values[l], prior.b);
        g[l] = grid.log_prior[l] - 0.5 * t.logdet_m - shape * std::log(t.q);
      } catch (const NumericDegeneracy& e) {
        std::ostringstream os;
        os << "grid point " << l + 1 << " (lambda=" << grid.values[l] << "): " << e.what();
        throw NumericDegeneracy(os.str());
      }
    }
  });
  normalize_log_weights(g);
  grid.log_posterior = std::move(g);
  return grid;
}

double lambda_posterior_mean(const LambdaGrid& grid) {
  if (!grid.filled()) throw StateError("lambda grid posterior has not been computed");
  double mean = 0.0;
  for (std::size_t l = 0; l < grid.size(); ++l) mean += grid.values[l] * std::exp(grid.log_posterior[l]);
  return mean;
}

std::vector<std::size_t> gumbel_sample_indices(const LambdaGrid& grid, std::size_t s, std::uint64_t seed,
                                               unsigned threads) {
  if (!grid.filled()) throw StateError("lambda grid posterior has not been computed");
  const auto& g = grid.log_posterior;
  const std::size_t L = g.size();

  // Visit grid points by decreasing weight so the running maximum rises fast.
  // Point l draws mu_l = -log(u_l) with u_l the l-th uniform of the draw's
  // stream, independent of visiting order. Its score g_l - log(mu_l) can only
  // exceed the running best T when mu_l < exp(g_l - T); since mu_l >= 1 - u_l,
  // points with (1 - u_l) above that bound are skipped without evaluating
  // either logarithm. The winner is the same as the plain arg max over l.
  std::vector<std::size_t> order(L);
  for (std::size_t l = 0; l < L; ++l) order[l] = l;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return g[x] > g[y]; });
  std::vector<double> mass(L);
  for (std::size_t l = 0; l < L; ++l) mass[l] = std::exp(g[l]);
  constexpr double kSafety = 1.0 + 1e-9;

  std::vector<std::size_t> out(s);
  parallel_for(s, threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const CounterRng rng = CounterRng::stream(seed, "gumbel", i);
      std::size_t best = L;
      double best_score = -std::numeric_limits<double>::infinity();
      double bound = std::numeric_limits<double>::infinity();  // exp(-best_score)
      for (std::size_t l : order) {
        const double u = rng.uniform_at(l);
        if ((1.0 - u) >= mass[l] * bound * kSafety) continue;
        const double mu = -std::log(u);
        const double score = g[l] - std::log(mu);
        if (score > best_score || (score == best_score && l < best)) {
          best_score = score;
          best = l;
          bound = std::exp(-best_score);
        }
      }
      out[i] = best;
    }
  });
  return out;
}

std::vector<double> gumbel_sample_lambda(const LambdaGrid& grid, std::size_t s, std::uint64_t seed,
                                         unsigned threads) {
  const auto idx = gumbel_sample_indices(grid, s, seed, threads);
  std::vector<double> out(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) out[i] = grid.values[idx[i]];
  return out;
}

double sample_inverse_gamma(double shape, double scale, CounterRng& rng) {
  return scale / rng.gamma(shape);
}

double sample_sigma2(const SufficientStats& stats, double lambda, const PriorConfig& prior, CounterRng& rng) {
  const double q = linalg::q_lambda(stats, lambda, prior.b);
  return sample_inverse_gamma(prior.a + 0.5 * static_cast<double>(stats.N), 0.5 * q, rng);
}

BetaSampler::BetaSampler(RidgeSolution solution)
    : solution_(std::move(solution)),
      chol_v_(linalg::cholesky_or_throw(solution_.V_lambda, "V_lambda", solution_.lambda)) {}

Vector BetaSampler::draw(double sigma2, CounterRng& rng) const {
  if (!(sigma2 > 0.0)) throw InvalidInput("sigma^2 must be positive");
  Vector z(solution_.beta_hat.size());
  for (Eigen::Index j = 0; j < z.size(); ++j) z[j] = rng.normal();
  return solution_.beta_hat + std::sqrt(sigma2) * (chol_v_ * z);
}

Vector sample_beta(const RidgeSolution& solution, double sigma2, CounterRng& rng) {
  return BetaSampler(solution).draw(sigma2, rng);
}

Vector grid_averaged_beta_hat(const SufficientStats& stats, const LambdaGrid& grid) {
  if (!grid.filled()) throw StateError("lambda grid posterior has not been computed");
  Vector acc = Vector::Zero(stats.p);
  for (std::size_t l = 0; l < grid.size(); ++l) {
    const double w = std::exp(grid.log_posterior[l]);
    if (w == 0.0) continue;
    acc += w * linalg::solve_ridge(stats, grid.values[l]).beta_hat;
  }
  return acc;
}

Explanation explain_eblime(const linalg::WeightedDesign& design, const PriorConfig& prior, std::uint64_t seed,
                           const SamplerOptions& options) {
  return explain_eblime(linalg::compute_sufficient_stats(design), prior, seed, options);
}

Explanation explain_eblime(const SufficientStats& stats, const PriorConfig& prior, std::uint64_t seed,
                           const SamplerOptions& options) {
  prior.validate();
  const LambdaGrid grid = grid_posterior(stats, prior, options.threads);
  const auto s = static_cast<std::size_t>(prior.samples);
  const auto draws = gumbel_sample_indices(grid, s, seed, options.threads);

  // One conditional per distinct grid point drawn.
  std::map<std::size_t, BetaSampler> samplers;
  std::map<std::size_t, double> q_by_index;
  for (std::size_t l : draws) {
    if (samplers.count(l)) continue;
    const double lambda = grid.values[l];
    samplers.emplace(l, BetaSampler(linalg::solve_ridge(stats, lambda)));
    q_by_index.emplace(l, linalg::q_lambda(stats, lambda, prior.b));
  }

  Explanation e;
  e.method = Method::eblime;
  e.seed = seed;
  e.beta_samples.resize(static_cast<Eigen::Index>(s), stats.p);
  e.lambda_samples.resize(s);
  const double shape = prior.a + 0.5 * static_cast<double>(stats.N);
  parallel_for(s, options.threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const std::size_t l = draws[i];
      CounterRng sigma_rng = CounterRng::stream(seed, "sigma2", i);
      const double sigma2 = sample_inverse_gamma(shape, 0.5 * q_by_index.at(l), sigma_rng);
      CounterRng beta_rng = CounterRng::stream(seed, "beta", i);
      e.beta_samples.row(static_cast<Eigen::Index>(i)) = samplers.at(l).draw(sigma2, beta_rng).transpose();
      e.lambda_samples[i] = grid.values[l];
    }
  });
  summarize_samples(e, prior.ci_level);
  e.lambda_posterior_mean = lambda_posterior_mean(grid);

  const double boundary_mass = std::exp(grid.log_posterior.back());
  if (grid.size() > 1 && boundary_mass > 1e-3) {
    std::ostringstream os;
    os << "posterior mass " << boundary_mass << " at the grid upper bound lambda=" << grid.values.back()
       << "; consider a larger --grid-max";
    e.warnings.push_back(os.str());
  }
  e.config = {{"prior", prior.to_json()}};
  return e;
}

}  // namespace eblime::posterior
