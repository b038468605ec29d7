#include "eblime/baselines.hpp"

#include "eblime/errors.hpp"

#include <cmath>

namespace eblime::baselines {

void BaselineConfig::validate() const {
  if (!(fixed_lambda > 0.0) || !std::isfinite(fixed_lambda)) throw InvalidInput("fixed lambda must be positive");
  if (method == Method::bayeslime) {
    if (!(a > 0.0) || !(b > 0.0)) throw InvalidInput("BayesLIME a and b must be positive");
    if (samples < 2) throw InvalidInput("posterior samples s must be >= 2");
    if (!(ci_level > 0.0 && ci_level < 1.0)) throw InvalidInput("ci level must lie in (0, 1)");
  }
}

nlohmann::json BaselineConfig::to_json() const {
  nlohmann::json j = {{"method", to_string(method)}, {"fixed_lambda", fixed_lambda}};
  if (method == Method::bayeslime) {
    j["a"] = a;
    j["b"] = b;
    j["samples"] = samples;
    j["ci_level"] = ci_level;
  }
  return j;
}

Explanation explain_lime(const linalg::WeightedDesign& design, double fixed_lambda) {
  return explain_lime(linalg::compute_sufficient_stats(design), fixed_lambda);
}

Explanation explain_lime(const linalg::SufficientStats& stats, double fixed_lambda) {
  const auto sol = linalg::solve_ridge(stats, fixed_lambda);
  Explanation e;
  e.method = Method::lime;
  e.beta_mean = sol.beta_hat;
  e.beta_cov = linalg::Matrix::Zero(stats.p, stats.p);
  e.beta_samples.resize(0, stats.p);
  e.config = {{"fixed_lambda", fixed_lambda}};
  return e;
}

Explanation explain_bayeslime(const linalg::WeightedDesign& design, const BaselineConfig& cfg, std::uint64_t seed) {
  return explain_bayeslime(linalg::compute_sufficient_stats(design), cfg, seed);
}

Explanation explain_bayeslime(const linalg::SufficientStats& stats, const BaselineConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  const double lambda = cfg.fixed_lambda;
  const posterior::BetaSampler sampler(linalg::solve_ridge(stats, lambda));
  const double shape = cfg.a + 0.5 * static_cast<double>(stats.N);
  const double scale = 0.5 * linalg::q_lambda(stats, lambda, cfg.b);

  Explanation e;
  e.method = Method::bayeslime;
  e.seed = seed;
  const auto s = static_cast<Eigen::Index>(cfg.samples);
  e.beta_samples.resize(s, stats.p);
  for (Eigen::Index i = 0; i < s; ++i) {
    const auto idx = static_cast<std::uint64_t>(i);
    CounterRng sigma_rng = CounterRng::stream(seed, "sigma2", idx);
    const double sigma2 = cfg.sigma2_override ? *cfg.sigma2_override
                                              : posterior::sample_inverse_gamma(shape, scale, sigma_rng);
    CounterRng beta_rng = CounterRng::stream(seed, "beta", idx);
    e.beta_samples.row(i) = sampler.draw(sigma2, beta_rng).transpose();
  }
  summarize_samples(e, cfg.ci_level);
  e.config = cfg.to_json();
  return e;
}

}  // namespace eblime::baselines
