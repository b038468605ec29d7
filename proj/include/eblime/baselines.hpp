#pragma once

#include "eblime/explanation.hpp"
#include "eblime/linalg.hpp"
#include "eblime/posterior.hpp"

#include <cstdint>
#include <optional>

namespace eblime::baselines {

// LIME and BayesLIME share the weighted ridge core; they differ from EBLIME
// only in holding lambda fixed (and, for BayesLIME, in the vague sigma^2 prior).
struct BaselineConfig {
  Method method = Method::bayeslime;
  double fixed_lambda = 1.0;
  double a = 1e-6;
  double b = 1e-6;
  int samples = 2500;
  double ci_level = 0.95;
  // Test hook: replaces every sigma^2 draw.
  std::optional<double> sigma2_override;

  void validate() const;
  nlohmann::json to_json() const;
};

Explanation explain_lime(const linalg::WeightedDesign& design, double fixed_lambda);
Explanation explain_lime(const linalg::SufficientStats& stats, double fixed_lambda);

// sigma^2_i ~ IG(a + N/2, Q_lambda / 2), beta_i ~ N(beta_hat, V_lambda sigma^2_i)
// at the single fixed lambda. Draw i uses streams ("sigma2", i) and ("beta", i).
Explanation explain_bayeslime(const linalg::WeightedDesign& design, const BaselineConfig& cfg, std::uint64_t seed);
Explanation explain_bayeslime(const linalg::SufficientStats& stats, const BaselineConfig& cfg, std::uint64_t seed);

}  // namespace eblime::baselines
