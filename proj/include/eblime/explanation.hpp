#pragma once

#include "eblime/linalg.hpp"

#include "json.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace eblime {

enum class Method { lime, bayeslime, eblime };

Method parse_method(const std::string& name);
std::string to_string(Method m);

inline constexpr const char* kExplanationSchema = "eblime-explanation/1";

// Result of one explanation run. LIME fills only beta_mean; the Bayesian
// methods also carry posterior samples, moments and equal-tailed intervals.
struct Explanation {
  Method method = Method::lime;
  linalg::Matrix beta_samples;  // s x p
  linalg::Vector beta_mean;
  linalg::Matrix beta_cov;
  std::optional<linalg::Vector> ci_lower;
  std::optional<linalg::Vector> ci_upper;
  double ci_level = 0.95;
  std::optional<double> lambda_posterior_mean;
  std::vector<double> lambda_samples;
  std::uint64_t seed = 0;
  nlohmann::json config = nlohmann::json::object();
  std::vector<std::string> warnings;

  Eigen::Index features() const { return beta_mean.size(); }
  bool has_intervals() const { return ci_lower.has_value() && ci_upper.has_value(); }
};

// Linear-interpolation sample quantile (order statistics at (n-1) q).
double sample_quantile(std::vector<double> values, double q);

// Fills beta_mean, beta_cov (unbiased) and equal-tailed ci_level intervals
// from beta_samples.
void summarize_samples(Explanation& e, double ci_level);

nlohmann::json to_json(const Explanation& e, bool include_samples = true);
Explanation explanation_from_json(const nlohmann::json& j);

}  // namespace eblime
