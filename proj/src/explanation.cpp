#include "eblime/explanation.hpp"

#include "eblime/errors.hpp"

#include <algorithm>
#include <cmath>

namespace eblime {

using nlohmann::json;

Method parse_method(const std::string& name) {
  if (name == "lime") return Method::lime;
  if (name == "bayeslime") return Method::bayeslime;
  if (name == "eblime") return Method::eblime;
  throw InvalidInput("unknown method '" + name + "' (expected lime, bayeslime or eblime)");
}

std::string to_string(Method m) {
  switch (m) {
    case Method::lime:
      return "lime";
    case Method::bayeslime:
      return "bayeslime";
    case Method::eblime:
      return "eblime";
  }
  return "?";
}

double sample_quantile(std::vector<double> values, double q) {
  if (values.empty()) throw InvalidInput("quantile of an empty sample");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

void summarize_samples(Explanation& e, double ci_level) {
  const auto s = e.beta_samples.rows();
  const auto p = e.beta_samples.cols();
  if (s < 2) throw InvalidInput("need at least two posterior samples");
  e.ci_level = ci_level;
  e.beta_mean = e.beta_samples.colwise().mean().transpose();
  const linalg::Matrix centred = e.beta_samples.rowwise() - e.beta_mean.transpose();
  e.beta_cov = (centred.transpose() * centred) / static_cast<double>(s - 1);
  linalg::symmetrize(e.beta_cov);

  const double tail = 0.5 * (1.0 - ci_level);
  linalg::Vector lo(p), hi(p);
  std::vector<double> column(static_cast<std::size_t>(s));
  for (Eigen::Index j = 0; j < p; ++j) {
    for (Eigen::Index i = 0; i < s; ++i) column[static_cast<std::size_t>(i)] = e.beta_samples(i, j);
    lo[j] = sample_quantile(column, tail);
    hi[j] = sample_quantile(column, 1.0 - tail);
  }
  e.ci_lower = std::move(lo);
  e.ci_upper = std::move(hi);
}

namespace {

json vec_json(const linalg::Vector& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }

json mat_json(const linalg::Matrix& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    std::vector<double> r(static_cast<std::size_t>(m.cols()));
    for (Eigen::Index j = 0; j < m.cols(); ++j) r[static_cast<std::size_t>(j)] = m(i, j);
    rows.push_back(std::move(r));
  }
  return rows;
}

linalg::Vector json_vec(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const linalg::Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

linalg::Matrix json_mat(const json& j, Eigen::Index cols) {
  linalg::Matrix m(static_cast<Eigen::Index>(j.size()), cols);
  for (std::size_t i = 0; i < j.size(); ++i) {
    const auto r = j[i].get<std::vector<double>>();
    if (static_cast<Eigen::Index>(r.size()) != cols) throw InvalidInput("ragged matrix in explanation JSON");
    for (Eigen::Index c = 0; c < cols; ++c) m(static_cast<Eigen::Index>(i), c) = r[static_cast<std::size_t>(c)];
  }
  return m;
}

}  // namespace

json to_json(const Explanation& e, bool include_samples) {
  json j;
  j["schema"] = kExplanationSchema;
  j["method"] = to_string(e.method);
  j["seed"] = e.seed;
  j["features"] = e.features();
  j["num_samples"] = e.beta_samples.rows();
  j["beta_mean"] = vec_json(e.beta_mean);
  j["beta_cov"] = mat_json(e.beta_cov);
  j["ci_level"] = e.has_intervals() ? json(e.ci_level) : json(nullptr);
  j["ci_lower"] = e.ci_lower ? vec_json(*e.ci_lower) : json(nullptr);
  j["ci_upper"] = e.ci_upper ? vec_json(*e.ci_upper) : json(nullptr);
  j["lambda_posterior_mean"] = e.lambda_posterior_mean ? json(*e.lambda_posterior_mean) : json(nullptr);
  if (include_samples) {
    j["beta_samples"] = mat_json(e.beta_samples);
    j["lambda_samples"] = e.lambda_samples;
  }
  j["config"] = e.config;
  j["warnings"] = e.warnings;
  return j;
}

Explanation explanation_from_json(const json& j) {
  if (j.value("schema", std::string()) != kExplanationSchema) {
    throw InvalidInput("not an eblime explanation document (schema mismatch)");
  }
  Explanation e;
  e.method = parse_method(j.at("method").get<std::string>());
  e.seed = j.at("seed").get<std::uint64_t>();
  e.beta_mean = json_vec(j.at("beta_mean"));
  const auto p = e.beta_mean.size();
  e.beta_cov = json_mat(j.at("beta_cov"), p);
  if (!j.at("ci_lower").is_null()) e.ci_lower = json_vec(j["ci_lower"]);
  if (!j.at("ci_upper").is_null()) e.ci_upper = json_vec(j["ci_upper"]);
  if (!j.at("ci_level").is_null()) e.ci_level = j["ci_level"].get<double>();
  if (!j.at("lambda_posterior_mean").is_null()) e.lambda_posterior_mean = j["lambda_posterior_mean"].get<double>();
  if (j.contains("beta_samples")) e.beta_samples = json_mat(j["beta_samples"], p);
  if (j.contains("lambda_samples")) e.lambda_samples = j["lambda_samples"].get<std::vector<double>>();
  e.config = j.value("config", json::object());
  e.warnings = j.value("warnings", std::vector<std::string>{});
  return e;
}

}  // namespace eblime
