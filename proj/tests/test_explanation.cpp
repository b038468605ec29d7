#include "doctest.h"

#include "eblime/errors.hpp"
#include "eblime/explanation.hpp"

#include <cmath>

using namespace eblime;
using linalg::Matrix;
using linalg::Vector;

TEST_CASE("sample quantile interpolates between order statistics") {
  CHECK(sample_quantile({4, 1, 3, 2}, 0.25) == doctest::Approx(1.75));
  CHECK(sample_quantile({4, 1, 3, 2}, 0.0) == 1.0);
  CHECK(sample_quantile({4, 1, 3, 2}, 1.0) == 4.0);
  CHECK(sample_quantile({7}, 0.3) == 7.0);
  std::vector<double> v(101);
  for (int i = 0; i <= 100; ++i) v[i] = 100 - i;
  CHECK(sample_quantile(v, 0.025) == doctest::Approx(2.5));
  CHECK(sample_quantile(v, 0.975) == doctest::Approx(97.5));
  CHECK_THROWS_AS(sample_quantile({}, 0.5), InvalidInput);
}

TEST_CASE("summaries of a known sample") {
  Explanation e;
  e.beta_samples.resize(4, 2);
  e.beta_samples << 1, 10,  //
      2, 20,                //
      3, 30,                //
      4, 40;
  summarize_samples(e, 0.5);
  CHECK(e.beta_mean[0] == 2.5);
  CHECK(e.beta_mean[1] == 25.0);
  // Unbiased covariance: var(1..4) = 5/3.
  CHECK(e.beta_cov(0, 0) == doctest::Approx(5.0 / 3.0));
  CHECK(e.beta_cov(0, 1) == doctest::Approx(50.0 / 3.0));
  CHECK(e.beta_cov(1, 0) == e.beta_cov(0, 1));
  CHECK((*e.ci_lower)[0] == doctest::Approx(1.75));
  CHECK((*e.ci_upper)[1] == doctest::Approx(32.5));
  CHECK(e.ci_level == 0.5);

  Explanation one;
  one.beta_samples = Matrix::Ones(1, 3);
  CHECK_THROWS_AS(summarize_samples(one, 0.95), InvalidInput);
}

TEST_CASE("method names") {
  for (Method m : {Method::lime, Method::bayeslime, Method::eblime}) CHECK(parse_method(to_string(m)) == m);
  CHECK_THROWS_AS(parse_method("shap"), InvalidInput);
}

TEST_CASE("JSON round trip preserves every field") {
  Explanation e;
  e.method = Method::eblime;
  e.beta_samples = Matrix::Random(5, 3);
  summarize_samples(e, 0.9);
  e.lambda_posterior_mean = 0.123456789012345678;
  e.lambda_samples = {0.1, 0.2, 0.3, 0.4, 0.5};
  e.seed = 18446744073709551557ull;
  e.config = {{"grid_size", 20000}};
  e.warnings = {"something"};

  const auto back = explanation_from_json(nlohmann::json::parse(to_json(e).dump()));
  CHECK(back.method == e.method);
  CHECK(back.seed == e.seed);
  CHECK(back.beta_mean == e.beta_mean);
  CHECK(back.beta_cov == e.beta_cov);
  CHECK(*back.ci_lower == *e.ci_lower);
  CHECK(*back.ci_upper == *e.ci_upper);
  CHECK(back.ci_level == e.ci_level);
  CHECK(*back.lambda_posterior_mean == *e.lambda_posterior_mean);
  CHECK(back.beta_samples == e.beta_samples);
  CHECK(back.lambda_samples == e.lambda_samples);
  CHECK(back.config == e.config);
  CHECK(back.warnings == e.warnings);
}

TEST_CASE("JSON for a point estimate") {
  Explanation e;
  e.beta_mean = Vector::LinSpaced(3, 0, 1);
  e.beta_cov = Matrix::Zero(3, 3);
  const auto j = to_json(e, false);
  CHECK(j["method"] == "lime");
  CHECK(j["ci_lower"].is_null());
  CHECK(j["lambda_posterior_mean"].is_null());
  CHECK_FALSE(j.contains("beta_samples"));
  const auto back = explanation_from_json(j);
  CHECK_FALSE(back.has_intervals());
  CHECK(back.beta_samples.rows() == 0);
}

TEST_CASE("JSON rejects foreign or malformed documents") {
  Explanation e;
  e.beta_mean = Vector::Ones(2);
  e.beta_cov = Matrix::Identity(2, 2);
  auto j = to_json(e);
  auto wrong = j;
  wrong["schema"] = "other/1";
  CHECK_THROWS_AS(explanation_from_json(wrong), InvalidInput);
  auto ragged = j;
  ragged["beta_cov"] = {{1.0, 0.0}, {0.0}};
  CHECK_THROWS_AS(explanation_from_json(ragged), InvalidInput);
}
