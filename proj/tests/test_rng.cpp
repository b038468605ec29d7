#include "doctest.h"

#include "eblime/rng.hpp"

#include <boost/math/special_functions/gamma.hpp>

#include <algorithm>
#include <cmath>
#include <vector>

using eblime::CounterRng;

namespace {

// Two-sided KS statistic of `x` against `cdf`.
template <typename Cdf>
double ks_statistic(std::vector<double> x, Cdf cdf) {
  std::sort(x.begin(), x.end());
  const double n = static_cast<double>(x.size());
  double d = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double f = cdf(x[i]);
    d = std::max({d, f - static_cast<double>(i) / n, static_cast<double>(i + 1) / n - f});
  }
  return d;
}

}  // namespace

TEST_CASE("counter streams are pure functions of key and position") {
  CounterRng a = CounterRng::stream(42, "beta", 3);
  CounterRng b = CounterRng::stream(42, "beta", 3);
  for (int i = 0; i < 100; ++i) CHECK(a() == b());

  CounterRng c = CounterRng::stream(42, "beta", 3);
  for (std::uint64_t n = 0; n < 50; ++n) CHECK(c.uniform() == CounterRng::stream(42, "beta", 3).uniform_at(n));
}

TEST_CASE("streams differ by seed, tag and index") {
  const auto first = [](std::uint64_t s, const char* t, std::uint64_t i) { return CounterRng::stream(s, t, i)(); };
  CHECK(first(1, "beta", 0) != first(2, "beta", 0));
  CHECK(first(1, "beta", 0) != first(1, "sigma2", 0));
  CHECK(first(1, "beta", 0) != first(1, "beta", 1));
}

TEST_CASE("uniforms stay strictly inside (0, 1)") {
  CounterRng r(7);
  double lo = 1.0, hi = 0.0, sum = 0.0;
  for (int i = 0; i < 200000; ++i) {
    const double u = r.uniform();
    lo = std::min(lo, u);
    hi = std::max(hi, u);
    sum += u;
  }
  CHECK(lo > 0.0);
  CHECK(hi < 1.0);
  // sd of the mean is sqrt(1/12/2e5) ~ 6.5e-4
  CHECK(std::abs(sum / 200000 - 0.5) < 4 * 6.5e-4);
}

TEST_CASE("normal draws have unit moments and a normal CDF") {
  CounterRng r(11);
  std::vector<double> x(100000);
  for (auto& v : x) v = r.normal();
  double m = 0.0, m2 = 0.0;
  for (double v : x) {
    m += v;
    m2 += v * v;
  }
  m /= x.size();
  m2 /= x.size();
  CHECK(std::abs(m) < 4.0 / std::sqrt(1e5));
  CHECK(std::abs(m2 - 1.0) < 4.0 * std::sqrt(2.0 / 1e5));
  CHECK(ks_statistic(x, [](double v) { return 0.5 * std::erfc(-v / std::sqrt(2.0)); }) < 0.01);
}

TEST_CASE("gamma draws match the gamma CDF") {
  for (double shape : {0.3, 1.0, 2.5, 101.0}) {
    CAPTURE(shape);
    CounterRng r(static_cast<std::uint64_t>(shape * 1000));
    std::vector<double> x(100000);
    for (auto& v : x) v = r.gamma(shape);
    CHECK(*std::min_element(x.begin(), x.end()) > 0.0);
    CHECK(ks_statistic(x, [&](double v) { return boost::math::gamma_p(shape, v); }) < 0.01);
  }
}

TEST_CASE("exponential draws have unit mean") {
  CounterRng r(5);
  double s = 0.0;
  for (int i = 0; i < 100000; ++i) s += r.exponential();
  CHECK(std::abs(s / 1e5 - 1.0) < 4.0 / std::sqrt(1e5));
}
