#include "doctest.h"

#include "eblime/blackbox.hpp"
#include "eblime/errors.hpp"
#include "eblime/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

using namespace eblime;
using namespace eblime::oracle;
using blackbox::Link;
using blackbox::LinearMaskModel;
using linalg::Matrix;
using linalg::Vector;
using perturbation::Distance;
using perturbation::FeatureSpace;
using perturbation::Instance;
using perturbation::KernelConfig;

TEST_CASE("enumeration order and completeness") {
  const Matrix Z = enumerate_masks(3);
  REQUIRE(Z.rows() == 8);
  // Row k holds the bits of k, bit j in column j.
  CHECK(Z.row(0).isZero());
  CHECK(Z.row(1) == (linalg::Vector(3) << 1, 0, 0).finished().transpose());
  CHECK(Z.row(6) == (linalg::Vector(3) << 0, 1, 1).finished().transpose());
  const Matrix Z10 = enumerate_masks(10);
  std::set<long> codes;
  for (Eigen::Index i = 0; i < Z10.rows(); ++i) {
    long code = 0;
    for (int j = 0; j < 10; ++j) code |= static_cast<long>(Z10(i, j)) << j;
    codes.insert(code);
  }
  CHECK(codes.size() == 1024);
  CHECK(enumerate_masks(5, 3, 4) == enumerate_masks(5).middleRows(3, 4));
}

TEST_CASE("enumeration cap") {
  CHECK_THROWS_WITH_AS(enumerate_masks(21, 0, 1), doctest::Contains("capped at p = 20"), InvalidInput);
  const auto space = FeatureSpace::abstract(21);
  blackbox::MeanMaskModel m(21);
  CHECK_THROWS_AS(ground_truth_beta(space, Instance(21, 1.0), m, {1.0, Distance::euclidean}, 1.0), InvalidInput);
}

TEST_CASE("single feature hand computation") {
  // Z = {0, 1}, weights {e^-1, 1}, Y = {0, 1}: beta = 1 / (1 + 1).
  LinearMaskModel f({"id", Vector::Ones(1), 0.0, Link::clipped_linear});
  const auto b = ground_truth_beta(FeatureSpace::abstract(1), Instance{1.0}, f, {1.0, Distance::euclidean}, 1.0);
  REQUIRE(b.size() == 1);
  CHECK(b[0] == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("constant models") {
  const auto space = FeatureSpace::abstract(4);
  const KernelConfig k{0.5, Distance::euclidean};
  LinearMaskModel half({"zero", Vector::Zero(4), 0.0, Link::logistic});
  const auto b = ground_truth_beta(space, Instance(4, 1.0), half, k, 1.0);
  // Solution of (G + I) beta = h with Y = 0.5 everywhere, assembled by hand.
  const Matrix Z = enumerate_masks(4);
  Matrix G = Matrix::Identity(4, 4);
  Vector h = Vector::Zero(4);
  for (Eigen::Index i = 0; i < Z.rows(); ++i) {
    const double w = std::exp(-(4.0 - Z.row(i).sum()) / 0.25);
    G += w * Z.row(i).transpose() * Z.row(i);
    h += w * 0.5 * Z.row(i).transpose();
  }
  CHECK((b - G.partialPivLu().solve(h)).norm() < 1e-12);

  struct Zero final : blackbox::BlackBox {
    Vector predict_batch(std::span<const Instance> x) override { return Vector::Zero(static_cast<Eigen::Index>(x.size())); }
    std::string name() const override { return "zero"; }
    std::size_t input_size() const override { return 4; }
  } f0;
  CHECK(ground_truth_beta(space, Instance(4, 1.0), f0, k, 1.0).isZero(0.0));
}

TEST_CASE("linear model ranking is preserved") {
  std::vector<double> raw{3, 9, 1, 4, 7, 2, 8, 5, 6, 10};
  std::rotate(raw.begin(), raw.begin() + 3, raw.end());
  Vector beta = Eigen::Map<Vector>(raw.data(), 10);
  beta /= beta.sum();
  LinearMaskModel f({"lin", beta, 0.0, Link::clipped_linear});
  const auto b = ground_truth_beta(FeatureSpace::abstract(10), Instance(10, 1.0), f,
                                   KernelConfig::defaults_for(10), 1.0);
  Eigen::Index arg_true = 0, arg_est = 0;
  beta.maxCoeff(&arg_true);
  b.maxCoeff(&arg_est);
  CHECK(arg_true == arg_est);
}

TEST_CASE("enumeration result is invariant to row order") {
  const int p = 6;
  Vector beta = Vector::LinSpaced(p, 1.0, 6.0) / 21.0;
  LinearMaskModel f({"lin", beta, 0.0, Link::clipped_linear});
  const auto space = FeatureSpace::abstract(p);
  const KernelConfig k{0.9, Distance::euclidean};
  const auto exact = ground_truth_beta(space, Instance(p, 1.0), f, k, 0.3);
  // Reverse the enumeration and fit densely.
  Matrix Z = enumerate_masks(p).colwise().reverse();
  const Vector w = perturbation::kernel_weights(Z, k);
  const Vector Y = blackbox::predict_masks(space, Instance(p, 1.0), f, Z);
  Matrix A = Z.transpose() * w.asDiagonal() * Z + 0.3 * Matrix::Identity(p, p);
  const Vector ref = A.partialPivLu().solve(Z.transpose() * w.asDiagonal() * Y);
  CHECK((exact - ref).norm() < 1e-12);
}

TEST_CASE("sampled oracle with enumeration equals the exact oracle") {
  const int p = 7;
  blackbox::MeanMaskModel f(p);
  const auto space = FeatureSpace::abstract(p);
  const KernelConfig k = KernelConfig::defaults_for(p);
  const auto exact = ground_truth_beta(space, Instance(p, 1.0), f, k, 1.0);
  SampledOptions opts;
  opts.enumerate = true;
  const auto same = ground_truth_beta_sampled(space, Instance(p, 1.0), f, k, 1.0, 128, 0, opts);
  CHECK(exact == same);
  CHECK_THROWS_AS(ground_truth_beta_sampled(space, Instance(p, 1.0), f, k, 1.0, 100, 0, opts), InvalidInput);
  CHECK_THROWS_AS(ground_truth_beta_sampled(space, Instance(p, 1.0), f, k, 1.0, 0, 0), InvalidInput);
}

TEST_CASE("sampled oracle is reproducible") {
  blackbox::MeanMaskModel f(6);
  const auto space = FeatureSpace::abstract(6);
  const auto a = ground_truth_beta_sampled(space, Instance(6, 1.0), f, {1.0, Distance::euclidean}, 1.0, 500, 9);
  const auto b = ground_truth_beta_sampled(space, Instance(6, 1.0), f, {1.0, Distance::euclidean}, 1.0, 500, 9);
  CHECK(a == b);
}

TEST_CASE("sampled oracle at 10^4 perturbations stays within its Monte-Carlo error") {
  // The sampled fit at lambda solves (G_N/N + lambda/N) beta = h_N/N, whose
  // large-N limit is the enumeration fit at lambda * 2^p / N. Its spread is
  // the sandwich A^-1 S A^-1 / N with A = E[w z z'] and
  // S = Var(w z (y - z'beta)), both computed exactly over the 2^p masks.
  const int p = 8, N = 10000;
  Vector c(p);
  c << 2, -1, 0, 1.5, -2, 0, 0.5, 1;
  LinearMaskModel f({"logit", c, -0.5 * c.sum(), Link::logistic});
  const auto space = FeatureSpace::abstract(p);
  const Instance x(p, 1.0);
  const KernelConfig k{1.5, Distance::euclidean};
  const double lambda = 1.0;
  const auto exact = ground_truth_beta(space, x, f, k, lambda * 256.0 / N);

  const Matrix Z = enumerate_masks(p);
  const Vector w = perturbation::kernel_weights(Z, k);
  const Vector Y = blackbox::predict_masks(space, x, f, Z);
  const Matrix A = Z.transpose() * w.asDiagonal() * Z / 256.0;
  Vector mean_score = Vector::Zero(p);
  Matrix S = Matrix::Zero(p, p);
  for (Eigen::Index i = 0; i < 256; ++i) {
    const Vector sc = w[i] * Z.row(i).transpose() * (Y[i] - Z.row(i).dot(exact));
    mean_score += sc / 256.0;
    S += sc * sc.transpose() / 256.0;
  }
  S -= mean_score * mean_score.transpose();
  const Matrix Ainv = A.inverse();
  const Vector sd = ((Ainv * S * Ainv).diagonal() / N).cwiseSqrt();

  for (std::uint64_t seed : {1, 2, 3}) {
    const auto sampled = ground_truth_beta_sampled(space, x, f, k, lambda, N, seed);
    const double worst = ((sampled - exact).cwiseQuotient(sd)).cwiseAbs().maxCoeff();
    CAPTURE(seed);
    CHECK(worst < 4.5);
  }
}
