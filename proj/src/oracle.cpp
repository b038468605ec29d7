#include "eblime/oracle.hpp"

#include "eblime/errors.hpp"

#include <algorithm>
#include <functional>

namespace eblime::oracle {

namespace {

constexpr std::uint64_t kBlock = 4096;

// Z'WZ, Z'WY, Y'WY accumulated block by block in row order.
struct Accumulator {
  explicit Accumulator(int p) {
    stats.p = p;
    stats.G = linalg::Matrix::Zero(p, p);
    stats.h = linalg::Vector::Zero(p);
  }

  void add(const linalg::Matrix& Z, const linalg::Vector& w, const linalg::Vector& Y) {
    const linalg::Matrix WZ = w.asDiagonal() * Z;
    stats.G.noalias() += Z.transpose() * WZ;
    stats.h.noalias() += WZ.transpose() * Y;
    stats.y_w += (w.array() * Y.array().square()).sum();
    stats.sum_log_w += w.array().log().sum();
    stats.N += Z.rows();
  }

  linalg::SufficientStats finish() {
    linalg::symmetrize(stats.G);
    return std::move(stats);
  }

  linalg::SufficientStats stats;
};

using BlockSource = std::function<linalg::Matrix(std::uint64_t first, std::uint64_t count)>;

linalg::Vector fit_blocks(const perturbation::FeatureSpace& space, std::span<const double> original,
                          blackbox::BlackBox& model, const perturbation::KernelConfig& kernel, double fixed_lambda,
                          std::uint64_t total, const BlockSource& source) {
  Accumulator acc(space.p);
  for (std::uint64_t first = 0; first < total; first += kBlock) {
    const std::uint64_t count = std::min(kBlock, total - first);
    const linalg::Matrix Z = source(first, count);
    const linalg::Vector w = perturbation::kernel_weights(Z, kernel);
    const linalg::Vector Y = blackbox::predict_masks(space, original, model, Z);
    acc.add(Z, w, Y);
  }
  return linalg::solve_ridge(acc.finish(), fixed_lambda).beta_hat;
}

void require_enumerable(int p) {
  if (p < 1) throw InvalidInput("feature count must be >= 1");
  if (p > kMaxEnumerationFeatures) {
    throw InvalidInput("exhaustive enumeration is capped at p = " + std::to_string(kMaxEnumerationFeatures) +
                       " (2^20 predictions); got p = " + std::to_string(p));
  }
}

}  // namespace

linalg::Matrix enumerate_masks(int p, std::uint64_t first, std::uint64_t count) {
  require_enumerable(p);
  const std::uint64_t total = std::uint64_t{1} << p;
  if (count == 0) count = total - std::min(first, total);
  if (first + count > total) throw InvalidInput("mask range exceeds 2^p");
  linalg::Matrix Z(static_cast<Eigen::Index>(count), p);
  for (std::uint64_t r = 0; r < count; ++r) {
    const std::uint64_t k = first + r;
    for (int j = 0; j < p; ++j) Z(static_cast<Eigen::Index>(r), j) = static_cast<double>((k >> j) & 1U);
  }
  return Z;
}

linalg::Vector ground_truth_beta(const perturbation::FeatureSpace& space, std::span<const double> original,
                                 blackbox::BlackBox& model, const perturbation::KernelConfig& kernel,
                                 double fixed_lambda) {
  require_enumerable(space.p);
  const int p = space.p;
  return fit_blocks(space, original, model, kernel, fixed_lambda, std::uint64_t{1} << p,
                    [p](std::uint64_t first, std::uint64_t count) { return enumerate_masks(p, first, count); });
}

linalg::Vector ground_truth_beta_sampled(const perturbation::FeatureSpace& space, std::span<const double> original,
                                         blackbox::BlackBox& model, const perturbation::KernelConfig& kernel,
                                         double fixed_lambda, int N, std::uint64_t seed,
                                         const SampledOptions& options) {
  if (N < 1) throw InvalidInput("sampled oracle needs N >= 1");
  const int p = space.p;
  if (options.enumerate) {
    require_enumerable(p);
    if (static_cast<std::uint64_t>(N) != (std::uint64_t{1} << p)) {
      throw InvalidInput("enumerating oracle needs N = 2^p");
    }
    return fit_blocks(space, original, model, kernel, fixed_lambda, static_cast<std::uint64_t>(N),
                      [p](std::uint64_t first, std::uint64_t count) { return enumerate_masks(p, first, count); });
  }
  const linalg::Matrix all = perturbation::generate_masks(p, N, seed, options.include_z0);
  return fit_blocks(space, original, model, kernel, fixed_lambda, static_cast<std::uint64_t>(N),
                    [&all](std::uint64_t first, std::uint64_t count) {
                      return linalg::Matrix(all.middleRows(static_cast<Eigen::Index>(first),
                                                            static_cast<Eigen::Index>(count)));
                    });
}

}  // namespace eblime::oracle
