#pragma once

#include "eblime/blackbox.hpp"
#include "eblime/linalg.hpp"
#include "eblime/perturbation.hpp"

#include <cstdint>
#include <span>

namespace eblime::oracle {

inline constexpr int kMaxEnumerationFeatures = 20;

// All 2^p masks, row k holding the bits of k (bit j = feature j).
linalg::Matrix enumerate_masks(int p, std::uint64_t first = 0, std::uint64_t count = 0);

// Weighted ridge fit over the complete enumeration. Masks are generated,
// weighted and predicted in fixed-size blocks that are reduced in order.
linalg::Vector ground_truth_beta(const perturbation::FeatureSpace& space, std::span<const double> original,
                                 blackbox::BlackBox& model, const perturbation::KernelConfig& kernel,
                                 double fixed_lambda);

struct SampledOptions {
  // Use the full enumeration instead of random masks (requires N == 2^p).
  bool enumerate = false;
  bool include_z0 = true;
};

// LIME on N random perturbations: the large-N stand-in for the exact oracle.
linalg::Vector ground_truth_beta_sampled(const perturbation::FeatureSpace& space, std::span<const double> original,
                                         blackbox::BlackBox& model, const perturbation::KernelConfig& kernel,
                                         double fixed_lambda, int N, std::uint64_t seed,
                                         const SampledOptions& options = {});

}  // namespace eblime::oracle
