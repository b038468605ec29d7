#pragma once

#include "eblime/linalg.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace eblime::perturbation {

using linalg::Matrix;
using linalg::Vector;

// A flattened, row-major (H, W, C) tensor, or a plain mask for abstract spaces.
using Instance = std::vector<double>;

enum class Distance { euclidean, cosine };

Distance parse_distance(const std::string& name);
std::string to_string(Distance d);

struct KernelConfig {
  double theta = 1.0;
  Distance distance = Distance::euclidean;

  // theta = sqrt(p) / 4, euclidean.
  static KernelConfig defaults_for(int p);
  void validate() const;
};

struct Image {
  int height = 0;
  int width = 0;
  int channels = 1;
  std::vector<double> pixels;  // row-major HWC

  std::size_t size() const { return pixels.size(); }
};

// Interpretable feature space over an input. Abstract spaces treat the mask
// itself as the instance; segmented images map mask bit j to the pixels whose
// label is j.
struct FeatureSpace {
  enum class Kind { abstract_mask, segmented_image };

  Kind kind = Kind::abstract_mask;
  int p = 0;
  int height = 0;
  int width = 0;
  int channels = 1;
  std::vector<int> labels;  // H*W, values in [0, p)
  double fill = 0.0;

  static FeatureSpace abstract(int p);
  static FeatureSpace segmented(int height, int width, int channels, std::vector<int> labels,
                                double fill = 0.0);

  std::size_t instance_size() const;
  void validate() const;
};

struct PerturbationSet {
  Matrix Z;
  Vector weights;
  Vector Y;
  std::uint64_t seed = 0;
  bool includes_z0 = true;

  linalg::WeightedDesign design() const { return {Z, weights, Y}; }
};

// N x p i.i.d. Bernoulli(1/2) masks. Row i comes from the counter stream
// ("masks", i) of `seed`; row 0 is forced to all-ones when include_z0 is set.
Matrix generate_masks(int p, int N, std::uint64_t seed, bool include_z0);

// Squared distance between a binary mask and the all-ones reference Z0.
double squared_distance_to_ones(std::span<const double> mask, Distance d);

// pi_i = exp(-D^2(Z_i, 1) / theta^2)
Vector kernel_weights(const Matrix& Z, const KernelConfig& cfg);

Instance apply_mask(const FeatureSpace& space, std::span<const double> original,
                    std::span<const double> mask);

// rows x cols rectangular blocks, row-major labels. The first (H % rows)
// block-rows are one pixel taller, likewise for columns.
std::vector<int> grid_segment(int height, int width, int rows, int cols);

// Writes one CSV line per image row.
std::string segment_map_csv(const std::vector<int>& labels, int height, int width);

// PGM (P5) and PNG, 8-bit grayscale. Intensities are scaled to [0, 1].
Image read_image(const std::string& path);
Image read_pgm(const std::string& path);
Image read_png(const std::string& path);
void write_pgm(const std::string& path, const Image& image);

}  // namespace eblime::perturbation
