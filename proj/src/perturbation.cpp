#include "eblime/perturbation.hpp"

#include "eblime/errors.hpp"
#include "eblime/rng.hpp"

#include <cmath>
#include <sstream>

namespace eblime::perturbation {

Distance parse_distance(const std::string& name) {
  if (name == "euclidean") return Distance::euclidean;
  if (name == "cosine") return Distance::cosine;
  throw InvalidInput("unknown distance '" + name + "' (expected euclidean or cosine)");
}

std::string to_string(Distance d) { return d == Distance::euclidean ? "euclidean" : "cosine"; }

KernelConfig KernelConfig::defaults_for(int p) {
  return KernelConfig{std::sqrt(static_cast<double>(p)) / 4.0, Distance::euclidean};
}

void KernelConfig::validate() const {
  if (!(theta > 0.0) || !std::isfinite(theta)) {
    throw InvalidInput("kernel width theta must be positive and finite");
  }
}

FeatureSpace FeatureSpace::abstract(int p) {
  FeatureSpace s;
  s.kind = Kind::abstract_mask;
  s.p = p;
  s.validate();
  return s;
}

FeatureSpace FeatureSpace::segmented(int height, int width, int channels,
                                     std::vector<int> labels, double fill) {
  FeatureSpace s;
  s.kind = Kind::segmented_image;
  s.height = height;
  s.width = width;
  s.channels = channels;
  s.labels = std::move(labels);
  s.fill = fill;
  int max_label = -1;
  for (int l : s.labels) max_label = std::max(max_label, l);
  s.p = max_label + 1;
  s.validate();
  return s;
}

std::size_t FeatureSpace::instance_size() const {
  if (kind == Kind::abstract_mask) return static_cast<std::size_t>(p);
  return static_cast<std::size_t>(height) * width * channels;
}

void FeatureSpace::validate() const {
  if (p < 1) throw InvalidInput("feature space needs p >= 1");
  if (kind == Kind::abstract_mask) return;
  if (height < 1 || width < 1 || channels < 1) throw InvalidInput("image dimensions must be positive");
  if (labels.size() != static_cast<std::size_t>(height) * width) {
    throw InvalidInput("segment map must have H*W labels");
  }
  std::vector<bool> seen(p, false);
  for (int l : labels) {
    if (l < 0 || l >= p) throw InvalidInput("segment label out of range");
    seen[l] = true;
  }
  for (int j = 0; j < p; ++j) {
    if (!seen[j]) throw InvalidInput("segment label " + std::to_string(j) + " has no pixels");
  }
}

Matrix generate_masks(int p, int N, std::uint64_t seed, bool include_z0) {
  if (p < 1 || N < 1) throw InvalidInput("generate_masks needs N >= 1 and p >= 1");
  Matrix Z(N, p);
  for (int i = 0; i < N; ++i) {
    if (include_z0 && i == 0) {
      Z.row(0).setOnes();
      continue;
    }
    CounterRng rng = CounterRng::stream(seed, "masks", static_cast<std::uint64_t>(i));
    std::uint64_t word = 0;
    for (int j = 0; j < p; ++j) {
      if (j % 64 == 0) word = rng();
      Z(i, j) = static_cast<double>((word >> (j % 64)) & 1U);
    }
  }
  return Z;
}

double squared_distance_to_ones(std::span<const double> mask, Distance d) {
  double ones = 0.0;
  for (double z : mask) ones += z;
  const double p = static_cast<double>(mask.size());
  if (d == Distance::euclidean) return p - ones;
  // Cosine distance to the all-ones vector; the empty mask is maximally distant.
  if (ones == 0.0) return 1.0;
  const double dist = 1.0 - std::sqrt(ones / p);
  return dist * dist;
}

Vector kernel_weights(const Matrix& Z, const KernelConfig& cfg) {
  cfg.validate();
  const double theta2 = cfg.theta * cfg.theta;
  Vector w(Z.rows());
  std::vector<double> row(static_cast<std::size_t>(Z.cols()));
  for (Eigen::Index i = 0; i < Z.rows(); ++i) {
    for (Eigen::Index j = 0; j < Z.cols(); ++j) row[j] = Z(i, j);
    w[i] = std::exp(-squared_distance_to_ones(row, cfg.distance) / theta2);
  }
  return w;
}

Instance apply_mask(const FeatureSpace& space, std::span<const double> original,
                    std::span<const double> mask) {
  if (mask.size() != static_cast<std::size_t>(space.p)) {
    throw InvalidInput("mask length does not match feature count");
  }
  if (space.kind == FeatureSpace::Kind::abstract_mask) return Instance(mask.begin(), mask.end());
  if (original.size() != space.instance_size()) {
    throw InvalidInput("instance size does not match the feature space image dimensions");
  }
  Instance out(original.begin(), original.end());
  const std::size_t c = static_cast<std::size_t>(space.channels);
  for (std::size_t px = 0; px < space.labels.size(); ++px) {
    if (mask[space.labels[px]] != 0.0) continue;
    for (std::size_t k = 0; k < c; ++k) out[px * c + k] = space.fill;
  }
  return out;
}

namespace {

// Block index of coordinate x when `extent` is cut into `blocks` pieces with
// the remainder spread over the leading blocks.
int block_of(int x, int extent, int blocks) {
  const int q = extent / blocks;
  const int rem = extent % blocks;
  const int big = rem * (q + 1);
  if (x < big) return x / (q + 1);
  return rem + (x - big) / q;
}

}  // namespace

std::vector<int> grid_segment(int height, int width, int rows, int cols) {
  if (height < 1 || width < 1 || rows < 1 || cols < 1) {
    throw InvalidInput("grid_segment needs positive image and grid dimensions");
  }
  if (rows > height || cols > width) throw InvalidInput("grid finer than the image");
  std::vector<int> labels(static_cast<std::size_t>(height) * width);
  for (int y = 0; y < height; ++y) {
    const int by = block_of(y, height, rows);
    for (int x = 0; x < width; ++x) {
      labels[static_cast<std::size_t>(y) * width + x] = by * cols + block_of(x, width, cols);
    }
  }
  return labels;
}

std::string segment_map_csv(const std::vector<int>& labels, int height, int width) {
  if (labels.size() != static_cast<std::size_t>(height) * width) {
    throw InvalidInput("segment map size does not match dimensions");
  }
  std::ostringstream os;
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      if (x) os << ',';
      os << labels[static_cast<std::size_t>(y) * width + x];
    }
    os << '\n';
  }
  return os.str();
}

}  // namespace eblime::perturbation
