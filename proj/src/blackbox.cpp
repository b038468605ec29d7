#include "eblime/blackbox.hpp"

#include "eblime/errors.hpp"

#include <algorithm>
#include <cmath>
#include <regex>
#include <sstream>

namespace eblime::blackbox {

namespace {

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

void require_size(const Instance& x, std::size_t expected, const std::string& model) {
  if (x.size() != expected) {
    std::ostringstream os;
    os << model << " expects instances of length " << expected << ", got " << x.size();
    throw InvalidInput(os.str());
  }
}

}  // namespace

double checked_probability(double v, const std::string& source) {
  constexpr double kSlack = 1e-9;
  if (std::isfinite(v) && v >= -kSlack && v <= 1.0 + kSlack) return std::clamp(v, 0.0, 1.0);
  std::ostringstream os;
  os.precision(17);
  os << source << " returned prediction " << v << " outside [0, 1]";
  throw AdapterProtocolError(os.str());
}

// ---------------------------------------------------------------------------

LinearMaskModel::LinearMaskModel(SyntheticModelSpec spec) : spec_(std::move(spec)) {
  if (spec_.coefficients.size() < 1) throw InvalidInput("synthetic model needs coefficients");
  if ((spec_.coefficients.array() == 0.0).all() && spec_.link == Link::clipped_linear &&
      spec_.intercept == 0.0) {
    // A zero logistic model is a legitimate constant-0.5 model; a zero
    // clipped-linear one is a constant 0 and carries no signal.
    throw InvalidInput("synthetic model needs at least one nonzero coefficient");
  }
}

Vector LinearMaskModel::predict_batch(std::span<const Instance> instances) {
  Vector out(static_cast<Eigen::Index>(instances.size()));
  const auto p = static_cast<std::size_t>(spec_.coefficients.size());
  for (std::size_t i = 0; i < instances.size(); ++i) {
    require_size(instances[i], p, spec_.name);
    double score = spec_.intercept;
    for (std::size_t j = 0; j < p; ++j) score += instances[i][j] * spec_.coefficients[j];
    out[i] = spec_.link == Link::logistic ? logistic(score) : std::clamp(score, 0.0, 1.0);
  }
  return out;
}

MeanMaskModel::MeanMaskModel(int p) : p_(p) {
  if (p < 1) throw InvalidInput("mean model needs p >= 1");
}

Vector MeanMaskModel::predict_batch(std::span<const Instance> instances) {
  Vector out(static_cast<Eigen::Index>(instances.size()));
  for (std::size_t i = 0; i < instances.size(); ++i) {
    require_size(instances[i], static_cast<std::size_t>(p_), name());
    double s = 0.0;
    for (double v : instances[i]) s += v;
    out[i] = s / p_;
  }
  return out;
}

// ---------------------------------------------------------------------------

DefectModel::DefectModel(FeatureSpace space, std::set<int> defect_segments, double defect_level,
                         double steepness, std::vector<Distractor> distractors,
                         std::vector<double> distractor_reference)
    : space_(std::move(space)),
      defect_segments_(std::move(defect_segments)),
      defect_level_(defect_level),
      steepness_(steepness),
      distractors_(std::move(distractors)),
      distractor_reference_(std::move(distractor_reference)) {
  if (space_.kind != FeatureSpace::Kind::segmented_image) {
    throw InvalidInput("defect model needs a segmented image space");
  }
  if (defect_segments_.empty()) throw InvalidInput("defect model needs at least one defect segment");
  if (!(defect_level_ > 0.0)) throw InvalidInput("defect intensity must be positive");
  for (int s : defect_segments_) {
    if (s < 0 || s >= space_.p) throw InvalidInput("defect segment out of range");
  }
  if (distractor_reference_.empty()) distractor_reference_.assign(distractors_.size(), 0.0);
  if (distractor_reference_.size() != distractors_.size()) {
    throw InvalidInput("one reference intensity per distractor required");
  }
  distractor_pixels_.resize(distractors_.size());
  for (std::size_t px = 0; px < space_.labels.size(); ++px) {
    const int l = space_.labels[px];
    if (defect_segments_.count(l)) defect_pixels_.push_back(px);
    for (std::size_t k = 0; k < distractors_.size(); ++k) {
      if (distractors_[k].segment == l) distractor_pixels_[k].push_back(px);
    }
  }
  for (std::size_t k = 0; k < distractors_.size(); ++k) {
    if (distractor_pixels_[k].empty()) throw InvalidInput("distractor segment out of range");
  }
}

std::string DefectModel::name() const {
  return "defect-" + std::to_string(space_.height) + "x" + std::to_string(space_.width);
}

double DefectModel::predict_one(std::span<const double> x) const {
  const std::size_t c = static_cast<std::size_t>(space_.channels);
  auto mean_over = [&](const std::vector<std::size_t>& pixels) {
    double s = 0.0;
    for (std::size_t px : pixels) {
      for (std::size_t k = 0; k < c; ++k) s += x[px * c + k];
    }
    return s / static_cast<double>(pixels.size() * c);
  };
  const double m = mean_over(defect_pixels_);
  double logit = steepness_ * (2.0 * m / defect_level_ - 1.0);
  for (std::size_t k = 0; k < distractors_.size(); ++k) {
    logit += distractors_[k].weight * (mean_over(distractor_pixels_[k]) - distractor_reference_[k]);
  }
  return logistic(logit);
}

Vector DefectModel::predict_batch(std::span<const Instance> instances) {
  Vector out(static_cast<Eigen::Index>(instances.size()));
  for (std::size_t i = 0; i < instances.size(); ++i) {
    require_size(instances[i], input_size(), name());
    out[i] = predict_one(instances[i]);
  }
  return out;
}

Image default_defect_image(int height, int width, const std::vector<int>& labels,
                           const std::set<int>& defect_segments) {
  Image img;
  img.height = height;
  img.width = width;
  img.channels = 1;
  img.pixels.resize(labels.size());
  for (std::size_t px = 0; px < labels.size(); ++px) {
    img.pixels[px] = defect_segments.count(labels[px]) ? 1.0 : 0.3;
  }
  return img;
}

std::shared_ptr<DefectModel> make_defect_model(int height, int width, int rows, int cols,
                                               const std::set<int>& defect_segments) {
  if (defect_segments.empty()) throw InvalidInput("defect set must not be empty");
  for (int s : defect_segments) {
    if (s < 0 || s >= rows * cols) throw InvalidInput("defect segment outside the grid");
  }
  auto labels = perturbation::grid_segment(height, width, rows, cols);
  auto space = FeatureSpace::segmented(height, width, 1, std::move(labels));
  return std::make_shared<DefectModel>(std::move(space), defect_segments, 1.0);
}

// ---------------------------------------------------------------------------

namespace {

int parse_suffix_int(const std::string& s, const std::string& what) {
  try {
    std::size_t used = 0;
    const int v = std::stoi(s, &used);
    if (used == s.size() && v > 0) return v;
  } catch (const std::exception&) {
  }
  throw InvalidInput("bad " + what + " in model name: '" + s + "'");
}

// (p, p-1, ..., 1) / sum
Vector descending_weights(int p) {
  Vector b(p);
  for (int j = 0; j < p; ++j) b[j] = static_cast<double>(p - j);
  return b / b.sum();
}

void require_abstract(const FeatureSpace& space, int p, const std::string& name) {
  if (space.kind != FeatureSpace::Kind::abstract_mask || space.p != p) {
    throw InvalidInput("builtin:" + name + " needs an abstract feature space with p = " +
                       std::to_string(p));
  }
}

}  // namespace

std::shared_ptr<BlackBox> make_model(const std::string& spec, const FeatureSpace& space) {
  if (spec.rfind("exec:", 0) == 0) {
    return std::make_shared<ExternalModel>(spec.substr(5), space.instance_size());
  }
  if (spec.rfind("builtin:", 0) != 0) {
    throw InvalidInput("model must be builtin:<name> or exec:<command>, got '" + spec + "'");
  }
  const std::string name = spec.substr(8);
  std::smatch m;
  static const std::regex kFamily(R"(^(mean|linear|logistic)-p(\d+)$)");
  static const std::regex kDefect(R"(^defect-(\d+)x(\d+)$)");
  if (std::regex_match(name, m, kFamily)) {
    const int p = parse_suffix_int(m[2], "feature count");
    require_abstract(space, p, name);
    if (m[1] == "mean") return std::make_shared<MeanMaskModel>(p);
    if (m[1] == "linear") {
      return std::make_shared<LinearMaskModel>(
          SyntheticModelSpec{name, descending_weights(p), 0.0, Link::clipped_linear});
    }
    // Alternating-sign logistic model centred on the half-masked input.
    Vector c(p);
    for (int j = 0; j < p; ++j) c[j] = (j % 2 == 0 ? 2.0 : -1.0) * (1.0 + j % 3);
    return std::make_shared<LinearMaskModel>(
        SyntheticModelSpec{name, c, -0.5 * c.sum(), Link::logistic});
  }
  if (std::regex_match(name, m, kDefect)) {
    const int rows = parse_suffix_int(m[1], "grid rows");
    const int cols = parse_suffix_int(m[2], "grid cols");
    if (space.kind != FeatureSpace::Kind::segmented_image || space.p != rows * cols) {
      throw InvalidInput("builtin:" + name + " needs a segmented image with " +
                         std::to_string(rows * cols) + " segments (use --segments " +
                         std::to_string(rows) + "x" + std::to_string(cols) + ")");
    }
    const std::set<int> centre{(rows / 2) * cols + cols / 2};
    return std::make_shared<DefectModel>(space, centre, 1.0);
  }
  throw InvalidInput("unknown builtin model '" + name + "'");
}

Vector predict_masks(const FeatureSpace& space, std::span<const double> original, BlackBox& model,
                     const linalg::Matrix& Z) {
  if (Z.cols() != space.p) throw InvalidInput("mask width does not match feature count");
  const std::size_t N = static_cast<std::size_t>(Z.rows());
  const std::size_t chunk = model.batch_limit();
  Vector Y(Z.rows());
  std::vector<Instance> batch;
  std::vector<double> mask(static_cast<std::size_t>(space.p));
  for (std::size_t start = 0; start < N; start += chunk) {
    const std::size_t end = std::min(N, start + chunk);
    batch.clear();
    for (std::size_t i = start; i < end; ++i) {
      for (int j = 0; j < space.p; ++j) mask[j] = Z(static_cast<Eigen::Index>(i), j);
      batch.push_back(perturbation::apply_mask(space, original, mask));
    }
    const Vector part = model.predict_batch(batch);
    if (part.size() != static_cast<Eigen::Index>(batch.size())) {
      throw AdapterProtocolError(model.name() + " returned the wrong number of predictions");
    }
    for (std::size_t i = start; i < end; ++i) {
      Y[static_cast<Eigen::Index>(i)] = checked_probability(part[static_cast<Eigen::Index>(i - start)], model.name());
    }
  }
  return Y;
}

perturbation::PerturbationSet perturb(const FeatureSpace& space, std::span<const double> original,
                                      BlackBox& model, int N, std::uint64_t seed,
                                      const perturbation::KernelConfig& kernel, bool include_z0) {
  space.validate();
  perturbation::PerturbationSet set;
  set.seed = seed;
  set.includes_z0 = include_z0;
  set.Z = perturbation::generate_masks(space.p, N, seed, include_z0);
  set.weights = perturbation::kernel_weights(set.Z, kernel);
  set.Y = predict_masks(space, original, model, set.Z);
  return set;
}

}  // namespace eblime::blackbox
