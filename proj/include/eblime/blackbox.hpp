#pragma once

#include "eblime/linalg.hpp"
#include "eblime/perturbation.hpp"

#include <cstdint>
#include <memory>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace eblime::blackbox {

using linalg::Vector;
using perturbation::FeatureSpace;
using perturbation::Image;
using perturbation::Instance;

// A model f: instance -> [0, 1]. Only batched prediction is exposed.
class BlackBox {
 public:
  virtual ~BlackBox() = default;

  // One prediction per instance, in order. Implementations validate the range.
  virtual Vector predict_batch(std::span<const Instance> instances) = 0;

  virtual std::string name() const = 0;
  // Flattened instance length the model accepts.
  virtual std::size_t input_size() const = 0;

  std::size_t batch_limit() const { return batch_limit_; }
  void set_batch_limit(std::size_t n) { batch_limit_ = n == 0 ? 1 : n; }

 private:
  std::size_t batch_limit_ = 1024;
};

enum class Link { clipped_linear, logistic };

// Linear score over an abstract mask, pushed through `link`.
struct SyntheticModelSpec {
  std::string name;
  Vector coefficients;
  double intercept = 0.0;
  Link link = Link::logistic;
};

class LinearMaskModel final : public BlackBox {
 public:
  explicit LinearMaskModel(SyntheticModelSpec spec);

  Vector predict_batch(std::span<const Instance> instances) override;
  std::string name() const override { return spec_.name; }
  std::size_t input_size() const override { return static_cast<std::size_t>(spec_.coefficients.size()); }

  const SyntheticModelSpec& spec() const { return spec_; }

 private:
  SyntheticModelSpec spec_;
};

// f(mask) = mean(mask). Mirrored by the reference external adapter.
class MeanMaskModel final : public BlackBox {
 public:
  explicit MeanMaskModel(int p);

  Vector predict_batch(std::span<const Instance> instances) override;
  std::string name() const override { return "mean-p" + std::to_string(p_); }
  std::size_t input_size() const override { return static_cast<std::size_t>(p_); }

 private:
  int p_;
};

// Extra segment whose mean intensity nudges a defect model's logit.
struct Distractor {
  int segment = 0;
  double weight = 0.0;
};

// Image classifier stand-in: P("with defect") is a logistic function of the
// mean intensity over the defect pixels,
//   logit = steepness * (2 m / level - 1) + sum_k w_k * (mean_k - ref_k)
// where m is the mean defect intensity, `level` the defect intensity of the
// unmasked input and (mean_k - ref_k) each distractor segment's intensity
// relative to the input it was built for.
class DefectModel final : public BlackBox {
 public:
  static constexpr double kDefaultSteepness = 4.0;

  DefectModel(FeatureSpace space, std::set<int> defect_segments, double defect_level,
              double steepness = kDefaultSteepness, std::vector<Distractor> distractors = {},
              std::vector<double> distractor_reference = {});

  Vector predict_batch(std::span<const Instance> instances) override;
  std::string name() const override;
  std::size_t input_size() const override { return space_.instance_size(); }

  const FeatureSpace& space() const { return space_; }
  const std::set<int>& defect_segments() const { return defect_segments_; }

  double predict_one(std::span<const double> instance) const;

 private:
  FeatureSpace space_;
  std::set<int> defect_segments_;
  std::vector<std::size_t> defect_pixels_;
  double defect_level_;
  double steepness_;
  std::vector<Distractor> distractors_;
  std::vector<double> distractor_reference_;
  std::vector<std::vector<std::size_t>> distractor_pixels_;
};

// Synthetic defect scenario: a grid-segmented image with bright defect
// segments on a textured background, and the model that detects them.
struct DefectScenario {
  Image image;
  FeatureSpace space;
  std::set<int> defect_segments;
  std::shared_ptr<DefectModel> model;
};

// Builds a DefectModel for an H x W grid with rows x cols blocks whose defect
// region is `defect_segments`. The default input image (see
// default_defect_image) has defect intensity 1.
std::shared_ptr<DefectModel> make_defect_model(int height, int width, int rows, int cols,
                                               const std::set<int>& defect_segments);

// Flat 0.3 background with the defect segments at intensity 1.
Image default_defect_image(int height, int width, const std::vector<int>& labels,
                           const std::set<int>& defect_segments);

// Out-of-process model speaking the newline-delimited JSON protocol over
// stdin/stdout. One subprocess per instance; access is serialized.
class ExternalModel final : public BlackBox {
 public:
  ExternalModel(std::string command, std::size_t input_size);
  ~ExternalModel() override;

  ExternalModel(const ExternalModel&) = delete;
  ExternalModel& operator=(const ExternalModel&) = delete;

  Vector predict_batch(std::span<const Instance> instances) override;
  std::string name() const override { return "exec:" + command_; }
  std::size_t input_size() const override { return input_size_; }

  // Sends shutdown and reaps the child. Idempotent.
  void shutdown();

 private:
  void send_line(const std::string& line);
  std::string read_line();
  [[noreturn]] void fail(const std::string& why, const std::string& payload);

  std::string command_;
  std::size_t input_size_;
  int pid_ = -1;
  int to_child_ = -1;
  int from_child_ = -1;
  std::string buffer_;
  std::uint64_t next_id_ = 1;
};

// Clamps predictions within 1e-9 of [0, 1]; anything else is an adapter error.
double checked_probability(double v, const std::string& source);

// Resolves a --model argument: "builtin:<name>" or "exec:<command>".
//   builtin names: mean-p<k>, linear-p<k>, logistic-p<k>, defect-<r>x<c>
std::shared_ptr<BlackBox> make_model(const std::string& spec, const FeatureSpace& space);

// Masks, kernel weights and predictions for one explanation task.
perturbation::PerturbationSet perturb(const FeatureSpace& space, std::span<const double> original,
                                      BlackBox& model, int N, std::uint64_t seed,
                                      const perturbation::KernelConfig& kernel,
                                      bool include_z0 = true);

// Predictions for explicit mask rows (used by the enumeration oracle).
Vector predict_masks(const FeatureSpace& space, std::span<const double> original, BlackBox& model,
                     const linalg::Matrix& Z);

}  // namespace eblime::blackbox
