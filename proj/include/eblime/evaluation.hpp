#pragma once

#include "eblime/baselines.hpp"
#include "eblime/blackbox.hpp"
#include "eblime/explanation.hpp"
#include "eblime/perturbation.hpp"
#include "eblime/posterior.hpp"

#include "json.hpp"

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace eblime::evaluation {

// ---------------------------------------------------------------------------
// Ranking

enum class RankMode { absolute, positive };

struct RankedSegment {
  int segment = 0;
  double mean = 0.0;
  double variance = 0.0;
  double scaled_variance = 0.0;  // min-max scaled over all features of the explanation
};

// Top k features by |mean| (absolute) or by mean among mean > 0 (positive).
// Ties go to the lower index. Positive mode may return fewer than k entries.
std::vector<RankedSegment> top_k_segments(const Explanation& e, int k, RankMode mode);

// ---------------------------------------------------------------------------
// Suites

struct SuiteItem {
  std::string id;
  perturbation::FeatureSpace space;
  perturbation::Instance input;
  std::shared_ptr<blackbox::BlackBox> model;
  linalg::Vector true_coefficients;
};

// Logistic black boxes over abstract masks with sparse coefficients.
struct SyntheticSuiteOptions {
  int count = 100;
  int min_p = 8;
  int max_p = 13;
  int min_active = 2;
  int max_active = 4;
  double min_magnitude = 1.0;
  double max_magnitude = 3.0;
  std::uint64_t seed = 20230;
};

std::vector<SuiteItem> make_synthetic_suite(const SyntheticSuiteOptions& options = {});

// "synthetic-<count>" (default options otherwise).
std::vector<SuiteItem> make_named_suite(const std::string& name, std::uint64_t seed);

// Grid-segmented defect images; each defect covers 1..max_defect adjacent
// segments and a few distractor segments perturb the model's logit.
struct DefectSuiteOptions {
  int count = 69;
  int rows = 6;
  int cols = 7;
  int block_pixels = 8;
  int min_defect = 1;
  int max_defect = 3;
  int distractors = 3;
  double distractor_weight = 1.5;
  std::uint64_t seed = 20231;
};

struct DefectCase {
  std::string id;
  blackbox::DefectScenario scenario;
};

std::vector<DefectCase> make_defect_suite(const DefectSuiteOptions& options = {});

// ---------------------------------------------------------------------------
// Shared method configuration

struct MethodSettings {
  posterior::PriorConfig prior;
  baselines::BaselineConfig bayeslime;
  double lime_lambda = 1.0;
  unsigned threads = 1;
};

// Runs one method on a shared perturbation set.
Explanation run_method(Method method, const linalg::SufficientStats& stats, const MethodSettings& settings,
                       std::uint64_t seed);

// Kernel used when none is forced: theta = sqrt(p)/4, euclidean.
perturbation::KernelConfig kernel_for(const perturbation::FeatureSpace& space,
                                      const std::optional<perturbation::KernelConfig>& forced);

// Seed of the perturbation set for (input index, N) under a replicate seed.
std::uint64_t cell_seed(std::uint64_t seed, std::size_t input_index, int N);

// ---------------------------------------------------------------------------
// Coverage

enum class GroundTruthMode { exact, sampled };

std::string to_string(GroundTruthMode m);
GroundTruthMode parse_ground_truth_mode(const std::string& s);

struct CoverageOptions {
  std::vector<int> N_values;
  std::vector<std::uint64_t> seeds;
  std::vector<Method> methods;
  MethodSettings settings;
  GroundTruthMode ground_truth = GroundTruthMode::exact;
  double ground_truth_lambda = 1.0;
  int ground_truth_samples = 10000;
  // When set, ground_truth_lambda is read on the scale of a ground_truth_samples
  // row fit, and exact enumeration uses lambda * 2^p / ground_truth_samples so
  // both modes target the same large-sample solution.
  bool scale_ground_truth_lambda = true;
  std::optional<perturbation::KernelConfig> kernel;
  // Added to both ends of every interval before counting (test hook).
  double ci_inflation = 0.0;
};

struct CoverageRecord {
  Method method = Method::eblime;
  int N = 0;
  std::uint64_t seed = 0;
  std::string input;
  int covered = 0;
  int total = 0;
};

struct CoverageCell {
  Method method = Method::eblime;
  int N = 0;
  std::uint64_t seed = 0;
  int covered = 0;
  int total = 0;
  double fraction() const { return total == 0 ? 0.0 : static_cast<double>(covered) / total; }
};

struct CoverageSummary {
  Method method = Method::eblime;
  int N = 0;
  double min = 0.0;
  double median = 0.0;
  double max = 0.0;
};

struct CoverageReport {
  GroundTruthMode ground_truth = GroundTruthMode::exact;
  double ground_truth_lambda = 1.0;
  bool ground_truth_lambda_scaled = true;
  int ground_truth_samples = 10000;
  std::vector<int> N_values;
  std::vector<CoverageRecord> records;  // one per (method, N, seed, input)
  std::vector<CoverageCell> cells;      // one per (method, N, seed)
  std::vector<CoverageSummary> summaries;

  const CoverageSummary& summary(Method m, int N) const;
  nlohmann::json to_json() const;
  // method,N,seed,covered,total,fraction
  std::string to_csv() const;
};

CoverageReport run_coverage_experiment(const std::vector<SuiteItem>& suite, const CoverageOptions& options);

// ---------------------------------------------------------------------------
// Localization

struct LocalizationOptions {
  std::vector<Method> methods;
  MethodSettings settings;
  int k = 5;
  int N = 200;
  std::uint64_t seed = 0;
  std::optional<perturbation::KernelConfig> kernel;
};

struct LocalizationRecord {
  Method method = Method::eblime;
  std::string scenario;
  std::vector<int> top_k;
  std::vector<int> truth;
  bool strict_hit = false;   // every defect segment in the top-k positive set
  bool lenient_hit = false;  // at least one defect segment in it
};

struct LocalizationSummary {
  Method method = Method::eblime;
  int strict_hits = 0;
  int lenient_hits = 0;
  int total = 0;
  double strict_rate() const { return total == 0 ? 0.0 : static_cast<double>(strict_hits) / total; }
  double lenient_rate() const { return total == 0 ? 0.0 : static_cast<double>(lenient_hits) / total; }
};

struct LocalizationReport {
  int k = 5;
  std::vector<LocalizationRecord> records;
  std::vector<LocalizationSummary> summaries;

  const LocalizationSummary& summary(Method m) const;
  nlohmann::json to_json() const;
  // method,scenario,top_k,defect_segments,strict_hit,lenient_hit
  std::string to_csv() const;
};

// Rejects scenarios with more defect segments than k (a strict hit would be impossible).
LocalizationReport run_localization_experiment(const std::vector<DefectCase>& scenarios,
                                               const LocalizationOptions& options);

// ---------------------------------------------------------------------------
// Lambda study

struct LambdaStudyOptions {
  posterior::PriorConfig prior;
  int N = 200;
  std::vector<std::uint64_t> seeds;
  std::optional<perturbation::KernelConfig> kernel;
  unsigned threads = 1;
};

struct LambdaRecord {
  std::string input;
  std::uint64_t seed = 0;
  int p = 0;
  double lambda_mean = 0.0;
  double log_lambda_mean = 0.0;
};

struct LambdaStudyReport {
  std::vector<LambdaRecord> records;
  // Std over inputs of each input's seed-averaged E(lambda|Y); absent with one input.
  std::optional<double> across_input_std;
  std::optional<double> across_input_log_std;
  // Per input, std over seeds; absent with one seed.
  std::vector<std::pair<std::string, std::optional<double>>> across_seed_std;

  nlohmann::json to_json() const;
  // input,seed,p,lambda_posterior_mean,log_lambda_posterior_mean
  std::string to_csv() const;
};

LambdaStudyReport run_lambda_study(const std::vector<SuiteItem>& suite, const LambdaStudyOptions& options);

// Sample standard deviation; nullopt for fewer than two values.
std::optional<double> sample_std(const std::vector<double>& v);

// %.17g, so CSV output is exact and reproducible.
std::string format_double(double v);

}  // namespace eblime::evaluation
