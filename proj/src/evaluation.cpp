#include "eblime/evaluation.hpp"

#include "eblime/errors.hpp"
#include "eblime/oracle.hpp"
#include "eblime/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <regex>
#include <set>
#include <sstream>

namespace eblime::evaluation {

using nlohmann::json;

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::optional<double> sample_std(const std::vector<double>& v) {
  if (v.size() < 2) return std::nullopt;
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

// ---------------------------------------------------------------------------

std::vector<RankedSegment> top_k_segments(const Explanation& e, int k, RankMode mode) {
  const auto p = static_cast<int>(e.features());
  if (k < 1 || k > p) throw InvalidInput("top-k needs 1 <= k <= p");

  std::vector<RankedSegment> all(static_cast<std::size_t>(p));
  double vmin = std::numeric_limits<double>::infinity();
  double vmax = -std::numeric_limits<double>::infinity();
  for (int j = 0; j < p; ++j) {
    const double var = e.beta_cov.size() == 0 ? 0.0 : e.beta_cov(j, j);
    all[j] = {j, e.beta_mean[j], var, 0.0};
    vmin = std::min(vmin, var);
    vmax = std::max(vmax, var);
  }
  for (auto& r : all) r.scaled_variance = vmax > vmin ? (r.variance - vmin) / (vmax - vmin) : 0.0;

  std::vector<RankedSegment> pool;
  if (mode == RankMode::positive) {
    std::copy_if(all.begin(), all.end(), std::back_inserter(pool), [](const RankedSegment& r) { return r.mean > 0.0; });
  } else {
    pool = all;
  }
  auto key = [mode](const RankedSegment& r) { return mode == RankMode::absolute ? std::abs(r.mean) : r.mean; };
  std::stable_sort(pool.begin(), pool.end(),
                   [&](const RankedSegment& x, const RankedSegment& y) { return key(x) > key(y); });
  if (static_cast<int>(pool.size()) > k) pool.resize(static_cast<std::size_t>(k));
  return pool;
}

// ---------------------------------------------------------------------------

namespace {

int uniform_int(CounterRng& rng, int lo, int hi) {
  const auto span = static_cast<std::uint64_t>(hi - lo + 1);
  return lo + static_cast<int>(rng() % span);
}

double uniform_real(CounterRng& rng, double lo, double hi) { return lo + (hi - lo) * rng.uniform(); }

// k distinct values from [0, n), in draw order.
std::vector<int> choose_distinct(CounterRng& rng, int n, int k) {
  std::vector<int> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), 0);
  for (int i = 0; i < k; ++i) std::swap(idx[i], idx[uniform_int(rng, i, n - 1)]);
  idx.resize(static_cast<std::size_t>(k));
  return idx;
}

}  // namespace

std::vector<SuiteItem> make_synthetic_suite(const SyntheticSuiteOptions& o) {
  if (o.count < 1 || o.min_p < 1 || o.max_p < o.min_p || o.min_active < 1 || o.max_active < o.min_active ||
      o.max_active > o.min_p) {
    throw InvalidInput("inconsistent synthetic suite options");
  }
  std::vector<SuiteItem> suite;
  suite.reserve(static_cast<std::size_t>(o.count));
  for (int i = 0; i < o.count; ++i) {
    CounterRng rng = CounterRng::stream(o.seed, "suite", static_cast<std::uint64_t>(i));
    const int p = uniform_int(rng, o.min_p, o.max_p);
    const int active = uniform_int(rng, o.min_active, o.max_active);
    linalg::Vector beta = linalg::Vector::Zero(p);
    for (int j : choose_distinct(rng, p, active)) {
      const double sign = (rng() & 1U) ? 1.0 : -1.0;
      beta[j] = sign * uniform_real(rng, o.min_magnitude, o.max_magnitude);
    }
    // Logit zero at the half-masked input.
    const double intercept = -0.5 * beta.sum();
    SuiteItem item;
    item.id = "synthetic-" + std::to_string(i);
    item.space = perturbation::FeatureSpace::abstract(p);
    item.input = perturbation::Instance(static_cast<std::size_t>(p), 1.0);
    item.true_coefficients = beta;
    item.model = std::make_shared<blackbox::LinearMaskModel>(
        blackbox::SyntheticModelSpec{item.id, beta, intercept, blackbox::Link::logistic});
    suite.push_back(std::move(item));
  }
  return suite;
}

std::vector<SuiteItem> make_named_suite(const std::string& name, std::uint64_t seed) {
  static const std::regex kSynthetic(R"(^synthetic-(\d+)$)");
  std::smatch m;
  if (!std::regex_match(name, m, kSynthetic)) {
    throw InvalidInput("unknown suite '" + name + "' (expected synthetic-<count>)");
  }
  SyntheticSuiteOptions o;
  o.count = std::stoi(m[1]);
  o.seed = seed;
  return make_synthetic_suite(o);
}

std::vector<DefectCase> make_defect_suite(const DefectSuiteOptions& o) {
  const int p = o.rows * o.cols;
  if (o.count < 1 || o.rows < 1 || o.cols < 1 || o.block_pixels < 1 || o.min_defect < 1 ||
      o.max_defect < o.min_defect || o.max_defect + o.distractors > p) {
    throw InvalidInput("inconsistent defect suite options");
  }
  const int H = o.rows * o.block_pixels;
  const int W = o.cols * o.block_pixels;
  const auto labels = perturbation::grid_segment(H, W, o.rows, o.cols);

  std::vector<DefectCase> out;
  out.reserve(static_cast<std::size_t>(o.count));
  for (int i = 0; i < o.count; ++i) {
    CounterRng rng = CounterRng::stream(o.seed, "defect-suite", static_cast<std::uint64_t>(i));
    // Grow a connected defect region from a random seed segment.
    const int size = uniform_int(rng, o.min_defect, o.max_defect);
    std::set<int> defect{uniform_int(rng, 0, p - 1)};
    while (static_cast<int>(defect.size()) < size) {
      std::vector<int> frontier;
      for (int s : defect) {
        const int r = s / o.cols;
        const int c = s % o.cols;
        const int nbr[4][2] = {{r - 1, c}, {r + 1, c}, {r, c - 1}, {r, c + 1}};
        for (const auto& n : nbr) {
          if (n[0] < 0 || n[0] >= o.rows || n[1] < 0 || n[1] >= o.cols) continue;
          const int id = n[0] * o.cols + n[1];
          if (!defect.count(id)) frontier.push_back(id);
        }
      }
      std::sort(frontier.begin(), frontier.end());
      frontier.erase(std::unique(frontier.begin(), frontier.end()), frontier.end());
      defect.insert(frontier[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(frontier.size()) - 1))]);
    }

    perturbation::Image img;
    img.height = H;
    img.width = W;
    img.pixels.resize(labels.size());
    for (std::size_t px = 0; px < labels.size(); ++px) {
      img.pixels[px] = defect.count(labels[px]) ? 1.0 : uniform_real(rng, 0.2, 0.4);
    }

    auto space = perturbation::FeatureSpace::segmented(H, W, 1, labels);
    std::vector<int> candidates;
    for (int s = 0; s < p; ++s) {
      if (!defect.count(s)) candidates.push_back(s);
    }
    std::vector<blackbox::Distractor> distractors;
    std::vector<double> reference;
    for (int pick : choose_distinct(rng, static_cast<int>(candidates.size()), o.distractors)) {
      const int seg = candidates[static_cast<std::size_t>(pick)];
      const double sign = (rng() & 1U) ? 1.0 : -1.0;
      distractors.push_back({seg, sign * o.distractor_weight * uniform_real(rng, 0.5, 1.0)});
      double sum = 0.0;
      int n = 0;
      for (std::size_t px = 0; px < labels.size(); ++px) {
        if (labels[px] == seg) {
          sum += img.pixels[px];
          ++n;
        }
      }
      reference.push_back(sum / n);
    }
    auto model = std::make_shared<blackbox::DefectModel>(space, defect, 1.0, blackbox::DefectModel::kDefaultSteepness,
                                                         distractors, reference);
    DefectCase dc;
    dc.id = "defect-" + std::to_string(i);
    dc.scenario = blackbox::DefectScenario{std::move(img), std::move(space), defect, std::move(model)};
    out.push_back(std::move(dc));
  }
  return out;
}

// ---------------------------------------------------------------------------

Explanation run_method(Method method, const linalg::SufficientStats& stats, const MethodSettings& settings,
                       std::uint64_t seed) {
  switch (method) {
    case Method::lime:
      return baselines::explain_lime(stats, settings.lime_lambda);
    case Method::bayeslime:
      return baselines::explain_bayeslime(stats, settings.bayeslime, seed);
    case Method::eblime:
      return posterior::explain_eblime(stats, settings.prior, seed, {settings.threads});
  }
  throw InvalidInput("unknown method");
}

perturbation::KernelConfig kernel_for(const perturbation::FeatureSpace& space,
                                      const std::optional<perturbation::KernelConfig>& forced) {
  return forced ? *forced : perturbation::KernelConfig::defaults_for(space.p);
}

std::uint64_t cell_seed(std::uint64_t seed, std::size_t input_index, int N) {
  CounterRng rng = CounterRng::stream(seed, "cell", (static_cast<std::uint64_t>(input_index) << 32) ^
                                                        static_cast<std::uint64_t>(N));
  return rng();
}

std::string to_string(GroundTruthMode m) { return m == GroundTruthMode::exact ? "exact" : "sampled-10000"; }

GroundTruthMode parse_ground_truth_mode(const std::string& s) {
  if (s == "exact") return GroundTruthMode::exact;
  if (s == "sampled" || s == "sampled-10000") return GroundTruthMode::sampled;
  throw InvalidInput("ground truth mode must be exact or sampled");
}

// ---------------------------------------------------------------------------

namespace {

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

const CoverageSummary& CoverageReport::summary(Method m, int N) const {
  for (const auto& s : summaries) {
    if (s.method == m && s.N == N) return s;
  }
  throw InvalidInput("no coverage summary for " + eblime::to_string(m) + " at N=" + std::to_string(N));
}

CoverageReport run_coverage_experiment(const std::vector<SuiteItem>& suite, const CoverageOptions& o) {
  if (suite.empty() || o.N_values.empty() || o.seeds.empty() || o.methods.empty()) {
    throw InvalidInput("coverage experiment needs inputs, N values, seeds and methods");
  }
  for (Method m : o.methods) {
    if (m == Method::lime) throw InvalidInput("LIME has no credible intervals; coverage needs bayeslime or eblime");
  }
  if (!(o.ci_inflation >= 0.0)) throw InvalidInput("ci inflation must be non-negative");
  if (!(o.ground_truth_lambda > 0.0)) throw InvalidInput("ground-truth lambda must be positive");
  if (o.ground_truth_samples < 1) throw InvalidInput("ground-truth sample count must be >= 1");

  CoverageReport report;
  report.ground_truth = o.ground_truth;
  report.ground_truth_lambda = o.ground_truth_lambda;
  report.ground_truth_lambda_scaled = o.scale_ground_truth_lambda;
  report.ground_truth_samples = o.ground_truth_samples;
  report.N_values = o.N_values;

  for (std::size_t i = 0; i < suite.size(); ++i) {
    const SuiteItem& item = suite[i];
    const auto kernel = kernel_for(item.space, o.kernel);
    const double exact_lambda =
        o.scale_ground_truth_lambda
            ? o.ground_truth_lambda * std::ldexp(1.0, item.space.p) / static_cast<double>(o.ground_truth_samples)
            : o.ground_truth_lambda;
    const linalg::Vector truth =
        o.ground_truth == GroundTruthMode::exact
            ? oracle::ground_truth_beta(item.space, item.input, *item.model, kernel, exact_lambda)
            : oracle::ground_truth_beta_sampled(item.space, item.input, *item.model, kernel, o.ground_truth_lambda,
                                                o.ground_truth_samples, CounterRng::stream(o.seeds.front(), "truth", i)());
    for (int N : o.N_values) {
      for (std::uint64_t seed : o.seeds) {
        const std::uint64_t cs = cell_seed(seed, i, N);
        const auto set = blackbox::perturb(item.space, item.input, *item.model, N, cs, kernel);
        const auto stats = linalg::compute_sufficient_stats(set.design());
        for (Method m : o.methods) {
          const Explanation e = run_method(m, stats, o.settings, cs);
          CoverageRecord r{m, N, seed, item.id, 0, static_cast<int>(truth.size())};
          for (Eigen::Index j = 0; j < truth.size(); ++j) {
            const double lo = (*e.ci_lower)[j] - o.ci_inflation;
            const double hi = (*e.ci_upper)[j] + o.ci_inflation;
            if (lo <= truth[j] && truth[j] <= hi) ++r.covered;
          }
          report.records.push_back(std::move(r));
        }
      }
    }
  }

  for (Method m : o.methods) {
    for (int N : o.N_values) {
      std::vector<double> fractions;
      for (std::uint64_t seed : o.seeds) {
        CoverageCell c{m, N, seed, 0, 0};
        for (const auto& r : report.records) {
          if (r.method == m && r.N == N && r.seed == seed) {
            c.covered += r.covered;
            c.total += r.total;
          }
        }
        fractions.push_back(c.fraction());
        report.cells.push_back(c);
      }
      report.summaries.push_back({m, N, *std::min_element(fractions.begin(), fractions.end()), median_of(fractions),
                                  *std::max_element(fractions.begin(), fractions.end())});
    }
  }
  return report;
}

json CoverageReport::to_json() const {
  json j;
  j["report"] = "coverage";
  j["ground_truth"] = evaluation::to_string(ground_truth);
  j["ground_truth_lambda"] = ground_truth_lambda;
  j["ground_truth_lambda_scaled"] = ground_truth_lambda_scaled;
  j["ground_truth_samples"] = ground_truth_samples;
  j["N_values"] = N_values;
  j["cells"] = json::array();
  for (const auto& c : cells) {
    j["cells"].push_back({{"method", eblime::to_string(c.method)},
                          {"N", c.N},
                          {"seed", c.seed},
                          {"covered", c.covered},
                          {"total", c.total},
                          {"fraction", c.fraction()}});
  }
  j["summary"] = json::array();
  for (const auto& s : summaries) {
    j["summary"].push_back(
        {{"method", eblime::to_string(s.method)}, {"N", s.N}, {"min", s.min}, {"median", s.median}, {"max", s.max}});
  }
  j["records"] = json::array();
  for (const auto& r : records) {
    j["records"].push_back({{"method", eblime::to_string(r.method)},
                            {"N", r.N},
                            {"seed", r.seed},
                            {"input", r.input},
                            {"covered", r.covered},
                            {"total", r.total}});
  }
  return j;
}

std::string CoverageReport::to_csv() const {
  std::ostringstream os;
  os << "method,N,seed,covered,total,fraction\n";
  for (const auto& c : cells) {
    os << eblime::to_string(c.method) << ',' << c.N << ',' << c.seed << ',' << c.covered << ',' << c.total << ','
       << format_double(c.fraction()) << '\n';
  }
  return os.str();
}

// ---------------------------------------------------------------------------

const LocalizationSummary& LocalizationReport::summary(Method m) const {
  for (const auto& s : summaries) {
    if (s.method == m) return s;
  }
  throw InvalidInput("no localization summary for " + eblime::to_string(m));
}

LocalizationReport run_localization_experiment(const std::vector<DefectCase>& scenarios,
                                               const LocalizationOptions& o) {
  if (o.k < 1) throw InvalidInput("k must be >= 1");
  if (o.methods.empty()) throw InvalidInput("localization needs at least one method");
  for (const auto& c : scenarios) {
    if (static_cast<int>(c.scenario.defect_segments.size()) > o.k) {
      throw InvalidInput("scenario " + c.id + " has " + std::to_string(c.scenario.defect_segments.size()) +
                         " defect segments; a top-" + std::to_string(o.k) + " set can never cover them");
    }
  }
  LocalizationReport report;
  report.k = o.k;
  for (std::size_t i = 0; i < scenarios.size(); ++i) {
    const auto& sc = scenarios[i].scenario;
    const auto kernel = kernel_for(sc.space, o.kernel);
    const std::uint64_t cs = cell_seed(o.seed, i, o.N);
    const auto set = blackbox::perturb(sc.space, sc.image.pixels, *sc.model, o.N, cs, kernel);
    const auto stats = linalg::compute_sufficient_stats(set.design());
    for (Method m : o.methods) {
      const Explanation e = run_method(m, stats, o.settings, cs);
      LocalizationRecord r;
      r.method = m;
      r.scenario = scenarios[i].id;
      for (const auto& seg : top_k_segments(e, std::min(o.k, static_cast<int>(e.features())), RankMode::positive)) {
        r.top_k.push_back(seg.segment);
      }
      r.truth.assign(sc.defect_segments.begin(), sc.defect_segments.end());
      const std::set<int> top(r.top_k.begin(), r.top_k.end());
      r.strict_hit = std::all_of(r.truth.begin(), r.truth.end(), [&](int s) { return top.count(s) > 0; });
      r.lenient_hit = std::any_of(r.truth.begin(), r.truth.end(), [&](int s) { return top.count(s) > 0; });
      report.records.push_back(std::move(r));
    }
  }
  for (Method m : o.methods) {
    LocalizationSummary s{m, 0, 0, 0};
    for (const auto& r : report.records) {
      if (r.method != m) continue;
      ++s.total;
      s.strict_hits += r.strict_hit;
      s.lenient_hits += r.lenient_hit;
    }
    report.summaries.push_back(s);
  }
  return report;
}

namespace {

std::string join_ints(const std::vector<int>& v, char sep) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += sep;
    out += std::to_string(v[i]);
  }
  return out;
}

}  // namespace

json LocalizationReport::to_json() const {
  json j;
  j["report"] = "localization";
  j["k"] = k;
  j["summary"] = json::array();
  for (const auto& s : summaries) {
    j["summary"].push_back({{"method", eblime::to_string(s.method)},
                            {"strict_hits", s.strict_hits},
                            {"lenient_hits", s.lenient_hits},
                            {"total", s.total},
                            {"strict_rate", s.strict_rate()},
                            {"lenient_rate", s.lenient_rate()}});
  }
  j["records"] = json::array();
  for (const auto& r : records) {
    j["records"].push_back({{"method", eblime::to_string(r.method)},
                            {"scenario", r.scenario},
                            {"top_k", r.top_k},
                            {"defect_segments", r.truth},
                            {"strict_hit", r.strict_hit},
                            {"lenient_hit", r.lenient_hit}});
  }
  return j;
}

std::string LocalizationReport::to_csv() const {
  std::ostringstream os;
  os << "method,scenario,top_k,defect_segments,strict_hit,lenient_hit\n";
  for (const auto& r : records) {
    os << eblime::to_string(r.method) << ',' << r.scenario << ',' << join_ints(r.top_k, ';') << ','
       << join_ints(r.truth, ';') << ',' << (r.strict_hit ? 1 : 0) << ',' << (r.lenient_hit ? 1 : 0) << '\n';
  }
  return os.str();
}

// ---------------------------------------------------------------------------

LambdaStudyReport run_lambda_study(const std::vector<SuiteItem>& suite, const LambdaStudyOptions& o) {
  if (suite.empty()) throw InvalidInput("lambda study needs at least one input");
  if (o.seeds.empty()) throw InvalidInput("lambda study needs at least one seed");
  LambdaStudyReport report;
  std::vector<double> per_input_mean;
  std::vector<double> per_input_log_mean;
  for (std::size_t i = 0; i < suite.size(); ++i) {
    const SuiteItem& item = suite[i];
    const auto kernel = kernel_for(item.space, o.kernel);
    std::vector<double> values;
    for (std::uint64_t seed : o.seeds) {
      const auto set = blackbox::perturb(item.space, item.input, *item.model, o.N, cell_seed(seed, i, o.N), kernel);
      const auto stats = linalg::compute_sufficient_stats(set.design());
      const auto grid = posterior::grid_posterior(stats, o.prior, o.threads);
      const double mean = posterior::lambda_posterior_mean(grid);
      report.records.push_back({item.id, seed, item.space.p, mean, std::log(mean)});
      values.push_back(mean);
    }
    report.across_seed_std.emplace_back(item.id, sample_std(values));
    const double avg = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
    per_input_mean.push_back(avg);
    per_input_log_mean.push_back(std::log(avg));
  }
  report.across_input_std = sample_std(per_input_mean);
  report.across_input_log_std = sample_std(per_input_log_mean);
  return report;
}

json LambdaStudyReport::to_json() const {
  auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  json j;
  j["report"] = "lambda-study";
  j["across_input_std"] = opt(across_input_std);
  j["across_input_log_std"] = opt(across_input_log_std);
  j["across_seed_std"] = json::array();
  for (const auto& [id, s] : across_seed_std) j["across_seed_std"].push_back({{"input", id}, {"std", opt(s)}});
  j["records"] = json::array();
  for (const auto& r : records) {
    j["records"].push_back({{"input", r.input},
                            {"seed", r.seed},
                            {"p", r.p},
                            {"lambda_posterior_mean", r.lambda_mean},
                            {"log_lambda_posterior_mean", r.log_lambda_mean}});
  }
  return j;
}

std::string LambdaStudyReport::to_csv() const {
  std::ostringstream os;
  os << "input,seed,p,lambda_posterior_mean,log_lambda_posterior_mean\n";
  for (const auto& r : records) {
    os << r.input << ',' << r.seed << ',' << r.p << ',' << format_double(r.lambda_mean) << ','
       << format_double(r.log_lambda_mean) << '\n';
  }
  return os.str();
}

}  // namespace eblime::evaluation
