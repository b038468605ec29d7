// eblime command-line tool: explanations, coverage, localization, lambda
// studies and the enumeration oracle.

#include "eblime/baselines.hpp"
#include "eblime/blackbox.hpp"
#include "eblime/errors.hpp"
#include "eblime/evaluation.hpp"
#include "eblime/explanation.hpp"
#include "eblime/oracle.hpp"
#include "eblime/parallel.hpp"
#include "eblime/perturbation.hpp"
#include "eblime/posterior.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <regex>
#include <sstream>
#include <string>
#include <vector>

namespace {

using namespace eblime;
using nlohmann::json;

constexpr int kUsageExit = 2;

// Flag combinations CLI11 cannot check on its own.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Common {
  std::uint64_t seed = 0;
  std::string output = "-";
  std::string format = "json";
  unsigned threads = 0;
};

struct PriorFlags {
  posterior::PriorConfig prior;
  double fixed_lambda = 1.0;
};

struct KernelFlags {
  std::optional<double> theta;
  std::string distance = "euclidean";

  // Suite commands: nullopt keeps the per-input default theta = sqrt(p)/4.
  std::optional<perturbation::KernelConfig> forced() const {
    const auto d = perturbation::parse_distance(distance);
    if (!theta) {
      if (d == perturbation::Distance::euclidean) return std::nullopt;
      throw UsageError("--distance cosine on a suite needs an explicit --theta");
    }
    perturbation::KernelConfig cfg{*theta, d};
    cfg.validate();
    return cfg;
  }

  perturbation::KernelConfig resolve(int p) const {
    auto cfg = perturbation::KernelConfig::defaults_for(p);
    cfg.distance = perturbation::parse_distance(distance);
    if (theta) cfg.theta = *theta;
    cfg.validate();
    return cfg;
  }
};

struct TaskFlags {
  std::string model;
  std::string input;
  std::optional<int> abstract_p;
  std::string segments;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--seed", c.seed, "Master seed (u64)")->capture_default_str();
  app->add_option("--output", c.output, "Output path, or - for stdout")->capture_default_str();
  app->add_option("--format", c.format, "Output format")
      ->check(CLI::IsMember({"json", "csv"}))
      ->capture_default_str();
  app->add_option("--threads", c.threads, "Worker threads (0 = available parallelism)");
  app->add_option("--config", "key=value file setting any flag; command-line flags win");
}

// Rewrites "<cmd> ... --config F ..." as "<cmd> <flags from F> ...". Keys are
// long flag names; a [<cmd>] section scopes keys to one subcommand. With the
// take-last policy, flags given on the command line override the file.
std::vector<std::string> expand_config(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  if (args.empty()) return args;
  std::optional<std::string> path;
  for (std::size_t i = 1; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) path = args[i].substr(9);
  }
  if (!path) return args;
  std::ifstream in(*path);
  if (!in) throw UsageError("cannot read config file '" + *path + "'");
  std::vector<std::string> from_file;
  for (const auto& item : CLI::ConfigTOML().from_config(in)) {
    if (item.name == "++" || item.name == "--") continue;  // section markers
    if (!item.parents.empty() && item.parents != std::vector<std::string>{args[0]}) continue;
    std::string value;
    for (std::size_t k = 0; k < item.inputs.size(); ++k) value += (k ? "," : "") + item.inputs[k];
    from_file.push_back("--" + item.name + "=" + value);
  }
  args.insert(args.begin() + 1, from_file.begin(), from_file.end());
  return args;
}

void add_prior(CLI::App* app, PriorFlags& f) {
  auto& p = f.prior;
  app->add_option("--grid-max", p.grid_max, "Upper end r of the lambda grid")->capture_default_str();
  app->add_option("--grid-size", p.grid_size, "Number of lambda grid points L")->capture_default_str();
  app->add_option("--samples", p.samples, "Posterior samples s")->capture_default_str();
  app->add_option("--prior-a", p.a, "Inverse-gamma shape a")->capture_default_str();
  app->add_option("--prior-b", p.b, "Inverse-gamma scale b")->capture_default_str();
  app->add_option("--ci-level", p.ci_level, "Credible interval level")->capture_default_str();
  app->add_option("--fixed-lambda", f.fixed_lambda, "Ridge parameter of LIME and BayesLIME")->capture_default_str();
}

void add_kernel(CLI::App* app, KernelFlags& k) {
  app->add_option("--theta", k.theta, "Kernel width (default sqrt(p)/4)");
  app->add_option("--distance", k.distance, "Mask distance")
      ->check(CLI::IsMember({"euclidean", "cosine"}))
      ->capture_default_str();
}

void add_task(CLI::App* app, TaskFlags& t, bool model_required) {
  auto* m = app->add_option("--model", t.model, "builtin:<name> or exec:<command>");
  if (model_required) m->required();
  auto* in = app->add_option("--input", t.input, "Input image (PGM or PNG)");
  auto* ab = app->add_option("--abstract-p", t.abstract_p, "Abstract mask space with p features")
                 ->check(CLI::PositiveNumber);
  in->excludes(ab);
  app->add_option("--segments", t.segments, "Grid segmentation <rows>x<cols>");
}

std::pair<int, int> parse_grid(const std::string& s) {
  static const std::regex kGrid(R"(^(\d+)x(\d+)$)");
  std::smatch m;
  if (!std::regex_match(s, m, kGrid)) throw UsageError("--segments expects <rows>x<cols>, got '" + s + "'");
  const int r = std::stoi(m[1]);
  const int c = std::stoi(m[2]);
  if (r < 1 || c < 1) throw UsageError("--segments needs positive rows and cols");
  return {r, c};
}

std::vector<int> parse_int_list(const std::string& s, const char* flag) {
  std::vector<int> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      const int v = std::stoi(item, &used);
      if (used != item.size() || v < 1) throw std::invalid_argument(item);
      out.push_back(v);
    } catch (const std::exception&) {
      throw UsageError(std::string(flag) + " expects a comma-separated list of positive integers");
    }
  }
  if (out.empty()) throw UsageError(std::string(flag) + " must not be empty");
  return out;
}

std::vector<Method> parse_methods(const std::string& s) {
  std::vector<Method> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      out.push_back(parse_method(item));
    } catch (const InvalidInput& e) {
      throw UsageError(e.what());
    }
  }
  if (out.empty()) throw UsageError("--methods must not be empty");
  return out;
}

std::vector<std::uint64_t> replicate_seeds(std::uint64_t seed, int count) {
  std::vector<std::uint64_t> out;
  for (int i = 0; i < count; ++i) out.push_back(seed + static_cast<std::uint64_t>(i));
  return out;
}

// Feature count encoded in a builtin model name, if any.
std::optional<int> builtin_p(const std::string& model) {
  static const std::regex kFamily(R"(^builtin:(mean|linear|logistic)-p(\d+)$)");
  std::smatch m;
  if (std::regex_match(model, m, kFamily)) return std::stoi(m[2]);
  return std::nullopt;
}

std::optional<std::pair<int, int>> builtin_defect_grid(const std::string& model) {
  static const std::regex kDefect(R"(^builtin:defect-(\d+)x(\d+)$)");
  std::smatch m;
  if (std::regex_match(model, m, kDefect)) return std::make_pair(std::stoi(m[1]), std::stoi(m[2]));
  return std::nullopt;
}

struct Task {
  perturbation::FeatureSpace space;
  perturbation::Instance input;
  std::shared_ptr<blackbox::BlackBox> model;
};

Task build_task(const TaskFlags& t) {
  Task task;
  const auto defect_grid = builtin_defect_grid(t.model);
  if (!t.input.empty() || (defect_grid && !t.abstract_p)) {
    perturbation::Image img;
    std::pair<int, int> grid;
    if (!t.input.empty()) {
      if (t.segments.empty()) throw UsageError("--input needs --segments <rows>x<cols>");
      grid = parse_grid(t.segments);
      img = perturbation::read_image(t.input);
    } else {
      grid = t.segments.empty() ? *defect_grid : parse_grid(t.segments);
      const int H = 16 * grid.first;
      const int W = 16 * grid.second;
      const auto labels = perturbation::grid_segment(H, W, grid.first, grid.second);
      const std::set<int> centre{(grid.first / 2) * grid.second + grid.second / 2};
      img = blackbox::default_defect_image(H, W, labels, centre);
    }
    auto labels = perturbation::grid_segment(img.height, img.width, grid.first, grid.second);
    task.space = perturbation::FeatureSpace::segmented(img.height, img.width, img.channels, std::move(labels));
    task.input = std::move(img.pixels);
  } else {
    std::optional<int> p = t.abstract_p ? t.abstract_p : builtin_p(t.model);
    if (!p) throw UsageError("need --input, --abstract-p, or a builtin model that fixes p");
    if (!t.segments.empty()) throw UsageError("--segments applies to image inputs only");
    task.space = perturbation::FeatureSpace::abstract(*p);
    task.input = perturbation::Instance(static_cast<std::size_t>(*p), 1.0);
  }
  task.model = blackbox::make_model(t.model, task.space);
  return task;
}

void write_output(const std::string& path, const std::string& text) {
  if (path == "-") {
    std::cout << text;
    std::cout.flush();
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidInput("cannot open output file '" + path + "'");
  out << text;
  if (!out) throw InvalidInput("failed writing output file '" + path + "'");
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

std::string explanation_csv(const Explanation& e) {
  std::ostringstream os;
  os << "feature,mean,variance,ci_lower,ci_upper\n";
  for (int j = 0; j < e.features(); ++j) {
    os << j << ',' << evaluation::format_double(e.beta_mean[j]) << ','
       << evaluation::format_double(e.beta_cov(j, j)) << ',';
    if (e.has_intervals()) {
      os << evaluation::format_double((*e.ci_lower)[j]) << ',' << evaluation::format_double((*e.ci_upper)[j]);
    } else {
      os << ',';
    }
    os << '\n';
  }
  return os.str();
}

evaluation::MethodSettings method_settings(const PriorFlags& f, unsigned threads) {
  evaluation::MethodSettings s;
  s.prior = f.prior;
  s.lime_lambda = f.fixed_lambda;
  s.bayeslime.fixed_lambda = f.fixed_lambda;
  s.bayeslime.samples = f.prior.samples;
  s.bayeslime.ci_level = f.prior.ci_level;
  s.threads = threads;
  return s;
}

json kernel_json(const perturbation::KernelConfig& k) {
  return {{"theta", k.theta}, {"distance", perturbation::to_string(k.distance)}};
}

// ---------------------------------------------------------------------------

struct ExplainFlags {
  Common common;
  PriorFlags prior;
  KernelFlags kernel;
  TaskFlags task;
  std::string method = "eblime";
  int n = 200;
  bool no_samples = false;
};

void run_explain(const ExplainFlags& f) {
  const Method method = parse_method(f.method);
  const unsigned threads = resolve_threads(f.common.threads);
  Task task = build_task(f.task);
  const auto kernel = f.kernel.resolve(task.space.p);
  const auto set = blackbox::perturb(task.space, task.input, *task.model, f.n, f.common.seed, kernel);
  const auto stats = linalg::compute_sufficient_stats(set.design());
  Explanation e = evaluation::run_method(method, stats, method_settings(f.prior, threads), f.common.seed);
  if (auto* ext = dynamic_cast<blackbox::ExternalModel*>(task.model.get())) ext->shutdown();

  json cfg = e.config.is_object() ? e.config : json::object();
  cfg["model"] = f.task.model;
  cfg["num_perturbations"] = f.n;
  cfg["kernel"] = kernel_json(kernel);
  if (method != Method::eblime) cfg["fixed_lambda"] = f.prior.fixed_lambda;
  e.config = cfg;
  for (const auto& w : e.warnings) std::cerr << "warning: " << w << "\n";

  write_output(f.common.output, f.common.format == "csv" ? explanation_csv(e) : dump(to_json(e, !f.no_samples)));
  std::cerr << to_string(method) << ": p=" << e.features() << " N=" << f.n << " samples=" << e.beta_samples.rows();
  if (e.lambda_posterior_mean) std::cerr << " E(lambda|Y)=" << *e.lambda_posterior_mean;
  std::cerr << "\n";
}

struct CoverageFlags {
  Common common;
  PriorFlags prior;
  KernelFlags kernel;
  std::string suite = "synthetic-100";
  std::uint64_t suite_seed = evaluation::SyntheticSuiteOptions{}.seed;
  std::string n_list = "50,100,200,400,500";
  int seeds = 5;
  std::string methods = "eblime,bayeslime";
  std::string ground_truth = "exact";
  double gt_lambda = 1.0;
  std::string gt_lambda_scale = "per-sample";
  int gt_samples = 10000;
};

void run_coverage(const CoverageFlags& f) {
  evaluation::CoverageOptions o;
  o.N_values = parse_int_list(f.n_list, "--n");
  o.seeds = replicate_seeds(f.common.seed, f.seeds);
  o.methods = parse_methods(f.methods);
  o.settings = method_settings(f.prior, resolve_threads(f.common.threads));
  o.ground_truth = evaluation::parse_ground_truth_mode(f.ground_truth);
  o.ground_truth_lambda = f.gt_lambda;
  o.scale_ground_truth_lambda = f.gt_lambda_scale == "per-sample";
  o.ground_truth_samples = f.gt_samples;
  o.kernel = f.kernel.forced();
  const auto suite = evaluation::make_named_suite(f.suite, f.suite_seed);
  const auto report = evaluation::run_coverage_experiment(suite, o);
  write_output(f.common.output, f.common.format == "csv" ? report.to_csv() : dump(report.to_json()));
  for (const auto& s : report.summaries) {
    std::cerr << to_string(s.method) << " N=" << s.N << " coverage median=" << s.median << " min=" << s.min
              << " max=" << s.max << "\n";
  }
}

struct LocalizeFlags {
  Common common;
  PriorFlags prior;
  KernelFlags kernel;
  int scenarios = 69;
  std::uint64_t suite_seed = evaluation::DefectSuiteOptions{}.seed;
  int k = 5;
  int n = 200;
  std::string methods = "lime,bayeslime,eblime";
};

void run_localize(const LocalizeFlags& f) {
  evaluation::DefectSuiteOptions so;
  so.count = f.scenarios;
  so.seed = f.suite_seed;
  evaluation::LocalizationOptions o;
  o.methods = parse_methods(f.methods);
  o.settings = method_settings(f.prior, resolve_threads(f.common.threads));
  o.k = f.k;
  o.N = f.n;
  o.seed = f.common.seed;
  o.kernel = f.kernel.forced();
  const auto report = evaluation::run_localization_experiment(evaluation::make_defect_suite(so), o);
  write_output(f.common.output, f.common.format == "csv" ? report.to_csv() : dump(report.to_json()));
  for (const auto& s : report.summaries) {
    std::cerr << to_string(s.method) << " strict " << s.strict_hits << "/" << s.total << " lenient "
              << s.lenient_hits << "/" << s.total << "\n";
  }
}

struct LambdaFlags {
  Common common;
  PriorFlags prior;
  KernelFlags kernel;
  std::string suite = "synthetic-100";
  std::uint64_t suite_seed = evaluation::SyntheticSuiteOptions{}.seed;
  int n = 200;
  int seeds = 1;
};

void run_lambda(const LambdaFlags& f) {
  evaluation::LambdaStudyOptions o;
  o.prior = f.prior.prior;
  o.N = f.n;
  o.seeds = replicate_seeds(f.common.seed, f.seeds);
  o.kernel = f.kernel.forced();
  o.threads = resolve_threads(f.common.threads);
  const auto report = evaluation::run_lambda_study(evaluation::make_named_suite(f.suite, f.suite_seed), o);
  write_output(f.common.output, f.common.format == "csv" ? report.to_csv() : dump(report.to_json()));
  std::cerr << "lambda study: " << report.records.size() << " records";
  if (report.across_input_std) std::cerr << ", across-input std " << *report.across_input_std;
  std::cerr << "\n";
}

struct OracleFlags {
  Common common;
  KernelFlags kernel;
  TaskFlags task;
  double lambda = 1.0;
  std::optional<int> sampled;
};

void run_oracle(const OracleFlags& f) {
  Task task = build_task(f.task);
  const auto kernel = f.kernel.resolve(task.space.p);
  const linalg::Vector beta =
      f.sampled ? oracle::ground_truth_beta_sampled(task.space, task.input, *task.model, kernel, f.lambda, *f.sampled,
                                                    f.common.seed)
                : oracle::ground_truth_beta(task.space, task.input, *task.model, kernel, f.lambda);
  if (auto* ext = dynamic_cast<blackbox::ExternalModel*>(task.model.get())) ext->shutdown();

  if (f.common.format == "csv") {
    std::ostringstream os;
    os << "feature,beta\n";
    for (Eigen::Index j = 0; j < beta.size(); ++j) os << j << ',' << evaluation::format_double(beta[j]) << '\n';
    write_output(f.common.output, os.str());
  } else {
    json j;
    j["report"] = "oracle";
    j["model"] = f.task.model;
    j["mode"] = f.sampled ? "sampled" : "exact";
    if (f.sampled) {
      j["num_perturbations"] = *f.sampled;
      j["seed"] = f.common.seed;
    }
    j["lambda"] = f.lambda;
    j["kernel"] = kernel_json(kernel);
    j["features"] = beta.size();
    j["beta"] = std::vector<double>(beta.data(), beta.data() + beta.size());
    write_output(f.common.output, dump(j));
  }
  std::cerr << "oracle: p=" << beta.size() << " lambda=" << f.lambda << "\n";
}

void print_error(const char* kind, const std::string& message, int code) {
  json j{{"error", {{"type", kind}, {"message", message}, {"exit_code", code}}}};
  std::cerr << j.dump() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bayesian local explanations with an empirically estimated ridge parameter", "eblime"};
  app.require_subcommand(1);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

  ExplainFlags ex;
  auto* explain = app.add_subcommand("explain", "Explain one prediction");
  add_common(explain, ex.common);
  add_prior(explain, ex.prior);
  add_kernel(explain, ex.kernel);
  add_task(explain, ex.task, true);
  explain->add_option("--method", ex.method, "Explanation method")
      ->check(CLI::IsMember({"lime", "bayeslime", "eblime"}))
      ->capture_default_str();
  explain->add_option("-n,--num-perturbations", ex.n, "Perturbed samples N")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  explain->add_flag("--no-samples", ex.no_samples, "Omit raw posterior samples from JSON");

  CoverageFlags cov;
  auto* coverage = app.add_subcommand("coverage", "Credible-interval coverage on a synthetic suite");
  add_common(coverage, cov.common);
  add_prior(coverage, cov.prior);
  add_kernel(coverage, cov.kernel);
  coverage->add_option("--suite", cov.suite, "synthetic-<count>")->capture_default_str();
  coverage->add_option("--suite-seed", cov.suite_seed, "Seed of the suite generator")->capture_default_str();
  coverage->add_option("--n", cov.n_list, "Comma-separated N values")->capture_default_str();
  coverage->add_option("--seeds", cov.seeds, "Number of replicate seeds (seed, seed+1, ...)")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  coverage->add_option("--methods", cov.methods, "Comma-separated methods")->capture_default_str();
  coverage->add_option("--ground-truth", cov.ground_truth, "exact or sampled")
      ->check(CLI::IsMember({"exact", "sampled", "sampled-10000"}))
      ->capture_default_str();
  coverage->add_option("--gt-lambda", cov.gt_lambda, "Ridge parameter of the ground truth")->capture_default_str();
  coverage->add_option("--gt-lambda-scale", cov.gt_lambda_scale,
                       "per-sample: --gt-lambda applies at the --gt-samples scale; raw: passed as is")
      ->check(CLI::IsMember({"per-sample", "raw"}))
      ->capture_default_str();
  coverage->add_option("--gt-samples", cov.gt_samples, "Perturbations of the sampled ground truth")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();

  LocalizeFlags loc;
  auto* localize = app.add_subcommand("localize", "Top-k defect localization on synthetic scenarios");
  add_common(localize, loc.common);
  add_prior(localize, loc.prior);
  add_kernel(localize, loc.kernel);
  localize->add_option("--scenarios", loc.scenarios, "Number of defect scenarios")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  localize->add_option("--suite-seed", loc.suite_seed, "Seed of the scenario generator")->capture_default_str();
  localize->add_option("--k", loc.k, "Top-k positive segments")->check(CLI::PositiveNumber)->capture_default_str();
  localize->add_option("-n,--num-perturbations", loc.n, "Perturbed samples N")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  localize->add_option("--methods", loc.methods, "Comma-separated methods")->capture_default_str();

  LambdaFlags lam;
  auto* lambda_study = app.add_subcommand("lambda-study", "Posterior mean of lambda across inputs and seeds");
  add_common(lambda_study, lam.common);
  add_prior(lambda_study, lam.prior);
  add_kernel(lambda_study, lam.kernel);
  lambda_study->add_option("--suite", lam.suite, "synthetic-<count>")->capture_default_str();
  lambda_study->add_option("--suite-seed", lam.suite_seed, "Seed of the suite generator")->capture_default_str();
  lambda_study->add_option("-n,--num-perturbations", lam.n, "Perturbed samples N")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  lambda_study->add_option("--seeds", lam.seeds, "Number of replicate seeds")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();

  OracleFlags orc;
  auto* oracle_cmd = app.add_subcommand("oracle", "Ground-truth coefficients by full mask enumeration");
  add_common(oracle_cmd, orc.common);
  add_kernel(oracle_cmd, orc.kernel);
  add_task(oracle_cmd, orc.task, true);
  oracle_cmd->add_option("--lambda", orc.lambda, "Ridge parameter")->capture_default_str();
  oracle_cmd->add_option("--sampled", orc.sampled, "Use N random perturbations instead of the enumeration")
      ->check(CLI::PositiveNumber);

  try {
    std::vector<std::string> args;
    try {
      args = expand_config(argc, argv);
    } catch (const UsageError& e) {
      print_error("usage", e.what(), kUsageExit);
      return kUsageExit;
    }
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kUsageExit;
  }

  try {
    if (*explain) run_explain(ex);
    if (*coverage) run_coverage(cov);
    if (*localize) run_localize(loc);
    if (*lambda_study) run_lambda(lam);
    if (*oracle_cmd) run_oracle(orc);
  } catch (const UsageError& e) {
    print_error("usage", e.what(), kUsageExit);
    return kUsageExit;
  } catch (const AdapterProtocolError& e) {
    print_error("adapter", e.what(), e.exit_code());
    return e.exit_code();
  } catch (const Error& e) {
    print_error("runtime", e.what(), e.exit_code());
    return e.exit_code();
  } catch (const std::exception& e) {
    print_error("runtime", e.what(), 1);
    return 1;
  }
  return 0;
}
