// Batch CLI for hybrid randomized-smoothing certification.
//
// Subcommands: certify (single certificate, JSON), frontier (per-budget
// table, CSV), sweep (certified-accuracy table, CSV), verify (oracle
// cross-checks). Every output embeds the fully resolved config so a run can
// be reproduced from its own artifact. Exit codes: 0 success, 1 verification
// failure, 2 parameter error, 3 numeric error.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "nlohmann/json.hpp"

#include "hybridcert/certificate.hpp"
#include "hybridcert/confidence.hpp"
#include "hybridcert/harness.hpp"
#include "hybridcert/oracle.hpp"

namespace {

using hybridcert::BracketSide;
using hybridcert::CertificateResult;
using hybridcert::GroupedLikelihoodRatio;
using hybridcert::KernelKind;
using hybridcert::KernelParams;
using hybridcert::NumericError;
using hybridcert::ParameterError;
using hybridcert::ThreatFamily;
using hybridcert::ThreatModel;
using hybridcert::UnitProbability;
using nlohmann::json;

struct RunConfig {
  std::string command;
  std::string kernel = "uniform";
  std::string family = "suffix";
  double sigma = 1.0;
  double beta = 0.25;
  int vocab = 1000;
  double tau = 4.6e-5;
  int d = 1;
  std::vector<int> d_list;
  int d_max = -1;
  double pa = -1.0;  // negative: not given directly
  std::int64_t n = -1;
  std::int64_t k = -1;
  double alpha_risk = 0.01;
  double radius_tol = hybridcert::kDefaultRadiusTolerance;
  double threshold_tol = hybridcert::kDefaultThresholdTolerance;
  double r_max = 0.0;  // 0: 50 * sigma
  std::uint64_t seed = 0;
  // sweep
  std::string dataset = "synthetic";
  std::string csv_path;
  std::vector<std::string> categorical_columns;
  std::vector<std::string> continuous_columns;
  std::string label_column = "label";
  int n_examples = 50;
  std::int64_t samples = 2000;
  std::vector<double> epsilon_grid;
  // verify
  std::int64_t mc_samples = 100000;
  int mc_configs = 200;
  double perturb_phi = 0.0;
  // io
  std::string out_path;
  bool dump_groups = false;
  bool plot_data = false;
};

json config_to_json(const RunConfig& c) {
  json j;
  j["command"] = c.command;
  j["kernel"] = c.kernel;
  j["family"] = c.family;
  j["sigma"] = c.sigma;
  j["beta"] = c.beta;
  j["vocab"] = c.vocab;
  j["tau"] = c.tau;
  j["d"] = c.d;
  j["d_list"] = c.d_list;
  j["d_max"] = c.d_max;
  j["pa"] = c.pa;
  j["n"] = c.n;
  j["k"] = c.k;
  j["alpha_risk"] = c.alpha_risk;
  j["radius_tol"] = c.radius_tol;
  j["threshold_tol"] = c.threshold_tol;
  j["r_max"] = c.r_max;
  j["seed"] = c.seed;
  j["dataset"] = c.dataset;
  j["csv"] = c.csv_path;
  j["categorical_columns"] = c.categorical_columns;
  j["continuous_columns"] = c.continuous_columns;
  j["label_column"] = c.label_column;
  j["n_examples"] = c.n_examples;
  j["samples"] = c.samples;
  j["epsilon_grid"] = c.epsilon_grid;
  j["mc_samples"] = c.mc_samples;
  j["mc_configs"] = c.mc_configs;
  j["perturb_phi"] = c.perturb_phi;
  j["dump_groups"] = c.dump_groups;
  j["plot_data"] = c.plot_data;
  return j;
}

template <typename T>
void read_field(const json& j, const char* key, T* dst) {
  if (j.contains(key)) {
    j.at(key).get_to(*dst);
  }
}

void config_from_json(const json& j, RunConfig* c) {
  read_field(j, "kernel", &c->kernel);
  read_field(j, "family", &c->family);
  read_field(j, "sigma", &c->sigma);
  read_field(j, "beta", &c->beta);
  read_field(j, "vocab", &c->vocab);
  read_field(j, "tau", &c->tau);
  read_field(j, "d", &c->d);
  read_field(j, "d_list", &c->d_list);
  read_field(j, "d_max", &c->d_max);
  read_field(j, "pa", &c->pa);
  read_field(j, "n", &c->n);
  read_field(j, "k", &c->k);
  read_field(j, "alpha_risk", &c->alpha_risk);
  read_field(j, "radius_tol", &c->radius_tol);
  read_field(j, "threshold_tol", &c->threshold_tol);
  read_field(j, "r_max", &c->r_max);
  read_field(j, "seed", &c->seed);
  read_field(j, "dataset", &c->dataset);
  read_field(j, "csv", &c->csv_path);
  read_field(j, "categorical_columns", &c->categorical_columns);
  read_field(j, "continuous_columns", &c->continuous_columns);
  read_field(j, "label_column", &c->label_column);
  read_field(j, "n_examples", &c->n_examples);
  read_field(j, "samples", &c->samples);
  read_field(j, "epsilon_grid", &c->epsilon_grid);
  read_field(j, "mc_samples", &c->mc_samples);
  read_field(j, "mc_configs", &c->mc_configs);
  read_field(j, "perturb_phi", &c->perturb_phi);
  read_field(j, "dump_groups", &c->dump_groups);
  read_field(j, "plot_data", &c->plot_data);
}

KernelParams kernel_from_config(const RunConfig& c) {
  KernelParams kernel;
  if (c.kernel == "uniform") {
    kernel.kind = KernelKind::kUniform;
  } else if (c.kernel == "absorbing") {
    kernel.kind = KernelKind::kAbsorbing;
  } else {
    throw ParameterError("kernel must be 'uniform' or 'absorbing'");
  }
  kernel.corruption_rate_beta = UnitProbability(c.beta);
  kernel.vocab_size = c.vocab;
  return kernel;
}

ThreatFamily family_from_config(const RunConfig& c) {
  if (c.family == "suffix") return ThreatFamily::kSuffixAppend;
  if (c.family == "l0") return ThreatFamily::kL0Replacement;
  throw ParameterError("family must be 'suffix' or 'l0'");
}

UnitProbability resolve_pa(const RunConfig& c) {
  const bool direct = c.pa >= 0.0;
  const bool counts = c.n >= 0 || c.k >= 0;
  if (direct && counts) {
    throw ParameterError("give either --pa or --n/--k, not both");
  }
  if (direct) {
    return UnitProbability(c.pa);
  }
  if (c.n < 1 || c.k < 0) {
    throw ParameterError("need --pa, or --n and --k for a Clopper-Pearson "
                         "bound");
  }
  return hybridcert::clopper_pearson_lower(
      {c.n, c.k, UnitProbability(c.alpha_risk)});
}

// Writes atomically: temp file in the target directory, then rename.
void write_output(const std::string& path, const std::string& content) {
  if (path.empty()) {
    std::cout << content;
    return;
  }
  namespace fs = std::filesystem;
  const fs::path target(path);
  const fs::path tmp =
      target.parent_path() /
      (target.filename().string() + ".tmp." + std::to_string(::getpid()));
  {
    std::ofstream f(tmp);
    if (!f) {
      throw ParameterError("cannot open '" + tmp.string() + "' for write");
    }
    f << content;
  }
  fs::rename(tmp, target);
}

std::string timestamp_line() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  char buf[64];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return std::string("# timestamp: ") + buf + "\n";
}

std::string provenance_header(const RunConfig& c) {
  std::string header = "# hybridcert " + c.command + "\n";
  header += timestamp_line();
  header += "# config: " + config_to_json(c).dump() + "\n";
  return header;
}

std::string format_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

std::vector<int> resolve_d_list(const RunConfig& c) {
  if (!c.d_list.empty() && c.d_max >= 0) {
    throw ParameterError("give either --d-list or --d-max, not both");
  }
  std::vector<int> ds = c.d_list;
  if (ds.empty() && c.d_max >= 0) {
    for (int d = 0; d <= c.d_max; ++d) ds.push_back(d);
  }
  if (ds.empty()) {
    throw ParameterError("frontier needs --d-list or --d-max");
  }
  std::sort(ds.begin(), ds.end());
  ds.erase(std::unique(ds.begin(), ds.end()), ds.end());
  if (ds.front() < 0) {
    throw ParameterError("budgets must be >= 0");
  }
  return ds;
}

int cmd_certify(const RunConfig& config) {
  const UnitProbability p_a = resolve_pa(config);
  const KernelParams kernel = kernel_from_config(config);
  const ThreatModel threat{family_from_config(config), config.d, kernel};
  const GroupedLikelihoodRatio groups = hybridcert::build_groups(threat);
  const CertificateResult cert = hybridcert::certified_radius(
      p_a, config.sigma, groups, UnitProbability(config.tau),
      config.radius_tol, config.threshold_tol, config.r_max, config.d);

  json record;
  record["p_a_lower"] = p_a.value();
  record["d"] = config.d;
  record["certified"] = cert.certified;
  record["radius"] = cert.certified_radius;
  record["worst_case_value"] = cert.worst_case_value_at_radius.value();
  record["bracket_limited"] = cert.bracket_limited;
  record["tolerances"] = {{"radius", cert.radius_tolerance},
                          {"threshold", cert.threshold_tolerance}};
  record["config"] = config_to_json(config);
  if (config.dump_groups) {
    record["groups"] = json::parse(hybridcert::groups_to_json(groups));
  }
  write_output(config.out_path, record.dump(2) + "\n");
  return 0;
}

int cmd_frontier(const RunConfig& config) {
  const UnitProbability p_a = resolve_pa(config);
  const std::vector<int> ds = resolve_d_list(config);
  const auto entries = hybridcert::frontier(
      p_a, config.sigma, kernel_from_config(config), family_from_config(config),
      ds, UnitProbability(config.tau), config.radius_tol, config.threshold_tol,
      config.r_max);

  std::string outp = provenance_header(config);
  if (config.plot_data) {
    outp += "d,radius\n";
    for (const auto& e : entries) {
      outp += std::to_string(e.budget_d) + "," +
              format_double(e.result.certified_radius) + "\n";
    }
  } else {
    outp += "d,radius,certified,worst_case_value\n";
    for (const auto& e : entries) {
      outp += std::to_string(e.budget_d) + "," +
              format_double(e.result.certified_radius) + "," +
              (e.result.certified ? "1" : "0") + "," +
              format_double(e.result.worst_case_value_at_radius.value()) + "\n";
    }
  }
  write_output(config.out_path, outp);
  return 0;
}

int cmd_sweep(const RunConfig& config) {
  namespace harness = hybridcert::harness;
  harness::Dataset dataset;
  harness::LinearModel model;
  if (config.dataset == "synthetic") {
    auto synthetic = harness::make_synthetic_linear(
        config.n_examples, {6, 6, 6, 6}, 4, config.seed);
    dataset = std::move(synthetic.dataset);
    model = std::move(synthetic.model);
  } else if (config.dataset == "csv") {
    if (config.csv_path.empty()) {
      throw ParameterError("sweep with --dataset csv needs --csv <path>");
    }
    harness::DatasetSpec spec;
    spec.source = harness::DatasetSource::kCsvFile;
    spec.categorical_columns = config.categorical_columns;
    spec.continuous_columns = config.continuous_columns;
    spec.label_column = config.label_column;
    dataset = harness::ingest_csv(config.csv_path, spec);
    model = harness::fit_centroid_linear(dataset);
  } else {
    throw ParameterError("dataset must be 'synthetic' or 'csv'");
  }

  if (!config.d_list.empty() && config.d_max >= 0) {
    throw ParameterError("give either --d-list or --d-max, not both");
  }
  std::vector<int> ds = config.d_list;
  if (ds.empty()) {
    const int top = config.d_max >= 0 ? config.d_max : 2;
    for (int d = 0; d <= top; ++d) ds.push_back(d);
  }
  std::vector<double> eps = config.epsilon_grid;
  if (eps.empty()) {
    for (int i = 0; i <= 12; ++i) eps.push_back(0.25 * i);
  }

  const KernelKind kind = kernel_from_config(config).kind;
  const auto table = harness::certified_accuracy_sweep(
      dataset, model.classifier(), kind, config.beta, config.sigma,
      UnitProbability(config.tau), ds, eps, config.samples,
      UnitProbability(config.alpha_risk), config.seed);

  std::string outp = provenance_header(config);
  if (dataset.rows_dropped_missing > 0) {
    outp += "# rows_dropped_missing: " +
            std::to_string(dataset.rows_dropped_missing) + "\n";
  }
  if (config.plot_data) {
    int current_d = -1;
    for (const auto& row : table.rows) {
      if (row.budget_d != current_d) {
        if (current_d >= 0) outp += "\n";
        current_d = row.budget_d;
        outp += "# d=" + std::to_string(current_d) + "\n";
        outp += "epsilon,certified_fraction\n";
      }
      outp += format_double(row.epsilon) + "," +
              format_double(row.certified_fraction) + "\n";
    }
  } else {
    outp += "d,epsilon,certified_fraction,n_examples,sigma,beta,tau,seed\n";
    for (const auto& row : table.rows) {
      outp += std::to_string(row.budget_d) + "," +
              format_double(row.epsilon) + "," +
              format_double(row.certified_fraction) + "," +
              std::to_string(row.n_examples) + "," +
              format_double(row.sigma) + "," + format_double(row.beta) + "," +
              format_double(row.tau) + "," + std::to_string(row.seed) + "\n";
    }
  }
  write_output(config.out_path, outp);
  return 0;
}

int cmd_verify(const RunConfig& config) {
  hybridcert::oracle::VerificationOptions options;
  options.mc_samples = config.mc_samples;
  options.mc_configs = config.mc_configs;
  options.seed = config.seed != 0 ? config.seed : 20240901;
  const auto report = hybridcert::oracle::run_verification(options);

  std::string outp = provenance_header(config);
  for (const auto& check : report.checks) {
    outp += std::string(check.passed ? "[PASS] " : "[FAIL] ") + check.name +
            " max_deviation=" + format_double(check.max_deviation);
    if (!check.detail.empty()) outp += " (" + check.detail + ")";
    outp += "\n";
  }
  outp += report.all_passed() ? "verification passed\n"
                              : "verification FAILED\n";
  write_output(config.out_path, outp);
  return report.all_passed() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hybrid randomized smoothing certification"};
  app.require_subcommand(1);

  RunConfig cli;
  std::string config_path;

  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path,
                    "JSON config file; explicit flags override its values");
    sub->add_option("--kernel", cli.kernel, "uniform | absorbing");
    sub->add_option("--family", cli.family, "suffix | l0");
    sub->add_option("--sigma", cli.sigma, "Gaussian smoothing scale");
    sub->add_option("--beta", cli.beta, "per-position corruption rate");
    sub->add_option("--vocab", cli.vocab, "vocabulary size (uniform kernel)");
    sub->add_option("--tau", cli.tau, "certification threshold");
    sub->add_option("--radius-tol", cli.radius_tol, "outer bisection tolerance");
    sub->add_option("--threshold-tol", cli.threshold_tol,
                    "inner (log t) bisection tolerance");
    sub->add_option("--r-max", cli.r_max, "radius search bound (0: 50*sigma)");
    sub->add_option("--seed", cli.seed, "master seed")
        ->envname("HYBRIDCERT_SEED");
    sub->add_option("--out", cli.out_path, "output path (default stdout)");
    sub->add_option("--perturb-phi", cli.perturb_phi,
                    "test-only CDF fault injection");
  };
  const auto add_pa = [&](CLI::App* sub) {
    sub->add_option("--pa", cli.pa, "clean smoothed score lower bound");
    sub->add_option("--n", cli.n, "Monte Carlo sample count");
    sub->add_option("--k", cli.k, "Monte Carlo success count");
    sub->add_option("--alpha-risk", cli.alpha_risk,
                    "Clopper-Pearson risk level");
  };

  auto* certify = app.add_subcommand("certify", "one hybrid certificate");
  add_common(certify);
  add_pa(certify);
  certify->add_option("--d", cli.d, "discrete budget");
  certify->add_flag("--dump-groups", cli.dump_groups,
                    "embed the grouped channel in the output");

  auto* frontier_cmd =
      app.add_subcommand("frontier", "certificates across discrete budgets");
  add_common(frontier_cmd);
  add_pa(frontier_cmd);
  frontier_cmd->add_option("--d-list", cli.d_list, "explicit budgets")
      ->delimiter(',');
  frontier_cmd->add_option("--d-max", cli.d_max, "budgets 0..d_max");
  frontier_cmd->add_flag("--plot-data", cli.plot_data,
                         "emit (x, y) columns only");

  auto* sweep = app.add_subcommand(
      "sweep", "certified-accuracy table on a mixed-feature dataset");
  add_common(sweep);
  sweep->add_option("--dataset", cli.dataset, "synthetic | csv");
  sweep->add_option("--csv", cli.csv_path, "CSV input path");
  sweep->add_option("--categorical-columns", cli.categorical_columns,
                    "CSV categorical column names")
      ->delimiter(',');
  sweep->add_option("--continuous-columns", cli.continuous_columns,
                    "CSV continuous column names")
      ->delimiter(',');
  sweep->add_option("--label-column", cli.label_column, "CSV label column");
  sweep->add_option("--n-examples", cli.n_examples,
                    "synthetic dataset size");
  sweep->add_option("--samples", cli.samples, "Monte Carlo samples per example");
  sweep->add_option("--alpha-risk", cli.alpha_risk,
                    "Clopper-Pearson risk level");
  sweep->add_option("--d-list", cli.d_list, "budgets to sweep")
      ->delimiter(',');
  sweep->add_option("--d-max", cli.d_max, "budgets 0..d_max");
  sweep->add_option("--epsilon-grid", cli.epsilon_grid, "epsilon values")
      ->delimiter(',');
  sweep->add_flag("--plot-data", cli.plot_data, "emit per-budget (x, y) blocks");

  auto* verify =
      app.add_subcommand("verify", "run the oracle cross-check grid");
  add_common(verify);
  verify->add_option("--mc-samples", cli.mc_samples,
                     "Monte Carlo samples per config");
  verify->add_option("--mc-configs", cli.mc_configs,
                     "number of randomized configs");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    CLI::App* sub = app.get_subcommands().front();
    RunConfig config;
    if (!config_path.empty()) {
      std::ifstream f(config_path);
      if (!f) {
        throw ParameterError("cannot read config '" + config_path + "'");
      }
      json j = json::parse(f);
      if (j.contains("config")) j = j.at("config");  // accept full artifacts
      config_from_json(j, &config);
    }
    // Explicit flags override config-file values.
    const auto overridden = [&sub](const std::string& flag) {
      return sub->count(flag) > 0;
    };
    if (overridden("--kernel")) config.kernel = cli.kernel;
    if (overridden("--family")) config.family = cli.family;
    if (overridden("--sigma")) config.sigma = cli.sigma;
    if (overridden("--beta")) config.beta = cli.beta;
    if (overridden("--vocab")) config.vocab = cli.vocab;
    if (overridden("--tau")) config.tau = cli.tau;
    if (overridden("--radius-tol")) config.radius_tol = cli.radius_tol;
    if (overridden("--threshold-tol")) config.threshold_tol = cli.threshold_tol;
    if (overridden("--r-max")) config.r_max = cli.r_max;
    if (sub->count("--seed") > 0 || std::getenv("HYBRIDCERT_SEED")) {
      config.seed = cli.seed;
    }
    if (overridden("--out")) config.out_path = cli.out_path;
    if (overridden("--perturb-phi")) config.perturb_phi = cli.perturb_phi;
    if (sub->get_name() == "certify" || sub->get_name() == "frontier" ||
        sub->get_name() == "sweep") {
      if (overridden("--alpha-risk")) config.alpha_risk = cli.alpha_risk;
    }
    if (sub->get_name() == "certify" || sub->get_name() == "frontier") {
      if (overridden("--pa")) config.pa = cli.pa;
      if (overridden("--n")) config.n = cli.n;
      if (overridden("--k")) config.k = cli.k;
    }
    if (sub->get_name() == "certify") {
      if (overridden("--d")) config.d = cli.d;
      if (overridden("--dump-groups")) config.dump_groups = cli.dump_groups;
    }
    if (sub->get_name() == "frontier" || sub->get_name() == "sweep") {
      if (overridden("--d-list")) config.d_list = cli.d_list;
      if (overridden("--d-max")) config.d_max = cli.d_max;
      if (overridden("--plot-data")) config.plot_data = cli.plot_data;
    }
    if (sub->get_name() == "sweep") {
      if (overridden("--dataset")) config.dataset = cli.dataset;
      if (overridden("--csv")) config.csv_path = cli.csv_path;
      if (overridden("--categorical-columns")) {
        config.categorical_columns = cli.categorical_columns;
      }
      if (overridden("--continuous-columns")) {
        config.continuous_columns = cli.continuous_columns;
      }
      if (overridden("--label-column")) config.label_column = cli.label_column;
      if (overridden("--n-examples")) config.n_examples = cli.n_examples;
      if (overridden("--samples")) config.samples = cli.samples;
      if (overridden("--epsilon-grid")) config.epsilon_grid = cli.epsilon_grid;
    }
    if (sub->get_name() == "verify") {
      if (overridden("--mc-samples")) config.mc_samples = cli.mc_samples;
      if (overridden("--mc-configs")) config.mc_configs = cli.mc_configs;
    }
    config.command = sub->get_name();

    if (config.perturb_phi != 0.0) {
      hybridcert::set_cdf_fault_for_testing(config.perturb_phi);
    }
    if (config.command == "certify") return cmd_certify(config);
    if (config.command == "frontier") return cmd_frontier(config);
    if (config.command == "sweep") return cmd_sweep(config);
    return cmd_verify(config);
  } catch (const ParameterError& e) {
    std::cerr << "parameter error: " << e.what() << "\n";
    return 2;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
