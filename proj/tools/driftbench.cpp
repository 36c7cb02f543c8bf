// driftbench command line: Monte Carlo experiments, bound validation,
// assumption suites and one-off transport / CVaR computations.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "driftbench/driftbench.hpp"

namespace fs = std::filesystem;
using namespace driftbench;
using namespace driftbench::harness;

namespace {

constexpr const char* kOutputEnv = "DRIFTBENCH_OUT";

fs::path default_output_dir() {
  if (const char* env = std::getenv(kOutputEnv); env && *env) return env;
  return "driftbench_out";
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

/// Reads a flat config file: either a JSON object or `key = value` lines
/// (`#` starts a comment). Keys are flag names without the leading dashes.
std::vector<std::pair<std::string, std::string>> read_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read config file '" + path.string() + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  std::vector<std::pair<std::string, std::string>> out;
  if (trim(text).rfind('{', 0) == 0) {
    const auto j = nlohmann::json::parse(text);
    if (!j.is_object()) throw std::runtime_error("config '" + path.string() + "': expected an object");
    for (const auto& [key, value] : j.items()) {
      if (value.is_string()) {
        out.emplace_back(key, value.get<std::string>());
      } else if (value.is_boolean()) {
        out.emplace_back(key, value.get<bool>() ? "true" : "false");
      } else if (value.is_number_integer()) {
        out.emplace_back(key, std::to_string(value.get<long long>()));
      } else if (value.is_number()) {
        std::ostringstream os;
        os.precision(17);
        os << value.get<double>();
        out.emplace_back(key, os.str());
      } else {
        throw std::runtime_error("config '" + path.string() + "': key '" + key +
                                 "' must be a scalar");
      }
    }
    return out;
  }
  std::istringstream lines(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(lines, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::runtime_error("config '" + path.string() + "' line " + std::to_string(lineno) +
                               ": expected key = value");
    }
    out.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return out;
}

/// Splices config-file values in front of the command-line flags of the
/// subcommand, so later (command-line) occurrences win.
std::vector<std::string> expand_config(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  std::optional<fs::path> config;
  for (std::size_t i = 1; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) {
      config = args[i + 1];
      args.erase(args.begin() + static_cast<std::ptrdiff_t>(i),
                 args.begin() + static_cast<std::ptrdiff_t>(i + 2));
      break;
    }
    if (args[i].rfind("--config=", 0) == 0) {
      config = args[i].substr(9);
      args.erase(args.begin() + static_cast<std::ptrdiff_t>(i));
      break;
    }
  }
  if (!config) return args;
  std::vector<std::string> injected;
  for (const auto& [key, value] : read_config(*config)) injected.push_back("--" + key + "=" + value);
  // Insert after the subcommand path (the leading non-flag tokens).
  std::size_t pos = 1;
  while (pos < args.size() && !args[pos].empty() && args[pos][0] != '-') ++pos;
  args.insert(args.begin() + static_cast<std::ptrdiff_t>(pos), injected.begin(), injected.end());
  return args;
}

/// Atoms separated by ';', coordinates by ',', optional weight after '@'.
/// "1;2;3" is uniform on {1, 2, 3}; "0,0@0.25;1,1@0.75" has explicit weights.
DiscreteDistribution parse_law(const std::string& text) {
  std::vector<Vector> atoms;
  std::vector<double> weights;
  bool weighted = false;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ';')) {
    item = trim(item);
    if (item.empty()) continue;
    std::string coords = item;
    double w = 0.0;
    if (const auto at = item.find('@'); at != std::string::npos) {
      coords = item.substr(0, at);
      w = std::stod(item.substr(at + 1));
      weighted = true;
    }
    Vector atom;
    std::stringstream cs(coords);
    std::string c;
    while (std::getline(cs, c, ',')) atom.push_back(std::stod(c));
    atoms.push_back(std::move(atom));
    weights.push_back(w);
  }
  if (atoms.empty()) throw std::invalid_argument("empty distribution '" + text + "'");
  if (!weighted) return DiscreteDistribution::uniform(std::move(atoms));
  return {std::move(atoms), std::move(weights)};
}

std::string file_stem(const ExperimentConfig& c) {
  return std::string(to_string(c.experiment)) + "_" + to_string(c.variant) + "_" +
         to_string(c.schedule);
}

struct RunArgs {
  std::string experiment = "adaptive_filtering";
  std::string variant = "all";
  std::string schedule = "all";
  std::optional<std::size_t> T, m, n, runs, threads, eval_samples, max_retries;
  std::optional<double> alpha, step_c, noise, drift, l1_weight;
  std::optional<std::uint64_t> seed;
  std::string out;
};

int do_run(const RunArgs& a) {
  const Experiment e = parse_experiment(a.experiment);
  std::vector<Variant> variants;
  if (a.variant == "all") {
    variants = {Variant::kUnconstrained, Variant::kBoxConstrained, Variant::kL1Regularized};
  } else {
    variants = {parse_variant(a.variant)};
  }
  std::vector<ScheduleKind> schedules;
  if (a.schedule == "all") {
    schedules = {ScheduleKind::kConstantOverSqrtHorizon, ScheduleKind::kDecayingOverSqrtRound};
  } else {
    schedules = {parse_schedule(a.schedule)};
  }
  const fs::path out = a.out.empty() ? default_output_dir() : fs::path(a.out);

  int status = 0;
  for (Variant v : variants) {
    for (ScheduleKind k : schedules) {
      ExperimentConfig c = defaults(e);
      c.variant = v;
      c.schedule = k;
      if (a.T) c.T = *a.T;
      if (a.m) c.m = *a.m;
      if (a.n) c.n = *a.n;
      if (a.runs) c.runs = *a.runs;
      if (a.threads) c.threads = *a.threads;
      if (a.eval_samples) c.evaluation_samples = *a.eval_samples;
      if (a.max_retries) c.max_retries = *a.max_retries;
      if (a.alpha) c.alpha = *a.alpha;
      if (a.step_c) c.step_c = *a.step_c;
      if (a.noise) c.noise_variance = *a.noise;
      if (a.drift) c.drift_scale = *a.drift;
      if (a.l1_weight) c.l1_weight = *a.l1_weight;
      if (a.seed) c.seed = *a.seed;

      const auto result = run_experiment(c);
      const std::string stem = file_stem(c);
      export_csv(result, out / (stem + ".csv"));
      export_summary(result, out / (stem + "_summary.txt"));
      std::cout << stem << ": runs=" << result.n_runs << " failures=" << result.failures
                << " retries=" << result.retries << " final_mean_relative_regret="
                << (result.mean.empty() ? std::string("nan")
                                        : harness::internal::format_number(result.mean.back()))
                << " wall_seconds=" << harness::internal::format_number(result.wall_seconds)
                << '\n';
      if (result.failures > 0) status = 2;
    }
  }
  std::cout << "wrote " << out.string() << '\n';
  return status;
}

int do_validate_bounds(const BoundValidationSettings& s, const std::string& out_arg) {
  const auto report = run_bound_validation(s);
  std::string csv = "fixture,seed,measured,bound,reference,pass\n";
  for (const auto& c : report.cases) {
    csv += c.fixture + ',' + std::to_string(c.seed) + ',' +
           harness::internal::format_number(c.measured) + ',' +
           harness::internal::format_number(c.bound) + ',' +
           harness::internal::format_number(c.reference) + ',' + (c.pass ? "1" : "0") + '\n';
  }
  const fs::path out = out_arg.empty() ? default_output_dir() : fs::path(out_arg);
  harness::internal::write_file(out / "bound_validation.csv", csv);
  for (const char* f : {"quadratic_exact", "drifting_sgd", "drifting_sgd_variance", "drifting_prox_box"}) {
    std::size_t total = 0;
    for (const auto& c : report.cases) total += c.fixture == f;
    std::cout << (report.violations(f) == 0 ? "PASS " : "FAIL ") << f << "  cases=" << total
              << " violations=" << report.violations(f) << '\n';
  }
  return report.pass() ? 0 : 1;
}

int do_diagnose(const SuiteSettings& s, const std::string& out_arg) {
  const auto reports = run_assumption_suites(s);
  const fs::path out = out_arg.empty() ? default_output_dir() : fs::path(out_arg);
  export_reports(reports, out);
  std::cout << reports_summary_text(reports);
  for (const auto& r : reports) {
    if (!r.pass) return 1;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"driftbench: online stochastic optimization under distribution drift"};
  app.require_subcommand(1);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app.set_help_all_flag("--help-all", "Show help for all subcommands");
  // Handled before parsing; declared so it shows up in --help.
  std::string config_note;
  app.add_option("--config", config_note,
                 "Config file (JSON object or key = value lines) supplying any subcommand flag; "
                 "command-line flags override it");

  RunArgs ra;
  auto* run = app.add_subcommand("run", "Monte Carlo experiment over variants and schedules");
  run->add_option("--experiment", ra.experiment, "adaptive_filtering | cvar")->capture_default_str();
  run->add_option("--variant", ra.variant, "unconstrained | box_constrained | l1_regularized | all")
      ->capture_default_str();
  run->add_option("--schedule", ra.schedule, "constant | decaying | all")->capture_default_str();
  run->add_option("--T", ra.T, "Horizon");
  run->add_option("--m", ra.m, "Minibatch size per round");
  run->add_option("--n", ra.n, "Parameter dimension");
  run->add_option("--alpha", ra.alpha, "CVaR level");
  run->add_option("--runs", ra.runs, "Monte Carlo runs");
  run->add_option("--seed", ra.seed, "Master seed");
  run->add_option("--threads", ra.threads, "Worker threads (0: all cores)");
  run->add_option("--step-c", ra.step_c, "Step-size constant c");
  run->add_option("--noise-variance", ra.noise, "Observation noise variance");
  run->add_option("--drift-scale", ra.drift, "Drift variance scale (variance scale / t)");
  run->add_option("--l1-weight", ra.l1_weight, "Weight of the l1 penalty");
  run->add_option("--evaluation-samples", ra.eval_samples, "Fresh samples per round for CVaR loss");
  run->add_option("--max-retries", ra.max_retries, "Reseeds allowed per degenerate run");
  run->add_option("--out", ra.out, std::string("Output directory (default $") + kOutputEnv + ")");

  BoundValidationSettings bs;
  std::string bounds_out;
  auto* bounds = app.add_subcommand("validate-bounds", "Check measured regret against the regret bounds");
  bounds->add_option("--seeds", bs.seeds, "Seeds per fixture")->capture_default_str();
  bounds->add_option("--seed", bs.master_seed, "Master seed")->capture_default_str();
  bounds->add_option("--T", bs.horizon, "Horizon")->capture_default_str();
  bounds->add_option("--out", bounds_out, "Output directory");

  SuiteSettings ss;
  std::string diag_out;
  auto* diag = app.add_subcommand("diagnose", "Run the assumption suites");
  diag->add_option("--seed", ss.seed, "Master seed")->capture_default_str();
  diag->add_option("--pl-points", ss.pl_points, "Points for the isotropic PL check")->capture_default_str();
  diag->add_option("--drift-fixtures", ss.drift_fixtures, "Random drift fixtures")->capture_default_str();
  diag->add_option("--cvar-fixtures", ss.cvar_fixtures, "Random CVaR fixtures")->capture_default_str();
  diag->add_option("--out", diag_out, "Output directory");

  auto* oracle = app.add_subcommand("oracle", "One-off W1 / CVaR computations");
  oracle->require_subcommand(1);
  // Atom lists may arrive as one ';'-joined token or as several tokens.
  std::vector<std::string> law_p, law_q, law_z;
  auto joined = [](const std::vector<std::string>& parts) {
    std::string s;
    for (const auto& part : parts) s += (s.empty() ? "" : ";") + part;
    return s;
  };
  double alpha = 0.95;
  auto* w1 = oracle->add_subcommand("w1", "Exact W1 between two discrete laws");
  w1->add_option("--p", law_p, "Atoms 'x,y@w;...' (weights optional)")->required()->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
  w1->add_option("--q", law_q, "Atoms 'x,y@w;...' (weights optional)")->required()->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
  auto* cvar = oracle->add_subcommand("cvar", "VaR and CVaR of a scalar discrete law");
  cvar->add_option("--z", law_z, "Values 'z@w;...' (weights optional)")->required()->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
  cvar->add_option("--alpha", alpha, "Tail level in (0, 1]")->capture_default_str();

  std::vector<std::string> args;
  try {
    args = expand_config(argc, argv);
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << '\n';
    return 1;
  }
  std::vector<char*> cargs;
  for (auto& s : args) cargs.push_back(s.data());
  try {
    app.parse(static_cast<int>(cargs.size()), cargs.data());
  } catch (const CLI::ParseError& ex) {
    return app.exit(ex);
  }

  try {
    if (*run) return do_run(ra);
    if (*bounds) return do_validate_bounds(bs, bounds_out);
    if (*diag) return do_diagnose(ss, diag_out);
    if (*w1) {
      const auto p = parse_law(joined(law_p));
      const auto q = parse_law(joined(law_q));
      std::cout << "w1=" << harness::internal::format_number(w1_discrete(p, q).distance) << '\n';
      return 0;
    }
    if (*cvar) {
      const auto z = parse_law(joined(law_z));
      const auto mz = cvar_minimizer(z, alpha);
      std::cout << "var=" << harness::internal::format_number(var_discrete(z, alpha)) << '\n'
                << "cvar=" << harness::internal::format_number(mz.value) << '\n'
                << "h_star=" << harness::internal::format_number(mz.h) << '\n';
      return 0;
    }
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << '\n';
    return 1;
  }
  return 1;
}
