#include "rdsens/cli.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "json.hpp"
#include "rdsens/checks.hpp"
#include "rdsens/errors.hpp"
#include "rdsens/estimators.hpp"
#include "rdsens/model_io.hpp"
#include "rdsens/reference.hpp"
#include "rdsens/report_io.hpp"

namespace rdsens::cli {

namespace {

struct Options {
  std::string config_path;
  std::string model = "rbm1d";
  std::vector<double> alpha;
  std::string method = "ipa";  // comma-separated list allowed for sweep
  double delta = 1e-3;
  double horizon = 1.0;
  long trials = 10000;
  uint64_t seed = 0;
  int threads = 0;  // 0: RDSENS_THREADS or hardware concurrency
  double epsilon = 1e-4;
  bool central = false;
  std::string output;
  std::string dump_path;
  std::string axis;
  std::vector<double> values;
  int coord = 0;  // 1-based coordinate filter for sweep rows, 0 = all
  int atlas_dim = 3;
  double atlas_sigma2 = 3e-4;
  double atlas_p = 0.5;
};

void add_common_options(CLI::App* cmd, Options& opt) {
  cmd->add_option("--config", opt.config_path,
                  "JSON file with flat keys mirroring the flags; explicit "
                  "flags win");
  cmd->add_option("--model", opt.model,
                  "rbm1d | atlas_rbm | atlas_sde | path to a model JSON file");
  cmd->add_option("--alpha", opt.alpha, "parameter vector, comma separated")
      ->delimiter(',');
  cmd->add_option("--method", opt.method, "ipa | lr | fd (list allowed in sweep)");
  cmd->add_option("--delta", opt.delta, "time step");
  cmd->add_option("--t", opt.horizon, "horizon; t/delta must be an integer");
  cmd->add_option("--trials", opt.trials, "Monte Carlo trials (>= 2)");
  cmd->add_option("--seed", opt.seed, "master seed");
  cmd->add_option("--threads", opt.threads,
                  "worker threads (default: RDSENS_THREADS or hardware)");
  cmd->add_option("--epsilon", opt.epsilon, "finite-difference bump");
  cmd->add_flag("--central", opt.central, "central finite differences");
  cmd->add_option("--output", opt.output,
                  "result path (.json for JSON, CSV otherwise; default stdout)");
  cmd->add_option("--dump-path", opt.dump_path,
                  "write the first trial's trajectory as CSV");
  cmd->add_option("--m", opt.coord, "restrict sweep rows to one coordinate (1-based)");
  cmd->add_option("--atlas-dim", opt.atlas_dim, "number of Atlas assets");
  cmd->add_option("--atlas-sigma2", opt.atlas_sigma2, "Atlas variance sigma^2");
  cmd->add_option("--atlas-p", opt.atlas_p, "diversity exponent p in (0,1)");
}

// Fill fields the command line left untouched from the config file.
void apply_config_file(const CLI::App* cmd, Options& opt) {
  if (opt.config_path.empty()) return;
  std::ifstream in(opt.config_path);
  if (!in) throw ConfigError("cannot open config file '" + opt.config_path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config file: invalid JSON: ") + e.what());
  }
  auto unset = [&](const char* flag) { return cmd->count(flag) == 0; };
  try {
    if (j.contains("model") && unset("--model")) opt.model = j["model"].get<std::string>();
    if (j.contains("alpha") && unset("--alpha"))
      opt.alpha = j["alpha"].get<std::vector<double>>();
    if (j.contains("method") && unset("--method")) opt.method = j["method"].get<std::string>();
    if (j.contains("delta") && unset("--delta")) opt.delta = j["delta"].get<double>();
    if (j.contains("t") && unset("--t")) opt.horizon = j["t"].get<double>();
    if (j.contains("trials") && unset("--trials")) opt.trials = j["trials"].get<long>();
    if (j.contains("seed") && unset("--seed")) opt.seed = j["seed"].get<uint64_t>();
    if (j.contains("threads") && unset("--threads")) opt.threads = j["threads"].get<int>();
    if (j.contains("epsilon") && unset("--epsilon")) opt.epsilon = j["epsilon"].get<double>();
    if (j.contains("central") && unset("--central")) opt.central = j["central"].get<bool>();
    if (j.contains("output") && unset("--output")) opt.output = j["output"].get<std::string>();
    if (j.contains("dump_path") && unset("--dump-path"))
      opt.dump_path = j["dump_path"].get<std::string>();
    if (j.contains("axis") && unset("--axis") && cmd->get_option_no_throw("--axis"))
      opt.axis = j["axis"].get<std::string>();
    if (j.contains("values") && unset("--values") && cmd->get_option_no_throw("--values"))
      opt.values = j["values"].get<std::vector<double>>();
    if (j.contains("m") && unset("--m")) opt.coord = j["m"].get<int>();
    if (j.contains("atlas_dim") && unset("--atlas-dim")) opt.atlas_dim = j["atlas_dim"].get<int>();
    if (j.contains("atlas_sigma2") && unset("--atlas-sigma2"))
      opt.atlas_sigma2 = j["atlas_sigma2"].get<double>();
    if (j.contains("atlas_p") && unset("--atlas-p")) opt.atlas_p = j["atlas_p"].get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config file: bad value type: ") + e.what());
  }
}

int resolve_threads(int flag_value) {
  if (flag_value > 0) return flag_value;
  if (const char* env = std::getenv("RDSENS_THREADS")) {
    const int v = std::atoi(env);
    if (v > 0) return v;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

Eigen::VectorXd to_vector(const std::vector<double>& v) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  for (size_t i = 0; i < v.size(); ++i) out(static_cast<Eigen::Index>(i)) = v[i];
  return out;
}

// A resolved model: either a reflected-diffusion model with its functional,
// or the unconstrained Atlas SDE exposed as an FD payoff.
struct ResolvedModel {
  std::optional<LoadedModel> reflected;
  std::optional<PayoffFn> sde_payoff;
  int param_dim = 0;
  Eigen::VectorXd default_alpha;
  std::string id;
};

ResolvedModel resolve_model(const Options& opt, const EulerConfig& config) {
  ResolvedModel r;
  r.id = opt.model;
  if (opt.model == "rbm1d") {
    r.reflected = LoadedModel{
        make_rbm1d(),
        Functional::terminal_quadratic(0.0, Eigen::VectorXd::Ones(1),
                                       Eigen::MatrixXd())};
    r.param_dim = 3;
    r.default_alpha = Eigen::Vector3d(1.0, -1.0, 1.0);
  } else if (opt.model == "atlas_rbm") {
    auto [model, functional] =
        make_atlas_rbm(opt.atlas_dim, std::sqrt(opt.atlas_sigma2), opt.atlas_p);
    r.reflected = LoadedModel{std::move(model), std::move(functional)};
    r.param_dim = 1;
    r.default_alpha = Eigen::VectorXd::Ones(1);
  } else if (opt.model == "atlas_sde") {
    const int J = opt.atlas_dim;
    const double sigma = std::sqrt(opt.atlas_sigma2);
    const double p = opt.atlas_p;
    const double delta = config.delta;
    const long steps = config.steps;
    r.sde_payoff = [J, sigma, p, delta, steps](const Eigen::VectorXd& alpha,
                                               GaussianStream stream) {
      if (!(alpha(0) > 0.0))
        throw ModelError("atlas_sde: alpha must be positive");
      const double growth = sigma * sigma / (2.0 * alpha(0));
      const SdeModel sde = make_atlas_sde(J, sigma, growth);
      GaussianIncrements noise(stream, delta);
      const Eigen::MatrixXd path = simulate_sde(sde, delta, steps, noise);
      return diversity(rank_descending(path.col(steps)), p);
    };
    r.param_dim = 1;
    r.default_alpha = Eigen::VectorXd::Ones(1);
  } else {
    r.reflected = load_model_file(opt.model);
    r.param_dim = r.reflected->model.param_dim;
    r.default_alpha = Eigen::VectorXd::Zero(0);  // must come from flags
  }
  return r;
}

Eigen::VectorXd resolve_alpha(const Options& opt, const ResolvedModel& model) {
  if (!opt.alpha.empty()) {
    Eigen::VectorXd a = to_vector(opt.alpha);
    if (a.size() != model.param_dim)
      throw ConfigError("alpha has " + std::to_string(a.size()) +
                        " coordinates, model expects " +
                        std::to_string(model.param_dim));
    return a;
  }
  if (model.default_alpha.size() == model.param_dim) return model.default_alpha;
  throw ConfigError("--alpha is required for model '" + model.id + "'");
}

void write_text(const std::string& path, const std::string& text,
                std::ostream& stdout_stream) {
  if (path.empty()) {
    stdout_stream << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot open output file '" + path + "'");
  out << text;
}

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() &&
         s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

EstimateReport run_one(const Options& opt, const ResolvedModel& model,
                       Method method, const Eigen::VectorXd& alpha,
                       const EulerConfig& config, double epsilon) {
  MonteCarloOptions mc;
  mc.trials = opt.trials;
  mc.master_seed = opt.seed;
  mc.threads = resolve_threads(opt.threads);
  mc.epsilon = epsilon;
  mc.fd_central = opt.central;

  if (model.sde_payoff) {
    if (method != Method::fd)
      throw ConfigError("model atlas_sde supports only the fd method");
    return monte_carlo_fd(*model.sde_payoff, model.param_dim, alpha, config, mc);
  }
  return monte_carlo(method, model.reflected->model, alpha,
                     model.reflected->functional, config, mc);
}

void maybe_dump_trajectory(const Options& opt, const ResolvedModel& model,
                           Method method, const Eigen::VectorXd& alpha,
                           const EulerConfig& config) {
  if (opt.dump_path.empty()) return;
  if (model.sde_payoff)
    throw ConfigError("--dump-path applies to reflected models only");
  const Trajectory traj =
      simulate(model.reflected->model, alpha, config,
               GaussianStream(opt.seed, 0), method == Method::ipa);
  std::ofstream out(opt.dump_path, std::ios::binary);
  if (!out) throw ConfigError("cannot open dump file '" + opt.dump_path + "'");
  write_trajectory_csv(traj, out);
}

int cmd_estimate(const Options& opt, std::ostream& out) {
  if (opt.trials < 2) throw ConfigError("estimation needs --trials >= 2");
  const EulerConfig config = EulerConfig::from_horizon(opt.delta, opt.horizon);
  const ResolvedModel model = resolve_model(opt, config);
  const Eigen::VectorXd alpha = resolve_alpha(opt, model);
  const Method method = parse_method(opt.method);

  const EstimateReport report =
      run_one(opt, model, method, alpha, config, opt.epsilon);
  maybe_dump_trajectory(opt, model, method, alpha, config);

  if (ends_with(opt.output, ".json")) {
    write_text(opt.output, report_json(report) + "\n", out);
  } else {
    write_text(opt.output, report_csv_header() + "\n" + report_csv_rows(report),
               out);
  }
  return kExitOk;
}

// Reference constants apply only to the published rbm1d configuration.
const double* truth_for(const std::string& model_id,
                        const Eigen::VectorXd& alpha, double horizon) {
  static const double truth[3] = {reference::Rbm1dTruth::dTheta_dx,
                                  reference::Rbm1dTruth::dTheta_db,
                                  reference::Rbm1dTruth::dTheta_dsigma};
  if (model_id != "rbm1d" || alpha.size() != 3 || std::abs(horizon - 1.0) > 1e-12)
    return nullptr;
  if (std::abs(alpha(0) - 1.0) > 1e-12 || std::abs(alpha(1) + 1.0) > 1e-12 ||
      std::abs(alpha(2) - 1.0) > 1e-12)
    return nullptr;
  return truth;
}

int cmd_sweep(const Options& opt, std::ostream& out) {
  if (opt.trials < 2) throw ConfigError("estimation needs --trials >= 2");
  if (opt.axis != "delta" && opt.axis != "time" && opt.axis != "epsilon")
    throw ConfigError("--axis must be delta, time or epsilon");
  if (opt.values.empty()) throw ConfigError("--values must not be empty");

  std::vector<std::string> methods;
  {
    std::istringstream is(opt.method);
    std::string tok;
    while (std::getline(is, tok, ',')) methods.push_back(tok);
  }

  std::string csv = std::string(kReportCsvHeader) + ",rel_bias\n";
  for (const double value : opt.values) {
    for (const std::string& method_name_ : methods) {
      Options point = opt;
      double epsilon = opt.epsilon;
      if (opt.axis == "delta") {
        point.delta = value;
      } else if (opt.axis == "time") {
        point.horizon = value;
      } else {
        epsilon = value;
      }
      const Method method = (opt.axis == "epsilon")
                                ? Method::fd
                                : parse_method(method_name_);
      const EulerConfig config =
          EulerConfig::from_horizon(point.delta, point.horizon);
      const ResolvedModel model = resolve_model(point, config);
      const Eigen::VectorXd alpha = resolve_alpha(point, model);
      const EstimateReport report =
          run_one(point, model, method, alpha, config, epsilon);

      const double* truth = truth_for(model.id, alpha, point.horizon);
      auto rel_bias = [&](int m) -> std::string {
        if (!truth) return "";
        const double t = truth[m - 1];
        return format_double((report.mean(m - 1) - t) / std::abs(t));
      };
      csv += report_csv_rows(report, opt.coord, rel_bias);
      if (opt.axis == "epsilon") break;  // methods are fixed on this axis
    }
  }
  write_text(opt.output, csv, out);
  return kExitOk;
}

int cmd_validate(const Options& opt, const CLI::App* cmd, std::ostream& out) {
  std::vector<checks::CheckResult> results;
  try {
    results = checks::run_all_checks(opt.seed == 0 ? 20240501u : opt.seed);
  } catch (const std::exception& e) {
    results.push_back({"suite", false, e.what()});
  }

  if (cmd->count("--model") > 0) {
    try {
      const EulerConfig config(opt.delta, 1);
      const ResolvedModel model = resolve_model(opt, config);
      if (model.sde_payoff)
        throw ConfigError("validate supports reflected models only");
      const Eigen::VectorXd alpha = resolve_alpha(opt, model);
      for (auto& r : checks::loaded_model_checks(model.reflected->model,
                                                 model.reflected->functional,
                                                 alpha, opt.seed + 17))
        results.push_back(std::move(r));
    } catch (const ConfigError&) {
      throw;  // malformed flags/files are configuration errors
    } catch (const std::exception& e) {
      results.push_back({"model.load", false, e.what()});
    }
  }

  size_t failed = 0;
  for (const auto& r : results) {
    out << (r.passed ? "PASS  " : "FAIL  ") << r.name;
    if (!r.passed && !r.detail.empty()) out << ": " << r.detail;
    out << "\n";
    if (!r.passed) ++failed;
  }
  out << (failed == 0 ? "all checks passed" : std::to_string(failed) + " check(s) failed")
      << " (" << results.size() << " total)\n";
  return failed == 0 ? kExitOk : kExitNumerical;
}

void write_error_json(std::ostream& err, const std::string& type,
                      const std::string& message) {
  nlohmann::json j;
  j["error"]["type"] = type;
  j["error"]["message"] = message;
  err << j.dump() << "\n";
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out,
        std::ostream& err) {
  CLI::App app{"sensitivity estimation for reflected diffusions in convex "
               "polyhedral domains"};
  app.require_subcommand(1);

  Options opt;
  CLI::App* estimate = app.add_subcommand(
      "estimate", "run one Monte Carlo gradient estimate");
  add_common_options(estimate, opt);

  CLI::App* sweep = app.add_subcommand(
      "sweep", "estimate across a sweep axis and emit one CSV table");
  add_common_options(sweep, opt);
  sweep->add_option("--axis", opt.axis, "delta | time | epsilon")->required();
  sweep->add_option("--values", opt.values, "axis values, comma separated")
      ->delimiter(',')
      ->required();

  CLI::App* validate = app.add_subcommand(
      "validate", "run the built-in invariant suites (optionally on a model)");
  add_common_options(validate, opt);

  std::vector<std::string> argv_storage;
  argv_storage.push_back("rdsens");
  for (const auto& a : args) argv_storage.push_back(a);
  std::vector<const char*> argv;
  argv.reserve(argv_storage.size());
  for (const auto& s : argv_storage) argv.push_back(s.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    write_error_json(err, "config", e.what());
    return kExitConfig;
  }

  try {
    CLI::App* active = estimate->parsed()   ? estimate
                       : sweep->parsed()    ? sweep
                                            : validate;
    apply_config_file(active, opt);
    if (estimate->parsed()) return cmd_estimate(opt, out);
    if (sweep->parsed()) return cmd_sweep(opt, out);
    return cmd_validate(opt, validate, out);
  } catch (const ConfigError& e) {
    write_error_json(err, "config", e.what());
    return kExitConfig;
  } catch (const Error& e) {
    write_error_json(err, "numerical", e.what());
    return kExitNumerical;
  } catch (const std::exception& e) {
    write_error_json(err, "internal", e.what());
    return kExitNumerical;
  }
}

int run_main(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args, std::cout, std::cerr);
}

}  // namespace rdsens::cli
