// gmfkit command-line tool: fit, cv, eval, simulate and replay.

#include <algorithm>
#include <fstream>
#include <functional>
#include <iostream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "commands.hpp"

namespace gmfcli {
namespace {

using namespace gmfkit;

void add_model_options(CLI::App* sub, ModelOptions& o) {
  sub->add_option("--data", o.data, "Response matrix (.csv or .mtx)")->required();
  sub->add_option("--mask", o.mask, "File listing unobserved entries (1-based row col)");
  sub->add_option("--weights", o.weights, "CSV of prior weights (default 1)");
  sub->add_option("--row-covariates", o.row_covariates, "CSV of row covariates X (n rows)");
  sub->add_option("--col-covariates", o.col_covariates, "CSV of column covariates Z (m rows)");
  sub->add_flag("--no-intercept", o.no_intercept,
                "Without --row-covariates, use no X instead of an intercept column");
  sub->add_option("--family", o.family,
                  "gaussian, gamma, inverse_gaussian, poisson, bernoulli or negbinomial")
      ->capture_default_str();
  sub->add_option("--link", o.link, "identity, log, logit, inverse or inverse_squared "
                                    "(default: canonical)");
  sub->add_option("--nb-shape", o.nb_shape, "Negative binomial shape when not estimated")
      ->capture_default_str();
  sub->add_option("--lambda", o.lambda, "Ridge penalty")->capture_default_str();
  sub->add_option("--penalty", o.penalty, "Multipliers for B, Gamma, U, V")
      ->delimiter(',')
      ->expected(4)
      ->capture_default_str();
  sub->add_option("--init", o.init, "ols-svd or glm-svd")->capture_default_str();
}

void add_optim_options(CLI::App* sub, OptimOptions& o) {
  sub->add_option("--algorithm", o.algorithm, "asgd, newton or airwls")->capture_default_str();
  sub->add_option("--max-epochs", o.max_epochs, "aSGD epochs")->capture_default_str();
  sub->add_option("--max-iter", o.max_iter, "quasi-Newton / AIRWLS iterations")
      ->capture_default_str();
  sub->add_option("--tol", o.tol, "Relative objective change for convergence")
      ->capture_default_str();
  sub->add_option("--damping", o.damping)->capture_default_str();
  sub->add_option("--nafill-every", o.nafill_every, "Updates between imputation refills")
      ->capture_default_str();
  sub->add_option("--newton-stepsize", o.newton_stepsize)->capture_default_str();
  sub->add_option("--airwls-stepsize", o.airwls_stepsize)->capture_default_str();
  sub->add_option("--airwls-nsteps", o.airwls_nsteps)->capture_default_str();
  sub->add_option("--learning-rate", o.rate_k0, "aSGD k0")->capture_default_str();
  sub->add_option("--rate-decay", o.rate_k1, "aSGD k1")->capture_default_str();
  sub->add_option("--rate-power", o.rate_tau, "aSGD tau")->capture_default_str();
  sub->add_option("--batch-rows", o.batch_rows, "aSGD minibatch rows")->capture_default_str();
  sub->add_option("--batch-cols", o.batch_cols, "aSGD minibatch columns")
      ->capture_default_str();
  sub->add_option("--smooth-grad", o.smooth_a1, "aSGD gradient smoothing a1")
      ->capture_default_str();
  sub->add_option("--smooth-hess", o.smooth_a2, "aSGD Hessian smoothing a2")
      ->capture_default_str();
  sub->add_option("--dispersion", o.dispersion, "Estimate phi: auto, on or off")
      ->capture_default_str();
  sub->add_option("--identify", o.identify, "B1, B2 or B3")->capture_default_str();
}

void add_common(CLI::App* sub, int& threads, std::string& out, std::string& config) {
  sub->add_option("--out", out, "Output directory")->required();
  sub->add_option("--threads", threads, "Worker cap (0: all cores)")
      ->envname("GMFKIT_THREADS")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  sub->add_option("--config", config, "TOML file whose keys mirror the flags; flags win");
}

bool has_flag(const std::vector<std::string>& args, const std::string& flag) {
  return std::any_of(args.begin(), args.end(), [&](const std::string& a) {
    return a == flag || a.rfind(flag + "=", 0) == 0;
  });
}

std::string flag_value(const std::vector<std::string>& args, const std::string& flag) {
  for (std::size_t k = 0; k < args.size(); ++k) {
    if (args[k] == flag && k + 1 < args.size()) return args[k + 1];
    if (args[k].rfind(flag + "=", 0) == 0) return args[k].substr(flag.size() + 1);
  }
  return {};
}

// Inserts the keys of the --config file that are not given as flags. Keys
// may sit at the top level or in a section named after the subcommand.
std::vector<std::string> expand_config(const std::vector<std::string>& argv) {
  if (argv.empty() || !has_flag(argv, "--config")) return argv;
  const std::string path = flag_value(argv, "--config");
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open config file '" + path + "'");
  std::vector<CLI::ConfigItem> items;
  try {
    items = CLI::ConfigTOML().from_config(in);
  } catch (const CLI::Error& e) {
    throw ParseError(path + ": " + e.what());
  }
  std::vector<std::string> extra;
  for (const CLI::ConfigItem& item : items) {
    const bool here = item.parents.empty() || (item.parents.size() == 1 && item.parents[0] == argv[0]);
    if (!here || item.name.empty() || item.name == "config" || item.name[0] == '+' ||
        item.name[0] == '-')
      continue;
    const std::string flag = "--" + item.name;
    if (has_flag(argv, flag)) continue;
    if (item.inputs.size() == 1) {
      extra.push_back(flag + "=" + item.inputs.front());
    } else {
      extra.push_back(flag);
      extra.insert(extra.end(), item.inputs.begin(), item.inputs.end());
    }
  }
  std::vector<std::string> out{argv.front()};
  out.insert(out.end(), extra.begin(), extra.end());
  out.insert(out.end(), argv.begin() + 1, argv.end());
  return out;
}

// Replaces the value of `flag` in args, or appends it.
void override_flag(std::vector<std::string>& args, const std::string& flag,
                   const std::string& value) {
  for (std::size_t k = 0; k < args.size(); ++k) {
    if (args[k] == flag && k + 1 < args.size()) {
      args[k + 1] = value;
      return;
    }
    if (args[k].rfind(flag + "=", 0) == 0) {
      args[k] = flag + "=" + value;
      return;
    }
  }
  args.push_back(flag);
  args.push_back(value);
}

int run_cli(std::vector<std::string> argv);

int dispatch(const std::vector<std::string>& argv) {
  CLI::App app{"Penalized generalized matrix factorization", "gmfkit"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  int threads = 0;
  FitArgs fit;
  CvArgs cv;
  EvalArgs ev;
  SimulateArgs sim;
  std::string config;
  std::string manifest_path;
  std::string replay_out;

  CLI::App* fit_cmd = app.add_subcommand("fit", "Fit a factorization and write the factors");
  add_model_options(fit_cmd, fit.model);
  add_optim_options(fit_cmd, fit.optim);
  fit_cmd->add_option("--rank", fit.rank, "Latent rank d")->capture_default_str();
  fit_cmd->add_option("--seed", fit.seed)->capture_default_str();
  add_common(fit_cmd, threads, fit.out, config);

  CLI::App* cv_cmd = app.add_subcommand("cv", "Select the rank by holdout cross-validation");
  add_model_options(cv_cmd, cv.model);
  add_optim_options(cv_cmd, cv.optim);
  cv_cmd->add_option("--ranks", cv.ranks, "Rank grid, e.g. 1:8 or 1,2,4")->capture_default_str();
  cv_cmd->add_option("--folds", cv.folds)->capture_default_str();
  cv_cmd->add_option("--holdout-fraction", cv.holdout_fraction)->capture_default_str();
  cv_cmd->add_option("--criterion", cv.criterion, "cv, aic, bic, scree or all")
      ->capture_default_str();
  cv_cmd->add_option("--scree-max-rank", cv.scree_max_rank, "Scree length (0: min(10, n, m))")
      ->capture_default_str();
  cv_cmd->add_flag("--no-warm-start", cv.no_warm_start);
  cv_cmd->add_option("--seed", cv.seed)->capture_default_str();
  add_common(cv_cmd, threads, cv.out, config);

  CLI::App* eval_cmd = app.add_subcommand("eval", "Out-of-sample accuracy against the mean");
  add_model_options(eval_cmd, ev.model);
  add_optim_options(eval_cmd, ev.optim);
  eval_cmd->add_option("--rank", ev.rank)->capture_default_str();
  eval_cmd->add_option("--holdout-fraction", ev.holdout_fraction)->capture_default_str();
  eval_cmd->add_option("--fit", ev.fit_dir, "Evaluate the fit saved in this directory");
  eval_cmd->add_option("--test-mask", ev.test_mask,
                       "With --fit: entries to score (mask-file format)");
  eval_cmd->add_option("--seed", ev.seed)->capture_default_str();
  add_common(eval_cmd, threads, ev.out, config);

  CLI::App* sim_cmd = app.add_subcommand("simulate", "Draw a synthetic dataset");
  sim_cmd->add_option("--preset", sim.preset, "small, medium or large")->capture_default_str();
  sim_cmd->add_option("--n", sim.n);
  sim_cmd->add_option("--m", sim.m);
  sim_cmd->add_option("--rank", sim.rank, "True latent rank");
  sim_cmd->add_option("--groups", sim.groups);
  sim_cmd->add_option("--group-probs", sim.group_probs)->delimiter(',');
  sim_cmd->add_option("--batches", sim.batches);
  sim_cmd->add_option("--batch-scale", sim.batch_scale);
  sim_cmd->add_option("--libsize-sd", sim.libsize_sd);
  sim_cmd->add_option("--family", sim.family)->capture_default_str();
  sim_cmd->add_option("--link", sim.link);
  sim_cmd->add_option("--nb-shape", sim.nb_shape)->capture_default_str();
  sim_cmd->add_option("--phi", sim.phi)->capture_default_str();
  sim_cmd->add_option("--seed", sim.seed)->capture_default_str();
  add_common(sim_cmd, threads, sim.out, config);

  CLI::App* replay_cmd = app.add_subcommand("replay", "Re-run the command in a manifest.json");
  replay_cmd->add_option("--manifest", manifest_path)->required();
  replay_cmd->add_option("--out", replay_out, "Override the output directory");
  replay_cmd->add_option("--threads", threads)->envname("GMFKIT_THREADS");

  const std::vector<std::string> expanded = expand_config(argv);
  std::vector<std::string> reversed(expanded.rbegin(), expanded.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kInputError;
  }

  if (replay_cmd->parsed()) {
    const ordered_json m = read_json(manifest_path);
    if (!m.contains("command") || !m.contains("args"))
      throw ConfigError(manifest_path + " is not a gmfkit manifest");
    std::vector<std::string> args{m["command"].get<std::string>()};
    for (const auto& v : m["args"]) args.push_back(v.get<std::string>());
    if (!replay_out.empty()) override_flag(args, "--out", replay_out);
    if (replay_cmd->count("--threads") > 0)
      override_flag(args, "--threads", std::to_string(threads));
    return run_cli(args);
  }

  CLI::App* sub = app.get_subcommands().front();
  RunRecord rec;
  rec.command = sub->get_name();
  rec.args.assign(argv.begin() + 1, argv.end());
  rec.config_snapshot = sub->config_to_str(true, false);
  if (!config.empty()) rec.config_file = config;
  rec.threads =
      threads > 0 ? threads : static_cast<int>(std::max(1U, std::thread::hardware_concurrency()));
  set_num_threads(rec.threads);

  if (sub == fit_cmd) {
    rec.seed = fit.seed;
    return run_fit(fit, rec);
  }
  if (sub == cv_cmd) {
    rec.seed = cv.seed;
    return run_cv(cv, rec);
  }
  if (sub == eval_cmd) {
    rec.seed = ev.seed;
    return run_eval(ev, rec);
  }
  rec.seed = sim.seed;
  return run_simulate(sim, rec);
}

int run_cli(std::vector<std::string> argv) {
  try {
    return dispatch(argv);
  } catch (const DivergenceError& e) {
    std::cerr << "gmfkit: diverged: " << e.what() << "\n";
    return kDiverged;
  } catch (const Error& e) {
    std::cerr << "gmfkit: error: " << e.what() << "\n";
    return kInputError;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "gmfkit: error: " << e.what() << "\n";
    return kInputError;
  }
}

}  // namespace
}  // namespace gmfcli

int main(int argc, char** argv) {
  return gmfcli::run_cli(std::vector<std::string>(argv + 1, argv + argc));
}
