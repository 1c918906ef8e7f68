#include "commands.hpp"

#include <algorithm>
#include <sstream>

namespace gmfcli {

using namespace gmfkit;

namespace {

fs::path prepare_out(const std::string& out) {
  if (out.empty()) throw ConfigError("--out is required");
  const fs::path dir(out);
  fs::create_directories(dir);
  return dir;
}

void finish(const fs::path& dir, const RunRecord& rec, const ordered_json& outputs) {
  write_manifest(dir, rec, outputs);
  write_runtime(dir, rec);
}

ordered_json names(std::initializer_list<const char*> files) {
  ordered_json a = ordered_json::array();
  for (const char* f : files) a.push_back(f);
  return a;
}

}  // namespace

std::vector<Index> parse_ranks(const std::string& text) {
  std::vector<Index> out;
  std::stringstream ss(text);
  std::string item;
  auto to_index = [&](const std::string& s) -> Index {
    std::size_t used = 0;
    long v = 0;
    try {
      v = std::stol(s, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != s.size() || s.empty()) throw ConfigError("invalid rank '" + s + "' in --ranks");
    if (v < 0) throw ConfigError("ranks must be non-negative");
    return v;
  };
  while (std::getline(ss, item, ',')) {
    const auto colon = item.find(':');
    if (colon == std::string::npos) {
      out.push_back(to_index(item));
      continue;
    }
    const Index lo = to_index(item.substr(0, colon));
    const Index hi = to_index(item.substr(colon + 1));
    if (hi < lo) throw ConfigError("empty rank range '" + item + "'");
    for (Index r = lo; r <= hi; ++r) out.push_back(r);
  }
  if (out.empty()) throw ConfigError("--ranks is empty");
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

int run_fit(const FitArgs& a, RunRecord& rec) {
  const fs::path dir = prepare_out(a.out);
  const Inputs in = load_inputs(a.model, a.seed);
  rec.inputs = in.files;
  const FitSettings settings = fit_settings(a.optim, a.seed);
  const FactorizationState init =
      initialize(in.data, in.covs, in.family, in.link, a.rank, in.init).state;
  FitResult fit;
  try {
    fit = fit_model(in.data, in.covs, in.family, in.link, in.penalty, settings, init);
  } catch (const DivergenceError& e) {
    ordered_json j;
    j["status"] = "diverged";
    j["algorithm"] = algorithm_name(settings.algorithm);
    j["error"] = e.what();
    write_json(dir / "fit_report.json", j);
    finish(dir, rec, names({"fit_report.json"}));
    throw;
  }
  write_factors(dir, fit.state, in);
  write_json(dir / "fit_report.json", fit_report_json(fit, in, settings));
  finish(dir, rec, names({"U.csv", "V.csv", "B.csv", "Gamma.csv", "fit_report.json"}));
  return fit.report.converged ? kOk : kNotConverged;
}

int run_cv(const CvArgs& a, RunRecord& rec) {
  const fs::path dir = prepare_out(a.out);
  const Inputs in = load_inputs(a.model, a.seed);
  rec.inputs = in.files;
  const Index n = in.data.rows();
  const Index m = in.data.cols();
  const Index scree_k =
      a.scree_max_rank > 0 ? std::min<Index>(a.scree_max_rank, std::min(n, m))
                           : std::min<Index>(10, std::min(n, m));
  static const std::vector<std::string> kCriteria{"cv", "aic", "bic", "scree", "all"};
  if (std::find(kCriteria.begin(), kCriteria.end(), a.criterion) == kCriteria.end())
    throw ConfigError("--criterion must be one of cv, aic, bic, scree, all");

  ordered_json report;
  report["criterion"] = a.criterion;
  std::vector<double> eig;
  int code = kOk;
  if (a.criterion == "scree") {
    eig = scree_eigenvalues(in.data, in.covs, scree_k);
    const ElbowPick pick = elbow_pick(eig);
    report["scree"] = {{"eigenvalues", numbers(eig)},
                       {"elbow", pick.rank},
                       {"ambiguous", pick.ambiguous},
                       {"warning", pick.warning}};
    report["chosen"] = {{"scree", pick.rank}};
  } else {
    CvOptions opts;
    opts.folds = a.folds;
    opts.holdout_fraction = a.holdout_fraction;
    opts.seed = a.seed;
    opts.fit = fit_settings(a.optim, a.seed);
    opts.penalty = in.penalty;
    opts.init = in.init;
    opts.warm_start = !a.no_warm_start;
    opts.information_criteria = a.criterion != "cv";
    opts.scree_max_rank = scree_k;
    const std::vector<Index> ranks = parse_ranks(a.ranks);
    const RankSelectionReport r =
        cv_rank_select(in.data, in.covs, in.family, in.link, ranks, opts);
    eig = r.scree_eigenvalues;

    report["family"] = family_name(in.family.kind);
    report["link"] = link_name(in.link.kind);
    report["algorithm"] = algorithm_name(opts.fit.algorithm);
    report["ranks"] = r.ranks;
    report["folds"] = r.folds;
    report["holdout_fraction"] = a.holdout_fraction;
    ordered_json cells = ordered_json::array();
    for (const CvCell& c : r.cells) {
      ordered_json cell;
      cell["rank"] = c.rank;
      cell["fold"] = c.fold;
      cell["status"] = c.failed ? "failed" : "ok";
      if (c.failed) cell["error"] = c.error;
      cell["deviance"] = number(c.deviance);
      cell["rel_deviance"] = number(c.rel_deviance);
      cell["epochs"] = c.epochs;
      cell["converged"] = c.converged;
      cells.push_back(cell);
    }
    report["cells"] = cells;
    report["cv_mean_deviance"] = numbers(r.cv_mean);
    report["cv_mean_rel_deviance"] = numbers(r.cv_rel_mean);
    if (!r.aic.empty()) {
      report["aic"] = numbers(r.aic);
      report["bic"] = numbers(r.bic);
    }
    report["scree"] = {{"eigenvalues", numbers(r.scree_eigenvalues)},
                       {"ambiguous", r.scree_ambiguous},
                       {"warning", r.scree_warning}};
    ordered_json chosen = ordered_json::object();
    for (const auto& [name, rank] : r.chosen) chosen[name] = rank;
    report["chosen"] = chosen;
    report["failed_cells"] = r.failed_cells;
    const auto total = static_cast<int>(r.cells.size());
    // At least half of the cells must succeed.
    if (2 * r.failed_cells > total) code = kDiverged;
  }
  write_json(dir / "rank_report.json", report);
  std::string csv = "rank,eigenvalue\n";
  for (std::size_t k = 0; k < eig.size(); ++k)
    csv += std::to_string(k + 1) + "," + format_double(eig[k]) + "\n";
  write_text(dir / "scree.csv", csv);
  finish(dir, rec, names({"rank_report.json", "scree.csv"}));
  return code;
}

namespace {

FactorizationState load_fit(const fs::path& dir, const Inputs& in) {
  auto load = [&](const char* name) { return read_csv(dir / name).values; };
  FactorizationState s;
  s.u = load("U.csv");
  s.v = load("V.csv");
  s.b = load("B.csv");
  s.gamma = load("Gamma.csv");
  const ordered_json rep = read_json(dir / "fit_report.json");
  if (rep.contains("phi") && rep["phi"].is_number()) s.phi = rep["phi"].get<double>();
  if (rep.contains("nb_shape") && rep["nb_shape"].is_number())
    s.nb_shape = rep["nb_shape"].get<double>();
  check_shapes(s, in.data, in.covs);
  return s;
}

ordered_json metrics_json(const EvalResult& r, double ybar) {
  ordered_json j;
  j["rel_log_rmse"] = number(r.rel_log_rmse);
  j["rel_deviance"] = number(r.rel_deviance);
  j["n_test"] = r.n_test;
  j["baseline_mean"] = number(ybar);
  return j;
}

}  // namespace

int run_eval(const EvalArgs& a, RunRecord& rec) {
  const fs::path dir = prepare_out(a.out);
  ModelOptions model = a.model;
  if (!a.fit_dir.empty()) {
    // Family and link default to those recorded with the fit.
    const ordered_json rep = read_json(fs::path(a.fit_dir) / "fit_report.json");
    if (rep.contains("family") && rep["family"].is_string())
      model.family = rep["family"].get<std::string>();
    if (model.link.empty() && rep.contains("link") && rep["link"].is_string())
      model.link = rep["link"].get<std::string>();
  }
  const Inputs in = load_inputs(model, a.seed);
  rec.inputs = in.files;
  const Index n = in.data.rows();
  const Index m = in.data.cols();

  ordered_json out;
  int code = kOk;
  if (!a.fit_dir.empty()) {
    for (const char* f : {"U.csv", "V.csv", "B.csv", "Gamma.csv", "fit_report.json"})
      rec.inputs.push_back((fs::path(a.fit_dir) / f).string());
    const FactorizationState s = load_fit(a.fit_dir, in);
    Mask test = in.data.mask();
    if (!a.test_mask.empty()) {
      test = (!read_mask(a.test_mask, n, m)) && in.data.mask();
      rec.inputs.push_back(a.test_mask);
    }
    EntryList entries;
    double train_sum = 0.0;
    Index train_count = 0;
    for (Index j = 0; j < m; ++j) {
      for (Index i = 0; i < n; ++i) {
        if (test(i, j)) {
          entries.emplace_back(i, j);
        } else if (in.data.observed(i, j)) {
          train_sum += in.data.value(i, j);
          ++train_count;
        }
      }
    }
    if (entries.empty()) throw ConfigError("no observed entries to evaluate");
    const double ybar = train_count > 0 ? train_sum / static_cast<double>(train_count)
                                        : observed_mean(in.data);
    const Matrix mu = fitted_means(s, in.covs, in.link);
    out = metrics_json(evaluate(in.data.values(), mu, entries, ybar, in.family), ybar);
    out["source"] = "fit";
  } else {
    const Holdout h = holdout_mask(in.data, a.holdout_fraction, a.seed);
    if (h.test.empty()) throw ConfigError("--holdout-fraction leaves no test entries");
    const FitSettings settings = fit_settings(a.optim, a.seed);
    const FactorizationState init =
        initialize(h.train, in.covs, in.family, in.link, a.rank, in.init).state;
    const FitResult fit =
        fit_model(h.train, in.covs, in.family, in.link, in.penalty, settings, init);
    const double ybar = observed_mean(h.train);
    const Matrix mu = fitted_means(fit.state, in.covs, in.link);
    out = metrics_json(evaluate(in.data.values(), mu, h.test, ybar, in.family), ybar);
    out["source"] = "holdout";
    out["holdout_fraction"] = a.holdout_fraction;
    out["rank"] = a.rank;
    out["algorithm"] = fit.report.algorithm;
    out["converged"] = fit.report.converged;
    out["epochs_run"] = fit.report.epochs_run;
    if (!fit.report.converged) code = kNotConverged;
  }
  out["family"] = family_name(in.family.kind);
  out["link"] = link_name(in.link.kind);
  write_json(dir / "metrics.json", out);
  finish(dir, rec, names({"metrics.json"}));
  return code;
}

int run_simulate(const SimulateArgs& a, RunRecord& rec) {
  SimConfig cfg = sim_preset(a.preset);
  if (a.n) cfg.n = *a.n;
  if (a.m) cfg.m = *a.m;
  if (a.rank) cfg.d_true = *a.rank;
  if (a.groups) {
    cfg.n_groups = *a.groups;
    if (a.group_probs.empty())
      cfg.group_probs.assign(static_cast<std::size_t>(std::max(cfg.n_groups, 0)),
                             1.0 / std::max(cfg.n_groups, 1));
  }
  if (!a.group_probs.empty()) {
    cfg.group_probs = a.group_probs;
    if (!a.groups) cfg.n_groups = static_cast<int>(a.group_probs.size());
  }
  if (a.batches) cfg.n_batches = *a.batches;
  if (a.batch_scale) cfg.batch_effect_scale = *a.batch_scale;
  if (a.libsize_sd) cfg.libsize_log_sd = *a.libsize_sd;
  cfg.family = FamilySpec(parse_family(a.family), a.nb_shape);
  cfg.link = LinkSpec(a.link.empty() ? canonical_link(cfg.family.kind) : parse_link(a.link));
  cfg.phi = a.phi;
  cfg.seed = a.seed;
  cfg.validate();

  const fs::path dir = prepare_out(a.out);
  const SimData sim = generate(cfg);
  const auto rows = numbered("r", cfg.n);
  const auto cols = numbered("c", cfg.m);
  std::vector<std::string> xnames{"intercept"};
  for (int b = 2; b <= cfg.n_batches; ++b) xnames.push_back("batch" + std::to_string(b));
  const auto factors = numbered("f", cfg.d_true);

  write_csv(dir / "Y.csv", sim.data.values(), rows, cols);
  write_csv(dir / "X.csv", sim.covs.x, rows, xnames);
  write_csv(dir / "Z.csv", sim.covs.z, cols, {"libsize"});
  const FactorizationState& t = sim.truth.params;
  write_csv(dir / "truth_U.csv", t.u, rows, factors);
  write_csv(dir / "truth_V.csv", t.v, cols, factors);
  write_csv(dir / "truth_B.csv", t.b, cols, xnames);
  write_csv(dir / "truth_Gamma.csv", t.gamma, rows, {"libsize"});
  write_csv(dir / "truth_mu.csv", sim.truth.mu, rows, cols);
  std::string labels = "\"\",group,batch\n";
  for (Index i = 0; i < cfg.n; ++i)
    labels += rows[static_cast<std::size_t>(i)] + "," +
              std::to_string(sim.truth.groups[static_cast<std::size_t>(i)] + 1) + "," +
              std::to_string(sim.truth.batches[static_cast<std::size_t>(i)] + 1) + "\n";
  write_text(dir / "labels.csv", labels);

  ordered_json info;
  info["n"] = cfg.n;
  info["m"] = cfg.m;
  info["d_true"] = cfg.d_true;
  info["n_groups"] = cfg.n_groups;
  info["group_probs"] = cfg.group_probs;
  info["n_batches"] = cfg.n_batches;
  info["batch_effect_scale"] = cfg.batch_effect_scale;
  info["libsize_log_sd"] = cfg.libsize_log_sd;
  info["family"] = family_name(cfg.family.kind);
  info["link"] = link_name(cfg.link.kind);
  info["phi"] = cfg.phi;
  info["seed"] = cfg.seed;
  info["loadings_rescaled"] = sim.truth.rescaled;
  write_json(dir / "simulation.json", info);
  finish(dir, rec,
         names({"Y.csv", "X.csv", "Z.csv", "truth_U.csv", "truth_V.csv", "truth_B.csv",
                "truth_Gamma.csv", "truth_mu.csv", "labels.csv", "simulation.json"}));
  return kOk;
}

}  // namespace gmfcli
