#include "common.hpp"

#include <openssl/evp.h>
#include <sys/resource.h>

#include <array>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace gmfcli {

using namespace gmfkit;

namespace {

Matrix covariate_file(const std::string& path, Index rows, const char* what,
                      std::vector<std::string>& names) {
  const LabeledMatrix cov = read_csv(path);
  if (cov.values.rows() != rows)
    throw ConfigError(std::string(what) + " '" + path + "' has " +
                      std::to_string(cov.values.rows()) + " rows, expected " +
                      std::to_string(rows));
  if (!cov.mask.all()) throw ConfigError(std::string(what) + " '" + path + "' has missing values");
  names = cov.col_names;
  return cov.values;
}

}  // namespace

Inputs load_inputs(const ModelOptions& opt, std::uint64_t seed) {
  Inputs in;
  LabeledMatrix y = read_response(opt.data, opt.mask);
  in.files.push_back(opt.data);
  if (!opt.mask.empty()) in.files.push_back(opt.mask);
  const Index n = y.values.rows();
  const Index m = y.values.cols();
  in.row_names = y.row_names.empty() ? numbered("r", n) : y.row_names;
  in.col_names = y.col_names.empty() ? numbered("c", m) : y.col_names;

  Matrix w = Matrix::Ones(n, m);
  if (!opt.weights.empty()) {
    const LabeledMatrix wf = read_csv(opt.weights);
    in.files.push_back(opt.weights);
    if (wf.values.rows() != n || wf.values.cols() != m)
      throw ConfigError("weights must be " + std::to_string(n) + " x " + std::to_string(m));
    w = wf.mask.select(wf.values, Matrix::Ones(n, m));
  }
  in.data = ResponseMatrix(std::move(y.values), std::move(y.mask), std::move(w));

  if (!opt.row_covariates.empty()) {
    in.covs.x = covariate_file(opt.row_covariates, n, "row covariates", in.x_names);
    in.files.push_back(opt.row_covariates);
  } else if (opt.no_intercept) {
    in.covs.x = Matrix(n, 0);
  } else {
    in.covs.x = Matrix::Ones(n, 1);
    in.x_names = {"intercept"};
  }
  if (!opt.col_covariates.empty()) {
    in.covs.z = covariate_file(opt.col_covariates, m, "column covariates", in.z_names);
    in.files.push_back(opt.col_covariates);
  } else {
    in.covs.z = Matrix(m, 0);
  }

  in.family = FamilySpec(parse_family(opt.family), opt.nb_shape);
  in.link = LinkSpec(opt.link.empty() ? canonical_link(in.family.kind) : parse_link(opt.link));
  if (!is_supported(in.family.kind, in.link.kind))
    throw ConfigError("unsupported family/link pair " + opt.family + "/" +
                      std::string(link_name(in.link.kind)));
  if (opt.penalty.size() != 4)
    throw ConfigError("--penalty takes four multipliers (B, Gamma, U, V)");
  in.penalty.lambda = opt.lambda;
  for (int k = 0; k < 4; ++k) in.penalty.multipliers[k] = opt.penalty[k];
  in.penalty.validate();
  in.init.kind = parse_init(opt.init);
  in.init.seed = seed;
  return in;
}

FitSettings fit_settings(const OptimOptions& opt, std::uint64_t seed) {
  FitSettings s;
  s.algorithm = parse_algorithm(opt.algorithm);
  const IdentifiabilityMode mode = parse_mode(opt.identify);
  std::optional<bool> dispersion;
  if (opt.dispersion == "on") {
    dispersion = true;
  } else if (opt.dispersion == "off") {
    dispersion = false;
  } else if (opt.dispersion != "auto") {
    throw ConfigError("--dispersion must be auto, on or off");
  }
  for (FitControls* c : {static_cast<FitControls*>(&s.sgd), static_cast<FitControls*>(&s.newton),
                         static_cast<FitControls*>(&s.airwls)}) {
    c->tol = opt.tol;
    c->damping = opt.damping;
    c->nafill_every = opt.nafill_every;
    c->estimate_dispersion = dispersion;
    c->identify = mode;
    c->seed = seed;
  }
  s.sgd.max_epochs = opt.max_epochs;
  s.sgd.rate_k0 = opt.rate_k0;
  s.sgd.rate_k1 = opt.rate_k1;
  s.sgd.rate_tau = opt.rate_tau;
  s.sgd.mb_rows = opt.batch_rows;
  s.sgd.mb_cols = opt.batch_cols;
  s.sgd.smooth_a1 = opt.smooth_a1;
  s.sgd.smooth_a2 = opt.smooth_a2;
  s.newton.max_iter = opt.max_iter;
  s.newton.stepsize = opt.newton_stepsize;
  s.airwls.max_iter = opt.max_iter;
  s.airwls.stepsize = opt.airwls_stepsize;
  s.airwls.nsteps = opt.airwls_nsteps;
  s.sgd.validate();
  s.newton.validate();
  s.airwls.validate();
  return s;
}

std::string sha256_file(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ParseError("cannot open '" + path.string() + "'");
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  std::array<char, 1 << 16> buf{};
  while (f) {
    f.read(buf.data(), buf.size());
    if (f.gcount() > 0) EVP_DigestUpdate(ctx, buf.data(), static_cast<std::size_t>(f.gcount()));
  }
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, md.data(), &len);
  EVP_MD_CTX_free(ctx);
  std::ostringstream hex;
  for (unsigned int k = 0; k < len; ++k)
    hex << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[k]);
  return hex.str();
}

void write_json(const fs::path& path, const ordered_json& value) {
  write_text(path, value.dump(2) + "\n");
}

ordered_json read_json(const fs::path& path) {
  try {
    return ordered_json::parse(read_text(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

void write_manifest(const fs::path& out, const RunRecord& rec, const ordered_json& outputs) {
  ordered_json j;
  j["command"] = rec.command;
  j["args"] = rec.args;
  j["config"] = rec.config_snapshot;
  j["seed"] = rec.seed;
  ordered_json sums = ordered_json::object();
  for (const auto& f : rec.inputs) sums[f] = sha256_file(f);
  if (!rec.config_file.empty()) sums[rec.config_file] = sha256_file(rec.config_file);
  j["input_sha256"] = sums;
  j["library_version"] = kVersion;
  j["outputs"] = outputs;
  j["runtime"] = "runtime.json";
  write_json(out / "manifest.json", j);
}

void write_runtime(const fs::path& out, const RunRecord& rec) {
  rusage usage{};
  getrusage(RUSAGE_SELF, &usage);
  ordered_json j;
  j["wall_clock_seconds"] =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - rec.start).count();
  // ru_maxrss is in kilobytes on Linux.
  j["peak_memory_bytes"] = static_cast<std::int64_t>(usage.ru_maxrss) * 1024;
  j["threads"] = rec.threads;
  write_json(out / "runtime.json", j);
}

ordered_json number(double x) { return std::isfinite(x) ? ordered_json(x) : ordered_json(nullptr); }

ordered_json numbers(const std::vector<double>& xs) {
  ordered_json a = ordered_json::array();
  for (double x : xs) a.push_back(number(x));
  return a;
}

std::vector<std::string> numbered(const std::string& prefix, Index count) {
  std::vector<std::string> out;
  for (Index k = 0; k < count; ++k) out.push_back(prefix + std::to_string(k + 1));
  return out;
}

void write_factors(const fs::path& out, const FactorizationState& s, const Inputs& in) {
  const auto factors = numbered("f", s.rank());
  write_csv(out / "U.csv", s.u, in.row_names, factors);
  write_csv(out / "V.csv", s.v, in.col_names, factors);
  write_csv(out / "B.csv", s.b, in.col_names,
            in.x_names.empty() ? numbered("x", s.b.cols()) : in.x_names);
  write_csv(out / "Gamma.csv", s.gamma, in.row_names,
            in.z_names.empty() ? numbered("z", s.gamma.cols()) : in.z_names);
}

ordered_json fit_report_json(const FitResult& fit, const Inputs& in, const FitSettings& settings) {
  const FitReport& r = fit.report;
  const FactorizationState& s = fit.state;
  ordered_json j;
  j["status"] = r.converged ? "converged" : "max_iterations";
  j["algorithm"] = r.algorithm;
  j["family"] = family_name(in.family.kind);
  j["link"] = link_name(in.link.kind);
  j["n"] = s.n();
  j["m"] = s.m();
  j["p"] = s.b.cols();
  j["q"] = s.gamma.cols();
  j["rank"] = s.rank();
  j["observed"] = in.data.observed_count();
  j["converged"] = r.converged;
  j["epochs_run"] = r.epochs_run;
  j["final_objective"] = number(r.final_objective);
  j["objective_trace"] = numbers(r.objective_trace);
  j["phi"] = number(s.phi);
  j["phi_trace"] = numbers(r.phi_trace);
  j["nb_shape"] = number(s.nb_shape);
  j["nb_shape_trace"] = numbers(r.nb_shape_trace);
  j["effective_rank"] = r.effective_rank;
  j["rank_deficient"] = r.rank_deficient;
  const IdentifiabilityMode mode = settings.controls().identify;
  j["identify"] = mode_name(mode);
  j["constraint_violation"] = number(check_constraints(s, in.covs, mode).max_violation());
  try {
    const InformationCriteria ic = information_criteria(s, in.data, in.covs, in.family, in.link);
    j["aic"] = number(ic.aic);
    j["bic"] = number(ic.bic);
    j["deviance"] = number(ic.deviance);
    j["parameters"] = ic.k;
  } catch (const Error&) {
    j["aic"] = nullptr;
    j["bic"] = nullptr;
  }
  ordered_json pen;
  pen["lambda"] = in.penalty.lambda;
  pen["multipliers"] = in.penalty.multipliers;
  j["penalty"] = pen;
  return j;
}

}  // namespace gmfcli
