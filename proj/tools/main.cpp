// gelboot command-line front end.
//
// Subcommands: estimate, bootstrap, mc, pseudo-true, kde.
// Exit codes: 0 success, 2 input error, 3 numerical failure,
//             4 failure after partial results were written.

#include <CLI11.hpp>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <json.hpp>

#include "gelboot/bootstrap.hpp"
#include "gelboot/dgp.hpp"
#include "gelboot/gmm.hpp"
#include "gelboot/kde.hpp"
#include "gelboot/mc.hpp"
#include "gelboot/model_factory.hpp"
#include "gelboot/stats.hpp"

using nlohmann::json;
using namespace gelboot;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 2;
constexpr int kExitNumeric = 3;
constexpr int kExitPartial = 4;

struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// set once any output file has been written; upgrades failures to exit 4
bool g_partial = false;

int fail(int code, const std::string& message) {
  if (g_partial && code != kExitOk) code = kExitPartial;
  json err;
  err["error"]["code"] = code;
  err["error"]["message"] = message;
  std::cout << err.dump(2) << std::endl;
  return code;
}

int default_threads() {
  if (const char* env = std::getenv("GELBOOT_THREADS")) {
    const int t = std::atoi(env);
    if (t >= 1) return t;
  }
  return 1;
}

Dataset load_data(const std::string& path) {
  try {
    Dataset d = read_csv(path);
    d.validate();
    return d;
  } catch (const std::exception& e) {
    throw InputError(std::string("data: ") + e.what());
  }
}

std::unique_ptr<MomentModel> load_model(const std::string& path, const Dataset& data) {
  try {
    return model_from_json_file(path, data);
  } catch (const std::exception& e) {
    throw InputError(std::string("model: ") + e.what());
  }
}

json vec_to_json(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

json gel_report(GelKind kind, const MomentModel& model, const Dataset& data,
                const SolveOptions& opts) {
  const GelFit fit = estimate(kind, model, data, opts);
  const RobustCovariance cov = covariance(kind, model, data, fit);
  const double n = static_cast<double>(data.n());
  const ModelDims d = model.dims();

  json rep;
  rep["kind"] = to_string(kind);
  rep["n"] = data.n();
  rep["theta"] = vec_to_json(fit.theta_hat);
  rep["lambda"] = vec_to_json(fit.lambda_hat);
  rep["criterion"] = fit.criterion;
  rep["foc_residual"] = fit.foc_residual;
  rep["converged"] = fit.converged;
  json se_c = json::array(), se_mr = json::array();
  for (Eigen::Index a = 0; a < d.l_theta; ++a) {
    se_c.push_back(std::sqrt(cov.sigma_c(a, a) / n));
    se_mr.push_back(std::sqrt(cov.sigma_mr(a, a) / n));
  }
  rep["se_c"] = se_c;
  rep["se_mr"] = se_mr;
  if (kind == GelKind::EL) {
    const UbcDiagnostic ubc = ubc_diagnostic(fit, model, data, opts);
    rep["ubc"] = {{"min_slack", ubc.min_slack}, {"flag", ubc.flag}};
  }
  if (d.l_g > d.l_theta) {
    json jt = json::array();
    for (const JTestResult& t : j_tests(fit, model, data))
      jt.push_back({{"variant", t.variant},
                    {"statistic", t.statistic},
                    {"df", t.df},
                    {"p_value", t.p_value}});
    rep["j_tests"] = jt;
  }
  return rep;
}

json gmm_report(const MomentModel& model, const Dataset& data, const SolveOptions& opts) {
  const GmmFit fit = gmm_estimate(model, data, opts);
  const double n = static_cast<double>(data.n());
  const ModelDims d = model.dims();
  json rep;
  rep["kind"] = "GMM";
  rep["n"] = data.n();
  rep["theta"] = vec_to_json(fit.theta_hat);
  rep["criterion"] = fit.criterion;
  rep["converged"] = fit.converged;
  json se_c = json::array();
  for (Eigen::Index a = 0; a < d.l_theta; ++a)
    se_c.push_back(std::sqrt(fit.sigma_c(a, a) / n));
  rep["se_c"] = se_c;
  if (d.l_g > d.l_theta) {
    const int df = static_cast<int>(d.l_g - d.l_theta);
    rep["j_tests"] = json::array({{{"variant", "GMM-J"},
                                   {"statistic", fit.j_stat},
                                   {"df", df},
                                   {"p_value", stats::chi2_sf(fit.j_stat, df)}}});
  }
  return rep;
}

void print_estimate_table(const json& rep) {
  std::cout << rep["kind"].get<std::string>() << "  (n=" << rep["n"].get<long>() << ")\n";
  const auto& theta = rep["theta"];
  for (std::size_t a = 0; a < theta.size(); ++a) {
    std::cout << "  theta[" << a << "] = " << theta[a].get<double>()
              << "   se_C = " << rep["se_c"][a].get<double>();
    if (rep.contains("se_mr"))
      std::cout << "   se_MR = " << rep["se_mr"][a].get<double>();
    std::cout << "\n";
  }
  if (rep.contains("j_tests"))
    for (const auto& t : rep["j_tests"])
      std::cout << "  " << t["variant"].get<std::string>() << " = "
                << t["statistic"].get<double>() << "  (df=" << t["df"].get<int>()
                << ", p=" << t["p_value"].get<double>() << ")\n";
  if (rep.contains("ubc"))
    std::cout << "  UBC min slack = " << rep["ubc"]["min_slack"].get<double>()
              << (rep["ubc"]["flag"].get<bool>() ? "  [FLAGGED]" : "") << "\n";
}

void write_json(const json& j, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << j.dump(2) << "\n";
  if (!out) throw std::runtime_error("write failed for " + path);
  g_partial = true;
}

// ---- subcommand payloads ----------------------------------------------

struct EstimateArgs {
  std::string data, model, kind = "all", out;
  std::uint64_t seed = 0;
};

int run_estimate(const EstimateArgs& a) {
  const Dataset data = load_data(a.data);
  const auto model = load_model(a.model, data);
  SolveOptions opts;
  opts.seed = a.seed;

  std::vector<std::string> kinds;
  if (a.kind == "all")
    kinds = {"el", "et", "etel", "gmm"};
  else
    kinds = {a.kind};

  json results = json::array();
  for (const std::string& k : kinds) {
    json rep = k == "gmm" ? gmm_report(*model, data, opts)
                          : gel_report(gel_kind_from_string(k), *model, data, opts);
    print_estimate_table(rep);
    results.push_back(std::move(rep));
  }
  json out;
  out["results"] = results;
  if (!a.out.empty()) write_json(out, a.out);
  return kExitOk;
}

struct BootstrapArgs {
  std::string data, model, kind = "el", scheme = "iid", out, tstar_out;
  int B = 999;
  double alpha = 0.05;
  std::size_t coord = 0;
  std::uint64_t seed = 0;
  int threads = 1;
};

int run_bootstrap(const BootstrapArgs& a) {
  if (a.B < 1) throw InputError("B must be >= 1");
  if (!(a.alpha > 0.0 && a.alpha < 1.0)) throw InputError("alpha outside (0,1)");
  const Dataset data = load_data(a.data);
  const auto model = load_model(a.model, data);
  const Eigen::Index r = static_cast<Eigen::Index>(a.coord);
  if (r >= model->dims().l_theta) throw InputError("coordinate out of range");

  SolveOptions opts;
  opts.seed = a.seed;
  BootstrapOptions bo;
  bo.solve = opts;
  bo.threads = a.threads;

  json rep;
  rep["B"] = a.B;
  rep["alpha"] = a.alpha;
  rep["seed"] = a.seed;
  rep["coord"] = a.coord;
  rep["scheme"] = a.scheme;
  rep["kind"] = a.kind;

  std::vector<double> draws;
  double center = 0.0, se = 0.0;
  BootstrapDistribution dist;
  if (a.kind == "gmm") {
    if (a.scheme != "hh") throw InputError("GMM bootstrap supports only the hh scheme");
    const GmmFit fit = gmm_estimate(*model, data, opts);
    center = fit.theta_hat(r);
    se = std::sqrt(fit.sigma_c(r, r) / static_cast<double>(data.n()));
    dist = hh_recentered_bootstrap(fit, *model, data, a.B, r, a.seed, bo);
  } else {
    const GelKind kind = gel_kind_from_string(a.kind);
    const GelFit fit = estimate(kind, *model, data, opts);
    const RobustCovariance cov = covariance(kind, *model, data, fit);
    center = fit.theta_hat(r);
    se = std::sqrt(cov.sigma_mr(r, r) / static_cast<double>(data.n()));
    ResampleScheme rs;
    if (a.scheme == "iid")
      rs = ResampleScheme::iid();
    else if (a.scheme == "bn")
      rs = ResampleScheme::bn(fit.probs);
    else if (a.scheme == "shrinkage")
      rs = ResampleScheme::shrinkage(fit.probs);
    else
      throw InputError("unknown scheme: " + a.scheme);
    dist = bootstrap_t(fit, cov, *model, data, rs, a.B, r, a.seed, bo);
  }
  draws = dist.t_star;

  const double z_t = quantile(draws, BootStat::T, a.alpha).value;
  const double z_abs = quantile(draws, BootStat::AbsT, a.alpha).value;
  const double z_lo = quantile(draws, BootStat::T, a.alpha / 2.0).value;
  const double z_hi = quantile(draws, BootStat::T, 1.0 - a.alpha / 2.0).value;

  rep["theta_hat"] = center;
  rep["se"] = se;
  rep["failures"] = dist.failures;
  rep["failure_warning"] = dist.failure_warning;
  rep["z_t"] = z_t;
  rep["z_abs_t"] = z_abs;
  rep["ci"]["one_sided"] = {{"lo", center - z_t * se}};
  rep["ci"]["symmetric"] = {{"lo", center - z_abs * se}, {"hi", center + z_abs * se}};
  rep["ci"]["equal_tailed"] = {{"lo", center - z_lo * se}, {"hi", center - z_hi * se}};

  std::cout << a.kind << " theta_hat[" << a.coord << "] = " << center << ", se = " << se
            << "\n  symmetric " << 100 * (1 - a.alpha) << "% CI: [" << center - z_abs * se
            << ", " << center + z_abs * se << "]\n  one-sided lower bound: "
            << center - z_t * se << "\n  equal-tailed CI: [" << center - z_lo * se << ", "
            << center - z_hi * se << "]\n  failures: " << dist.failures << "/" << a.B
            << "\n";

  if (!a.tstar_out.empty()) {
    write_draws_csv(draws, a.tstar_out, "t_star");
    g_partial = true;
  }
  if (!a.out.empty()) write_json(rep, a.out);
  return kExitOk;
}

struct McArgs {
  std::string config, out_dir = ".";
  int R = -1;
  std::uint64_t seed = 0;
  bool seed_set = false;
  int threads = -1;
};

McConfig parse_mc_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open config " + path);
  json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw InputError(std::string("config: ") + e.what());
  }
  McConfig cfg;
  try {
    const json& d = j.at("dgp");
    cfg.dgp.name = dgp_name_from_string(d.at("name").get<std::string>());
    cfg.dgp.T = d.value("T", 4);
    cfg.dgp.n = d.value("n", 100);
    cfg.dgp.rho0 = d.value("rho0", 0.4);
    cfg.dgp.rho1 = d.value("rho1", 0.6);
    cfg.dgp.rho2 = d.value("rho2", 0.2);
    cfg.dgp.burn_in = d.value("burn_in", 100);
    cfg.R = j.value("R", 5000);
    cfg.seed = j.value("seed", 0ULL);
    cfg.threads = j.value("threads", 0);
    if (j.contains("levels")) cfg.levels = j["levels"].get<std::vector<double>>();
    if (j.contains("estimators")) {
      cfg.estimators.clear();
      for (const auto& e : j["estimators"])
        cfg.estimators.push_back(estimator_from_string(e.get<std::string>()));
    }
    if (j.contains("gel_schemes")) {
      cfg.gel_schemes.clear();
      for (const auto& s : j["gel_schemes"])
        cfg.gel_schemes.push_back(mc_scheme_from_string(s.get<std::string>()));
    }
  } catch (const InputError&) {
    throw;
  } catch (const std::exception& e) {
    throw InputError(std::string("config: ") + e.what());
  }
  return cfg;
}

int run_mc(const McArgs& a) {
  McConfig cfg = parse_mc_config(a.config);
  if (a.R > 0) cfg.R = a.R;
  if (a.seed_set) cfg.seed = a.seed;
  if (a.threads > 0)
    cfg.threads = a.threads;
  else if (cfg.threads <= 0)
    cfg.threads = default_threads();
  try {
    cfg.dgp.validate();
  } catch (const std::exception& e) {
    throw InputError(e.what());
  }

  const McTable table = run_warp_speed(cfg);
  emit_table(table, a.out_dir + "/table.csv", TableFormat::Csv);
  g_partial = true;
  emit_table(table, a.out_dir + "/table.md", TableFormat::Markdown);
  emit_manifest(table, a.out_dir + "/manifest.json");
  std::cout << "wrote " << a.out_dir << "/table.csv, table.md, manifest.json ("
            << table.cells.size() << " cells, " << table.seconds << " s)\n";
  return kExitOk;
}

struct PseudoArgs {
  std::string dgp = "M1", kind = "etel";
  int T = 4;
  Eigen::Index n = 0;
  double rho1 = 0.6, rho2 = 0.2;
  std::uint64_t seed = 0;
};

int run_pseudo_true(const PseudoArgs& a) {
  DgpSpec spec;
  try {
    spec.name = dgp_name_from_string(a.dgp);
    spec.T = a.T;
    spec.rho1 = a.rho1;
    spec.rho2 = a.rho2;
    spec.seed = a.seed;
    if (!spec.misspecified()) throw std::invalid_argument("pseudo-true needs an M design");
    spec.validate();
  } catch (const std::exception& e) {
    throw InputError(e.what());
  }
  const PseudoTrueResult res = pseudo_true(spec, estimator_from_string(a.kind), a.n);
  json rep;
  rep["dgp"] = a.dgp;
  rep["kind"] = a.kind;
  rep["value"] = res.value;
  rep["rho_a"] = res.rho_a;
  rep["rho_b"] = res.rho_b;
  rep["n_used"] = res.n_used;
  std::cout << rep.dump(2) << std::endl;
  return kExitOk;
}

struct KdeArgs {
  std::string input, out;
  double bandwidth = 0.0;
};

int run_kde(const KdeArgs& a) {
  std::ifstream in(a.input);
  if (!in) throw InputError("cannot open " + a.input);
  std::vector<double> sample;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    // take the first comma-separated field of each row
    const std::string field = line.substr(0, line.find(','));
    try {
      sample.push_back(std::stod(field));
    } catch (const std::exception&) {
      if (first) {  // header row
        first = false;
        continue;
      }
      throw InputError("non-numeric value in " + a.input + ": " + field);
    }
    first = false;
  }
  if (sample.empty()) throw InputError("empty input: " + a.input);
  const KdeResult res = kde(sample, a.bandwidth);
  write_kde_csv(res, a.out);
  std::cout << "wrote " << a.out << " (bandwidth " << res.bandwidth << ")\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"GEL/GMM estimation with misspecification-robust bootstrap inference"};
  app.require_subcommand(1);

  EstimateArgs ea;
  CLI::App* est = app.add_subcommand("estimate", "fit a model on a CSV dataset");
  est->add_option("--data", ea.data, "CSV data file")->required();
  est->add_option("--model", ea.model, "JSON model descriptor")->required();
  est->add_option("--kind", ea.kind, "el|et|etel|gmm|all");
  est->add_option("--out", ea.out, "JSON report path");
  est->add_option("--seed", ea.seed, "solver seed");

  BootstrapArgs ba;
  CLI::App* boot = app.add_subcommand("bootstrap", "percentile-t bootstrap CIs");
  boot->add_option("--data", ba.data, "CSV data file")->required();
  boot->add_option("--model", ba.model, "JSON model descriptor")->required();
  boot->add_option("--kind", ba.kind, "el|et|etel|gmm");
  boot->add_option("--scheme", ba.scheme, "iid|bn|shrinkage|hh");
  boot->add_option("-B,--B", ba.B, "bootstrap replicates");
  boot->add_option("--alpha", ba.alpha, "nominal level (CI level is 1-alpha)");
  boot->add_option("--coord", ba.coord, "theta coordinate");
  boot->add_option("--seed", ba.seed, "bootstrap seed");
  boot->add_option("--threads", ba.threads, "worker threads")
      ->default_val(default_threads());
  boot->add_option("--out", ba.out, "JSON report path");
  boot->add_option("--tstar-out", ba.tstar_out, "CSV of bootstrap t draws");

  McArgs ma;
  CLI::App* mc = app.add_subcommand("mc", "warp-speed Monte Carlo campaign");
  mc->add_option("--config", ma.config, "JSON config")->required();
  mc->add_option("--out-dir", ma.out_dir, "output directory");
  mc->add_option("--R", ma.R, "override rep count");
  mc->add_option("--seed", ma.seed, "override master seed")
      ->each([&](const std::string&) { ma.seed_set = true; });
  mc->add_option("--threads", ma.threads, "override parallelism");

  PseudoArgs pa;
  CLI::App* pt = app.add_subcommand("pseudo-true", "large-n pseudo-true value");
  pt->add_option("--dgp", pa.dgp, "M1|M2");
  pt->add_option("--kind", pa.kind, "el|et|etel|gmm");
  pt->add_option("--T", pa.T, "panel length");
  pt->add_option("--n", pa.n, "sample size (0 = default)");
  pt->add_option("--rho1", pa.rho1, "AR(2) first coefficient");
  pt->add_option("--rho2", pa.rho2, "AR(2) second coefficient");
  pt->add_option("--seed", pa.seed, "simulation seed");

  KdeArgs ka;
  CLI::App* kd = app.add_subcommand("kde", "Gaussian kernel density of a draw file");
  kd->add_option("--input", ka.input, "CSV with draws in the first column")->required();
  kd->add_option("--out", ka.out, "output CSV")->required();
  kd->add_option("--bandwidth", ka.bandwidth, "fixed bandwidth (default Silverman)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return kExitInput;
  }

  try {
    if (*est) return run_estimate(ea);
    if (*boot) return run_bootstrap(ba);
    if (*mc) return run_mc(ma);
    if (*pt) return run_pseudo_true(pa);
    if (*kd) return run_kde(ka);
  } catch (const InputError& e) {
    return fail(kExitInput, e.what());
  } catch (const EstimationError& e) {
    return fail(kExitNumeric, e.what());
  } catch (const InnerLoopError& e) {
    return fail(kExitNumeric, e.what());
  } catch (const VarianceError& e) {
    return fail(kExitNumeric, e.what());
  } catch (const BootstrapError& e) {
    return fail(kExitNumeric, e.what());
  } catch (const std::exception& e) {
    return fail(kExitNumeric, e.what());
  }
  return kExitInput;
}
