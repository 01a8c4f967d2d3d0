#include "gelboot/mc.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <sstream>
#include <thread>

#include "gelboot/panel_model.hpp"
#include "gelboot/stats.hpp"

namespace gelboot {

std::string to_string(McScheme scheme) {
  switch (scheme) {
    case McScheme::None: return "-";
    case McScheme::L: return "L";
    case McScheme::BN: return "BN";
    default: return "HH";
  }
}

McScheme mc_scheme_from_string(const std::string& name) {
  if (name == "-" || name.empty() || name == "none") return McScheme::None;
  if (name == "L" || name == "l" || name == "iid") return McScheme::L;
  if (name == "BN" || name == "bn") return McScheme::BN;
  if (name == "HH" || name == "hh") return McScheme::HH;
  throw std::invalid_argument("unknown scheme: " + name);
}

std::string McCell::label() const {
  return kind + "-" + gelboot::to_string(est) + "-" + gelboot::to_string(flavor) +
         (scheme == McScheme::None ? std::string() : "-" + gelboot::to_string(scheme));
}

namespace {

constexpr std::uint64_t kPanelStream = 0x706e6cULL;   // "pnl"
constexpr std::uint64_t kBootStream = 0x627374ULL;    // "bst"
constexpr std::uint64_t kPseudoStream = 0x707472ULL;  // "ptr"

struct EstRec {
  bool ok = false;
  double t_mr = 0.0, t_c = 0.0;
  double se_mr = 0.0, se_c = 0.0;
  bool has_mr = false;
  bool j_reject = false;
  std::string err;
};

struct DrawRec {
  bool ok = false;
  double t = 0.0;
  std::string err;
};

struct RepRec {
  std::map<Estimator, EstRec> est;
  std::map<std::pair<Estimator, McScheme>, DrawRec> draw;
};

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream, std::uint64_t r) {
  return CounterRng(master, stream, r).next_u64();
}

// one warp-speed GEL bootstrap draw: refit on a resample warm-started at the
// rep estimate, t* centered at that estimate, MR studentization
DrawRec gel_draw(const GelFit& fit, const PanelMomentModel& model, const Dataset& data,
                 const ResampleScheme& scheme, std::uint64_t seed, const SolveOptions& base) {
  DrawRec out;
  for (int attempt = 0; attempt <= 2; ++attempt) {
    CounterRng rng(seed, 0, static_cast<std::uint64_t>(attempt));
    const Dataset star = resample(data, scheme, rng);
    try {
      SolveOptions so = base;
      so.initial_theta = fit.theta_hat;
      so.multistarts = attempt == 0 ? 1 : 3;
      so.seed = seed + static_cast<std::uint64_t>(attempt);
      const GelFit refit = estimate(fit.kind, model, star, so);
      const RobustCovariance recov = covariance(fit.kind, model, star, refit);
      const double var = recov.sigma_mr(0, 0);
      if (!(var > 0.0)) throw std::runtime_error("nonpositive replicate variance");
      out.t = (refit.theta_hat(0) - fit.theta_hat(0)) /
              std::sqrt(var / static_cast<double>(star.n()));
      if (!std::isfinite(out.t)) throw std::runtime_error("nonfinite draw");
      out.ok = true;
      return out;
    } catch (const std::exception& e) {
      out.err = e.what();
    }
  }
  return out;
}

}  // namespace

McTable run_warp_speed(const McConfig& config) {
  const auto t0 = std::chrono::steady_clock::now();
  config.dgp.validate();
  if (config.R < 1) throw std::invalid_argument("R must be >= 1");
  const int df =
      static_cast<int>((config.dgp.T + 1) * (config.dgp.T - 2) / 2) - 1;

  // coverage centers, computed once per estimator kind
  std::map<Estimator, double> centers = config.centers;
  for (Estimator est : config.estimators) {
    if (centers.count(est)) continue;
    if (config.dgp.misspecified()) {
      DgpSpec pt = config.dgp;
      pt.seed = derive_seed(config.seed, kPseudoStream, 0);
      centers[est] = pseudo_true(pt, est, 0, config.solve).value;
    } else {
      centers[est] = config.dgp.rho0;
    }
  }

  std::vector<RepRec> reps(static_cast<std::size_t>(config.R));
  auto run_rep = [&](int r) {
    RepRec& rec = reps[static_cast<std::size_t>(r)];
    DgpSpec spec = config.dgp;
    spec.seed = derive_seed(config.seed, kPanelStream, static_cast<std::uint64_t>(r));
    const Dataset data = simulate(spec);
    const PanelMomentModel model =
        PanelMomentModel::for_dataset(static_cast<int>(spec.T), data);
    const double sqn = std::sqrt(static_cast<double>(data.n()));

    for (std::size_t e = 0; e < config.estimators.size(); ++e) {
      const Estimator est = config.estimators[e];
      EstRec& er = rec.est[est];
      const double center = centers.at(est);
      const std::uint64_t bseed =
          derive_seed(config.seed, kBootStream,
                      (static_cast<std::uint64_t>(r) << 8) | static_cast<std::uint64_t>(e));
      try {
        SolveOptions so = config.solve;
        if (so.initial_theta.size() == 0) {
          so.initial_theta.resize(1);
          so.initial_theta(0) = center;
        }
        so.seed = bseed ^ 0x5eedULL;
        if (est == Estimator::GMM) {
          const GmmFit fit = gmm_estimate(model, data, so);
          er.se_c = std::sqrt(fit.sigma_c(0, 0)) / sqn;
          if (!(er.se_c > 0.0)) throw std::runtime_error("nonpositive GMM variance");
          er.t_c = (fit.theta_hat(0) - center) / er.se_c;
          er.j_reject = stats::chi2_sf(fit.j_stat, df) < 0.05;
          er.ok = true;
          rec.draw[{est, McScheme::HH}] = [&] {
            DrawRec d;
            try {
              BootstrapOptions bo;
              bo.solve = so;
              const BootstrapDistribution one =
                  hh_recentered_bootstrap(fit, model, data, 1, 0, bseed, bo);
              if (!one.t_star.empty()) {
                d.t = one.t_star.front();
                d.ok = true;
              } else if (!one.failure_reasons.empty()) {
                d.err = one.failure_reasons.front();
              }
            } catch (const std::exception& ex) {
              d.err = ex.what();
            }
            return d;
          }();
        } else {
          const GelKind kind = gel_kind_of(est);
          const GelFit fit = estimate(kind, model, data, so);
          const RobustCovariance cov = covariance(kind, model, data, fit);
          er.se_mr = std::sqrt(cov.sigma_mr(0, 0)) / sqn;
          er.se_c = std::sqrt(cov.sigma_c(0, 0)) / sqn;
          if (!(er.se_mr > 0.0) || !(er.se_c > 0.0))
            throw std::runtime_error("nonpositive GEL variance");
          er.has_mr = true;
          er.t_mr = (fit.theta_hat(0) - center) / er.se_mr;
          er.t_c = (fit.theta_hat(0) - center) / er.se_c;
          const auto js = j_tests(fit, model, data);
          er.j_reject = js.front().p_value < 0.05;
          er.ok = true;
          for (McScheme sch : config.gel_schemes) {
            const ResampleScheme rs = sch == McScheme::BN
                                          ? ResampleScheme::bn(fit.probs)
                                          : ResampleScheme::iid();
            const std::uint64_t dseed =
                bseed ^ (sch == McScheme::BN ? 0xb2ULL : 0x11ULL) << 32;
            rec.draw[{est, sch}] = gel_draw(fit, model, data, rs, dseed, config.solve);
          }
        }
      } catch (const std::exception& ex) {
        er.ok = false;
        er.err = ex.what();
      }
    }
  };

  const int threads = std::max(1, config.threads);
  if (threads == 1) {
    for (int r = 0; r < config.R; ++r) run_rep(r);
  } else {
    std::atomic<int> next{0};
    auto worker = [&] {
      for (;;) {
        const int r = next.fetch_add(1);
        if (r >= config.R) return;
        run_rep(r);
      }
    };
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  McTable table;
  table.config = config;
  table.centers_used = centers;

  const auto add_failures = [&](McCell& cell, int used, const std::string& what) {
    cell.reps_used = used;
    cell.failures = config.R - used;
    cell.flagged = cell.failures > 0.05 * static_cast<double>(config.R);
    if (cell.failures > 0)
      table.failure_log.push_back(what + ": " + std::to_string(cell.failures) +
                                  " failed reps");
  };

  const auto finish_cell = [&](McCell cell, const std::vector<double>& t_obs,
                               const std::vector<double>& se_obs,
                               const std::vector<double>& crit, double j_rate, int used) {
    for (std::size_t j = 0; j < config.levels.size(); ++j) {
      double hits = 0.0, wsum = 0.0;
      for (std::size_t i = 0; i < t_obs.size(); ++i) {
        if (std::fabs(t_obs[i]) <= crit[j]) hits += 1.0;
        wsum += 2.0 * crit[j] * se_obs[i];
      }
      const double m = t_obs.empty() ? 0.0 : static_cast<double>(t_obs.size());
      const double p = m > 0.0 ? hits / m : 0.0;
      cell.coverage.push_back(p);
      cell.mc_se.push_back(m > 0.0 ? std::sqrt(p * (1.0 - p) / m) : 0.0);
      cell.mean_width.push_back(m > 0.0 ? wsum / m : 0.0);
    }
    cell.j_rejection = j_rate;
    add_failures(cell, used, cell.label());
    table.cells.push_back(std::move(cell));
  };

  std::vector<double> normal_crit;
  for (double lvl : config.levels)
    normal_crit.push_back(stats::normal_quantile(0.5 + lvl / 2.0));

  for (Estimator est : config.estimators) {
    // gather per-rep records for this estimator
    std::vector<const RepRec*> ok_reps;
    double j_hits = 0.0;
    for (const RepRec& rec : reps) {
      const auto it = rec.est.find(est);
      if (it != rec.est.end() && it->second.ok) {
        ok_reps.push_back(&rec);
        if (it->second.j_reject) j_hits += 1.0;
      }
    }
    const int used = static_cast<int>(ok_reps.size());
    const double j_rate = used > 0 ? j_hits / static_cast<double>(used) : 0.0;

    const auto collect = [&](bool mr, auto pred) {
      std::vector<double> t, se;
      for (const RepRec* rec : ok_reps) {
        const EstRec& er = rec->est.at(est);
        if (!pred(*rec)) continue;
        t.push_back(mr ? er.t_mr : er.t_c);
        se.push_back(mr ? er.se_mr : er.se_c);
      }
      return std::make_pair(t, se);
    };
    const auto all = [](const RepRec&) { return true; };

    if (est == Estimator::GMM) {
      auto [t, se] = collect(false, all);
      finish_cell({"Asymp", est, VarianceFlavor::C, McScheme::None}, t, se, normal_crit,
                  j_rate, used);
      // Boot-GMM-C-HH
      std::vector<double> draws;
      auto has_draw = [&](const RepRec& rec) {
        const auto it = rec.draw.find({est, McScheme::HH});
        return it != rec.draw.end() && it->second.ok;
      };
      for (const RepRec* rec : ok_reps)
        if (has_draw(*rec)) draws.push_back(rec->draw.at({est, McScheme::HH}).t);
      if (!draws.empty()) {
        std::vector<double> crit;
        for (double lvl : config.levels)
          crit.push_back(quantile(draws, BootStat::AbsT, 1.0 - lvl).value);
        auto [t, se2] = collect(false, has_draw);
        finish_cell({"Boot", est, VarianceFlavor::C, McScheme::HH}, t, se2, crit, j_rate,
                    static_cast<int>(t.size()));
      }
    } else {
      for (VarianceFlavor fl : {VarianceFlavor::MR, VarianceFlavor::C}) {
        auto [t, se] = collect(fl == VarianceFlavor::MR, all);
        finish_cell({"Asymp", est, fl, McScheme::None}, t, se, normal_crit, j_rate, used);
      }
      for (McScheme sch : config.gel_schemes) {
        std::vector<double> draws;
        auto has_draw = [&](const RepRec& rec) {
          const auto it = rec.draw.find({est, sch});
          return it != rec.draw.end() && it->second.ok;
        };
        for (const RepRec* rec : ok_reps)
          if (has_draw(*rec)) draws.push_back(rec->draw.at({est, sch}).t);
        if (draws.empty()) continue;
        std::vector<double> crit;
        for (double lvl : config.levels)
          crit.push_back(quantile(draws, BootStat::AbsT, 1.0 - lvl).value);
        auto [t, se] = collect(true, has_draw);
        finish_cell({"Boot", est, VarianceFlavor::MR, sch}, t, se, crit, j_rate,
                    static_cast<int>(t.size()));
      }
    }
  }

  table.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return table;
}

namespace {

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

void emit_table(const McTable& table, const std::string& path, TableFormat format) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  const auto& lv = table.config.levels;

  if (format == TableFormat::Csv) {
    out << "# version=" << kVersion << "\n";
    out << "# seed=" << table.config.seed << "\n";
    out << "# levels=";
    for (std::size_t j = 0; j < lv.size(); ++j) out << (j ? "," : "") << fmt(lv[j]);
    out << "\n";
    out << "kind,estimator,flavor,scheme";
    for (double l : lv)
      out << ",cov_" << l << ",mcse_" << l << ",width_" << l;
    out << ",j_rejection,reps_used,failures,flagged\n";
    for (const McCell& c : table.cells) {
      out << c.kind << ',' << to_string(c.est) << ',' << to_string(c.flavor) << ','
          << to_string(c.scheme);
      for (std::size_t j = 0; j < lv.size(); ++j)
        out << ',' << fmt(c.coverage[j]) << ',' << fmt(c.mc_se[j]) << ','
            << fmt(c.mean_width[j]);
      out << ',' << fmt(c.j_rejection) << ',' << c.reps_used << ',' << c.failures << ','
          << (c.flagged ? 1 : 0) << "\n";
    }
  } else {
    out << "version: " << kVersion << "  \nseed: " << table.config.seed << "\n\n";
    out << "| CI | Estimator | SE | Scheme |";
    for (double l : lv) out << " cov " << 100 * l << "% | width " << 100 * l << "% |";
    out << " J rej. | reps |\n";
    out << "|---|---|---|---|";
    for (std::size_t j = 0; j < lv.size(); ++j) out << "---|---|";
    out << "---|---|\n";
    out.precision(3);
    for (const McCell& c : table.cells) {
      out << "| " << c.kind << " | " << to_string(c.est) << " | " << to_string(c.flavor)
          << " | " << to_string(c.scheme) << " |";
      for (std::size_t j = 0; j < lv.size(); ++j)
        out << ' ' << c.coverage[j] << " | " << c.mean_width[j] << " |";
      out << ' ' << c.j_rejection << " | " << c.reps_used << " |\n";
    }
  }
  if (!out) throw std::runtime_error("write failed for " + path);
}

std::vector<McCell> parse_table_csv(const std::string& path, std::vector<double>* levels,
                                    std::uint64_t* seed, std::string* version) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::vector<McCell> cells;
  std::vector<double> lv;
  std::string line;
  bool header_seen = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line.rfind("# version=", 0) == 0) {
      if (version) *version = line.substr(10);
      continue;
    }
    if (line.rfind("# seed=", 0) == 0) {
      if (seed) *seed = std::stoull(line.substr(7));
      continue;
    }
    if (line.rfind("# levels=", 0) == 0) {
      std::istringstream ls(line.substr(9));
      std::string tok;
      while (std::getline(ls, tok, ',')) lv.push_back(std::stod(tok));
      continue;
    }
    if (!header_seen) {  // column header line
      header_seen = true;
      continue;
    }
    std::istringstream ls(line);
    std::string tok;
    std::vector<std::string> f;
    while (std::getline(ls, tok, ',')) f.push_back(tok);
    const std::size_t expected = 4 + 3 * lv.size() + 4;
    if (f.size() != expected) throw std::runtime_error("malformed table row: " + line);
    McCell c;
    c.kind = f[0];
    c.est = estimator_from_string(f[1]);
    c.flavor = f[2] == "MR" ? VarianceFlavor::MR : VarianceFlavor::C;
    c.scheme = mc_scheme_from_string(f[3]);
    std::size_t p = 4;
    for (std::size_t j = 0; j < lv.size(); ++j) {
      c.coverage.push_back(std::stod(f[p++]));
      c.mc_se.push_back(std::stod(f[p++]));
      c.mean_width.push_back(std::stod(f[p++]));
    }
    c.j_rejection = std::stod(f[p++]);
    c.reps_used = std::stoi(f[p++]);
    c.failures = std::stoi(f[p++]);
    c.flagged = f[p++] == "1";
    cells.push_back(std::move(c));
  }
  if (levels) *levels = lv;
  return cells;
}

void emit_manifest(const McTable& table, const std::string& path) {
  nlohmann::json j;
  j["version"] = kVersion;
  j["seed"] = table.config.seed;
  j["seconds"] = table.seconds;
  j["config"]["dgp"]["name"] = to_string(table.config.dgp.name);
  j["config"]["dgp"]["T"] = table.config.dgp.T;
  j["config"]["dgp"]["n"] = table.config.dgp.n;
  j["config"]["dgp"]["rho0"] = table.config.dgp.rho0;
  j["config"]["dgp"]["rho1"] = table.config.dgp.rho1;
  j["config"]["dgp"]["rho2"] = table.config.dgp.rho2;
  j["config"]["dgp"]["burn_in"] = table.config.dgp.burn_in;
  j["config"]["R"] = table.config.R;
  j["config"]["threads"] = table.config.threads;
  j["config"]["levels"] = table.config.levels;
  for (Estimator e : table.config.estimators)
    j["config"]["estimators"].push_back(to_string(e));
  for (McScheme s : table.config.gel_schemes)
    j["config"]["gel_schemes"].push_back(to_string(s));
  for (const auto& [est, c] : table.centers_used) j["centers"][to_string(est)] = c;
  j["failure_log"] = table.failure_log;
  for (const McCell& c : table.cells) {
    nlohmann::json cell;
    cell["label"] = c.label();
    cell["coverage"] = c.coverage;
    cell["mc_se"] = c.mc_se;
    cell["mean_width"] = c.mean_width;
    cell["j_rejection"] = c.j_rejection;
    cell["reps_used"] = c.reps_used;
    cell["failures"] = c.failures;
    cell["flagged"] = c.flagged;
    j["cells"].push_back(cell);
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << j.dump(2) << "\n";
  if (!out) throw std::runtime_error("write failed for " + path);
}

}  // namespace gelboot
