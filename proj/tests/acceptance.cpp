// Acceptance gate: one pass/fail line per criterion, nonzero exit on any
// failure. Each criterion is self-contained and timed against its budget.

#include <Eigen/Dense>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "gelboot/bootstrap.hpp"
#include "gelboot/dgp.hpp"
#include "gelboot/gmm.hpp"
#include "gelboot/matching_model.hpp"
#include "gelboot/mc.hpp"
#include "gelboot/panel_model.hpp"
#include "gelboot/variance.hpp"
#include "test_util.hpp"

using namespace gelboot;
using testutil::ExpTestModel;
using testutil::make_dataset;
using testutil::random_theta;

namespace {

int g_failures = 0;

void run_criterion(int number, const std::string& what, double budget_seconds,
                   const std::function<std::string()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  std::string detail;
  try {
    detail = body();
  } catch (const std::exception& e) {
    detail = std::string("exception: ") + e.what();
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (detail.empty() && secs > budget_seconds) {
    std::ostringstream os;
    os << "exceeded time budget: " << secs << " s > " << budget_seconds << " s";
    detail = os.str();
  }
  if (detail.empty()) {
    std::printf("PASS criterion %d: %s (%.1f s)\n", number, what.c_str(), secs);
  } else {
    std::printf("FAIL criterion %d: %s (%.1f s) -- %s\n", number, what.c_str(), secs,
                detail.c_str());
    ++g_failures;
  }
  std::fflush(stdout);
}

std::string check(bool ok, const std::string& msg) { return ok ? "" : msg; }

// central finite difference of the stacked mean psi in beta
Eigen::MatrixXd fd_mean_psi_jacobian(GelKind kind, const MomentModel& model,
                                     const Dataset& data, const StackedBeta& beta) {
  const ModelDims dims = model.dims();
  const Eigen::VectorXd b0 = beta.stacked();
  const Eigen::Index m = b0.size();
  Eigen::MatrixXd J(m, m);
  for (Eigen::Index j = 0; j < m; ++j) {
    const double h = 1e-6 * std::max(1.0, std::fabs(b0(j)));
    Eigen::VectorXd bp = b0, bm = b0;
    bp(j) += h;
    bm(j) -= h;
    const Eigen::VectorXd fp =
        psi(kind, model, data, StackedBeta::from_stacked(kind, dims.l_theta, dims.l_g, bp))
            .colwise()
            .mean();
    const Eigen::VectorXd fm =
        psi(kind, model, data, StackedBeta::from_stacked(kind, dims.l_theta, dims.l_g, bm))
            .colwise()
            .mean();
    J.col(j) = (fp - fm) / (2.0 * h);
  }
  return J;
}

StackedBeta random_beta(GelKind kind, Eigen::Index lt, Eigen::Index lg,
                        std::uint64_t seed) {
  CounterRng rng(seed, 0xbe7a);
  StackedBeta b;
  b.kind = kind;
  b.theta.resize(lt);
  b.lambda.resize(lg);
  for (Eigen::Index a = 0; a < lt; ++a) b.theta(a) = 0.2 * rng.normal();
  for (Eigen::Index l = 0; l < lg; ++l) b.lambda(l) = 0.05 * rng.normal();
  if (kind == GelKind::ETEL) {
    b.kappa.resize(lg);
    for (Eigen::Index l = 0; l < lg; ++l) b.kappa(l) = 0.05 * rng.normal();
    b.tau = 1.0 + 0.1 * rng.normal();
  }
  return b;
}

Dataset c1_panel(Eigen::Index n, std::uint64_t seed) {
  DgpSpec spec;
  spec.n = n;
  spec.seed = seed;
  return simulate(spec);
}

double rel_err(const Eigen::MatrixXd& got, const Eigen::MatrixXd& want) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < got.rows(); ++i)
    for (Eigen::Index j = 0; j < got.cols(); ++j)
      worst = std::max(worst, std::fabs(got(i, j) - want(i, j)) /
                                  std::max(1.0, std::fabs(want(i, j))));
  return worst;
}

int hw_threads() {
  const unsigned t = std::thread::hardware_concurrency();
  return t == 0 ? 2 : static_cast<int>(t);
}

}  // namespace

int main() {
  run_criterion(1, "analytic FOC-system Jacobian matches finite differences", 10.0, [] {
    const Dataset d = make_dataset(40, 6, 90);
    for (int inst = 0; inst < 10; ++inst) {
      const GelKind kind = static_cast<GelKind>(inst % 3);
      const ExpTestModel model(2, 4, 6);
      const StackedBeta beta =
          random_beta(kind, 2, 4, 900 + static_cast<std::uint64_t>(inst));
      const MomentEval ev = evaluate(model, d, beta.theta, 2);
      const Eigen::MatrixXd analytic = average_psi_jacobian(ev, model.dims(), beta);
      const Eigen::MatrixXd fd = fd_mean_psi_jacobian(kind, model, d, beta);
      const double err = rel_err(analytic, fd);
      if (err >= 1e-5) {
        std::ostringstream os;
        os << "instance " << inst << " (" << to_string(kind) << "): error " << err;
        return os.str();
      }
    }
    return std::string();
  });

  run_criterion(2, "converged fits satisfy the FOC and probability invariants", 5.0, [] {
    const Dataset d = c1_panel(100, 91);
    const PanelMomentModel model = PanelMomentModel::for_dataset(4, d);
    for (GelKind kind : {GelKind::EL, GelKind::ET, GelKind::ETEL}) {
      const GelFit fit = estimate(kind, model, d);
      if (!fit.converged) return "fit did not converge: " + to_string(kind);
      if (!(fit.foc_residual <= 1e-8)) return "FOC residual above 1e-8: " + to_string(kind);
      if (std::fabs(fit.probs.sum() - 1.0) > 1e-12)
        return "implied probabilities do not sum to one: " + to_string(kind);
      if (!(fit.probs.minCoeff() > 0.0))
        return "nonpositive implied probability: " + to_string(kind);
      if (kind == GelKind::ETEL) {
        // tilted-objective identity, both sides recomputed from scratch
        const MomentEval ev = evaluate(model, d, fit.theta_hat, 0);
        const Eigen::VectorXd v = ev.g * fit.lambda_hat;
        const double vmax = v.maxCoeff();
        const Eigen::ArrayXd e = (v.array() - vmax).exp();
        const double n = static_cast<double>(d.n());
        const Eigen::ArrayXd w = e / e.sum();
        const double lhs = -(n * w).log().mean();
        const double rhs = std::log(e.mean()) + vmax - v.mean();
        if (std::fabs(lhs - rhs) > 1e-12) return std::string("ETEL identity violated");
        if (lhs < -1e-12) return std::string("ETEL objective negative");
        if (std::fabs(fit.criterion - lhs) > 1e-8)
          return std::string("stored ETEL criterion disagrees with the identity");
      }
    }
    return std::string();
  });

  run_criterion(3, "just-identified models collapse to the classical analysis", 5.0, [] {
    const Dataset d = make_dataset(80, 3, 92);
    const MatchingMomentModel model(0, {1, 2}, true, {}, Eigen::VectorXd());
    const double n = static_cast<double>(d.n());
    for (GelKind kind : {GelKind::EL, GelKind::ET, GelKind::ETEL}) {
      const GelFit fit = estimate(kind, model, d);
      if (fit.lambda_hat.lpNorm<Eigen::Infinity>() >= 1e-8)
        return "lambda did not vanish: " + to_string(kind);
      if ((fit.probs.array() - 1.0 / n).abs().maxCoeff() > 1e-10)
        return "probabilities are not uniform: " + to_string(kind);
      const RobustCovariance cov = covariance(kind, model, d, fit);
      if (rel_err(cov.sigma_mr, cov.sigma_c) > 1e-6)
        return "robust and classical variances differ: " + to_string(kind);
      try {
        (void)j_tests(fit, model, d);
        return std::string("J test did not refuse a just-identified model");
      } catch (const std::invalid_argument&) {
      }
    }
    return std::string();
  });

  run_criterion(4, "correct specification at n=30,000: consistency and variance match",
                120.0, [] {
    const Dataset d = c1_panel(30000, 93);
    const PanelMomentModel model = PanelMomentModel::for_dataset(4, d);
    SolveOptions opts;
    opts.initial_theta = Eigen::VectorXd::Constant(1, 0.4);

    const GmmFit gmm = gmm_estimate(model, d, opts);
    if (std::fabs(gmm.theta_hat(0) - 0.4) >= 0.02) return std::string("GMM off target");
    for (GelKind kind : {GelKind::EL, GelKind::ET, GelKind::ETEL}) {
      const GelFit fit = estimate(kind, model, d, opts);
      if (std::fabs(fit.theta_hat(0) - 0.4) >= 0.02)
        return to_string(kind) + " off target: " + std::to_string(fit.theta_hat(0));
      const RobustCovariance cov = covariance(kind, model, d, fit);
      const double rel = std::fabs(cov.sigma_mr(0, 0) - cov.sigma_c(0, 0)) /
                         std::fabs(cov.sigma_c(0, 0));
      if (rel >= 0.10) {
        std::ostringstream os;
        os << to_string(kind) << " variance mismatch " << rel;
        return os.str();
      }
    }
    return std::string();
  });

  run_criterion(5, "misspecified design anchors and pseudo-true values", 180.0, [] {
    DgpSpec spec;
    spec.name = DgpName::M1;
    spec.seed = 94;
    for (Estimator est :
         {Estimator::GMM, Estimator::EL, Estimator::ET, Estimator::ETEL}) {
      const PseudoTrueResult res = pseudo_true(spec, est);
      if (std::fabs(res.rho_a - 0.4) > 1e-12) return std::string("rho_a is not 0.4");
      if (std::fabs(res.rho_b - 1.1) > 1e-12) return std::string("rho_b is not 1.1");
      if (res.n_used != 30000) return std::string("wrong default pseudo-true sample size");
      if (!(res.value > 0.35 && res.value < 0.45)) {
        std::ostringstream os;
        os << to_string(est) << " pseudo-true outside [0.35, 0.45]: " << res.value;
        return os.str();
      }
    }
    return std::string();
  });

  run_criterion(6, "C-1 n=100 coverage: bootstrap repairs the asymptotic shortfall",
                1800.0, [] {
    McConfig cfg;
    cfg.dgp.name = DgpName::C1;
    cfg.dgp.n = 100;
    cfg.R = 1000;
    cfg.estimators = {Estimator::EL};
    cfg.gel_schemes = {McScheme::L};
    cfg.levels = {0.90, 0.95};
    cfg.seed = 20260823;
    cfg.threads = hw_threads();
    const McTable table = run_warp_speed(cfg);

    const McCell* boot = nullptr;
    const McCell* asymp = nullptr;
    for (const McCell& c : table.cells) {
      if (c.label() == "Boot-EL-MR-L") boot = &c;
      if (c.label() == "Asymp-EL-MR") asymp = &c;
    }
    if (!boot || !asymp) return std::string("expected table cells missing");
    const double boot_cov = boot->coverage[1];
    const double asymp_cov = asymp->coverage[1];
    std::ostringstream os;
    os << "boot 95% coverage " << boot_cov << ", asymptotic " << asymp_cov;
    if (std::fabs(boot_cov - 0.975) > 0.03) return "bootstrap coverage off: " + os.str();
    if (std::fabs(asymp_cov - 0.807) > 0.04) return "asymptotic coverage off: " + os.str();
    if (!(std::fabs(boot_cov - 0.95) < std::fabs(asymp_cov - 0.95)))
      return "bootstrap did not improve on asymptotics: " + os.str();
    if (boot->flagged) return std::string("bootstrap cell flagged for failures");
    return std::string();
  });

  run_criterion(7, "M-1 n=200 bootstrap interval width under misspecification", 1800.0,
                [] {
    McConfig cfg;
    cfg.dgp.name = DgpName::M1;
    cfg.dgp.n = 200;
    cfg.R = 500;
    cfg.estimators = {Estimator::ETEL};
    cfg.gel_schemes = {McScheme::L};
    cfg.levels = {0.90, 0.95};
    cfg.seed = 20260824;
    cfg.threads = hw_threads();
    const McTable table = run_warp_speed(cfg);
    for (const McCell& c : table.cells)
      if (c.label() == "Boot-ETEL-MR-L") {
        std::ostringstream os;
        os << "mean 95% width " << c.mean_width[1];
        if (std::fabs(c.mean_width[1] - 0.880) > 0.15) return os.str();
        if (c.flagged) return std::string("bootstrap cell flagged for failures");
        return std::string();
      }
    return std::string("Boot-ETEL-MR-L cell missing");
  });

  run_criterion(8, "structural invariants: scaling, permutation, quantiles, parallelism",
                120.0, [] {
    // moment rescaling leaves theta unchanged and rescales lambda
    const Dataset d = c1_panel(90, 95);
    const PanelMomentModel base = PanelMomentModel::for_dataset(4, d);
    class Scaled : public MomentModel {
     public:
      explicit Scaled(const MomentModel& b) : b_(b) {}
      ModelDims dims() const override { return b_.dims(); }
      void eval_row(const Eigen::Ref<const Eigen::RowVectorXd>& x,
                    const Eigen::Ref<const Eigen::VectorXd>& theta, int order,
                    Eigen::Ref<Eigen::RowVectorXd> g, Eigen::Ref<Eigen::RowVectorXd> G,
                    Eigen::Ref<Eigen::RowVectorXd> G2) const override {
        b_.eval_row(x, theta, order, g, G, G2);
        g *= 3.0;
        if (order >= 1) G *= 3.0;
        if (order >= 2) G2 *= 3.0;
      }
      const MomentModel& b_;
    } scaled(base);
    const GelFit f0 = estimate(GelKind::EL, base, d);
    const GelFit fs = estimate(GelKind::EL, scaled, d);
    std::string err = check(std::fabs(f0.theta_hat(0) - fs.theta_hat(0)) < 1e-6,
                            "theta not invariant to moment scaling");
    if (!err.empty()) return err;
    err = check((3.0 * fs.lambda_hat - f0.lambda_hat).lpNorm<Eigen::Infinity>() < 1e-6,
                "lambda did not rescale with the moments");
    if (!err.empty()) return err;

    // permuting the observations leaves the fit unchanged
    Dataset perm = d;
    CounterRng prng(96);
    for (Eigen::Index i = d.n() - 1; i > 0; --i) {
      const Eigen::Index j =
          static_cast<Eigen::Index>(prng.index(static_cast<std::uint64_t>(i + 1)));
      perm.observations.row(i).swap(perm.observations.row(j));
    }
    const GelFit fp = estimate(GelKind::EL, base, perm);
    err = check(std::fabs(f0.theta_hat(0) - fp.theta_hat(0)) < 1e-8,
                "theta not invariant to row permutation");
    if (!err.empty()) return err;

    // bootstrap quantiles are monotone in the level
    std::vector<double> draws;
    CounterRng qrng(97);
    for (int i = 0; i < 999; ++i) draws.push_back(qrng.normal());
    double prev = -1e300;
    for (double alpha : {0.5, 0.2, 0.1, 0.05, 0.01}) {
      const double q = quantile(draws, BootStat::AbsT, alpha).value;
      if (q < prev) return std::string("bootstrap quantile not monotone in the level");
      prev = q;
    }

    // bootstrap and Monte Carlo results are identical across thread counts
    const GelFit fit = f0;
    const RobustCovariance cov = covariance(GelKind::EL, base, d, fit);
    BootstrapOptions b1, b4;
    b4.threads = 4;
    const auto d1 =
        bootstrap_t(fit, cov, base, d, ResampleScheme::iid(), 60, 0, 98, b1);
    const auto d4 =
        bootstrap_t(fit, cov, base, d, ResampleScheme::iid(), 60, 0, 98, b4);
    if (d1.t_star != d4.t_star)
      return std::string("bootstrap draws depend on the thread count");

    McConfig cfg;
    cfg.dgp.n = 50;
    cfg.R = 6;
    cfg.estimators = {Estimator::EL};
    cfg.gel_schemes = {McScheme::L};
    cfg.seed = 99;
    const McTable t1 = run_warp_speed(cfg);
    cfg.threads = 4;
    const McTable t4 = run_warp_speed(cfg);
    for (std::size_t i = 0; i < t1.cells.size(); ++i)
      if (t1.cells[i].coverage != t4.cells[i].coverage ||
          t1.cells[i].mean_width != t4.cells[i].mean_width)
        return std::string("Monte Carlo table depends on the thread count");
    return std::string();
  });

  if (g_failures > 0) {
    std::printf("%d criterion(s) failed\n", g_failures);
    return 1;
  }
  std::printf("all acceptance criteria passed\n");
  return 0;
}
