#include "gelboot/bootstrap.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <thread>

namespace gelboot {

ResampleScheme ResampleScheme::bn(const Eigen::VectorXd& probs) {
  if (probs.size() == 0 || probs.minCoeff() < 0.0)
    throw std::invalid_argument("BN resampling needs nonnegative weights");
  ResampleScheme s;
  s.kind = SchemeKind::BN_WEIGHTED;
  s.weights = probs / probs.sum();
  return s;
}

ResampleScheme ResampleScheme::shrinkage(const Eigen::VectorXd& probs, double eps) {
  const auto n = probs.size();
  if (n == 0 || probs.minCoeff() < 0.0)
    throw std::invalid_argument("shrinkage resampling needs nonnegative weights");
  if (eps < 0.0) eps = 1.0 / std::sqrt(static_cast<double>(n));
  ResampleScheme s;
  s.kind = SchemeKind::SHRINKAGE;
  s.weights = eps * (probs / probs.sum()).array() + (1.0 - eps) / static_cast<double>(n);
  return s;
}

Dataset resample(const Dataset& data, const ResampleScheme& scheme, CounterRng& rng) {
  const Eigen::Index n = data.n();
  Dataset out;
  out.columns = data.columns;
  out.observations.resize(n, data.k());

  if (scheme.kind == SchemeKind::IID) {
    for (Eigen::Index i = 0; i < n; ++i)
      out.observations.row(i) =
          data.observations.row(static_cast<Eigen::Index>(rng.index(static_cast<std::uint64_t>(n))));
    return out;
  }

  if (scheme.weights.size() != n)
    throw std::invalid_argument("resample: weight vector length differs from n");
  std::vector<double> cum(static_cast<std::size_t>(n));
  double acc = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    acc += scheme.weights(i);
    cum[static_cast<std::size_t>(i)] = acc;
  }
  cum.back() = 1.0;  // guard against accumulated rounding
  for (Eigen::Index i = 0; i < n; ++i) {
    const double u = rng.uniform();
    const auto it = std::lower_bound(cum.begin(), cum.end(), u);
    const Eigen::Index j = static_cast<Eigen::Index>(it - cum.begin());
    out.observations.row(i) = data.observations.row(j);
  }
  return out;
}

namespace {

struct ReplicateOutcome {
  bool ok = false;
  double value = 0.0;
  std::string reason;
};

// runs fn over b = 0..B-1 on opts.threads workers; outcomes land by index so
// the result is independent of scheduling
template <typename Fn>
std::vector<ReplicateOutcome> run_replicates(int B, int threads, Fn fn) {
  std::vector<ReplicateOutcome> out(static_cast<std::size_t>(B));
  threads = std::max(1, threads);
  if (threads == 1) {
    for (int b = 0; b < B; ++b) out[static_cast<std::size_t>(b)] = fn(b);
    return out;
  }
  std::atomic<int> next{0};
  auto worker = [&] {
    for (;;) {
      const int b = next.fetch_add(1);
      if (b >= B) return;
      out[static_cast<std::size_t>(b)] = fn(b);
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(threads));
  for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  return out;
}

BootstrapDistribution collect(std::vector<ReplicateOutcome> outcomes, int B,
                              std::vector<double> BootstrapDistribution::* slot) {
  BootstrapDistribution dist;
  dist.B = B;
  (dist.*slot).reserve(static_cast<std::size_t>(B));
  for (auto& o : outcomes) {
    if (o.ok) {
      (dist.*slot).push_back(o.value);
    } else {
      ++dist.failures;
      dist.failure_reasons.push_back(std::move(o.reason));
    }
  }
  dist.failure_warning = dist.failures > 0.05 * static_cast<double>(B);
  if (static_cast<std::size_t>(dist.failures) == static_cast<std::size_t>(B))
    throw BootstrapError("bootstrap: every replicate failed (first reason: " +
                         (dist.failure_reasons.empty() ? std::string("unknown")
                                                       : dist.failure_reasons.front()) +
                         ")");
  return dist;
}

// per-replicate GEL refit, warm-started at the full-sample estimate with a
// single start; failed attempts draw a fresh resample up to the retry budget
template <typename Stat>
BootstrapDistribution gel_bootstrap(const GelFit& fit, const MomentModel& model,
                                    const Dataset& data, const ResampleScheme& scheme, int B,
                                    std::uint64_t seed, const BootstrapOptions& opts,
                                    std::vector<double> BootstrapDistribution::* slot,
                                    Stat stat) {
  if (B < 1) throw std::invalid_argument("bootstrap: B must be positive");
  auto one = [&](int b) -> ReplicateOutcome {
    ReplicateOutcome out;
    for (int attempt = 0; attempt <= opts.retry_budget; ++attempt) {
      CounterRng rng(seed, static_cast<std::uint64_t>(b),
                     static_cast<std::uint64_t>(attempt));
      const Dataset star = resample(data, scheme, rng);
      try {
        SolveOptions so = opts.solve;
        so.initial_theta = fit.theta_hat;
        so.multistarts = attempt == 0 ? 1 : std::max(2, opts.solve.multistarts);
        so.seed = seed ^ (static_cast<std::uint64_t>(b) << 20) ^
                  static_cast<std::uint64_t>(attempt);
        const GelFit refit = estimate(fit.kind, model, star, so);
        const RobustCovariance recov = covariance(fit.kind, model, star, refit);
        out.value = stat(refit, recov);
        if (!std::isfinite(out.value)) throw std::runtime_error("nonfinite statistic");
        out.ok = true;
        return out;
      } catch (const std::exception& e) {
        out.reason = e.what();
      }
    }
    return out;
  };
  return collect(run_replicates(B, opts.threads, one), B, slot);
}

}  // namespace

BootstrapDistribution bootstrap_t(const GelFit& fit, const RobustCovariance& cov,
                                  const MomentModel& model, const Dataset& data,
                                  const ResampleScheme& scheme, int B, Eigen::Index r,
                                  std::uint64_t seed, const BootstrapOptions& opts) {
  if (r < 0 || r >= fit.theta_hat.size())
    throw std::out_of_range("bootstrap_t: bad coordinate");
  (void)cov;  // centering uses theta_hat only; no recentering of the moments
  const double center = fit.theta_hat(r);
  auto stat = [r, center](const GelFit& refit, const RobustCovariance& recov) {
    const double var = recov.sigma_mr(r, r);
    if (!(var > 0.0)) throw std::runtime_error("nonpositive replicate variance");
    const double n = static_cast<double>(refit.probs.size());
    return (refit.theta_hat(r) - center) / std::sqrt(var / n);
  };
  return gel_bootstrap(fit, model, data, scheme, B, seed, opts,
                       &BootstrapDistribution::t_star, stat);
}

BootstrapDistribution bootstrap_wald(const GelFit& fit, const RobustCovariance& cov,
                                     const MomentModel& model, const Dataset& data,
                                     const ResampleScheme& scheme, int B,
                                     const RestrictionFn& eta, std::uint64_t seed,
                                     const BootstrapOptions& opts) {
  (void)cov;
  const Eigen::VectorXd center = eta.eval(fit.theta_hat);
  auto stat = [&eta, center](const GelFit& refit, const RobustCovariance& recov) {
    // Wald distance of eta(theta*) from eta(theta_hat), not from the null
    RestrictionFn shifted;
    shifted.eval = [&eta, &center](const Eigen::VectorXd& th) {
      return Eigen::VectorXd(eta.eval(th) - center);
    };
    shifted.jac = [&eta](const Eigen::VectorXd& th) { return eta.jacobian(th); };
    return wald_stat(refit, recov, shifted);
  };
  return gel_bootstrap(fit, model, data, scheme, B, seed, opts,
                       &BootstrapDistribution::w_star, stat);
}

BootQuantile quantile(const std::vector<double>& draws, BootStat which, double alpha) {
  if (draws.empty()) throw BootstrapError("quantile: empty bootstrap distribution");
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::domain_error("alpha outside (0,1)");
  std::vector<double> sorted;
  sorted.reserve(draws.size());
  if (which == BootStat::AbsT)
    for (double v : draws) sorted.push_back(std::fabs(v));
  else
    sorted = draws;
  std::sort(sorted.begin(), sorted.end());

  // order statistic k in 1..B minimizing |k/B - (1-alpha)|; ties toward the
  // smaller k, i.e. the smaller value
  const double B = static_cast<double>(sorted.size());
  const double target = 1.0 - alpha;
  std::size_t best_k = 1;
  double best_err = std::fabs(1.0 / B - target);
  for (std::size_t k = 2; k <= sorted.size(); ++k) {
    const double err = std::fabs(static_cast<double>(k) / B - target);
    if (err < best_err - 1e-15) {
      best_err = err;
      best_k = k;
    }
  }
  return {target, sorted[best_k - 1], which};
}

BootQuantile quantile(const BootstrapDistribution& dist, BootStat which, double alpha) {
  const std::vector<double>& draws = which == BootStat::W ? dist.w_star : dist.t_star;
  return quantile(draws, which, alpha);
}

Interval bootstrap_ci(const GelFit& fit, const RobustCovariance& cov,
                      const BootstrapDistribution& dist, Eigen::Index r, double alpha,
                      CiShape shape) {
  const double n = static_cast<double>(fit.probs.size());
  const double se = std::sqrt(cov.sigma_mr(r, r) / n);
  const double center = fit.theta_hat(r);
  Interval ci;
  switch (shape) {
    case CiShape::OneSided:
      ci.lo = center - quantile(dist, BootStat::T, alpha).value * se;
      break;
    case CiShape::Symmetric: {
      const double z = quantile(dist, BootStat::AbsT, alpha).value;
      ci.lo = center - z * se;
      ci.hi = center + z * se;
      break;
    }
    case CiShape::EqualTailed:
      ci.lo = center - quantile(dist, BootStat::T, alpha / 2.0).value * se;
      ci.hi = center - quantile(dist, BootStat::T, 1.0 - alpha / 2.0).value * se;
      break;
  }
  return ci;
}

BootstrapDistribution hh_recentered_bootstrap(const GmmFit& fit, const MomentModel& model,
                                              const Dataset& data, int B, Eigen::Index r,
                                              std::uint64_t seed,
                                              const BootstrapOptions& opts) {
  if (B < 1) throw std::invalid_argument("bootstrap: B must be positive");
  if (r < 0 || r >= fit.theta_hat.size())
    throw std::out_of_range("hh bootstrap: bad coordinate");

  const MomentEval ev = evaluate(model, data, fit.theta_hat, 0);
  const Eigen::VectorXd offset = ev.g.colwise().mean();
  const RecenteredModel recentered(model, offset);
  const double center = fit.theta_hat(r);

  auto one = [&](int b) -> ReplicateOutcome {
    ReplicateOutcome out;
    for (int attempt = 0; attempt <= opts.retry_budget; ++attempt) {
      CounterRng rng(seed, static_cast<std::uint64_t>(b),
                     static_cast<std::uint64_t>(attempt));
      const Dataset star = resample(data, ResampleScheme::iid(), rng);
      try {
        SolveOptions so = opts.solve;
        so.initial_theta = fit.theta_hat;
        so.multistarts = attempt == 0 ? 1 : std::max(2, opts.solve.multistarts);
        so.seed = seed ^ (static_cast<std::uint64_t>(b) << 20) ^
                  static_cast<std::uint64_t>(attempt);
        const GmmFit refit = gmm_estimate(recentered, star, so);
        const double var = refit.sigma_c(r, r);
        if (!(var > 0.0)) throw std::runtime_error("nonpositive replicate variance");
        const double n = static_cast<double>(refit.n);
        out.value = (refit.theta_hat(r) - center) / std::sqrt(var / n);
        if (!std::isfinite(out.value)) throw std::runtime_error("nonfinite statistic");
        out.ok = true;
        return out;
      } catch (const std::exception& e) {
        out.reason = e.what();
      }
    }
    return out;
  };
  return collect(run_replicates(B, opts.threads, one), B, &BootstrapDistribution::t_star);
}

void write_draws_csv(const std::vector<double>& draws, const std::string& path,
                     const std::string& header) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out.precision(17);
  out << header << "\n";
  for (double v : draws) out << v << "\n";
  if (!out) throw std::runtime_error("write failed for " + path);
}

}  // namespace gelboot
