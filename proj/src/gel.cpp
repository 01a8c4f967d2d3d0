#include "gelboot/gel.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <iostream>
#include <limits>

#include "gelboot/rng.hpp"
#include "gelboot/variance.hpp"

namespace gelboot {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

std::string to_string(GelKind kind) {
  switch (kind) {
    case GelKind::EL: return "EL";
    case GelKind::ET: return "ET";
    case GelKind::ETEL: return "ETEL";
  }
  return "?";
}

GelKind gel_kind_from_string(const std::string& name) {
  if (name == "EL" || name == "el") return GelKind::EL;
  if (name == "ET" || name == "et") return GelKind::ET;
  if (name == "ETEL" || name == "etel") return GelKind::ETEL;
  throw std::invalid_argument("unknown estimator kind '" + name + "'");
}

double RhoFamily::rho(double v) const { return el ? std::log1p(-v) : 1.0 - std::exp(v); }
double RhoFamily::rho1(double v) const { return el ? -1.0 / (1.0 - v) : -std::exp(v); }
double RhoFamily::rho2(double v) const {
  if (!el) return -std::exp(v);
  const double s = 1.0 - v;
  return -1.0 / (s * s);
}

namespace {

double criterion_value(const RhoFamily& rho, const Eigen::VectorXd& nu, double el_margin) {
  if (rho.el && nu.maxCoeff() >= 1.0 - el_margin) return -kInf;
  double sum = 0.0;
  for (Eigen::Index i = 0; i < nu.size(); ++i) sum += rho.rho(nu(i));
  const double q = sum / static_cast<double>(nu.size());
  return std::isfinite(q) ? q : -kInf;
}

}  // namespace

InnerResult inner_solve(GelKind kind, const RowMatrixXd& g, const SolveOptions& opts,
                        const Eigen::VectorXd& lambda_start) {
  const RhoFamily rho = RhoFamily::for_kind(kind);
  const Eigen::Index n = g.rows(), lg = g.cols();
  const double margin = opts.el_domain_margin;

  InnerResult res;
  res.lambda = lambda_start.size() == lg ? lambda_start : Eigen::VectorXd::Zero(lg);
  Eigen::VectorXd nu = g * res.lambda;
  double q = criterion_value(rho, nu, margin);
  if (!std::isfinite(q)) {  // infeasible warm start, lambda = 0 is always feasible
    res.lambda.setZero();
    nu.setZero();
    q = 0.0;
  }

  Eigen::VectorXd r1(n), r2(n), grad(lg), dir(lg);
  for (int it = 0; it < opts.max_inner_iters; ++it) {
    for (Eigen::Index i = 0; i < n; ++i) {
      r1(i) = rho.rho1(nu(i));
      r2(i) = rho.rho2(nu(i));
    }
    grad = g.transpose() * r1 / static_cast<double>(n);
    res.grad_norm = grad.lpNorm<Eigen::Infinity>();
    res.iterations = it;
    if (res.grad_norm <= opts.inner_tol) {
      res.converged = true;
      res.criterion = q;
      return res;
    }

    // Newton direction on the concave criterion: A = -Hessian is PD
    Eigen::MatrixXd A = -(g.transpose() * r2.asDiagonal() * g) / static_cast<double>(n);
    double ridge = 0.0;
    for (;;) {
      Eigen::LDLT<Eigen::MatrixXd> ldlt(A + ridge * Eigen::MatrixXd::Identity(lg, lg));
      dir = ldlt.solve(grad);
      if (ldlt.info() == Eigen::Success && dir.allFinite() && grad.dot(dir) > 0.0) break;
      ridge = ridge == 0.0 ? 1e-10 * (1.0 + A.diagonal().maxCoeff()) : ridge * 100.0;
      if (ridge > 1e8) throw InnerLoopError("inner Newton direction failed", res.grad_norm);
    }

    double alpha = 1.0;
    const Eigen::VectorXd t = g * dir;
    if (rho.el) {
      // keep max_i lambda'g_i strictly below 1 - margin
      double alpha_max = kInf;
      for (Eigen::Index i = 0; i < n; ++i)
        if (t(i) > 0.0) alpha_max = std::min(alpha_max, (1.0 - margin - nu(i)) / t(i));
      if (alpha_max <= 1e-16)
        throw std::domain_error("EL domain collapse: no feasible inner step");
      alpha = std::min(1.0, 0.95 * alpha_max);
    }

    const double slope = grad.dot(dir);
    bool accepted = false;
    for (int bt = 0; bt < 60; ++bt) {
      Eigen::VectorXd nu_new = nu + alpha * t;
      double q_new = criterion_value(rho, nu_new, margin);
      if (q_new >= q + 1e-4 * alpha * slope && std::isfinite(q_new)) {
        res.lambda += alpha * dir;
        nu.swap(nu_new);
        q = q_new;
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!accepted) {
      if (rho.el) throw std::domain_error("EL domain collapse: no feasible inner step");
      throw InnerLoopError("inner line search stalled", res.grad_norm);
    }
  }
  // final gradient check after the last step
  for (Eigen::Index i = 0; i < n; ++i) r1(i) = rho.rho1(nu(i));
  grad = g.transpose() * r1 / static_cast<double>(n);
  res.grad_norm = grad.lpNorm<Eigen::Infinity>();
  res.criterion = q;
  res.converged = res.grad_norm <= opts.inner_tol;
  if (!res.converged)
    throw InnerLoopError("inner loop did not converge in max_inner_iters", res.grad_norm);
  return res;
}

std::pair<Eigen::VectorXd, double> inner_loop(GelKind kind, const MomentModel& model,
                                              const Dataset& data,
                                              const Eigen::VectorXd& theta,
                                              const SolveOptions& opts) {
  const MomentEval ev = evaluate(model, data, theta, 0);
  const InnerResult r = inner_solve(kind, ev.g, opts, Eigen::VectorXd());
  return {r.lambda, r.criterion};
}

namespace {

// log(n^{-1} sum exp(lambda'(g_i - gbar))), stabilized
double etel_objective_value(const RowMatrixXd& g, const Eigen::VectorXd& lambda) {
  Eigen::VectorXd nu = g * lambda;
  const double center = nu.mean();
  double mx = -kInf;
  for (Eigen::Index i = 0; i < nu.size(); ++i) mx = std::max(mx, nu(i) - center);
  double s = 0.0;
  for (Eigen::Index i = 0; i < nu.size(); ++i) s += std::exp(nu(i) - center - mx);
  return mx + std::log(s / static_cast<double>(nu.size()));
}

struct ObjectivePoint {
  double f = kInf;
  Eigen::VectorXd grad;
  Eigen::VectorXd lambda;
};

// profile objective and (for EL/ET) its envelope gradient at theta
ObjectivePoint eval_objective(GelKind kind, const MomentModel& model, const Dataset& data,
                              const Eigen::VectorXd& theta, const SolveOptions& opts,
                              const Eigen::VectorXd& lambda_warm, bool want_grad) {
  const ModelDims d = model.dims();
  ObjectivePoint out;
  if (kind == GelKind::ETEL) {
    const MomentEval ev = evaluate(model, data, theta, 0);
    InnerResult ir = inner_solve(kind, ev.g, opts, lambda_warm);
    out.lambda = ir.lambda;
    out.f = etel_objective_value(ev.g, ir.lambda);
    if (want_grad) {
      out.grad.resize(d.l_theta);
      for (Eigen::Index a = 0; a < d.l_theta; ++a) {
        const double h = std::max(1e-6, 1e-7 * std::fabs(theta(a)));
        Eigen::VectorXd tp = theta, tm = theta;
        tp(a) += h;
        tm(a) -= h;
        const MomentEval evp = evaluate(model, data, tp, 0);
        const MomentEval evm = evaluate(model, data, tm, 0);
        const double fp = etel_objective_value(evp.g, inner_solve(kind, evp.g, opts, ir.lambda).lambda);
        const double fm = etel_objective_value(evm.g, inner_solve(kind, evm.g, opts, ir.lambda).lambda);
        out.grad(a) = (fp - fm) / (2.0 * h);
      }
    }
    return out;
  }

  const MomentEval ev = evaluate(model, data, theta, want_grad ? 1 : 0);
  InnerResult ir = inner_solve(kind, ev.g, opts, lambda_warm);
  out.lambda = ir.lambda;
  out.f = ir.criterion;
  if (want_grad) {
    const RhoFamily rho = RhoFamily::for_kind(kind);
    const Eigen::VectorXd nu = ev.g * ir.lambda;
    out.grad = Eigen::VectorXd::Zero(d.l_theta);
    for (Eigen::Index i = 0; i < data.n(); ++i) {
      const double r1 = rho.rho1(nu(i));
      out.grad.noalias() += r1 * (jacobian_at(ev, i, d).transpose() * ir.lambda);
    }
    out.grad /= static_cast<double>(data.n());
  }
  return out;
}

void project_into_box(Eigen::VectorXd& theta, const SolveOptions& opts) {
  if (opts.lower_bound.size() == theta.size())
    theta = theta.cwiseMax(opts.lower_bound);
  if (opts.upper_bound.size() == theta.size())
    theta = theta.cwiseMin(opts.upper_bound);
}

struct OuterCandidate {
  Eigen::VectorXd theta;
  Eigen::VectorXd lambda;
  double f = kInf;
  int iterations = 0;
  bool converged = false;
};

OuterCandidate minimize_from(GelKind kind, const MomentModel& model, const Dataset& data,
                             Eigen::VectorXd theta, const SolveOptions& opts) {
  const Eigen::Index lt = theta.size();
  project_into_box(theta, opts);

  OuterCandidate cand;
  ObjectivePoint cur = eval_objective(kind, model, data, theta, opts, Eigen::VectorXd(), true);
  Eigen::MatrixXd hinv = Eigen::MatrixXd::Identity(lt, lt);

  int it = 0;
  for (; it < opts.max_outer_iters; ++it) {
    if (cur.grad.lpNorm<Eigen::Infinity>() <= 1e-10 * (1.0 + std::fabs(cur.f))) {
      cand.converged = true;
      break;
    }
    Eigen::VectorXd dir = -(hinv * cur.grad);
    if (dir.dot(cur.grad) >= 0.0) {  // reset on a non-descent direction
      hinv.setIdentity();
      dir = -cur.grad;
    }

    double alpha = 1.0;
    const double slope = cur.grad.dot(dir);
    bool accepted = false;
    Eigen::VectorXd theta_new;
    ObjectivePoint next;
    for (int bt = 0; bt < 50; ++bt) {
      theta_new = theta + alpha * dir;
      project_into_box(theta_new, opts);
      try {
        next = eval_objective(kind, model, data, theta_new, opts, cur.lambda, true);
      } catch (const std::exception&) {
        alpha *= 0.5;
        continue;
      }
      if (next.f <= cur.f + 1e-4 * alpha * slope) {
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!accepted) {
      // cannot make progress; treat a flat gradient as convergence
      cand.converged = cur.grad.lpNorm<Eigen::Infinity>() <= 1e-6 * (1.0 + std::fabs(cur.f));
      break;
    }

    const Eigen::VectorXd s = theta_new - theta;
    const Eigen::VectorXd y = next.grad - cur.grad;
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      const Eigen::VectorXd hy = hinv * y;
      const double yhy = y.dot(hy);
      hinv += ((sy + yhy) / (sy * sy)) * (s * s.transpose()) -
              (hy * s.transpose() + s * hy.transpose()) / sy;
    }

    theta = theta_new;
    cur = next;
    if (s.lpNorm<Eigen::Infinity>() <= opts.outer_tol) {
      cand.converged = true;
      ++it;
      break;
    }
  }

  cand.theta = theta;
  cand.lambda = cur.lambda;
  cand.f = cur.f;
  cand.iterations = it;
  return cand;
}

// Newton polish of the stacked FOC; returns true when the residual improved
bool polish(GelKind kind, const MomentModel& model, const Dataset& data, StackedBeta& beta,
            const SolveOptions& opts, double& residual) {
  const ModelDims d = model.dims();
  const Eigen::Index m = beta.m();

  auto residual_of = [&](const StackedBeta& b, MomentEval& ev) {
    ev = evaluate(model, data, b.theta, 2);
    const RowMatrixXd p = psi(ev, d, b);
    Eigen::VectorXd bar = p.colwise().mean();
    return bar.lpNorm<Eigen::Infinity>();
  };

  MomentEval ev;
  double best = residual_of(beta, ev);
  const double initial = best;
  StackedBeta best_beta = beta;

  StackedBeta b = beta;
  for (int it = 0; it < 40 && best > opts.polish_tol * 1e-3; ++it) {
    const RowMatrixXd p = psi(ev, d, b);
    const Eigen::VectorXd bar = p.colwise().mean();
    Eigen::MatrixXd jac = average_psi_jacobian(ev, d, b);
    Eigen::VectorXd delta;
    {
      Eigen::FullPivLU<Eigen::MatrixXd> lu(jac);
      if (lu.isInvertible()) {
        delta = lu.solve(bar);
      } else {
        jac.diagonal().array() += 1e-10 * (1.0 + jac.diagonal().cwiseAbs().maxCoeff());
        delta = jac.fullPivLu().solve(bar);
      }
    }
    if (!delta.allFinite()) break;

    bool improved = false;
    double step = 1.0;
    for (int bt = 0; bt < 30; ++bt) {
      StackedBeta trial =
          StackedBeta::from_stacked(kind, d.l_theta, d.l_g, b.stacked() - step * delta);
      try {
        MomentEval ev_trial;
        const double r = residual_of(trial, ev_trial);
        if (r < best) {
          b = trial;
          best = r;
          best_beta = trial;
          ev = std::move(ev_trial);
          improved = true;
          break;
        }
      } catch (const std::exception&) {
        // infeasible trial (EL domain, non-finite evaluation); shrink
      }
      step *= 0.5;
    }
    if (!improved) break;
  }

  if (best < initial) {
    beta = best_beta;
    residual = best;
    return true;
  }
  residual = initial;
  return false;
}

}  // namespace

std::pair<Eigen::VectorXd, double> etel_auxiliary(const RowMatrixXd& g,
                                                  const Eigen::VectorXd& lambda) {
  const Eigen::Index n = g.rows(), lg = g.cols();
  const Eigen::VectorXd nu = g * lambda;
  double tau = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) tau += std::exp(nu(i));
  tau /= static_cast<double>(n);

  Eigen::MatrixXd wgg = Eigen::MatrixXd::Zero(lg, lg);
  for (Eigen::Index i = 0; i < n; ++i)
    wgg.noalias() += (std::exp(nu(i)) / tau) * (g.row(i).transpose() * g.row(i));
  wgg /= static_cast<double>(n);
  const Eigen::VectorXd gbar = g.colwise().mean();
  Eigen::VectorXd kappa = -wgg.ldlt().solve(gbar);
  return {kappa, tau};
}

double profile_objective(GelKind kind, const MomentModel& model, const Dataset& data,
                         const Eigen::VectorXd& theta, const SolveOptions& opts) {
  return eval_objective(kind, model, data, theta, opts, Eigen::VectorXd(), false).f;
}

GelFit estimate(GelKind kind, const MomentModel& model, const Dataset& data,
                const SolveOptions& opts) {
  data.validate();
  const ModelDims d = model.dims();
  if (d.l_theta < 1 || d.l_theta > d.l_g) throw std::invalid_argument("need 1 <= L_theta <= L_g");
  if (data.n() <= d.l_g)
    std::cerr << "gelboot: warning: n = " << data.n() << " <= L_g = " << d.l_g
              << "; estimates may be unstable\n";

  Eigen::VectorXd theta0 = opts.initial_theta.size() == d.l_theta
                               ? opts.initial_theta
                               : Eigen::VectorXd::Zero(d.l_theta);

  // multistart: the user point plus jittered copies
  std::vector<Eigen::VectorXd> starts{theta0};
  CounterRng rng(opts.seed, 0x6d737461727473ULL /* "mstarts" */);
  for (int s = 1; s < std::max(1, opts.multistarts); ++s) {
    Eigen::VectorXd jittered = theta0;
    for (Eigen::Index a = 0; a < d.l_theta; ++a)
      jittered(a) += 0.5 * (1.0 + std::fabs(theta0(a))) * rng.normal();
    starts.push_back(jittered);
  }

  std::vector<OuterCandidate> cands;
  for (const auto& start : starts) {
    try {
      cands.push_back(minimize_from(kind, model, data, start, opts));
    } catch (const std::exception&) {
      // start failed entirely (e.g. EL domain at start); skip
    }
  }
  if (cands.empty()) throw EstimationError("all multistarts failed");

  std::size_t best = 0;
  for (std::size_t i = 1; i < cands.size(); ++i) {
    const double df = cands[i].f - cands[best].f;
    if (df < -1e-12 || (std::fabs(df) <= 1e-12 && cands[i].theta.norm() < cands[best].theta.norm()))
      best = i;
  }
  const OuterCandidate& win = cands[best];
  if (!win.converged) {
    bool any_converged = false;
    for (const auto& c : cands) any_converged |= c.converged;
    if (!any_converged) {
      EstimationError err("outer loop did not converge from any start");
      for (const auto& c : cands) err.trace.emplace_back(c.theta, c.f);
      throw err;
    }
  }

  // assemble the stacked parameter and polish the joint FOC
  GelFit fit;
  fit.kind = kind;
  fit.iterations = win.iterations;

  StackedBeta beta;
  beta.kind = kind;
  beta.theta = win.theta;
  {
    const MomentEval ev0 = evaluate(model, data, win.theta, 0);
    const InnerResult ir = inner_solve(kind, ev0.g, opts, win.lambda);
    beta.lambda = ir.lambda;
    if (kind == GelKind::ETEL) std::tie(beta.kappa, beta.tau) = etel_auxiliary(ev0.g, ir.lambda);
  }

  double residual = kInf;
  polish(kind, model, data, beta, opts, residual);

  fit.theta_hat = beta.theta;
  fit.lambda_hat = beta.lambda;
  if (kind == GelKind::ETEL) {
    fit.kappa_hat = beta.kappa;
    fit.tau_hat = beta.tau;
  }
  fit.foc_residual = residual;
  fit.converged = win.converged && residual <= opts.polish_tol;

  const MomentEval ev = evaluate(model, data, beta.theta, 0);
  const Eigen::VectorXd nu = ev.g * beta.lambda;
  const Eigen::Index n = data.n();
  fit.probs.resize(n);
  if (kind == GelKind::EL) {
    for (Eigen::Index i = 0; i < n; ++i) fit.probs(i) = 1.0 / (1.0 - nu(i));
    const RhoFamily rho = RhoFamily::for_kind(kind);
    double sum = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) sum += rho.rho(nu(i));
    fit.criterion = sum / static_cast<double>(n);
  } else {
    const double mx = nu.maxCoeff();
    for (Eigen::Index i = 0; i < n; ++i) fit.probs(i) = std::exp(nu(i) - mx);
    fit.criterion = kind == GelKind::ETEL
                        ? etel_objective_value(ev.g, beta.lambda)
                        : 1.0 - nu.array().exp().sum() / static_cast<double>(n);
  }
  fit.probs /= fit.probs.sum();
  return fit;
}

UbcDiagnostic ubc_diagnostic(const GelFit& fit, const MomentModel& model, const Dataset& data,
                             const SolveOptions& opts) {
  if (fit.kind != GelKind::EL)
    throw std::invalid_argument("UBC diagnostic applies to EL fits only");
  const MomentEval ev = evaluate(model, data, fit.theta_hat, 0);
  const Eigen::VectorXd nu = ev.g * fit.lambda_hat;
  UbcDiagnostic diag;
  diag.min_slack = 1.0 - nu.maxCoeff();
  diag.flag = diag.min_slack < 100.0 * opts.el_domain_margin;
  return diag;
}

}  // namespace gelboot
