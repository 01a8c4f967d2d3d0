#include "gelboot/gmm.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <iostream>

#include "gelboot/rng.hpp"

namespace gelboot {

namespace {

struct GmmPoint {
  double f;
  Eigen::VectorXd gbar;
  Eigen::MatrixXd gbar_jac;  // Lg x Lt
};

GmmPoint gmm_point(const MomentModel& model, const Dataset& data, const Eigen::VectorXd& theta,
                   const Eigen::MatrixXd& W) {
  const ModelDims d = model.dims();
  const MomentEval ev = evaluate(model, data, theta, 1);
  GmmPoint pt;
  pt.gbar = ev.g.colwise().mean();
  pt.gbar_jac = Eigen::MatrixXd::Zero(d.l_g, d.l_theta);
  for (Eigen::Index i = 0; i < data.n(); ++i) pt.gbar_jac += jacobian_at(ev, i, d);
  pt.gbar_jac /= static_cast<double>(data.n());
  pt.f = pt.gbar.dot(W * pt.gbar);
  return pt;
}

struct GmmCandidate {
  Eigen::VectorXd theta;
  double f;
  int iterations;
  bool converged;
};

// Gauss-Newton with backtracking on gbar' W gbar
GmmCandidate minimize_gmm(const MomentModel& model, const Dataset& data,
                          Eigen::VectorXd theta, const Eigen::MatrixXd& W,
                          const SolveOptions& opts) {
  GmmCandidate cand{theta, 0.0, 0, false};
  GmmPoint cur = gmm_point(model, data, theta, W);
  for (int it = 0; it < opts.max_outer_iters; ++it) {
    cand.iterations = it;
    const Eigen::VectorXd grad = 2.0 * (cur.gbar_jac.transpose() * (W * cur.gbar));
    if (grad.lpNorm<Eigen::Infinity>() <= 1e-12 * (1.0 + std::fabs(cur.f))) {
      cand.converged = true;
      break;
    }
    Eigen::MatrixXd H = cur.gbar_jac.transpose() * W * cur.gbar_jac;
    H.diagonal().array() += 1e-12 * (1.0 + H.diagonal().cwiseAbs().maxCoeff());
    Eigen::VectorXd dir = -H.ldlt().solve(0.5 * grad);
    if (!(dir.dot(grad) < 0.0)) dir = -grad;

    double alpha = 1.0;
    bool accepted = false;
    for (int bt = 0; bt < 50; ++bt) {
      const Eigen::VectorXd trial = theta + alpha * dir;
      GmmPoint next = gmm_point(model, data, trial, W);
      if (next.f <= cur.f + 1e-4 * alpha * grad.dot(dir)) {
        const double step = alpha * dir.lpNorm<Eigen::Infinity>();
        theta = trial;
        cur = next;
        accepted = true;
        if (step <= opts.outer_tol) {
          cand.converged = true;
          it = opts.max_outer_iters;  // done
        }
        break;
      }
      alpha *= 0.5;
    }
    if (!accepted) {
      cand.converged = grad.lpNorm<Eigen::Infinity>() <= 1e-8 * (1.0 + std::fabs(cur.f));
      break;
    }
    if (cand.converged) break;
  }
  cand.theta = theta;
  cand.f = cur.f;
  return cand;
}

GmmCandidate multistart_gmm(const MomentModel& model, const Dataset& data,
                            const Eigen::MatrixXd& W, const SolveOptions& opts) {
  const ModelDims d = model.dims();
  Eigen::VectorXd theta0 = opts.initial_theta.size() == d.l_theta
                               ? opts.initial_theta
                               : Eigen::VectorXd::Zero(d.l_theta);
  CounterRng rng(opts.seed, 0x676d6dULL /* "gmm" */);
  GmmCandidate best{theta0, std::numeric_limits<double>::infinity(), 0, false};
  bool have = false;
  for (int s = 0; s < std::max(1, opts.multistarts); ++s) {
    Eigen::VectorXd start = theta0;
    if (s > 0)
      for (Eigen::Index a = 0; a < d.l_theta; ++a)
        start(a) += 0.5 * (1.0 + std::fabs(theta0(a))) * rng.normal();
    try {
      GmmCandidate c = minimize_gmm(model, data, start, W, opts);
      if (!have || c.f < best.f - 1e-14 ||
          (std::fabs(c.f - best.f) <= 1e-14 && c.theta.norm() < best.theta.norm())) {
        best = c;
        have = true;
      }
    } catch (const std::exception&) {
    }
  }
  if (!have) throw EstimationError("GMM: all multistarts failed");
  return best;
}

}  // namespace

GmmFit gmm_estimate(const MomentModel& model, const Dataset& data, const SolveOptions& opts) {
  data.validate();
  const ModelDims d = model.dims();
  const double n = static_cast<double>(data.n());

  // step 1: identity weight
  const Eigen::MatrixXd I_g = Eigen::MatrixXd::Identity(d.l_g, d.l_g);
  const GmmCandidate step1 = multistart_gmm(model, data, I_g, opts);

  // step 2: efficient weight from the first-step residual moments
  Eigen::MatrixXd W;
  {
    const MomentEval ev1 = evaluate(model, data, step1.theta, 0);
    Eigen::MatrixXd omega = (ev1.g.transpose() * ev1.g) / n;
    Eigen::FullPivLU<Eigen::MatrixXd> lu(omega);
    if (!lu.isInvertible()) {
      std::cerr << "gelboot: warning: singular GMM weight matrix, adding ridge\n";
      omega.diagonal().array() += 1e-10 * (1.0 + omega.trace() / static_cast<double>(d.l_g));
      lu.compute(omega);
    }
    W = lu.solve(I_g);
    W = 0.5 * (W + W.transpose());
  }

  SolveOptions opts2 = opts;
  opts2.initial_theta = step1.theta;
  const GmmCandidate step2 = multistart_gmm(model, data, W, opts2);

  GmmFit fit;
  fit.first_step_theta = step1.theta;
  fit.theta_hat = step2.theta;
  fit.weight_matrix = W;
  fit.criterion = step2.f;
  fit.j_stat = n * step2.f;
  fit.iterations = step1.iterations + step2.iterations;
  fit.converged = step1.converged && step2.converged;
  fit.n = data.n();

  const GmmPoint pt = gmm_point(model, data, step2.theta, W);
  const MomentEval ev2 = evaluate(model, data, step2.theta, 0);
  const Eigen::MatrixXd omega2 = (ev2.g.transpose() * ev2.g) / n;
  const Eigen::MatrixXd GWG = pt.gbar_jac.transpose() * W * pt.gbar_jac;
  const Eigen::MatrixXd GWG_inv = GWG.ldlt().solve(Eigen::MatrixXd::Identity(d.l_theta, d.l_theta));
  fit.sigma_c = GWG_inv * (pt.gbar_jac.transpose() * W * omega2 * W * pt.gbar_jac) * GWG_inv;
  return fit;
}

}  // namespace gelboot
