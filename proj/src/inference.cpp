#include "gelboot/inference.hpp"

#include <Eigen/Dense>
#include <cmath>

#include "gelboot/stats.hpp"

namespace gelboot {

std::string to_string(VarianceFlavor flavor) {
  return flavor == VarianceFlavor::MR ? "MR" : "C";
}

Eigen::MatrixXd RestrictionFn::jacobian(const Eigen::VectorXd& theta) const {
  if (jac) return jac(theta);
  const Eigen::VectorXd base = eval(theta);
  Eigen::MatrixXd J(base.size(), theta.size());
  for (Eigen::Index a = 0; a < theta.size(); ++a) {
    const double h = std::max(1e-7, 1e-8 * std::fabs(theta(a)));
    Eigen::VectorXd tp = theta, tm = theta;
    tp(a) += h;
    tm(a) -= h;
    J.col(a) = (eval(tp) - eval(tm)) / (2.0 * h);
  }
  return J;
}

RestrictionFn RestrictionFn::coordinate(Eigen::Index r, double c) {
  RestrictionFn fn;
  fn.eval = [r, c](const Eigen::VectorXd& th) {
    Eigen::VectorXd v(1);
    v(0) = th(r) - c;
    return v;
  };
  fn.jac = [r](const Eigen::VectorXd& th) {
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(1, th.size());
    J(0, r) = 1.0;
    return J;
  };
  return fn;
}

TStat t_stat(const GelFit& fit, const RobustCovariance& cov, Eigen::Index r,
             double null_value, VarianceFlavor flavor) {
  if (r < 0 || r >= fit.theta_hat.size()) throw std::out_of_range("t_stat: bad coordinate");
  const Eigen::MatrixXd& sigma = flavor == VarianceFlavor::MR ? cov.sigma_mr : cov.sigma_c;
  const double var = sigma(r, r);
  if (!(var > 0.0)) throw std::domain_error("t_stat: nonpositive variance");
  const double n = static_cast<double>(fit.probs.size());
  return {(fit.theta_hat(r) - null_value) / std::sqrt(var / n), r, flavor};
}

double wald_stat(const GelFit& fit, const RobustCovariance& cov, const RestrictionFn& eta) {
  const Eigen::VectorXd e = eta.eval(fit.theta_hat);
  const Eigen::MatrixXd D = eta.jacobian(fit.theta_hat);
  if (D.rows() != e.size() || D.cols() != fit.theta_hat.size())
    throw std::invalid_argument("wald_stat: Jacobian shape mismatch");
  const Eigen::MatrixXd inner = D * cov.sigma_mr * D.transpose();
  Eigen::FullPivLU<Eigen::MatrixXd> lu(inner);
  if (!lu.isInvertible()) throw std::domain_error("wald_stat: singular restriction variance");
  const double n = static_cast<double>(fit.probs.size());
  return n * e.dot(lu.solve(e));
}

std::vector<JTestResult> j_tests(const GelFit& fit, const MomentModel& model,
                                 const Dataset& data) {
  const ModelDims d = model.dims();
  const int df = static_cast<int>(d.l_g - d.l_theta);
  if (df < 1) throw std::invalid_argument("no overidentifying restrictions to test");
  const double n = static_cast<double>(data.n());

  std::vector<JTestResult> out;
  JTestResult lr;
  lr.df = df;
  switch (fit.kind) {
    case GelKind::EL:
      lr.variant = "LR-EL";
      lr.statistic = 2.0 * n * fit.criterion;
      break;
    case GelKind::ET: {
      lr.variant = "LR-ET";
      const double tau = 1.0 - fit.criterion;  // criterion = 1 - n^{-1} sum e^{nu}
      lr.statistic = -2.0 * n * std::log(tau);
      break;
    }
    case GelKind::ETEL:
      lr.variant = "LR-ETEL";
      lr.statistic = 2.0 * n * fit.criterion;
      break;
  }
  lr.p_value = stats::chi2_sf(lr.statistic, df);
  out.push_back(lr);

  JTestResult j;
  j.variant = "GMM-J";
  j.df = df;
  const MomentEval ev = evaluate(model, data, fit.theta_hat, 0);
  const Eigen::VectorXd gbar = ev.g.colwise().mean();
  const Eigen::MatrixXd omega = (ev.g.transpose() * ev.g) / n;
  j.statistic = n * gbar.dot(omega.ldlt().solve(gbar));
  j.p_value = stats::chi2_sf(j.statistic, df);
  out.push_back(j);
  return out;
}

Interval asymptotic_ci(const GelFit& fit, const RobustCovariance& cov, Eigen::Index r,
                       double alpha, CiSide side) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::domain_error("alpha outside (0,1)");
  const double n = static_cast<double>(fit.probs.size());
  const double se = std::sqrt(cov.sigma_mr(r, r) / n);
  Interval ci;
  if (side == CiSide::Lower) {
    ci.lo = fit.theta_hat(r) - stats::normal_quantile(1.0 - alpha) * se;
  } else {
    const double z = stats::normal_quantile(1.0 - alpha / 2.0);
    ci.lo = fit.theta_hat(r) - z * se;
    ci.hi = fit.theta_hat(r) + z * se;
  }
  return ci;
}

bool wald_region_contains(const GelFit& fit, const RobustCovariance& cov,
                          const RestrictionFn& eta, const Eigen::VectorXd& point,
                          double critical_value) {
  const Eigen::VectorXd e = eta.eval(fit.theta_hat) - point;
  const Eigen::MatrixXd D = eta.jacobian(fit.theta_hat);
  const Eigen::MatrixXd inner = D * cov.sigma_mr * D.transpose();
  Eigen::FullPivLU<Eigen::MatrixXd> lu(inner);
  if (!lu.isInvertible()) throw std::domain_error("wald region: singular restriction variance");
  const double n = static_cast<double>(fit.probs.size());
  return n * e.dot(lu.solve(e)) <= critical_value;
}

}  // namespace gelboot
