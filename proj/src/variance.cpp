#include "gelboot/variance.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <iostream>

namespace gelboot {

Eigen::Index StackedBeta::m() const {
  const Eigen::Index lt = theta.size(), lg = lambda.size();
  return kind == GelKind::ETEL ? lt + 2 * lg + 1 : lt + lg;
}

Eigen::VectorXd StackedBeta::stacked() const {
  Eigen::VectorXd v(m());
  v.head(theta.size()) = theta;
  v.segment(theta.size(), lambda.size()) = lambda;
  if (kind == GelKind::ETEL) {
    v.segment(theta.size() + lambda.size(), kappa.size()) = kappa;
    v(v.size() - 1) = tau;
  }
  return v;
}

StackedBeta StackedBeta::from_stacked(GelKind kind, Eigen::Index l_theta, Eigen::Index l_g,
                                      const Eigen::VectorXd& v) {
  StackedBeta b;
  b.kind = kind;
  b.theta = v.head(l_theta);
  b.lambda = v.segment(l_theta, l_g);
  if (kind == GelKind::ETEL) {
    b.kappa = v.segment(l_theta + l_g, l_g);
    b.tau = v(v.size() - 1);
  }
  return b;
}

StackedBeta StackedBeta::from_fit(const GelFit& fit) {
  StackedBeta b;
  b.kind = fit.kind;
  b.theta = fit.theta_hat;
  b.lambda = fit.lambda_hat;
  if (fit.kind == GelKind::ETEL) {
    b.kappa = fit.kappa_hat;
    b.tau = fit.tau_hat;
  }
  return b;
}

RowMatrixXd psi(const MomentEval& ev, const ModelDims& dims, const StackedBeta& beta) {
  const Eigen::Index n = ev.g.rows(), lt = dims.l_theta, lg = dims.l_g;
  const Eigen::Index m = beta.m();
  RowMatrixXd out(n, m);

  if (beta.kind != GelKind::ETEL) {
    const RhoFamily rho = RhoFamily::for_kind(beta.kind);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double nu = ev.g.row(i).dot(beta.lambda);
      if (rho.el && nu >= 1.0)
        throw std::domain_error("EL domain violation in psi at observation " + std::to_string(i));
      const double r1 = rho.rho1(nu);
      out.row(i).head(lt) = r1 * (jacobian_at(ev, i, dims).transpose() * beta.lambda).transpose();
      out.row(i).segment(lt, lg) = r1 * ev.g.row(i);
    }
    return out;
  }

  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::VectorXd g = ev.g.row(i).transpose();
    const auto G = jacobian_at(ev, i, dims);
    const double e = std::exp(beta.lambda.dot(g));
    const double c = g.dot(beta.kappa);
    const Eigen::VectorXd v = beta.kappa + (c - 1.0) * beta.lambda;
    out.row(i).head(lt) = (e * (G.transpose() * v) + beta.tau * (G.transpose() * beta.lambda)).transpose();
    out.row(i).segment(lt, lg) = ((beta.tau - e) * g + e * c * g).transpose();
    out.row(i).segment(lt + lg, lg) = (e * g).transpose();
    out(i, m - 1) = e - beta.tau;
  }
  return out;
}

RowMatrixXd psi(GelKind kind, const MomentModel& model, const Dataset& data,
                const StackedBeta& beta) {
  const MomentEval ev = evaluate(model, data, beta.theta, 1);
  return psi(ev, model.dims(), beta);
}

Eigen::MatrixXd psi_jacobian_row(const MomentEval& ev, const ModelDims& dims,
                                 const StackedBeta& beta, Eigen::Index i) {
  const Eigen::Index lt = dims.l_theta, lg = dims.l_g;
  const Eigen::Index m = beta.m();
  Eigen::MatrixXd J(m, m);

  const Eigen::VectorXd g = ev.g.row(i).transpose();
  const Eigen::MatrixXd G = jacobian_at(ev, i, dims);

  if (beta.kind != GelKind::ETEL) {
    const RhoFamily rho = RhoFamily::for_kind(beta.kind);
    const double nu = g.dot(beta.lambda);
    if (rho.el && nu >= 1.0)
      throw std::domain_error("EL domain violation in psi_jacobian at observation " +
                              std::to_string(i));
    const double r1 = rho.rho1(nu), r2 = rho.rho2(nu);
    const Eigen::VectorXd Gl = G.transpose() * beta.lambda;  // Lt
    J.topLeftCorner(lt, lt) = r1 * contract_g2(ev, i, dims, beta.lambda) + r2 * (Gl * Gl.transpose());
    J.block(0, lt, lt, lg) = r1 * G.transpose() + r2 * (Gl * g.transpose());
    J.block(lt, 0, lg, lt) = J.block(0, lt, lt, lg).transpose();
    J.block(lt, lt, lg, lg) = r2 * (g * g.transpose());
    return J;
  }

  const double e = std::exp(beta.lambda.dot(g));
  const double c = g.dot(beta.kappa);
  const Eigen::VectorXd& lam = beta.lambda;
  const Eigen::VectorXd& kap = beta.kappa;
  const Eigen::VectorXd v = kap + (c - 1.0) * lam;
  const Eigen::MatrixXd I_g = Eigen::MatrixXd::Identity(lg, lg);

  // theta, lambda, kappa, tau block columns
  const Eigen::Index ot = 0, ol = lt, ok = lt + lg, otau = lt + 2 * lg;

  // psi_1 rows
  {
    Eigen::MatrixXd mid = kap * lam.transpose() + lam * kap.transpose() +
                          (c - 1.0) * (lam * lam.transpose());
    J.block(ot, ot, lt, lt) = e * (G.transpose() * mid * G + contract_g2(ev, i, dims, v)) +
                              beta.tau * contract_g2(ev, i, dims, lam);
    J.block(ot, ol, lt, lg) =
        e * (G.transpose() * (v * g.transpose() + (c - 1.0) * I_g)) + beta.tau * G.transpose();
    J.block(ot, ok, lt, lg) = e * (G.transpose() * (I_g + lam * g.transpose()));
    J.block(ot, otau, lt, 1) = G.transpose() * lam;
  }
  // psi_2 rows
  {
    J.block(ol, ot, lg, lt) = J.block(ot, ol, lt, lg).transpose();
    J.block(ol, ol, lg, lg) = e * (c - 1.0) * (g * g.transpose());
    J.block(ol, ok, lg, lg) = e * (g * g.transpose());
    J.block(ol, otau, lg, 1) = g;
  }
  // psi_3 rows
  {
    J.block(ok, ot, lg, lt) = J.block(ot, ok, lt, lg).transpose();
    J.block(ok, ol, lg, lg) = e * (g * g.transpose());
    J.block(ok, ok, lg, lg).setZero();
    J.block(ok, otau, lg, 1).setZero();
  }
  // psi_4 row
  {
    J.block(otau, ot, 1, lt) = e * (lam.transpose() * G);
    J.block(otau, ol, 1, lg) = e * g.transpose();
    J.block(otau, ok, 1, lg).setZero();
    J(otau, otau) = -1.0;
  }
  return J;
}

std::vector<Eigen::MatrixXd> psi_jacobian(GelKind kind, const MomentModel& model,
                                          const Dataset& data, const StackedBeta& beta) {
  const MomentEval ev = evaluate(model, data, beta.theta, 2);
  std::vector<Eigen::MatrixXd> out;
  out.reserve(data.n());
  for (Eigen::Index i = 0; i < data.n(); ++i)
    out.push_back(psi_jacobian_row(ev, model.dims(), beta, i));
  return out;
}

Eigen::MatrixXd average_psi_jacobian(const MomentEval& ev, const ModelDims& dims,
                                     const StackedBeta& beta) {
  const Eigen::Index n = ev.g.rows();
  Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(beta.m(), beta.m());
  for (Eigen::Index i = 0; i < n; ++i) sum += psi_jacobian_row(ev, dims, beta, i);
  return sum / static_cast<double>(n);
}

RobustCovariance covariance(GelKind kind, const MomentModel& model, const Dataset& data,
                            const GelFit& fit) {
  const ModelDims dims = model.dims();
  const StackedBeta beta = StackedBeta::from_fit(fit);
  const Eigen::Index n = data.n(), m = beta.m(), lt = dims.l_theta;
  if (n <= m)
    std::cerr << "gelboot: warning: n = " << n << " <= stacked dimension " << m
              << "; covariance may be unstable\n";

  const MomentEval ev = evaluate(model, data, fit.theta_hat, 2);

  RobustCovariance cov;
  cov.gamma_hat = average_psi_jacobian(ev, dims, beta);
  const RowMatrixXd p = psi(ev, dims, beta);
  cov.psi_hat = (p.transpose() * p) / static_cast<double>(n);

  {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(cov.gamma_hat);
    const double smin = svd.singularValues()(svd.singularValues().size() - 1);
    const double smax = svd.singularValues()(0);
    if (!(smin > 0.0) || smax / smin > 1e12)
      throw VarianceError("Gamma_hat is numerically singular; check model identification");
  }

  const Eigen::MatrixXd gamma_inv =
      cov.gamma_hat.fullPivLu().solve(Eigen::MatrixXd::Identity(m, m));
  cov.sandwich = gamma_inv * cov.psi_hat * gamma_inv.transpose();
  cov.sigma_mr = cov.sandwich.topLeftCorner(lt, lt);

  // conventional variance with uncentered Omega
  Eigen::MatrixXd gbar_jac = Eigen::MatrixXd::Zero(dims.l_g, lt);
  for (Eigen::Index i = 0; i < n; ++i) gbar_jac += jacobian_at(ev, i, dims);
  gbar_jac /= static_cast<double>(n);
  const Eigen::MatrixXd omega = (ev.g.transpose() * ev.g) / static_cast<double>(n);
  const Eigen::MatrixXd oinv_g = omega.ldlt().solve(gbar_jac);
  cov.sigma_c = (gbar_jac.transpose() * oinv_g)
                    .ldlt()
                    .solve(Eigen::MatrixXd::Identity(lt, lt));
  return cov;
}

}  // namespace gelboot
