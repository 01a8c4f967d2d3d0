#pragma once

#include <Eigen/Core>

#include "gelboot/gel.hpp"
#include "gelboot/moment_model.hpp"

namespace gelboot {

// Parameters of the just-identified FOC system, stacked as
//   (theta, lambda)            for EL/ET,  m = Lt + Lg
//   (theta, lambda, kappa, tau) for ETEL,  m = Lt + 2 Lg + 1
struct StackedBeta {
  GelKind kind = GelKind::EL;
  Eigen::VectorXd theta;
  Eigen::VectorXd lambda;
  Eigen::VectorXd kappa;  // ETEL only
  double tau = 1.0;       // ETEL only

  Eigen::Index m() const;
  Eigen::VectorXd stacked() const;
  static StackedBeta from_stacked(GelKind kind, Eigen::Index l_theta, Eigen::Index l_g,
                                  const Eigen::VectorXd& v);
  static StackedBeta from_fit(const GelFit& fit);
};

struct VarianceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RobustCovariance {
  Eigen::MatrixXd gamma_hat;  // m x m average Jacobian
  Eigen::MatrixXd psi_hat;    // m x m average outer product
  Eigen::MatrixXd sandwich;   // gamma^-1 psi gamma^-T
  Eigen::MatrixXd sigma_mr;   // upper-left Lt x Lt block of the sandwich
  Eigen::MatrixXd sigma_c;    // (G' Omega^-1 G)^-1 with uncentered Omega
};

// n x m matrix of per-observation FOC contributions
RowMatrixXd psi(GelKind kind, const MomentModel& model, const Dataset& data,
                const StackedBeta& beta);
RowMatrixXd psi(const MomentEval& ev, const ModelDims& dims, const StackedBeta& beta);

// per-observation m x m Jacobians (for tests); requires order-2 derivatives
std::vector<Eigen::MatrixXd> psi_jacobian(GelKind kind, const MomentModel& model,
                                          const Dataset& data, const StackedBeta& beta);
Eigen::MatrixXd psi_jacobian_row(const MomentEval& ev, const ModelDims& dims,
                                 const StackedBeta& beta, Eigen::Index i);

Eigen::MatrixXd average_psi_jacobian(const MomentEval& ev, const ModelDims& dims,
                                     const StackedBeta& beta);

RobustCovariance covariance(GelKind kind, const MomentModel& model, const Dataset& data,
                            const GelFit& fit);

}  // namespace gelboot
