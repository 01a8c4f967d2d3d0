#pragma once

#include <Eigen/Core>

#include "gelboot/gel.hpp"
#include "gelboot/moment_model.hpp"

namespace gelboot {

// Two-step GMM: identity first-step weight, second-step weight from the
// uncentered moment outer product at the first-step estimate.
struct GmmFit {
  Eigen::VectorXd theta_hat;
  Eigen::VectorXd first_step_theta;
  Eigen::MatrixXd weight_matrix;  // second-step W
  Eigen::MatrixXd sigma_c;        // conventional sandwich for the chosen W
  double j_stat = 0.0;
  double criterion = 0.0;  // gbar' W gbar at theta_hat
  int iterations = 0;
  bool converged = false;
  Eigen::Index n = 0;
};

GmmFit gmm_estimate(const MomentModel& model, const Dataset& data,
                    const SolveOptions& opts = {});

}  // namespace gelboot
