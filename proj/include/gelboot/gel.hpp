#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "gelboot/moment_model.hpp"

namespace gelboot {

enum class GelKind { EL, ET, ETEL };

std::string to_string(GelKind kind);
GelKind gel_kind_from_string(const std::string& name);

// rho(v) = log(1-v) for EL, 1 - e^v for ET; ETEL's inner problem is ET's
struct RhoFamily {
  bool el;
  static RhoFamily for_kind(GelKind kind) { return {kind == GelKind::EL}; }
  double rho(double v) const;
  double rho1(double v) const;
  double rho2(double v) const;
};

struct SolveOptions {
  double inner_tol = 1e-10;    // inner gradient inf-norm
  double outer_tol = 1e-8;     // theta step inf-norm
  double polish_tol = 1e-8;    // stacked FOC residual
  int max_inner_iters = 100;
  int max_outer_iters = 500;
  int multistarts = 5;
  Eigen::VectorXd initial_theta;  // empty -> zeros
  double el_domain_margin = 1e-10;
  std::uint64_t seed = 0;  // multistart jitter stream
  Eigen::VectorXd lower_bound, upper_bound;  // optional box bounds, empty = none
};

struct GelFit {
  GelKind kind = GelKind::EL;
  Eigen::VectorXd theta_hat;
  Eigen::VectorXd lambda_hat;
  Eigen::VectorXd kappa_hat;  // ETEL only
  double tau_hat = 1.0;       // ETEL only
  Eigen::VectorXd probs;      // implied probabilities, sum to 1
  double criterion = 0.0;     // profile objective at theta_hat
  double foc_residual = 0.0;  // inf-norm of the stacked FOC means
  int iterations = 0;
  bool converged = false;
};

struct InnerLoopError : std::runtime_error {
  double last_grad_norm;
  InnerLoopError(const std::string& what, double gn)
      : std::runtime_error(what), last_grad_norm(gn) {}
};

struct EstimationError : std::runtime_error {
  // (theta, objective) of the best candidates seen across multistarts
  std::vector<std::pair<Eigen::VectorXd, double>> trace;
  explicit EstimationError(const std::string& what) : std::runtime_error(what) {}
};

struct InnerResult {
  Eigen::VectorXd lambda;
  double criterion = 0.0;
  int iterations = 0;
  bool converged = false;
  double grad_norm = 0.0;
};

// maximizes n^{-1} sum rho(lambda'g_i) over lambda for a fixed moment matrix;
// for EL every iterate keeps max_i lambda'g_i <= 1 - el_domain_margin
InnerResult inner_solve(GelKind kind, const RowMatrixXd& g, const SolveOptions& opts,
                        const Eigen::VectorXd& lambda_start);

std::pair<Eigen::VectorXd, double> inner_loop(GelKind kind, const MomentModel& model,
                                              const Dataset& data,
                                              const Eigen::VectorXd& theta,
                                              const SolveOptions& opts = {});

// EL/ET: saddle value n^{-1} sum rho(lambda'g_i); ETEL: the tilted log objective
double profile_objective(GelKind kind, const MomentModel& model, const Dataset& data,
                         const Eigen::VectorXd& theta, const SolveOptions& opts = {});

GelFit estimate(GelKind kind, const MomentModel& model, const Dataset& data,
                const SolveOptions& opts = {});

// ETEL auxiliary parameters at (theta, lambda)
std::pair<Eigen::VectorXd, double> etel_auxiliary(const RowMatrixXd& g,
                                                  const Eigen::VectorXd& lambda);

struct UbcDiagnostic {
  double min_slack = 1.0;  // min over i of 1 - lambda'g_i
  bool flag = false;
};

// EL only: slack of the uniform-boundedness condition at the fit
UbcDiagnostic ubc_diagnostic(const GelFit& fit, const MomentModel& model,
                             const Dataset& data, const SolveOptions& opts = {});

}  // namespace gelboot
