#pragma once

#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "gelboot/gel.hpp"
#include "gelboot/variance.hpp"

namespace gelboot {

enum class VarianceFlavor { MR, C };

std::string to_string(VarianceFlavor flavor);

struct TStat {
  double value = 0.0;
  Eigen::Index r = 0;
  VarianceFlavor flavor = VarianceFlavor::MR;
};

// restriction eta(theta) with analytic or finite-difference Jacobian
struct RestrictionFn {
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> eval;
  std::function<Eigen::MatrixXd(const Eigen::VectorXd&)> jac;  // optional

  Eigen::MatrixXd jacobian(const Eigen::VectorXd& theta) const;

  // eta(theta) = theta_r - c
  static RestrictionFn coordinate(Eigen::Index r, double c);
};

struct JTestResult {
  double statistic = 0.0;
  int df = 0;
  double p_value = 1.0;
  std::string variant;  // GMM-J, LR-EL, LR-ET, LR-ETEL
};

struct Interval {
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();
  double width() const { return hi - lo; }
};

enum class CiSide { Lower, Symmetric };

TStat t_stat(const GelFit& fit, const RobustCovariance& cov, Eigen::Index r,
             double null_value, VarianceFlavor flavor);

double wald_stat(const GelFit& fit, const RobustCovariance& cov, const RestrictionFn& eta);

// the fit's own likelihood-ratio overidentification statistic plus the GMM J
// statistic at theta_hat, both referred to chi-square with L_g - L_theta df
std::vector<JTestResult> j_tests(const GelFit& fit, const MomentModel& model,
                                 const Dataset& data);

Interval asymptotic_ci(const GelFit& fit, const RobustCovariance& cov, Eigen::Index r,
                       double alpha, CiSide side);

bool wald_region_contains(const GelFit& fit, const RobustCovariance& cov,
                          const RestrictionFn& eta, const Eigen::VectorXd& point,
                          double critical_value);

}  // namespace gelboot
