#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gelboot/gel.hpp"
#include "gelboot/gmm.hpp"
#include "gelboot/inference.hpp"
#include "gelboot/rng.hpp"
#include "gelboot/variance.hpp"

namespace gelboot {

enum class SchemeKind { IID, BN_WEIGHTED, SHRINKAGE };

struct ResampleScheme {
  SchemeKind kind = SchemeKind::IID;
  Eigen::VectorXd weights;  // empty for IID (uniform)

  static ResampleScheme iid() { return {}; }
  static ResampleScheme bn(const Eigen::VectorXd& probs);
  // shrinkage toward uniform: eps * p_i + (1 - eps) / n; eps < 0 -> n^{-1/2}
  static ResampleScheme shrinkage(const Eigen::VectorXd& probs, double eps = -1.0);
};

Dataset resample(const Dataset& data, const ResampleScheme& scheme, CounterRng& rng);

enum class BootStat { T, AbsT, W };

struct BootstrapDistribution {
  int B = 0;
  std::vector<double> t_star;
  std::vector<double> w_star;
  int failures = 0;
  std::vector<std::string> failure_reasons;
  bool failure_warning = false;  // failures exceeded 5% of B
};

struct BootQuantile {
  double level = 0.0;  // 1 - alpha
  double value = 0.0;
  BootStat which = BootStat::T;
};

struct BootstrapOptions {
  SolveOptions solve;
  int retry_budget = 2;  // fresh redraws per replicate before recording failure
  int threads = 1;
};

struct BootstrapError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

BootstrapDistribution bootstrap_t(const GelFit& fit, const RobustCovariance& cov,
                                  const MomentModel& model, const Dataset& data,
                                  const ResampleScheme& scheme, int B, Eigen::Index r,
                                  std::uint64_t seed, const BootstrapOptions& opts = {});

BootstrapDistribution bootstrap_wald(const GelFit& fit, const RobustCovariance& cov,
                                     const MomentModel& model, const Dataset& data,
                                     const ResampleScheme& scheme, int B,
                                     const RestrictionFn& eta, std::uint64_t seed,
                                     const BootstrapOptions& opts = {});

// discrete bootstrap quantile: order statistic minimizing |k/B - (1-alpha)|,
// ties resolved toward the smallest value
BootQuantile quantile(const BootstrapDistribution& dist, BootStat which, double alpha);
BootQuantile quantile(const std::vector<double>& draws, BootStat which, double alpha);

enum class CiShape { OneSided, Symmetric, EqualTailed };

Interval bootstrap_ci(const GelFit& fit, const RobustCovariance& cov,
                      const BootstrapDistribution& dist, Eigen::Index r, double alpha,
                      CiShape shape);

// moment function recentered by the full-sample mean at theta; used only by
// the Hall-Horowitz comparison bootstrap
class RecenteredModel : public MomentModel {
 public:
  RecenteredModel(const MomentModel& base, Eigen::VectorXd offset)
      : base_(base), offset_(std::move(offset)) {}
  ModelDims dims() const override { return base_.dims(); }
  int supported_order() const override { return base_.supported_order(); }
  void eval_row(const Eigen::Ref<const Eigen::RowVectorXd>& x,
                const Eigen::Ref<const Eigen::VectorXd>& theta, int order,
                Eigen::Ref<Eigen::RowVectorXd> g_row, Eigen::Ref<Eigen::RowVectorXd> G_row,
                Eigen::Ref<Eigen::RowVectorXd> G2_row) const override {
    base_.eval_row(x, theta, order, g_row, G_row, G2_row);
    g_row -= offset_.transpose();
  }

 private:
  const MomentModel& base_;
  Eigen::VectorXd offset_;
};

BootstrapDistribution hh_recentered_bootstrap(const GmmFit& fit, const MomentModel& model,
                                              const Dataset& data, int B, Eigen::Index r,
                                              std::uint64_t seed,
                                              const BootstrapOptions& opts = {});

void write_draws_csv(const std::vector<double>& draws, const std::string& path,
                     const std::string& header);

}  // namespace gelboot
