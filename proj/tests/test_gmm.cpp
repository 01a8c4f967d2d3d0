#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "gelboot/dgp.hpp"
#include "gelboot/gmm.hpp"
#include "gelboot/matching_model.hpp"
#include "gelboot/panel_model.hpp"
#include "test_util.hpp"

using namespace gelboot;
using testutil::make_dataset;

TEST_CASE("just-identified GMM solves the sample moments exactly") {
  const Dataset d = make_dataset(60, 3, 51);
  const MatchingMomentModel m(0, {1, 2}, true, {}, Eigen::VectorXd());
  const GmmFit fit = gmm_estimate(m, d);
  REQUIRE(fit.converged);
  CHECK(std::fabs(fit.j_stat) < 1e-10);

  // closed-form least squares oracle
  Eigen::MatrixXd X(60, 3);
  X.col(0).setOnes();
  X.col(1) = d.observations.col(1);
  X.col(2) = d.observations.col(2);
  const Eigen::VectorXd beta =
      (X.transpose() * X).ldlt().solve(X.transpose() * d.observations.col(0));
  CHECK((fit.theta_hat - beta).lpNorm<Eigen::Infinity>() < 1e-8);
}

TEST_CASE("second step improves on the first step under the efficient weight") {
  DgpSpec spec;
  spec.n = 150;
  spec.seed = 52;
  const Dataset d = simulate(spec);
  const PanelMomentModel m = PanelMomentModel::for_dataset(4, d);
  const GmmFit fit = gmm_estimate(m, d);
  REQUIRE(fit.converged);
  CHECK(fit.j_stat >= 0.0);

  const auto criterion = [&](const Eigen::VectorXd& th) {
    const MomentEval ev = evaluate(m, d, th, 0);
    const Eigen::VectorXd gbar = ev.g.colwise().mean();
    return gbar.dot(fit.weight_matrix * gbar);
  };
  CHECK(criterion(fit.theta_hat) <= criterion(fit.first_step_theta) + 1e-12);
}

TEST_CASE("weight matrix is symmetric PD and sigma_c symmetric PSD") {
  DgpSpec spec;
  spec.n = 150;
  spec.seed = 53;
  const Dataset d = simulate(spec);
  const PanelMomentModel m = PanelMomentModel::for_dataset(4, d);
  const GmmFit fit = gmm_estimate(m, d);
  CHECK((fit.weight_matrix - fit.weight_matrix.transpose()).lpNorm<Eigen::Infinity>() <
        1e-10 * (1.0 + fit.weight_matrix.norm()));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(fit.weight_matrix);
  CHECK(es.eigenvalues().minCoeff() > 0.0);
  es.compute(fit.sigma_c);
  CHECK(es.eigenvalues().minCoeff() >= -1e-10 * fit.sigma_c.trace());
}

TEST_CASE("theta invariant to moment rescaling") {
  DgpSpec spec;
  spec.n = 100;
  spec.seed = 54;
  const Dataset d = simulate(spec);
  const PanelMomentModel base = PanelMomentModel::for_dataset(4, d);

  class Scaled : public MomentModel {
   public:
    explicit Scaled(const MomentModel& b) : b_(b) {}
    ModelDims dims() const override { return b_.dims(); }
    void eval_row(const Eigen::Ref<const Eigen::RowVectorXd>& x,
                  const Eigen::Ref<const Eigen::VectorXd>& theta, int order,
                  Eigen::Ref<Eigen::RowVectorXd> g, Eigen::Ref<Eigen::RowVectorXd> G,
                  Eigen::Ref<Eigen::RowVectorXd> G2) const override {
      b_.eval_row(x, theta, order, g, G, G2);
      g *= 5.0;
      if (order >= 1) G *= 5.0;
      if (order >= 2) G2 *= 5.0;
    }
    const MomentModel& b_;
  } scaled(base);

  const GmmFit f0 = gmm_estimate(base, d);
  const GmmFit fs = gmm_estimate(scaled, d);
  CHECK(std::fabs(f0.theta_hat(0) - fs.theta_hat(0)) < 1e-8);
}

TEST_CASE("gmm estimation is deterministic") {
  DgpSpec spec;
  spec.n = 80;
  spec.seed = 55;
  const Dataset d = simulate(spec);
  const PanelMomentModel m = PanelMomentModel::for_dataset(4, d);
  SolveOptions opts;
  opts.seed = 3;
  const GmmFit a = gmm_estimate(m, d, opts);
  const GmmFit b = gmm_estimate(m, d, opts);
  CHECK(a.theta_hat == b.theta_hat);
  CHECK(a.j_stat == b.j_stat);
}
