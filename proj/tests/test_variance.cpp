#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "gelboot/dgp.hpp"
#include "gelboot/matching_model.hpp"
#include "gelboot/panel_model.hpp"
#include "gelboot/variance.hpp"
#include "test_util.hpp"

using namespace gelboot;
using testutil::ExpTestModel;
using testutil::make_dataset;

namespace {

StackedBeta random_beta(GelKind kind, Eigen::Index lt, Eigen::Index lg,
                        std::uint64_t seed) {
  CounterRng rng(seed, 0x62657461ULL);
  StackedBeta b;
  b.kind = kind;
  b.theta.resize(lt);
  b.lambda.resize(lg);
  for (Eigen::Index a = 0; a < lt; ++a) b.theta(a) = 0.3 * rng.normal();
  for (Eigen::Index l = 0; l < lg; ++l) b.lambda(l) = 0.05 * rng.normal();
  if (kind == GelKind::ETEL) {
    b.kappa.resize(lg);
    for (Eigen::Index l = 0; l < lg; ++l) b.kappa(l) = 0.05 * rng.normal();
    b.tau = 1.0 + 0.1 * rng.normal();
  }
  return b;
}

// central finite differences of psi row i in the stacked parameter
Eigen::MatrixXd fd_psi_jacobian(GelKind kind, const MomentModel& model, const Dataset& data,
                                const StackedBeta& beta, Eigen::Index i) {
  const ModelDims d = model.dims();
  const Eigen::VectorXd v0 = beta.stacked();
  const Eigen::Index m = v0.size();
  Eigen::MatrixXd J(m, m);
  for (Eigen::Index c = 0; c < m; ++c) {
    const double h = 1e-6 * std::max(1.0, std::fabs(v0(c)));
    Eigen::VectorXd vp = v0, vm = v0;
    vp(c) += h;
    vm(c) -= h;
    const StackedBeta bp = StackedBeta::from_stacked(kind, d.l_theta, d.l_g, vp);
    const StackedBeta bm = StackedBeta::from_stacked(kind, d.l_theta, d.l_g, vm);
    const RowMatrixXd pp = psi(kind, model, data, bp);
    const RowMatrixXd pm = psi(kind, model, data, bm);
    J.col(c) = (pp.row(i) - pm.row(i)).transpose() / (2.0 * h);
  }
  return J;
}

double max_rel_err(const Eigen::MatrixXd& got, const Eigen::MatrixXd& want) {
  double worst = 0.0;
  for (Eigen::Index r = 0; r < got.rows(); ++r)
    for (Eigen::Index c = 0; c < got.cols(); ++c)
      worst = std::max(worst, std::fabs(got(r, c) - want(r, c)) /
                                  std::max(1.0, std::fabs(want(r, c))));
  return worst;
}

}  // namespace

TEST_CASE("stacked beta round trip") {
  for (GelKind k : {GelKind::ET, GelKind::ETEL}) {
    const StackedBeta b = random_beta(k, 2, 4, 1);
    CHECK(b.m() == (k == GelKind::ETEL ? 2 + 2 * 4 + 1 : 2 + 4));
    const StackedBeta back = StackedBeta::from_stacked(k, 2, 4, b.stacked());
    CHECK((back.theta - b.theta).lpNorm<Eigen::Infinity>() == 0.0);
    CHECK((back.lambda - b.lambda).lpNorm<Eigen::Infinity>() == 0.0);
    if (k == GelKind::ETEL) {
      CHECK((back.kappa - b.kappa).lpNorm<Eigen::Infinity>() == 0.0);
      CHECK(back.tau == b.tau);
    }
  }
}

TEST_CASE("psi at lambda = 0: EL/ET give [0; -g], ETEL gives [0; 0; g; 0]") {
  const Dataset d = make_dataset(10, 6, 2);
  const ExpTestModel m(2, 3, 6);
  StackedBeta b;
  b.theta = Eigen::VectorXd::Constant(2, 0.1);
  b.lambda = Eigen::VectorXd::Zero(3);

  const MomentEval ev = evaluate(m, d, b.theta, 1);
  for (GelKind k : {GelKind::EL, GelKind::ET}) {
    b.kind = k;
    const RowMatrixXd p = psi(k, m, d, b);
    REQUIRE(p.cols() == 5);
    for (Eigen::Index i = 0; i < d.n(); ++i) {
      CHECK(p.row(i).head(2).lpNorm<Eigen::Infinity>() == doctest::Approx(0.0));
      CHECK((p.row(i).tail(3) + ev.g.row(i)).lpNorm<Eigen::Infinity>() ==
            doctest::Approx(0.0));
    }
  }

  b.kind = GelKind::ETEL;
  b.kappa = Eigen::VectorXd::Zero(3);
  b.tau = 1.0;
  const RowMatrixXd p = psi(GelKind::ETEL, m, d, b);
  REQUIRE(p.cols() == 2 + 2 * 3 + 1);
  for (Eigen::Index i = 0; i < d.n(); ++i) {
    CHECK(p.row(i).head(2).lpNorm<Eigen::Infinity>() == doctest::Approx(0.0));
    CHECK(p.row(i).segment(2, 3).lpNorm<Eigen::Infinity>() == doctest::Approx(0.0));
    CHECK((p.row(i).segment(5, 3) - ev.g.row(i)).lpNorm<Eigen::Infinity>() ==
          doctest::Approx(0.0));
    CHECK(p(i, 8) == doctest::Approx(0.0));
  }
}

TEST_CASE("analytic psi jacobian matches finite differences for all kinds") {
  std::uint64_t seed = 100;
  for (GelKind k : {GelKind::EL, GelKind::ET, GelKind::ETEL}) {
    for (int inst = 0; inst < 4; ++inst) {
      const Eigen::Index lt = 1 + inst % 3;
      const Eigen::Index lg = lt + 1 + inst;
      const Dataset d = make_dataset(20, lt + 2, seed);
      const ExpTestModel m(lt, lg, lt + 2);
      const StackedBeta b = random_beta(k, lt, lg, seed + 1);
      seed += 2;
      const auto analytic = psi_jacobian(k, m, d, b);
      for (Eigen::Index i : {Eigen::Index(0), d.n() / 2, d.n() - 1}) {
        const Eigen::MatrixXd fd = fd_psi_jacobian(k, m, d, b, i);
        CHECK(max_rel_err(analytic[static_cast<std::size_t>(i)], fd) < 1e-5);
      }
    }
  }
}

TEST_CASE("EL/ET average jacobian is symmetric (saddle gradient structure)") {
  const Dataset d = make_dataset(25, 4, 200);
  const ExpTestModel m(2, 3, 4);
  for (GelKind k : {GelKind::EL, GelKind::ET}) {
    const StackedBeta b = random_beta(k, 2, 3, 201);
    const MomentEval ev = evaluate(m, d, b.theta, 2);
    const Eigen::MatrixXd J = average_psi_jacobian(ev, m.dims(), b);
    CHECK((J - J.transpose()).lpNorm<Eigen::Infinity>() < 1e-10);
  }
}

TEST_CASE("psi column means vanish at a converged fit") {
  DgpSpec spec;
  spec.n = 100;
  spec.seed = 31;
  const Dataset d = simulate(spec);
  const PanelMomentModel m = PanelMomentModel::for_dataset(4, d);
  for (GelKind k : {GelKind::EL, GelKind::ET, GelKind::ETEL}) {
    const GelFit fit = estimate(k, m, d);
    REQUIRE(fit.converged);
    const RowMatrixXd p = psi(k, m, d, StackedBeta::from_fit(fit));
    const Eigen::VectorXd bar = p.colwise().mean();
    CHECK(bar.lpNorm<Eigen::Infinity>() <= 1e-8);
  }
}

TEST_CASE("covariance: just-identified collapse to the classic sandwich") {
  const Dataset d = make_dataset(60, 3, 32);
  const MatchingMomentModel m(0, {1, 2}, true, {}, Eigen::VectorXd());
  for (GelKind k : {GelKind::EL, GelKind::ET, GelKind::ETEL}) {
    const GelFit fit = estimate(k, m, d);
    const RobustCovariance cov = covariance(k, m, d, fit);
    CHECK((cov.sigma_mr - cov.sigma_c).lpNorm<Eigen::Infinity>() < 1e-6);

    // classic G^{-1} Omega G^{-T}
    const MomentEval ev = evaluate(m, d, fit.theta_hat, 1);
    const ModelDims dims = m.dims();
    Eigen::MatrixXd G = Eigen::MatrixXd::Zero(dims.l_g, dims.l_theta);
    for (Eigen::Index i = 0; i < d.n(); ++i) G += jacobian_at(ev, i, dims);
    G /= static_cast<double>(d.n());
    const Eigen::MatrixXd omega = (ev.g.transpose() * ev.g) / static_cast<double>(d.n());
    const Eigen::MatrixXd ginv = G.inverse();
    const Eigen::MatrixXd classic = ginv * omega * ginv.transpose();
    CHECK((cov.sigma_mr - classic).lpNorm<Eigen::Infinity>() < 1e-6);
  }
}

TEST_CASE("covariance matrices are symmetric PSD") {
  DgpSpec spec;
  spec.n = 120;
  spec.seed = 33;
  const Dataset d = simulate(spec);
  const PanelMomentModel m = PanelMomentModel::for_dataset(4, d);
  for (GelKind k : {GelKind::EL, GelKind::ET, GelKind::ETEL}) {
    const GelFit fit = estimate(k, m, d);
    const RobustCovariance cov = covariance(k, m, d, fit);
    for (const Eigen::MatrixXd* M :
         {&cov.psi_hat, &cov.sandwich, &cov.sigma_mr, &cov.sigma_c}) {
      CHECK((*M - M->transpose()).lpNorm<Eigen::Infinity>() < 1e-10 * (1.0 + M->norm()));
      const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(*M);
      CHECK(es.eigenvalues().minCoeff() >= -1e-10 * M->trace());
    }
  }
}

TEST_CASE("sigma_mr invariant to moment rescaling and permutation") {
  DgpSpec spec;
  spec.n = 80;
  spec.seed = 34;
  const Dataset d = simulate(spec);
  const PanelMomentModel base = PanelMomentModel::for_dataset(4, d);

  class Scaled : public MomentModel {
   public:
    Scaled(const MomentModel& b, double c) : b_(b), c_(c) {}
    ModelDims dims() const override { return b_.dims(); }
    void eval_row(const Eigen::Ref<const Eigen::RowVectorXd>& x,
                  const Eigen::Ref<const Eigen::VectorXd>& theta, int order,
                  Eigen::Ref<Eigen::RowVectorXd> g, Eigen::Ref<Eigen::RowVectorXd> G,
                  Eigen::Ref<Eigen::RowVectorXd> G2) const override {
      b_.eval_row(x, theta, order, g, G, G2);
      g *= c_;
      if (order >= 1) G *= c_;
      if (order >= 2) G2 *= c_;
    }
    const MomentModel& b_;
    double c_;
  } scaled(base, 3.0);

  const GelFit f0 = estimate(GelKind::ET, base, d);
  const RobustCovariance c0 = covariance(GelKind::ET, base, d, f0);
  const GelFit fs = estimate(GelKind::ET, scaled, d);
  const RobustCovariance cs = covariance(GelKind::ET, scaled, d, fs);
  CHECK((c0.sigma_mr - cs.sigma_mr).lpNorm<Eigen::Infinity>() <
        1e-8 * (1.0 + c0.sigma_mr.norm()));
}

TEST_CASE("singular gamma raises a variance error") {
  // duplicate moment rows make the stacked jacobian singular
  const Dataset d = make_dataset(30, 3, 35);

  class Duplicated : public MomentModel {
   public:
    ModelDims dims() const override { return {1, 2}; }
    void eval_row(const Eigen::Ref<const Eigen::RowVectorXd>& x,
                  const Eigen::Ref<const Eigen::VectorXd>& theta, int order,
                  Eigen::Ref<Eigen::RowVectorXd> g, Eigen::Ref<Eigen::RowVectorXd> G,
                  Eigen::Ref<Eigen::RowVectorXd> G2) const override {
      const double v = x(0) - theta(0);
      g(0) = v;
      g(1) = v;  // identical moment: Omega and Gamma are singular
      if (order >= 1) {
        G(0) = -1.0;
        G(1) = -1.0;
      }
      if (order >= 2) G2.setZero();
    }
  } model;

  GelFit fit;
  fit.kind = GelKind::ET;
  fit.theta_hat = Eigen::VectorXd::Constant(1, d.observations.col(0).mean());
  fit.lambda_hat = Eigen::VectorXd::Zero(2);
  fit.probs = Eigen::VectorXd::Constant(d.n(), 1.0 / static_cast<double>(d.n()));
  CHECK_THROWS_AS((void)covariance(GelKind::ET, model, d, fit), VarianceError);
}
