#include "gelboot/moment_model.hpp"

#include <cmath>

namespace gelboot {

namespace {

void check_finite(const RowMatrixXd& m, const char* what) {
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    if (!m.row(i).allFinite()) throw EvalDomainError(std::string("non-finite ") + what, i);
}

}  // namespace

MomentEval evaluate(const MomentModel& model, const Dataset& data,
                    const Eigen::VectorXd& theta, int order) {
  const ModelDims d = model.dims();
  if (theta.size() != d.l_theta) throw std::invalid_argument("theta dimension mismatch");
  if (!theta.allFinite()) throw std::invalid_argument("theta must be finite");
  if (order < 0 || order > 2) throw std::invalid_argument("order must be 0, 1, or 2");

  const Eigen::Index n = data.n();
  const Eigen::Index lt = d.l_theta, lg = d.l_g;
  const int native = std::min(order, model.supported_order());

  MomentEval ev;
  ev.g.resize(n, lg);
  if (order >= 1) ev.G.resize(n, lg * lt);
  if (order == 2) ev.G2.resize(n, lg * lt * lt);

  Eigen::RowVectorXd none(0);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (native == 2)
      model.eval_row(data.observations.row(i), theta, 2, ev.g.row(i), ev.G.row(i),
                     ev.G2.row(i));
    else if (order >= 1)
      model.eval_row(data.observations.row(i), theta, 1, ev.g.row(i), ev.G.row(i), none);
    else
      model.eval_row(data.observations.row(i), theta, 0, ev.g.row(i), none, none);
  }

  if (order == 2 && native < 2) {
    // lift G2 by central differences of G, coordinate by coordinate
    Eigen::RowVectorXd gp(lg), gm(lg), Gp(lg * lt), Gm(lg * lt), empty(0);
    for (Eigen::Index b = 0; b < lt; ++b) {
      const double h = std::max(1e-6, 1e-7 * std::fabs(theta(b)));
      Eigen::VectorXd tp = theta, tm = theta;
      tp(b) += h;
      tm(b) -= h;
      for (Eigen::Index i = 0; i < n; ++i) {
        model.eval_row(data.observations.row(i), tp, 1, gp, Gp, empty);
        model.eval_row(data.observations.row(i), tm, 1, gm, Gm, empty);
        for (Eigen::Index l = 0; l < lg; ++l)
          for (Eigen::Index a = 0; a < lt; ++a)
            ev.G2(i, (l * lt + a) * lt + b) = (Gp(l * lt + a) - Gm(l * lt + a)) / (2.0 * h);
      }
    }
  }

  check_finite(ev.g, "moment value");
  if (order >= 1) check_finite(ev.G, "moment Jacobian");
  if (order == 2) check_finite(ev.G2, "moment second derivative");
  return ev;
}

Eigen::MatrixXd contract_g2(const MomentEval& ev, Eigen::Index i, const ModelDims& d,
                            const Eigen::VectorXd& v) {
  const Eigen::Index lt = d.l_theta;
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(lt, lt);
  for (Eigen::Index l = 0; l < d.l_g; ++l) {
    const double vl = v(l);
    if (vl == 0.0) continue;
    for (Eigen::Index a = 0; a < lt; ++a)
      for (Eigen::Index b = 0; b < lt; ++b) out(a, b) += vl * ev.G2(i, (l * lt + a) * lt + b);
  }
  return out;
}

double finite_diff_check(const MomentModel& model, const Dataset& data,
                         const Eigen::VectorXd& theta, double step) {
  if (step <= 0.0) throw std::invalid_argument("step must be positive");
  const ModelDims d = model.dims();
  const Eigen::Index lt = d.l_theta, lg = d.l_g, n = data.n();
  const MomentEval base = evaluate(model, data, theta, 2);

  double max_rel = 0.0;
  auto rel = [](double got, double want) {
    return std::fabs(got - want) / std::max(1.0, std::fabs(want));
  };

  for (Eigen::Index a = 0; a < lt; ++a) {
    Eigen::VectorXd tp = theta, tm = theta;
    tp(a) += step;
    tm(a) -= step;
    const MomentEval evp = evaluate(model, data, tp, 1);
    const MomentEval evm = evaluate(model, data, tm, 1);
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index l = 0; l < lg; ++l) {
        double fd = (evp.g(i, l) - evm.g(i, l)) / (2.0 * step);
        max_rel = std::max(max_rel, rel(base.G(i, l * lt + a), fd));
        for (Eigen::Index b = 0; b < lt; ++b) {
          double fd2 = (evp.G(i, l * lt + b) - evm.G(i, l * lt + b)) / (2.0 * step);
          max_rel = std::max(max_rel, rel(base.G2(i, (l * lt + b) * lt + a), fd2));
        }
      }
    }
  }
  return max_rel;
}

}  // namespace gelboot
