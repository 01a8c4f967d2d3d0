#pragma once

#include <Eigen/Core>
#include <memory>
#include <stdexcept>

#include "gelboot/dataset.hpp"

namespace gelboot {

struct ModelDims {
  Eigen::Index l_theta = 0;
  Eigen::Index l_g = 0;
};

// Derivative storage convention, fixed once for the whole library:
//   G row i   : G_i(l, a) = d g_l / d theta_a   at flat index l*Lt + a
//   G2 row i  : G2_i(l, a, b) = d^2 g_l / d theta_a d theta_b
//               at flat index (l*Lt + a)*Lt + b
// i.e. row-major over (moment index, theta index[, theta index]).
using RowMatrixXd = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct MomentEval {
  RowMatrixXd g;   // n x Lg
  RowMatrixXd G;   // n x (Lg*Lt), empty unless order >= 1
  RowMatrixXd G2;  // n x (Lg*Lt*Lt), empty unless order == 2
};

struct EvalDomainError : std::runtime_error {
  Eigen::Index row;
  EvalDomainError(const std::string& what, Eigen::Index r)
      : std::runtime_error(what + " at observation " + std::to_string(r)), row(r) {}
};

class MomentModel {
 public:
  virtual ~MomentModel() = default;
  virtual ModelDims dims() const = 0;
  // highest analytic derivative order the model provides (1 or 2);
  // order-2 requests on an order-1 model are lifted by central differences
  virtual int supported_order() const { return 2; }

  virtual void eval_row(const Eigen::Ref<const Eigen::RowVectorXd>& x,
                        const Eigen::Ref<const Eigen::VectorXd>& theta, int order,
                        Eigen::Ref<Eigen::RowVectorXd> g_row,
                        Eigen::Ref<Eigen::RowVectorXd> G_row,
                        Eigen::Ref<Eigen::RowVectorXd> G2_row) const = 0;
};

MomentEval evaluate(const MomentModel& model, const Dataset& data,
                    const Eigen::VectorXd& theta, int order);

// max relative error of analytic G vs central differences of g, and of
// analytic G2 vs central differences of G
double finite_diff_check(const MomentModel& model, const Dataset& data,
                         const Eigen::VectorXd& theta, double step);

// views into the flattened derivative rows
using RowMajorMap =
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

inline RowMajorMap jacobian_at(const MomentEval& ev, Eigen::Index i, const ModelDims& d) {
  return RowMajorMap(ev.G.row(i).data(), d.l_g, d.l_theta);
}

// sum_l v(l) * G2_i(l, :, :), an Lt x Lt (symmetric) matrix
Eigen::MatrixXd contract_g2(const MomentEval& ev, Eigen::Index i, const ModelDims& d,
                            const Eigen::VectorXd& v);

}  // namespace gelboot
