#pragma once

#include <vector>

#include "gelboot/moment_model.hpp"

namespace gelboot {

// Regression with auxiliary moment matching. The moment function stacks the
// least-squares normal equations x_i (y_i - x_i' beta) on top of
// m(row) - target, where each matched moment m_k is a monomial in the data
// columns. The second block does not depend on beta.
class MatchingMomentModel : public MomentModel {
 public:
  // one matched moment: product of data columns raised to integer powers
  using Monomial = std::vector<std::pair<Eigen::Index, int>>;

  MatchingMomentModel(Eigen::Index y_col, std::vector<Eigen::Index> x_cols, bool intercept,
                      std::vector<Monomial> monomials, Eigen::VectorXd targets);

  ModelDims dims() const override;
  int supported_order() const override { return 2; }
  void eval_row(const Eigen::Ref<const Eigen::RowVectorXd>& x,
                const Eigen::Ref<const Eigen::VectorXd>& theta, int order,
                Eigen::Ref<Eigen::RowVectorXd> g_row, Eigen::Ref<Eigen::RowVectorXd> G_row,
                Eigen::Ref<Eigen::RowVectorXd> G2_row) const override;

  Eigen::Index n_matched() const { return targets_.size(); }

 private:
  Eigen::Index y_col_;
  std::vector<Eigen::Index> x_cols_;
  bool intercept_;
  std::vector<Monomial> monomials_;
  Eigen::VectorXd targets_;
};

}  // namespace gelboot
