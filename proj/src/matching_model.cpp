#include "gelboot/matching_model.hpp"

#include <cmath>

namespace gelboot {

MatchingMomentModel::MatchingMomentModel(Eigen::Index y_col, std::vector<Eigen::Index> x_cols,
                                         bool intercept, std::vector<Monomial> monomials,
                                         Eigen::VectorXd targets)
    : y_col_(y_col),
      x_cols_(std::move(x_cols)),
      intercept_(intercept),
      monomials_(std::move(monomials)),
      targets_(std::move(targets)) {
  if (static_cast<Eigen::Index>(monomials_.size()) != targets_.size())
    throw std::invalid_argument("one target per matched moment required");
  if (x_cols_.empty() && !intercept_) throw std::invalid_argument("no regressors");
}

ModelDims MatchingMomentModel::dims() const {
  const Eigen::Index lt = static_cast<Eigen::Index>(x_cols_.size()) + (intercept_ ? 1 : 0);
  return {lt, lt + targets_.size()};
}

void MatchingMomentModel::eval_row(const Eigen::Ref<const Eigen::RowVectorXd>& x,
                                   const Eigen::Ref<const Eigen::VectorXd>& theta, int order,
                                   Eigen::Ref<Eigen::RowVectorXd> g_row,
                                   Eigen::Ref<Eigen::RowVectorXd> G_row,
                                   Eigen::Ref<Eigen::RowVectorXd> G2_row) const {
  const ModelDims d = dims();
  const Eigen::Index lt = d.l_theta;

  Eigen::VectorXd xr(lt);
  Eigen::Index j = 0;
  if (intercept_) xr(j++) = 1.0;
  for (Eigen::Index c : x_cols_) xr(j++) = x(c);

  const double resid = x(y_col_) - xr.dot(theta);
  for (Eigen::Index a = 0; a < lt; ++a) g_row(a) = xr(a) * resid;
  for (Eigen::Index k = 0; k < targets_.size(); ++k) {
    double m = 1.0;
    for (const auto& [col, pow] : monomials_[k]) m *= std::pow(x(col), pow);
    g_row(lt + k) = m - targets_(k);
  }

  if (order >= 1) {
    G_row.setZero();
    for (Eigen::Index l = 0; l < lt; ++l)
      for (Eigen::Index a = 0; a < lt; ++a) G_row(l * lt + a) = -xr(l) * xr(a);
  }
  if (order == 2) G2_row.setZero();
}

}  // namespace gelboot
