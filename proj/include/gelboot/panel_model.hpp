#pragma once

#include <vector>

#include "gelboot/moment_model.hpp"

namespace gelboot {

// AR(1) dynamic panel moment conditions on y_{i,1..T}, scalar parameter.
// Difference-equation moments use lagged levels as instruments,
//   E y_{i,t-s} (dy_{it} - theta dy_{i,t-1}) = 0,  t = 3..T, s = 2..t-1,
// followed by the system moments
//   E dy_{i,t-1} (y_{it} - theta y_{i,t-1}) = 0,   t = 3..T,
// where dy_t = y_t - y_{t-1}. Moment count is (T+1)(T-2)/2.
class PanelMomentModel : public MomentModel {
 public:
  struct MomentIndex {
    bool dif;  // false -> system moment
    int t;
    int s;  // lag, difference moments only
  };

  // y_cols[t-1] is the dataset column holding y_t
  PanelMomentModel(int T, std::vector<Eigen::Index> y_cols);

  // resolves columns y_1..y_T by name
  static PanelMomentModel for_dataset(int T, const Dataset& data);

  ModelDims dims() const override;
  int supported_order() const override { return 2; }
  void eval_row(const Eigen::Ref<const Eigen::RowVectorXd>& x,
                const Eigen::Ref<const Eigen::VectorXd>& theta, int order,
                Eigen::Ref<Eigen::RowVectorXd> g_row, Eigen::Ref<Eigen::RowVectorXd> G_row,
                Eigen::Ref<Eigen::RowVectorXd> G2_row) const override;

  int T() const { return T_; }
  const std::vector<MomentIndex>& moment_index() const { return index_; }

 private:
  int T_;
  std::vector<Eigen::Index> y_cols_;
  std::vector<MomentIndex> index_;
};

}  // namespace gelboot
