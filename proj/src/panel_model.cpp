#include "gelboot/panel_model.hpp"

namespace gelboot {

PanelMomentModel::PanelMomentModel(int T, std::vector<Eigen::Index> y_cols)
    : T_(T), y_cols_(std::move(y_cols)) {
  if (T_ < 3) throw std::invalid_argument("panel model needs T >= 3");
  if (static_cast<int>(y_cols_.size()) != T_)
    throw std::invalid_argument("panel model needs one column per period");
  for (int t = 3; t <= T_; ++t)
    for (int s = 2; s <= t - 1; ++s) index_.push_back({true, t, s});
  for (int t = 3; t <= T_; ++t) index_.push_back({false, t, 0});
}

PanelMomentModel PanelMomentModel::for_dataset(int T, const Dataset& data) {
  std::vector<Eigen::Index> cols;
  for (int t = 1; t <= T; ++t) cols.push_back(data.column_index("y_" + std::to_string(t)));
  return PanelMomentModel(T, std::move(cols));
}

ModelDims PanelMomentModel::dims() const {
  return {1, static_cast<Eigen::Index>(index_.size())};
}

void PanelMomentModel::eval_row(const Eigen::Ref<const Eigen::RowVectorXd>& x,
                                const Eigen::Ref<const Eigen::VectorXd>& theta, int order,
                                Eigen::Ref<Eigen::RowVectorXd> g_row,
                                Eigen::Ref<Eigen::RowVectorXd> G_row,
                                Eigen::Ref<Eigen::RowVectorXd> G2_row) const {
  const double rho = theta(0);
  auto y = [&](int t) { return x(y_cols_[t - 1]); };
  for (std::size_t l = 0; l < index_.size(); ++l) {
    const auto& m = index_[l];
    double instr, level, lag;
    if (m.dif) {
      instr = y(m.t - m.s);
      level = y(m.t) - y(m.t - 1);
      lag = y(m.t - 1) - y(m.t - 2);
    } else {
      instr = y(m.t - 1) - y(m.t - 2);
      level = y(m.t);
      lag = y(m.t - 1);
    }
    g_row(l) = instr * (level - rho * lag);
    if (order >= 1) G_row(l) = -instr * lag;
    if (order == 2) G2_row(l) = 0.0;
  }
}

}  // namespace gelboot
