#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

namespace gelboot {

// Observations are rows; columns are named by the CSV header.
struct Dataset {
  Eigen::MatrixXd observations;  // n x k
  std::vector<std::string> columns;

  Eigen::Index n() const { return observations.rows(); }
  Eigen::Index k() const { return observations.cols(); }

  // throws std::out_of_range when the column is absent
  Eigen::Index column_index(const std::string& name) const;

  // checks n >= 2 and all entries finite; throws std::invalid_argument
  void validate() const;
};

Dataset read_csv(const std::string& path);
void write_csv(const Dataset& data, const std::string& path);

}  // namespace gelboot
