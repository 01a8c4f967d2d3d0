#include "gelboot/dataset.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace gelboot {

Eigen::Index Dataset::column_index(const std::string& name) const {
  for (Eigen::Index j = 0; j < static_cast<Eigen::Index>(columns.size()); ++j)
    if (columns[j] == name) return j;
  throw std::out_of_range("dataset has no column named '" + name + "'");
}

void Dataset::validate() const {
  if (n() < 2) throw std::invalid_argument("dataset needs at least 2 observations");
  if (!observations.allFinite())
    throw std::invalid_argument("dataset contains non-finite entries");
}

Dataset read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");

  Dataset data;
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty CSV: " + path);
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
      data.columns.push_back(cell);
    }
  }
  const std::size_t k = data.columns.size();
  std::vector<double> values;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    std::stringstream ss(line);
    std::string cell;
    std::size_t j = 0;
    while (std::getline(ss, cell, ',')) {
      if (j >= k) throw std::runtime_error(path + ": too many fields in row " + std::to_string(rows + 1));
      values.push_back(std::stod(cell));
      ++j;
    }
    if (j != k) throw std::runtime_error(path + ": row " + std::to_string(rows + 1) + " has " + std::to_string(j) + " fields, expected " + std::to_string(k));
    ++rows;
  }
  data.observations.resize(rows, k);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < k; ++j) data.observations(i, j) = values[i * k + j];
  return data;
}

void write_csv(const Dataset& data, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out.precision(17);
  for (std::size_t j = 0; j < data.columns.size(); ++j)
    out << (j ? "," : "") << data.columns[j];
  out << "\n";
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    for (Eigen::Index j = 0; j < data.k(); ++j)
      out << (j ? "," : "") << data.observations(i, j);
    out << "\n";
  }
  if (!out) throw std::runtime_error("I/O error writing '" + path + "'");
}

}  // namespace gelboot
