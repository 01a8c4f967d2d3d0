#pragma once

#include <string>
#include <vector>

namespace gelboot {

struct KdeResult {
  std::vector<double> x;        // 512 evenly spaced points on [min-3h, max+3h]
  std::vector<double> density;  // Gaussian-kernel density estimates
  double bandwidth = 0.0;
};

// Silverman's rule of thumb: 0.9 min(sd, iqr/1.34) n^{-1/5}
double silverman_bandwidth(const std::vector<double>& sample);

// bandwidth <= 0 selects Silverman's rule
KdeResult kde(const std::vector<double>& sample, double bandwidth = 0.0,
              std::size_t points = 512);

void write_kde_csv(const KdeResult& res, const std::string& path);

}  // namespace gelboot
