#include "gelboot/kde.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

namespace gelboot {

double silverman_bandwidth(const std::vector<double>& sample) {
  const std::size_t n = sample.size();
  if (n == 0) throw std::invalid_argument("kde: empty sample");
  if (n == 1) return 1.0;  // degenerate; any positive width gives a single bump

  double mean = 0.0;
  for (double v : sample) mean += v;
  mean /= static_cast<double>(n);
  double ss = 0.0;
  for (double v : sample) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));

  std::vector<double> sorted = sample;
  std::sort(sorted.begin(), sorted.end());
  const auto quantile_at = [&](double q) {
    const double pos = q * static_cast<double>(n - 1);
    const std::size_t lo = static_cast<std::size_t>(pos);
    const double frac = pos - static_cast<double>(lo);
    return lo + 1 < n ? sorted[lo] * (1.0 - frac) + sorted[lo + 1] * frac : sorted[lo];
  };
  const double iqr = quantile_at(0.75) - quantile_at(0.25);

  double spread = sd;
  if (iqr > 0.0) spread = std::min(spread, iqr / 1.34);
  if (!(spread > 0.0)) spread = std::max(std::fabs(mean), 1.0) * 1e-3;  // ties everywhere
  return 0.9 * spread * std::pow(static_cast<double>(n), -0.2);
}

KdeResult kde(const std::vector<double>& sample, double bandwidth, std::size_t points) {
  if (sample.empty()) throw std::invalid_argument("kde: empty sample");
  if (points < 2) throw std::invalid_argument("kde: need at least 2 grid points");
  KdeResult res;
  res.bandwidth = bandwidth > 0.0 ? bandwidth : silverman_bandwidth(sample);

  const auto [lo_it, hi_it] = std::minmax_element(sample.begin(), sample.end());
  const double lo = *lo_it - 3.0 * res.bandwidth;
  const double hi = *hi_it + 3.0 * res.bandwidth;
  const double step = (hi - lo) / static_cast<double>(points - 1);

  const double norm = 1.0 / (static_cast<double>(sample.size()) * res.bandwidth *
                             std::sqrt(2.0 * M_PI));
  res.x.resize(points);
  res.density.resize(points);
  for (std::size_t j = 0; j < points; ++j) {
    const double x = lo + static_cast<double>(j) * step;
    double acc = 0.0;
    for (double v : sample) {
      const double z = (x - v) / res.bandwidth;
      acc += std::exp(-0.5 * z * z);
    }
    res.x[j] = x;
    res.density[j] = norm * acc;
  }
  return res;
}

void write_kde_csv(const KdeResult& res, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out.precision(17);
  out << "x,density\n";
  for (std::size_t j = 0; j < res.x.size(); ++j)
    out << res.x[j] << ',' << res.density[j] << "\n";
  if (!out) throw std::runtime_error("write failed for " + path);
}

}  // namespace gelboot
