#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "gelboot/bootstrap.hpp"
#include "gelboot/dgp.hpp"
#include "gelboot/inference.hpp"

namespace gelboot {

inline constexpr const char* kVersion = "gelboot 1.0.0";

// bootstrap resampling scheme labels used in the result tables;
// None marks asymptotic rows
enum class McScheme { None, L, BN, HH };

std::string to_string(McScheme scheme);
McScheme mc_scheme_from_string(const std::string& name);

struct McConfig {
  DgpSpec dgp;
  int R = 5000;
  std::vector<Estimator> estimators = {Estimator::EL, Estimator::ET, Estimator::ETEL,
                                       Estimator::GMM};
  std::vector<McScheme> gel_schemes = {McScheme::L, McScheme::BN};
  std::vector<double> levels = {0.90, 0.95};
  std::uint64_t seed = 0;
  int threads = 1;
  SolveOptions solve;
  // coverage centers; empty -> rho0 for C designs, pseudo_true per estimator
  // for M designs (computed once and cached here)
  std::map<Estimator, double> centers;
};

struct McCell {
  std::string kind;  // "Boot" or "Asymp"
  Estimator est = Estimator::EL;
  VarianceFlavor flavor = VarianceFlavor::MR;
  McScheme scheme = McScheme::None;
  std::vector<double> coverage;    // per level
  std::vector<double> mc_se;       // per level, sqrt(p(1-p)/reps_used)
  std::vector<double> mean_width;  // per level, symmetric CI width
  double j_rejection = 0.0;        // 5% nominal level
  int reps_used = 0;
  int failures = 0;
  bool flagged = false;  // failures exceed 5% of R

  std::string label() const;
};

struct McTable {
  McConfig config;
  std::vector<McCell> cells;
  std::map<Estimator, double> centers_used;
  double seconds = 0.0;
  std::vector<std::string> failure_log;
};

McTable run_warp_speed(const McConfig& config);

enum class TableFormat { Csv, Markdown };

void emit_table(const McTable& table, const std::string& path, TableFormat format);

// reads back a CSV produced by emit_table (cells only, bit-exact)
std::vector<McCell> parse_table_csv(const std::string& path,
                                    std::vector<double>* levels = nullptr,
                                    std::uint64_t* seed = nullptr,
                                    std::string* version = nullptr);

void emit_manifest(const McTable& table, const std::string& path);

}  // namespace gelboot
