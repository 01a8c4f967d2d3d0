#pragma once

#include <cstdint>
#include <string>

#include "gelboot/dataset.hpp"
#include "gelboot/gel.hpp"

namespace gelboot {

enum class Estimator { EL, ET, ETEL, GMM };

std::string to_string(Estimator est);
Estimator estimator_from_string(const std::string& name);
inline GelKind gel_kind_of(Estimator est) {
  switch (est) {
    case Estimator::EL: return GelKind::EL;
    case Estimator::ET: return GelKind::ET;
    default: return GelKind::ETEL;
  }
}

enum class DgpName { C1, C2, M1, M2 };

std::string to_string(DgpName name);
DgpName dgp_name_from_string(const std::string& name);

// Dynamic-panel Monte Carlo designs. C designs are AR(1) with individual
// effects; M designs are AR(2) data fit with the (misspecified) AR(1) model.
struct DgpSpec {
  DgpName name = DgpName::C1;
  Eigen::Index T = 4;
  Eigen::Index n = 100;
  double rho0 = 0.4;            // C designs
  double rho1 = 0.6, rho2 = 0.2;  // M designs
  int burn_in = 100;            // periods discarded before the retained window
  std::uint64_t seed = 0;

  bool misspecified() const { return name == DgpName::M1 || name == DgpName::M2; }
  void validate() const;  // throws std::invalid_argument on bad parameters
};

// wide panel with columns y_1..y_T; per-individual RNG streams keyed by
// (seed, design tag, i), so panels are reproducible and parallel-safe
Dataset simulate(const DgpSpec& spec);

struct PseudoTrueResult {
  double value = 0.0;
  Eigen::Index n_used = 0;
  double rho_a = 0.0;  // rho1 - rho2
  double rho_b = 0.0;  // rho1 + rho2 / (rho1 - rho2)
};

// large-n estimate of the pseudo-true AR(1) coefficient for an M design;
// n_used <= 0 selects the default (30,000 for T=4, 20,000 otherwise)
PseudoTrueResult pseudo_true(const DgpSpec& spec, Estimator est, Eigen::Index n_used = 0,
                             const SolveOptions& opts = {});

}  // namespace gelboot
