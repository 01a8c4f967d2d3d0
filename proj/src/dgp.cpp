#include "gelboot/dgp.hpp"

#include <cmath>
#include <stdexcept>

#include "gelboot/gmm.hpp"
#include "gelboot/panel_model.hpp"
#include "gelboot/rng.hpp"

namespace gelboot {

std::string to_string(Estimator est) {
  switch (est) {
    case Estimator::EL: return "EL";
    case Estimator::ET: return "ET";
    case Estimator::ETEL: return "ETEL";
    default: return "GMM";
  }
}

Estimator estimator_from_string(const std::string& name) {
  if (name == "EL" || name == "el") return Estimator::EL;
  if (name == "ET" || name == "et") return Estimator::ET;
  if (name == "ETEL" || name == "etel") return Estimator::ETEL;
  if (name == "GMM" || name == "gmm") return Estimator::GMM;
  throw std::invalid_argument("unknown estimator: " + name);
}

std::string to_string(DgpName name) {
  switch (name) {
    case DgpName::C1: return "C1";
    case DgpName::C2: return "C2";
    case DgpName::M1: return "M1";
    default: return "M2";
  }
}

DgpName dgp_name_from_string(const std::string& name) {
  if (name == "C1" || name == "C-1") return DgpName::C1;
  if (name == "C2" || name == "C-2") return DgpName::C2;
  if (name == "M1" || name == "M-1") return DgpName::M1;
  if (name == "M2" || name == "M-2") return DgpName::M2;
  throw std::invalid_argument("unknown DGP: " + name);
}

void DgpSpec::validate() const {
  if (T < 3) throw std::invalid_argument("DGP needs T >= 3");
  if (n < 1) throw std::invalid_argument("DGP needs n >= 1");
  if (burn_in < 0) throw std::invalid_argument("negative burn-in");
  if (misspecified()) {
    // AR(2) stationarity triangle
    if (!(std::fabs(rho2) < 1.0 && rho1 + rho2 < 1.0 && rho2 - rho1 < 1.0))
      throw std::invalid_argument("AR(2) coefficients outside the stationarity region");
    if (std::fabs(rho1 - rho2) < 1e-12)
      throw std::invalid_argument("rho1 == rho2 leaves the second anchor undefined");
  } else {
    if (!(std::fabs(rho0) < 1.0)) throw std::invalid_argument("|rho0| must be < 1");
  }
}

namespace {

constexpr std::uint64_t kDgpStream = 0x646770ULL;  // "dgp"

double chisq_shock(CounterRng& rng) { return (rng.chisq1() - 1.0) / std::sqrt(2.0); }

double truncated_chisq_shock(CounterRng& rng) {
  // transform applied after truncation, as printed; no re-centering
  return (rng.truncated_chisq1(0.0, 16.0) - 1.0) / std::sqrt(2.0);
}

// mean-zero lognormal e^Z - sqrt(e), rejected outside [-sqrt(e), e^3.5]
double truncated_lognormal_shock(CounterRng& rng) {
  const double lo = -std::sqrt(std::exp(1.0));
  const double hi = std::exp(3.5);
  for (;;) {
    const double v = std::exp(rng.normal()) + lo;
    if (v >= lo && v <= hi) return v;
  }
}

}  // namespace

Dataset simulate(const DgpSpec& spec) {
  spec.validate();
  const Eigen::Index total = spec.burn_in + spec.T;

  Dataset out;
  out.observations.resize(spec.n, spec.T);
  out.columns.resize(static_cast<std::size_t>(spec.T));
  for (Eigen::Index t = 0; t < spec.T; ++t)
    out.columns[static_cast<std::size_t>(t)] = "y_" + std::to_string(t + 1);

  for (Eigen::Index i = 0; i < spec.n; ++i) {
    CounterRng rng(spec.seed, kDgpStream, static_cast<std::uint64_t>(i));
    Eigen::VectorXd path(total);

    switch (spec.name) {
      case DgpName::C1: {
        const double eta = rng.normal();
        const double u1 = rng.normal() / std::sqrt(1.0 - spec.rho0 * spec.rho0);
        path(0) = eta / (1.0 - spec.rho0) + u1;
        for (Eigen::Index t = 1; t < total; ++t)
          path(t) = spec.rho0 * path(t - 1) + eta + chisq_shock(rng);
        break;
      }
      case DgpName::C2: {
        const double eta = rng.normal();
        const double sigma2 = rng.uniform(0.2, 1.8);
        const double sigma = std::sqrt(sigma2);
        const double u1 = sigma * rng.normal() / std::sqrt(1.0 - spec.rho0 * spec.rho0);
        path(0) = eta / (1.0 - spec.rho0) + u1;
        for (Eigen::Index t = 1; t < total; ++t)
          path(t) = spec.rho0 * path(t - 1) + eta + sigma * rng.normal();
        break;
      }
      case DgpName::M1:
      case DgpName::M2: {
        const double eta = rng.truncated_normal(-4.0, 4.0);
        const double scale =
            std::sqrt((1.0 - spec.rho2) /
                      ((1.0 + spec.rho2) *
                       ((1.0 - spec.rho2) * (1.0 - spec.rho2) - spec.rho1 * spec.rho1)));
        path(0) = eta / (1.0 - spec.rho1 - spec.rho2) + scale * rng.truncated_normal(-4.0, 4.0);
        for (Eigen::Index t = 1; t < total; ++t) {
          // the paper prints only y_{i1}; the second lag starts at y_{i1} too
          const double lag2 = t >= 2 ? path(t - 2) : path(0);
          const double nu = spec.name == DgpName::M1 ? truncated_chisq_shock(rng)
                                                     : truncated_lognormal_shock(rng);
          path(t) = spec.rho1 * path(t - 1) + spec.rho2 * lag2 + eta + nu;
        }
        break;
      }
    }
    out.observations.row(i) = path.tail(spec.T).transpose();
  }
  return out;
}

PseudoTrueResult pseudo_true(const DgpSpec& spec, Estimator est, Eigen::Index n_used,
                             const SolveOptions& opts) {
  if (!spec.misspecified())
    throw std::invalid_argument("pseudo_true is defined for the M designs only");
  if (n_used <= 0) n_used = spec.T == 4 ? 30000 : 20000;

  DgpSpec big = spec;
  big.n = n_used;
  const Dataset data = simulate(big);
  const PanelMomentModel model =
      PanelMomentModel::for_dataset(static_cast<int>(spec.T), data);

  PseudoTrueResult res;
  res.n_used = n_used;
  res.rho_a = spec.rho1 - spec.rho2;
  res.rho_b = spec.rho1 + spec.rho2 / (spec.rho1 - spec.rho2);

  SolveOptions so = opts;
  if (so.initial_theta.size() == 0) {
    so.initial_theta.resize(1);
    so.initial_theta(0) = res.rho_a;
  }
  if (est == Estimator::GMM) {
    res.value = gmm_estimate(model, data, so).theta_hat(0);
  } else {
    res.value = estimate(gel_kind_of(est), model, data, so).theta_hat(0);
  }
  if (!std::isfinite(res.value)) throw EstimationError("pseudo-true estimate is not finite");
  return res;
}

}  // namespace gelboot
