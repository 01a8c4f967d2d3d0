#pragma once

namespace gelboot::stats {

double normal_cdf(double x);
// quantile of N(0,1) at probability p, |error| < 1e-12
double normal_quantile(double p);

// regularized lower incomplete gamma P(a, x)
double gamma_p(double a, double x);

double chi2_cdf(double x, double df);
double chi2_sf(double x, double df);
double chi2_quantile(double p, double df);

}  // namespace gelboot::stats
