#pragma once

#include <cstddef>
#include <vector>

namespace cg {

double normal_pdf(double x);
double normal_cdf(double x);
/// Inverse standard normal CDF (Wichura's AS 241, full double precision).
double normal_quantile(double p);

/// Gauss-Hermite rule re-weighted for the standard normal density:
/// integral of f against phi(z) dz ~= sum_i weight[i] * f(node[i]),
/// with weights summing to one.
struct GaussHermite {
    std::vector<double> node;
    std::vector<double> weight;
};

GaussHermite gauss_hermite(std::size_t n);

/// Least-squares slope of y against x.
double fitted_slope(const std::vector<double>& x, const std::vector<double>& y);

} // namespace cg
