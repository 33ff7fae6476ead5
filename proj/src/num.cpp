#include "condgreeks/num.hpp"
#include "condgreeks/errors.hpp"

#include <cmath>
#include <cstddef>

namespace cg {

double normal_pdf(double x) {
    const double inv_sqrt_2pi = 0.3989422804014326779;
    return inv_sqrt_2pi * std::exp(-0.5 * x * x);
}

double normal_cdf(double x) {
    return 0.5 * std::erfc(-x * 0.7071067811865475244);
}

// Wichura, Algorithm AS 241 (PPND16).
double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) {
        throw ContractError("normal_quantile: p must lie strictly inside (0,1)");
    }
    const double q = p - 0.5;
    double r;
    if (std::fabs(q) <= 0.425) {
        r = 0.180625 - q * q;
        const double num =
            (((((((2.5090809287301226727e+3 * r + 3.3430575583588128105e+4) * r +
                  6.7265770927008700853e+4) * r + 4.5921953931549871457e+4) * r +
                1.3731693765509461125e+4) * r + 1.9715909503065514427e+3) * r +
              1.3314166789178437745e+2) * r + 3.3871328727963666080e+0);
        const double den =
            (((((((5.2264952788528545610e+3 * r + 2.8729085735721942674e+4) * r +
                  3.9307895800092710610e+4) * r + 2.1213794301586595867e+4) * r +
                5.3941960214247511077e+3) * r + 6.8718700749205790830e+2) * r +
              4.2313330701600911252e+1) * r + 1.0);
        return q * num / den;
    }
    r = q < 0.0 ? p : 1.0 - p;
    r = std::sqrt(-std::log(r));
    double value;
    if (r <= 5.0) {
        r -= 1.6;
        const double num =
            (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r +
                  2.41780725177450611770e-1) * r + 1.27045825245236838258e+0) * r +
                3.64784832476320460504e+0) * r + 5.76949722146069140550e+0) * r +
              4.63033784615654529590e+0) * r + 1.42343711074968357734e+0);
        const double den =
            (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r +
                  1.51986665636164571966e-2) * r + 1.48103976427480074590e-1) * r +
                6.89767334985100004550e-1) * r + 1.67638483018380384940e+0) * r +
              2.05319162663775882187e+0) * r + 1.0);
        value = num / den;
    } else {
        r -= 5.0;
        const double num =
            (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
                  1.24266094738807843860e-3) * r + 2.65321895265761230930e-2) * r +
                2.96560571828504891230e-1) * r + 1.78482653991729133580e+0) * r +
              5.46378491116411436990e+0) * r + 6.65790464350110377720e+0);
        const double den =
            (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r +
                  1.84631831751005468180e-5) * r + 7.86869131145613259100e-4) * r +
                1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r +
              5.99832206555887937690e-1) * r + 1.0);
        value = num / den;
    }
    return q < 0.0 ? -value : value;
}

namespace {

// Orthonormal Hermite polynomials for the weight exp(-x^2), evaluated by the
// three-term recurrence.  Returns p_0..p_n at x.
void hermite_orthonormal(std::size_t n, double x, std::vector<double>& p) {
    p.resize(n + 1);
    const double pi_quarter = 0.7511255444649424829; // pi^(-1/4)
    p[0] = pi_quarter;
    if (n == 0) return;
    p[1] = std::sqrt(2.0) * x * pi_quarter;
    for (std::size_t k = 1; k < n; ++k) {
        p[k + 1] = x * std::sqrt(2.0 / (k + 1.0)) * p[k] -
                   std::sqrt(static_cast<double>(k) / (k + 1.0)) * p[k - 1];
    }
}

double hermite_top(std::size_t n, double x, std::vector<double>& scratch) {
    hermite_orthonormal(n, x, scratch);
    return scratch[n];
}

} // namespace

GaussHermite gauss_hermite(std::size_t n) {
    if (n < 2) throw ContractError("gauss_hermite: need at least two nodes");
    std::vector<double> scratch;
    std::vector<double> roots;
    roots.reserve(n);

    // All roots of the degree-n polynomial lie inside [-sqrt(2n+1), sqrt(2n+1)].
    const double bound = std::sqrt(2.0 * n + 1.0) + 0.5;
    const std::size_t cells = 4000 * n / 10 + 2000;
    double prev_x = -bound;
    double prev_v = hermite_top(n, prev_x, scratch);
    for (std::size_t i = 1; i <= cells; ++i) {
        const double x = -bound + 2.0 * bound * static_cast<double>(i) / cells;
        const double v = hermite_top(n, x, scratch);
        if ((prev_v < 0.0) != (v < 0.0)) {
            double lo = prev_x, hi = x, flo = prev_v;
            for (int it = 0; it < 90; ++it) {
                const double mid = 0.5 * (lo + hi);
                const double fm = hermite_top(n, mid, scratch);
                if ((flo < 0.0) != (fm < 0.0)) {
                    hi = mid;
                } else {
                    lo = mid;
                    flo = fm;
                }
            }
            roots.push_back(0.5 * (lo + hi));
        }
        prev_x = x;
        prev_v = v;
    }
    if (roots.size() != n) throw ContractError("gauss_hermite: root search failed");

    GaussHermite rule;
    rule.node.resize(n);
    rule.weight.resize(n);
    const double sqrt2 = std::sqrt(2.0);
    for (std::size_t i = 0; i < n; ++i) {
        hermite_orthonormal(n - 1, roots[i], scratch);
        double chris = 0.0;
        for (std::size_t k = 0; k < n; ++k) chris += scratch[k] * scratch[k];
        const double w = 1.0 / chris; // Gauss weight for exp(-x^2)
        // Change of variables x = z / sqrt(2) maps exp(-x^2) dx to sqrt(pi) phi(z) dz.
        rule.node[i] = sqrt2 * roots[i];
        rule.weight[i] = w / std::sqrt(3.14159265358979323846);
    }
    return rule;
}

double fitted_slope(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2) {
        throw ContractError("fitted_slope: need two or more paired points");
    }
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= static_cast<double>(x.size());
    my /= static_cast<double>(x.size());
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
    }
    return sxy / sxx;
}

} // namespace cg
