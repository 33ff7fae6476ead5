#pragma once

#include "condgreeks/conditional.hpp"
#include "condgreeks/sde.hpp"

#include <cstdint>

namespace cg::bs {

/// Black-Scholes stressed-call instance: discounted call payoff at maturity,
/// conditioned on the asset sitting exactly at the stress level at T/2.
struct BsConfig {
    double spot = 100.0;   // S0
    double rate = 0.05;    // r
    double vol = 0.2;      // theta
    double horizon = 1.0;  // T
    double strike = 95.0;  // K
    double stress = 90.0;  // s, level pinned at T/2

    double x0() const; // log spot
    void validate() const;
};

/// Log-price dynamics dX = (r - theta^2/2) dt + theta dW.
ModelSpec make_model(const BsConfig& cfg);

/// Closed-form loss/constraint functionals, the default weight supported on
/// the first half of the grid, and the simplified correction term.  The
/// model's current theta (not cfg.vol) parameterizes the weight and the
/// derivative rows, so the spec can be rebuilt at bumped parameters.
/// Requires an even number of steps.
ConditionalSpec make_conditional_spec(const ModelSpec& model, const TimeGrid& grid,
                                      const BsConfig& cfg);

/// Same functionals evaluated through the generic Malliavin chain rule, used
/// to cross-check the closed forms.
ConditionalSpec make_generic_conditional_spec(const ModelSpec& model, const TimeGrid& grid,
                                              const BsConfig& cfg);

double norm_cdf(double x);
/// Standard call price C(S, K, r, vol, tau).
double call_price(double spot, double strike, double rate, double vol, double tau);
/// d C / d vol of the standard call.
double call_vega(double spot, double strike, double rate, double vol, double tau);

/// Conditional price oracle: conditioned on S_{T/2} = s the remaining half
/// horizon is again lognormal, so L = exp(-r T/2) C(s, K, r, theta, T/2).
double oracle_price(const BsConfig& cfg);
/// Analytic theta-derivative of oracle_price.
double oracle_vega(const BsConfig& cfg);

/// Independent Monte Carlo check of oracle_price: simulate only the second
/// half of the horizon restarted from the stress level.
struct RestartEstimate {
    double mean = 0.0;
    double std_error = 0.0;
};
RestartEstimate restart_mc_price(const BsConfig& cfg, int steps_second_half, std::uint64_t n,
                                 std::uint64_t seed);

/// Closed-form density of the log-price at T/2 evaluated at log(stress);
/// the denominator expectation converges to this value.
double mid_density_at_stress(const BsConfig& cfg);

} // namespace cg::bs
