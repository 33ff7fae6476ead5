#pragma once

#include "condgreeks/conditional.hpp"
#include "condgreeks/sde.hpp"
#include "condgreeks/stats.hpp"
#include "condgreeks/weak_derivative.hpp"

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace cg {

enum class GradientMethod { Wd, Score };

GradientMethod gradient_method_from_string(const std::string& name);

/// Conditioned-expectation problem whose weight and derivative rows can be
/// rebuilt at a bumped parameter; the rebuild captures every explicit theta
/// dependence of the contribution functionals.
struct ConditionalProblem {
    ModelSpec model;
    TimeGrid grid;
    std::function<ConditionalSpec(const ModelSpec&, const TimeGrid&)> build_spec;
};

/// Quotient rule for the ratio gradient: (e2 de1 - e1 de2) / e2^2.
double quotient_rule(double e1, double e2, double de1, double de2);

/// Numerator/denominator level and gradient estimates assembled into the
/// conditional value L and its theta-derivative, with delta-method intervals
/// from the jointly sampled per-replication 4-vectors (e1, e2, de1, de2).
struct GreekResult {
    EstimatorStats e1, e2, de1, de2;
    std::array<double, 16> cov{}; // sample covariance of the 4-vector
    std::uint64_t n = 0;
    std::uint64_t inactive = 0;
    std::uint64_t dropped = 0;
    RatioEstimate ratio; // (e1, e2) block, carries the denominator guard
    double value = 0.0;  // L
    double value_ci95 = 0.0;
    double grad = 0.0; // dL/dtheta
    double grad_ci95 = 0.0;
};

/// Estimates (E1, E2, dE1, dE2) from paired replications: level contributions
/// and gradient contributions share nominal paths, and for the
/// weak-derivative method both gradient targets share the branch draws.
/// Gradients include the frozen-path explicit-theta partial.  Throws
/// IllConditionedError when the denominator guard fails (unless
/// opts.enforce_guard is off).
GreekResult conditional_greek(const ConditionalProblem& problem, const McOptions& opts,
                              GradientMethod method);

struct SgdOptions {
    double theta0 = 0.0;
    double step = 1e-3;
    int iters = 20;
    std::uint64_t n_per_iter = 100000;
    double box_lo = 0.0;
    double box_hi = 1.0;
    std::string schedule = "fixed"; // or "decreasing": step / sqrt(k+1)
    GradientMethod method = GradientMethod::Wd;
    std::uint64_t master_seed = 42;
    int shards = 1;
    int threads = 1;
};

struct SgdIterate {
    int iter = 0;
    double theta = 0.0;
    double l_hat = 0.0;
    double dl_hat = 0.0;
    double dl_std_error = 0.0;
    double grad = 0.0;
    std::uint64_t n_used = 0;
};

struct SgdTrace {
    std::vector<SgdIterate> iterates; // one row per visited theta, final row has no estimates
    double step = 0.0;
    bool completed = false;
    std::string abort_reason;
    double final_theta() const { return iterates.empty() ? 0.0 : iterates.back().theta; }
};

/// Projected stochastic gradient descent on (L(theta) - target)^2 with the
/// conditional Greek as the gradient oracle.  A denominator-guard failure at
/// an iterate is retried with doubled sample size up to three times before
/// the run aborts with its partial trace.
SgdTrace sgd_minimize(const ConditionalProblem& base_problem, double target_L,
                      const SgdOptions& opts);

} // namespace cg
