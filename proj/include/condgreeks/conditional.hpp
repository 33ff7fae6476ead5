#pragma once

#include "condgreeks/malliavin.hpp"
#include "condgreeks/sde.hpp"
#include "condgreeks/stats.hpp"

#include <cstdint>
#include <functional>

namespace cg {

/// Everything needed to evaluate the conditioned-expectation contributions on
/// one path: loss functional, constraint functional, an admissible weight
/// normalized against the constraint derivative, and (optionally) a closed
/// form for the correction integral sum_k D_k(loss) u_k dt.  When no closed
/// form is supplied the correction is computed through the generic Malliavin
/// chain rule.
struct ConditionalSpec {
    PathFunctional loss;
    PathFunctional constraint;
    WeightProcess u;
    std::function<double(const EulerPath&)> correction_closed; // optional fast path
    std::vector<double> dg; // deterministic constraint-derivative row behind u
};

/// Monte Carlo run options shared by the estimators.  Stream index of
/// replication i is stream_base + i, so shard and thread counts never change
/// which random numbers a replication consumes.
struct McOptions {
    std::uint64_t n = 0;
    std::uint64_t master_seed = 42;
    std::uint64_t stream_base = 0;
    int shards = 1;
    int threads = 1;
    bool enforce_guard = true;
    double max_drop_rate = 1e-3;
};

/// Per-path contributions to the numerator and denominator of the
/// conditioned-expectation ratio.  Both are derived from one shared Skorohod
/// integral value so the pairing is exact.
struct Contributions {
    double e1 = 0.0;
    double e2 = 0.0;
    double skorohod = 0.0;
    double loss = 0.0;
    double constraint = 0.0;
};

/// Evaluates the contribution functionals as functions of the path states
/// alone: increments entering the Skorohod sum and the derivative rows are
/// implied by the states under the evaluator's own parameter.  Rebuilding the
/// evaluator at a bumped parameter and re-evaluating a frozen path therefore
/// isolates the explicit parameter dependence, which is the partial the
/// gradient pipelines add to their measure terms.
class ConditionalEvaluator {
public:
    ConditionalEvaluator(ModelSpec model, TimeGrid grid, ConditionalSpec spec);

    Contributions contributions(const EulerPath& path) const;
    double e1_contribution(const EulerPath& path) const { return contributions(path).e1; }
    double e2_contribution(const EulerPath& path) const { return contributions(path).e2; }

    const ConditionalSpec& spec() const { return spec_; }
    const ModelSpec& model() const { return model_; }
    const TimeGrid& grid() const { return grid_; }

private:
    double correction(const EulerPath& path) const;
    double implied_skorohod(const EulerPath& path) const;

    ModelSpec model_;
    TimeGrid grid_;
    ConditionalSpec spec_;
};

/// Ratio estimator for the conditional expectation from n independent paths.
/// Throws IllConditionedError when the denominator guard fails and
/// opts.enforce_guard is set; with enforce_guard false the raw estimate is
/// returned for error-vs-oracle experiments and the guard state travels in
/// the result.
RatioEstimate estimate_L(const ConditionalEvaluator& eval, const McOptions& opts);

struct KernelEstimate {
    RatioEstimate ratio;
    double bandwidth = 0.0;
};

/// Kernel-smoothing baseline: Gaussian kernel of the constraint value in
/// place of the exact conditioning.  bandwidth <= 0 selects
/// std(g) * n^(-1/5).  Throws StarvationError when every kernel weight
/// underflows.
KernelEstimate kernel_baseline_L(const ConditionalEvaluator& eval, const McOptions& opts,
                                 double bandwidth);

} // namespace cg
