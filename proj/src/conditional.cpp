#include "condgreeks/conditional.hpp"
#include "condgreeks/errors.hpp"
#include "condgreeks/parallel.hpp"

#include <cmath>
#include <string>
#include <utility>
#include <vector>

namespace cg {

ConditionalEvaluator::ConditionalEvaluator(ModelSpec model, TimeGrid grid, ConditionalSpec spec)
    : model_(std::move(model)), grid_(grid), spec_(std::move(spec)) {
    if (static_cast<int>(spec_.u.values.size()) != grid_.M) {
        throw ContractError("ConditionalEvaluator: weight size must equal the step count");
    }
}

double ConditionalEvaluator::correction(const EulerPath& path) const {
    if (spec_.correction_closed) return spec_.correction_closed(path);
    // Re-derive the increments under this evaluator's parameter so the whole
    // computation stays a functional of the states alone.
    EulerPath reparam = path;
    for (int k = 0; k < grid_.M; ++k) {
        const KernelParams kp =
            kernel_params(model_, path.states[static_cast<std::size_t>(k)], k, grid_);
        reparam.noises[static_cast<std::size_t>(k)] =
            (path.states[static_cast<std::size_t>(k) + 1] - kp.m) / kp.s;
    }
    const TangentProcess tang = tangent(reparam, model_);
    const MalliavinMatrix mat(reparam, model_, tang);
    std::vector<double> row(static_cast<std::size_t>(grid_.M));
    spec_.loss.fill_row(reparam, mat, row);
    double acc = 0.0;
    for (int k = 0; k < grid_.M; ++k) {
        acc += row[static_cast<std::size_t>(k)] * spec_.u.values[static_cast<std::size_t>(k)];
    }
    return acc * grid_.dt;
}

double ConditionalEvaluator::implied_skorohod(const EulerPath& path) const {
    // Ito sum of the weight against the increments implied by the states
    // under this evaluator's parameter.  On a path simulated at the same
    // parameter this equals the stored-noise Ito sum to roundoff; evaluated at
    // a bumped parameter on a frozen path it captures exactly the explicit
    // parameter dependence that the gradient decomposition needs.
    const double sqrt_dt = std::sqrt(grid_.dt);
    double acc = 0.0;
    for (int k = 0; k < grid_.M; ++k) {
        const double u = spec_.u.values[static_cast<std::size_t>(k)];
        if (u == 0.0) continue;
        const KernelParams kp =
            kernel_params(model_, path.states[static_cast<std::size_t>(k)], k, grid_);
        acc += u * (path.states[static_cast<std::size_t>(k) + 1] - kp.m) / kp.s;
    }
    return acc * sqrt_dt;
}

Contributions ConditionalEvaluator::contributions(const EulerPath& path) const {
    Contributions c;
    c.constraint = spec_.constraint.value(path);
    c.skorohod = implied_skorohod(path);
    if (c.constraint <= 0.0) {
        // Outside the localizer both contributions vanish; the loss and the
        // correction need not be evaluated.
        c.loss = 0.0;
        c.e1 = 0.0;
        c.e2 = 0.0;
        return c;
    }
    c.loss = spec_.loss.value(path);
    c.e1 = c.loss * c.skorohod - correction(path);
    c.e2 = c.skorohod;
    return c;
}

RatioEstimate estimate_L(const ConditionalEvaluator& eval, const McOptions& opts) {
    if (opts.n < 2) throw ContractError("estimate_L: need at least two replications");

    struct ShardAccum {
        CovAccum pair{2};
        std::uint64_t dropped = 0;
    };
    std::vector<ShardAccum> accums(static_cast<std::size_t>(opts.shards < 1 ? 1 : opts.shards));

    for_each_shard(opts.n, opts.shards, opts.threads,
                   [&](int shard, std::uint64_t lo, std::uint64_t hi) {
                       ShardAccum& acc = accums[static_cast<std::size_t>(shard)];
                       for (std::uint64_t i = lo; i < hi; ++i) {
                           RngStream base = RngStream::from(opts.master_seed, opts.stream_base + i);
                           const EulerPath path =
                               simulate_path(eval.model(), eval.grid(), base.substream(0));
                           try {
                               const Contributions c = eval.contributions(path);
                               const double xs[2] = {c.e1, c.e2};
                               acc.pair.push(xs);
                           } catch (const SingularTangentError&) {
                               acc.dropped += 1;
                           }
                       }
                   });

    CovAccum merged{2};
    std::uint64_t dropped = 0;
    std::vector<ShardMoments> shard_moments;
    shard_moments.reserve(accums.size());
    for (const ShardAccum& a : accums) {
        merged.merge(a.pair);
        dropped += a.dropped;
        ShardMoments m;
        m.n = a.pair.count();
        m.num_mean = a.pair.mean(0);
        m.num_m2 = a.pair.component(0).m2;
        m.den_mean = a.pair.mean(1);
        m.den_m2 = a.pair.component(1).m2;
        m.comoment = a.pair.cov(0, 1) * (a.pair.count() > 1 ? a.pair.count() - 1 : 0);
        shard_moments.push_back(m);
    }

    if (static_cast<double>(dropped) > opts.max_drop_rate * static_cast<double>(opts.n)) {
        throw EstimationError("estimate_L: dropped " + std::to_string(dropped) + " of " +
                              std::to_string(opts.n) + " replications");
    }

    RatioEstimate r = make_ratio(merged, dropped, std::move(shard_moments));
    if (opts.enforce_guard) (void)r.value(); // throws IllConditionedError on guard failure
    return r;
}

KernelEstimate kernel_baseline_L(const ConditionalEvaluator& eval, const McOptions& opts,
                                 double bandwidth) {
    if (opts.n < 2) throw ContractError("kernel_baseline_L: need at least two replications");

    // Two passes over stored functional values: the default bandwidth needs
    // the spread of the constraint samples before weights can be formed.
    std::vector<double> loss_vals(opts.n), g_vals(opts.n);
    for_each_shard(opts.n, opts.shards, opts.threads,
                   [&](int, std::uint64_t lo, std::uint64_t hi) {
                       for (std::uint64_t i = lo; i < hi; ++i) {
                           RngStream base = RngStream::from(opts.master_seed, opts.stream_base + i);
                           const EulerPath path =
                               simulate_path(eval.model(), eval.grid(), base.substream(0));
                           loss_vals[i] = eval.spec().loss.value(path);
                           g_vals[i] = eval.spec().constraint.value(path);
                       }
                   });

    double delta = bandwidth;
    if (!(delta > 0.0)) {
        EstimatorStats g_stats;
        for (double g : g_vals) g_stats.push(g);
        delta = std::sqrt(g_stats.variance()) *
                std::pow(static_cast<double>(opts.n), -0.2);
        if (!(delta > 0.0)) {
            throw DegenerateConstraintError("kernel_baseline_L: constraint samples have no spread");
        }
    }

    const double norm = 1.0 / (delta * std::sqrt(2.0 * 3.14159265358979323846));
    CovAccum pair{2};
    double max_weight = 0.0;
    for (std::uint64_t i = 0; i < opts.n; ++i) {
        const double z = g_vals[i] / delta;
        const double w = norm * std::exp(-0.5 * z * z);
        if (w > max_weight) max_weight = w;
        const double xs[2] = {loss_vals[i] * w, w};
        pair.push(xs);
    }
    if (max_weight < 1e-300) {
        throw StarvationError("kernel_baseline_L: all kernel weights underflowed at bandwidth " +
                              std::to_string(delta));
    }

    KernelEstimate out;
    out.bandwidth = delta;
    out.ratio = make_ratio(pair, 0, {});
    if (opts.enforce_guard) (void)out.ratio.value();
    return out;
}

} // namespace cg
