#include "condgreeks/greeks.hpp"
#include "condgreeks/errors.hpp"
#include "condgreeks/parallel.hpp"
#include "condgreeks/score.hpp"

#include <cmath>
#include <string>
#include <utility>

namespace cg {

namespace {
constexpr double kZ95 = 1.959963984540054;
}

GradientMethod gradient_method_from_string(const std::string& name) {
    if (name == "wd") return GradientMethod::Wd;
    if (name == "score") return GradientMethod::Score;
    throw ConfigError("unknown gradient method '" + name + "' (expected wd or score)");
}

double quotient_rule(double e1, double e2, double de1, double de2) {
    return (e2 * de1 - e1 * de2) / (e2 * e2);
}

GreekResult conditional_greek(const ConditionalProblem& problem, const McOptions& opts,
                              GradientMethod method) {
    const ModelSpec& model = problem.model;
    const TimeGrid& grid = problem.grid;
    const double theta = model.theta;
    const double h = 1e-5 * std::fmax(1.0, std::fabs(theta));

    const ConditionalEvaluator eval0(model, grid, problem.build_spec(model, grid));
    const ModelSpec model_up = model.with_theta(theta + h);
    const ModelSpec model_dn = model.with_theta(theta - h);
    const ConditionalEvaluator eval_up(model_up, grid, problem.build_spec(model_up, grid));
    const ConditionalEvaluator eval_dn(model_dn, grid, problem.build_spec(model_dn, grid));
    const BranchLaw law = BranchLaw::uniform(grid.M);

    struct Shard {
        CovAccum quad{4};
        std::uint64_t inactive = 0;
        std::uint64_t dropped = 0;
    };
    std::vector<Shard> accums(static_cast<std::size_t>(opts.shards < 1 ? 1 : opts.shards));

    for_each_shard(opts.n, opts.shards, opts.threads,
                   [&](int shard, std::uint64_t lo, std::uint64_t hi) {
                       Shard& acc = accums[static_cast<std::size_t>(shard)];
                       for (std::uint64_t i = lo; i < hi; ++i) {
                           RngStream base = RngStream::from(opts.master_seed, opts.stream_base + i);
                           const EulerPath nominal = simulate_path(model, grid, base.substream(0));
                           const Contributions c0 = eval0.contributions(nominal);

                           // Frozen-path partials capture the explicit theta
                           // dependence of the weight and derivative rows.
                           const Contributions cu = eval_up.contributions(nominal);
                           const Contributions cd = eval_dn.contributions(nominal);
                           const double p1 = (cu.e1 - cd.e1) / (2.0 * h);
                           const double p2 = (cu.e2 - cd.e2) / (2.0 * h);

                           double d1 = p1, d2 = p2;
                           if (method == GradientMethod::Wd) {
                               try {
                                   const BranchedPair pair =
                                       make_branched_pair(model, grid, nominal, law,
                                                          base.substream(1), base.substream(2));
                                   if (pair.active) {
                                       const Contributions cp = eval0.contributions(pair.plus);
                                       const Contributions cm = eval0.contributions(pair.minus);
                                       d1 += pair.weight * (cp.e1 - cm.e1);
                                       d2 += pair.weight * (cp.e2 - cm.e2);
                                   } else {
                                       acc.inactive += 1;
                                   }
                               } catch (const DecompositionError&) {
                                   acc.dropped += 1;
                                   continue;
                               }
                           } else {
                               const double score = compute_score(model, grid, nominal).total;
                               d1 += c0.e1 * score;
                               d2 += c0.e2 * score;
                           }
                           const double xs[4] = {c0.e1, c0.e2, d1, d2};
                           acc.quad.push(xs);
                       }
                   });

    CovAccum merged{4};
    GreekResult out;
    for (const Shard& a : accums) {
        merged.merge(a.quad);
        out.inactive += a.inactive;
        out.dropped += a.dropped;
    }
    if (static_cast<double>(out.dropped) > opts.max_drop_rate * static_cast<double>(opts.n)) {
        throw EstimationError("conditional_greek: dropped " + std::to_string(out.dropped) +
                              " of " + std::to_string(opts.n) + " replications");
    }

    out.n = merged.count();
    out.e1 = merged.component(0);
    out.e2 = merged.component(1);
    out.de1 = merged.component(2);
    out.de2 = merged.component(3);
    for (int i = 0; i < 4; ++i) {
        for (int j = 0; j < 4; ++j) {
            out.cov[static_cast<std::size_t>(i) * 4 + j] = merged.cov(i, j);
        }
    }
    out.ratio.num = out.e1;
    out.ratio.den = out.e2;
    out.ratio.cov_num_den = merged.cov(0, 1);

    if (opts.enforce_guard) {
        out.value = out.ratio.value(); // throws when the denominator guard fails
    } else {
        out.value = out.ratio.value_unchecked();
    }
    out.value_ci95 = out.ratio.ci95();

    const double a = out.e1.mean, b = out.e2.mean, cgrad = out.de1.mean, d = out.de2.mean;
    out.grad = quotient_rule(a, b, cgrad, d);
    // Delta method for the quotient-rule gradient.
    const double g[4] = {
        -d / (b * b),
        -cgrad / (b * b) + 2.0 * a * d / (b * b * b),
        1.0 / b,
        -a / (b * b),
    };
    double var = 0.0;
    for (int i = 0; i < 4; ++i) {
        for (int j = 0; j < 4; ++j) {
            var += g[i] * out.cov[static_cast<std::size_t>(i) * 4 + j] * g[j];
        }
    }
    var = std::fmax(var, 0.0) / static_cast<double>(out.n);
    out.grad_ci95 = kZ95 * std::sqrt(var);
    return out;
}

SgdTrace sgd_minimize(const ConditionalProblem& base_problem, double target_L,
                      const SgdOptions& opts) {
    if (!(opts.step >= 0.0)) throw ConfigError("sgd: step size must be nonnegative");
    if (!(opts.theta0 >= opts.box_lo && opts.theta0 <= opts.box_hi)) {
        throw ConfigError("sgd: starting point lies outside the box");
    }

    SgdTrace trace;
    trace.step = opts.step;
    double theta = opts.theta0;

    for (int k = 0; k < opts.iters; ++k) {
        GreekResult greek;
        std::uint64_t n = opts.n_per_iter;
        bool ok = false;
        for (int attempt = 0; attempt <= 3 && !ok; ++attempt) {
            McOptions mc;
            mc.n = n;
            mc.master_seed = opts.master_seed;
            // Disjoint stream block per (iterate, attempt).
            mc.stream_base = (static_cast<std::uint64_t>(k) * 8 + static_cast<std::uint64_t>(attempt) + 1)
                             << 32;
            mc.shards = opts.shards;
            mc.threads = opts.threads;
            ConditionalProblem problem = base_problem;
            problem.model = base_problem.model.with_theta(theta);
            try {
                greek = conditional_greek(problem, mc, opts.method);
                ok = true;
            } catch (const IllConditionedError&) {
                n *= 2;
            }
        }
        if (!ok) {
            trace.completed = false;
            trace.abort_reason = "denominator guard failed after three doubled-N retries at iterate " +
                                 std::to_string(k);
            SgdIterate final;
            final.iter = k;
            final.theta = theta;
            final.l_hat = std::nan("");
            final.dl_hat = std::nan("");
            final.dl_std_error = std::nan("");
            final.grad = std::nan("");
            trace.iterates.push_back(final);
            return trace;
        }

        SgdIterate it;
        it.iter = k;
        it.theta = theta;
        it.l_hat = greek.value;
        it.dl_hat = greek.grad;
        it.dl_std_error = greek.grad_ci95 / kZ95;
        it.grad = 2.0 * (greek.value - target_L) * greek.grad;
        it.n_used = n;
        trace.iterates.push_back(it);

        const double step_k =
            opts.schedule == "decreasing" ? opts.step / std::sqrt(static_cast<double>(k) + 1.0)
                                          : opts.step;
        theta -= step_k * it.grad;
        if (theta < opts.box_lo) theta = opts.box_lo;
        if (theta > opts.box_hi) theta = opts.box_hi;
    }

    SgdIterate final;
    final.iter = opts.iters;
    final.theta = theta;
    final.l_hat = std::nan("");
    final.dl_hat = std::nan("");
    final.dl_std_error = std::nan("");
    final.grad = std::nan("");
    trace.iterates.push_back(final);
    trace.completed = true;
    return trace;
}

} // namespace cg
