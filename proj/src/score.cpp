#include "condgreeks/score.hpp"
#include "condgreeks/errors.hpp"
#include "condgreeks/parallel.hpp"

#include <cmath>
#include <vector>

namespace cg {

ScorePath compute_score(const ModelSpec& model, const TimeGrid& grid, const EulerPath& path) {
    ScorePath sp;
    sp.per_step.resize(static_cast<std::size_t>(grid.M));
    double total = 0.0;
    for (int k = 0; k < grid.M; ++k) {
        const KernelParams kp =
            kernel_params(model, path.states[static_cast<std::size_t>(k)], k, grid);
        // (X_{k+1} - m_k) / s_k is exactly the stored standardized increment.
        const double z = path.noises[static_cast<std::size_t>(k)];
        const double v = kp.dm * z / kp.s + kp.ds * (z * z - 1.0) / kp.s;
        sp.per_step[static_cast<std::size_t>(k)] = v;
        total += v;
    }
    sp.total = total;
    return sp;
}

EstimatorStats score_gradient(const ModelSpec& model, const TimeGrid& grid,
                              const GradientTarget& target, const McOptions& opts) {
    const double theta = model.theta;
    const double h = 1e-5 * std::fmax(1.0, std::fabs(theta));
    std::vector<EstimatorStats> accums(static_cast<std::size_t>(opts.shards < 1 ? 1 : opts.shards));
    for_each_shard(opts.n, opts.shards, opts.threads,
                   [&](int shard, std::uint64_t lo, std::uint64_t hi) {
                       EstimatorStats& acc = accums[static_cast<std::size_t>(shard)];
                       for (std::uint64_t i = lo; i < hi; ++i) {
                           RngStream base = RngStream::from(opts.master_seed, opts.stream_base + i);
                           const EulerPath path = simulate_path(model, grid, base.substream(0));
                           double contribution =
                               target.value(theta, path) * compute_score(model, grid, path).total;
                           if (target.explicit_theta) {
                               contribution += (target.value(theta + h, path) -
                                                target.value(theta - h, path)) /
                                               (2.0 * h);
                           }
                           acc.push(contribution);
                       }
                   });
    EstimatorStats out;
    for (const EstimatorStats& a : accums) out.merge(a);
    return out;
}

} // namespace cg
