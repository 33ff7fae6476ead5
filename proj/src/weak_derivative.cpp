#include "condgreeks/weak_derivative.hpp"
#include "condgreeks/errors.hpp"
#include "condgreeks/num.hpp"
#include "condgreeks/parallel.hpp"
#include "condgreeks/score.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

namespace cg {

namespace {

// Frozen-path central-difference step for the explicit-theta partial.
double partial_step(double theta) {
    return 1e-5 * std::fmax(1.0, std::fabs(theta));
}

// Standardized coordinates: the signed measure has density qt(z) phi(z) with
// qt(z) = at (z^2 - 1) + bt z, at = ds/s, bt = dm/s.  Its antiderivative is
// A(z) = -phi(z) (bt + at z), with A(+-inf) = 0.
struct ZScore {
    double at, bt;
    double qt(double z) const { return at * (z * z - 1.0) + bt * z; }
    double anti(double z) const {
        if (std::fabs(z) > 40.0) return 0.0; // phi underflows before the factor overflows
        return -normal_pdf(z) * (bt + at * z);
    }
    // Signed mass of [a, b].
    double mass(double a, double b) const { return anti(b) - anti(a); }
};

constexpr double kZMax = 10.0;

void build_table(const HahnJordanTriple& t, const ZScore& zs, HahnJordanTriple::Table& pos,
                 HahnJordanTriple::Table& neg) {
    std::vector<double> edges;
    edges.reserve(192);
    const int base_cells = 160;
    for (int i = 0; i <= base_cells; ++i) {
        edges.push_back(-kZMax + 2.0 * kZMax * static_cast<double>(i) / base_cells);
    }
    auto refine_around = [&](double r) {
        if (!(r > -kZMax && r < kZMax)) return;
        edges.push_back(r);
        for (double h = 1e-6; h < 0.2; h *= 10.0) {
            if (r - h > -kZMax) edges.push_back(r - h);
            if (r + h < kZMax) edges.push_back(r + h);
        }
    };
    if (t.topology == HahnJordanTriple::Topology::LinearPos ||
        t.topology == HahnJordanTriple::Topology::LinearNeg) {
        refine_around(0.0);
    } else {
        refine_around(t.z1);
        refine_around(t.z2);
    }
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());

    pos.edge.clear();
    pos.cum.clear();
    neg.edge.clear();
    neg.cum.clear();
    double pos_acc = 0.0, neg_acc = 0.0;
    for (std::size_t i = 0; i + 1 < edges.size(); ++i) {
        const double a = edges[i];
        const double b = edges[i + 1];
        // Tail mass beyond the grid is folded into the outermost cells.
        const double lo = i == 0 ? -1e308 : a;
        const double hi = i + 2 == edges.size() ? 1e308 : b;
        const double signed_mass = zs.mass(lo, hi);
        const bool positive = t.in_positive_region(0.5 * (a + b));
        const double mass = std::fmax(positive ? signed_mass : -signed_mass, 0.0);
        HahnJordanTriple::Table& table = positive ? (pos) : (neg);
        double& acc = positive ? pos_acc : neg_acc;
        if (table.edge.empty() || table.edge.back() != a) {
            // Start of a new run of same-sign cells.
            table.edge.push_back(a);
            table.cum.push_back(acc);
        }
        acc += mass;
        table.edge.push_back(b);
        table.cum.push_back(acc);
    }
    pos.total = pos_acc;
    neg.total = neg_acc;
}

double invert_in_cell(const ZScore& zs, bool positive, double lo, double hi, double target_mass) {
    // Solve sign * (A(z) - A(lo)) = target_mass on [lo, hi] with a bracketed
    // Newton iteration; the derivative is the region-restricted density.
    const double sign = positive ? 1.0 : -1.0;
    const double a_lo = zs.anti(lo);
    double left = lo, right = hi;
    double z = 0.5 * (lo + hi);
    for (int it = 0; it < 200; ++it) {
        const double f = sign * (zs.anti(z) - a_lo) - target_mass;
        if (f > 0.0) {
            right = z;
        } else {
            left = z;
        }
        if (right - left < 1e-14 * std::fmax(1.0, std::fabs(left))) break;
        const double dens = sign * zs.qt(z) * normal_pdf(z);
        double step_z = z;
        if (dens > 1e-300) {
            step_z = z - f / dens;
        }
        if (!(step_z > left && step_z < right)) {
            step_z = 0.5 * (left + right);
        }
        z = step_z;
    }
    return z;
}

} // namespace

double HahnJordanTriple::score(double x) const {
    const double d = (x - m) / s;
    return dm * d / s + ds * (d * d - 1.0) / s;
}

double HahnJordanTriple::qt(double z) const {
    return (ds / s) * (z * z - 1.0) + (dm / s) * z;
}

bool HahnJordanTriple::in_positive_region(double z) const {
    switch (topology) {
        case Topology::Null: return false;
        case Topology::LinearPos: return z > 0.0;
        case Topology::LinearNeg: return z < 0.0;
        case Topology::OutsideRoots: return z < z1 || z > z2;
        case Topology::BetweenRoots: return z > z1 && z < z2;
    }
    return false;
}

double HahnJordanTriple::sample(bool positive, double u01) const {
    if (topology == Topology::Null) {
        throw ContractError("HahnJordanTriple::sample: null decomposition has no mass");
    }
    const Table& table = positive ? pos : neg;
    const ZScore zs{ds / s, dm / s};
    const double target = u01 * table.total;
    // Locate the cell, then invert the exact antiderivative inside it.
    const auto it = std::upper_bound(table.cum.begin(), table.cum.end(), target);
    std::size_t idx = static_cast<std::size_t>(it - table.cum.begin());
    if (idx == 0) idx = 1;
    if (idx >= table.cum.size()) idx = table.cum.size() - 1;
    const double lo = table.edge[idx - 1];
    const double hi = table.edge[idx];
    const double resid = target - table.cum[idx - 1];
    const double z = invert_in_cell(zs, positive, lo, hi, resid);
#ifndef NDEBUG
    if (in_positive_region(z) != positive) {
        // A draw sitting exactly on a sign boundary is measure-zero and fine.
        const double gap = std::fmin(std::fabs(z - z1), std::fabs(z - z2));
        if (gap > 1e-9) {
            throw DecompositionError("HahnJordanTriple::sample: draw escaped its sign region");
        }
    }
#endif
    return m + s * z;
}

HahnJordanTriple hj_decompose(double m, double s, double dm, double ds) {
    if (!(s > 0.0)) throw DegenerateKernelError("hj_decompose: kernel std must be positive");
    HahnJordanTriple t;
    t.m = m;
    t.s = s;
    t.dm = dm;
    t.ds = ds;
    if (dm == 0.0 && ds == 0.0) {
        t.topology = HahnJordanTriple::Topology::Null;
        t.c = 0.0;
        return t;
    }

    const ZScore zs{ds / s, dm / s};
    double c_closed = 0.0;
    if (ds == 0.0) {
        t.topology = dm > 0.0 ? HahnJordanTriple::Topology::LinearPos
                              : HahnJordanTriple::Topology::LinearNeg;
        t.z1 = t.z2 = 0.0;
        c_closed = std::fabs(zs.bt) * normal_pdf(0.0);
    } else {
        // Roots of at z^2 + bt z - at; their product is exactly -1.
        const double at = zs.at, bt = zs.bt;
        const double disc = std::sqrt(bt * bt + 4.0 * at * at);
        const double q = -0.5 * (bt + (bt >= 0.0 ? disc : -disc));
        double r1 = q / at;
        double r2 = -at / q;
        t.z1 = std::fmin(r1, r2);
        t.z2 = std::fmax(r1, r2);
        if (ds > 0.0) {
            t.topology = HahnJordanTriple::Topology::OutsideRoots;
            c_closed = zs.anti(t.z1) - zs.anti(t.z2);
        } else {
            t.topology = HahnJordanTriple::Topology::BetweenRoots;
            c_closed = zs.anti(t.z2) - zs.anti(t.z1);
        }
    }

    build_table(t, zs, t.pos, t.neg);
    const double tol = 1e-8 * std::fmax(1.0, c_closed);
    if (std::fabs(t.pos.total - c_closed) > tol || std::fabs(t.neg.total - c_closed) > tol) {
        throw DecompositionError("hj_decompose: tabulated mass disagrees with closed form (" +
                                 std::to_string(t.pos.total) + ", " + std::to_string(t.neg.total) +
                                 " vs " + std::to_string(c_closed) + ")");
    }
    t.c = c_closed;
    return t;
}

HahnJordanTriple hj_decompose(const KernelParams& kp) {
    return hj_decompose(kp.m, kp.s, kp.dm, kp.ds);
}

double sample_branch(const HahnJordanTriple& triple, bool positive, RngStream& substream) {
    return triple.sample(positive, substream.next_uniform());
}

BranchLaw BranchLaw::uniform(int steps) {
    if (steps < 1) throw ContractError("BranchLaw::uniform: need at least one step");
    std::vector<double> w(static_cast<std::size_t>(steps), 1.0);
    return proportional(std::move(w));
}

BranchLaw BranchLaw::proportional(std::vector<double> weights) {
    if (weights.empty()) throw ContractError("BranchLaw: empty weight vector");
    double total = 0.0;
    for (double w : weights) {
        if (!(w > 0.0)) throw ContractError("BranchLaw: weights must be strictly positive");
        total += w;
    }
    BranchLaw law;
    law.prob.resize(weights.size());
    law.cdf.resize(weights.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        law.prob[i] = weights[i] / total;
        acc += law.prob[i];
        law.cdf[i] = acc;
    }
    law.cdf.back() = 1.0;
    return law;
}

int BranchLaw::sample(double u01) const {
    const auto it = std::upper_bound(cdf.begin(), cdf.end(), u01);
    const std::size_t idx = static_cast<std::size_t>(it - cdf.begin());
    return static_cast<int>(idx < prob.size() ? idx : prob.size() - 1);
}

BranchedPair make_branched_pair(const ModelSpec& model, const TimeGrid& grid,
                                const EulerPath& nominal, const BranchLaw& law,
                                RngStream branch_stream, RngStream tail_stream) {
    if (static_cast<int>(law.prob.size()) != grid.M) {
        throw ContractError("make_branched_pair: branch law size must equal the step count");
    }
    BranchedPair out;
    out.k = law.sample(branch_stream.next_uniform());
    const int k = out.k;
    const KernelParams kp =
        kernel_params(model, nominal.states[static_cast<std::size_t>(k)], k, grid);
    const HahnJordanTriple triple = hj_decompose(kp);
    if (triple.c == 0.0) {
        out.active = false;
        out.weight = 0.0;
        return out;
    }
    out.active = true;
    out.weight = triple.c / law.prob[static_cast<std::size_t>(k)];

    const double x_plus = triple.sample(true, branch_stream.next_uniform());
    const double x_minus = triple.sample(false, branch_stream.next_uniform());

    const int tail_len = grid.M - k - 1; // noises for steps k+1 .. M-1
    std::vector<double> tail(static_cast<std::size_t>(tail_len));
    for (double& z : tail) z = tail_stream.next_normal();

    auto build = [&](double x_branch) {
        EulerPath p;
        p.grid = grid;
        p.stream_id = nominal.stream_id;
        p.states.assign(nominal.states.begin(), nominal.states.begin() + k + 1);
        p.states.resize(static_cast<std::size_t>(grid.M) + 1);
        p.noises.assign(nominal.noises.begin(), nominal.noises.begin() + k);
        p.noises.resize(static_cast<std::size_t>(grid.M));
        // The branch draw enters as its implied standardized increment so the
        // Euler identity holds on branch paths exactly as on nominal ones.
        p.noises[static_cast<std::size_t>(k)] = (x_branch - kp.m) / kp.s;
        for (int j = 0; j < tail_len; ++j) {
            p.noises[static_cast<std::size_t>(k + 1 + j)] = tail[static_cast<std::size_t>(j)];
        }
        const double sqrt_dt = std::sqrt(grid.dt);
        double x = p.states[static_cast<std::size_t>(k)];
        for (int j = k; j < grid.M; ++j) {
            const double tj = grid.node(j);
            x = x + grid.dt * model.drift(model.theta, x, tj) +
                sqrt_dt * model.diffusion(model.theta, x, tj) * p.noises[static_cast<std::size_t>(j)];
            p.states[static_cast<std::size_t>(j) + 1] = x;
        }
        return p;
    };
    out.plus = build(x_plus);
    out.minus = build(x_minus);
    return out;
}

namespace {

struct WdShard {
    EstimatorStats stats;
    std::uint64_t inactive = 0;
    std::uint64_t dropped = 0;
};

template <typename PerRep>
WdGradient run_wd(const McOptions& opts, PerRep&& per_rep) {
    std::vector<WdShard> accums(static_cast<std::size_t>(opts.shards < 1 ? 1 : opts.shards));
    for_each_shard(opts.n, opts.shards, opts.threads,
                   [&](int shard, std::uint64_t lo, std::uint64_t hi) {
                       WdShard& acc = accums[static_cast<std::size_t>(shard)];
                       for (std::uint64_t i = lo; i < hi; ++i) {
                           per_rep(i, acc);
                       }
                   });
    WdGradient out;
    for (const WdShard& a : accums) {
        out.stats.merge(a.stats);
        out.inactive += a.inactive;
        out.dropped += a.dropped;
    }
    if (static_cast<double>(out.dropped) > opts.max_drop_rate * static_cast<double>(opts.n)) {
        throw EstimationError("weak-derivative gradient: dropped " + std::to_string(out.dropped) +
                              " of " + std::to_string(opts.n) + " replications");
    }
    return out;
}

} // namespace

WdGradient single_run_gradient(const ModelSpec& model, const TimeGrid& grid,
                               const std::function<double(const EulerPath&)>& functional,
                               const BranchLaw& law, const McOptions& opts) {
    return run_wd(opts, [&](std::uint64_t i, WdShard& acc) {
        RngStream base = RngStream::from(opts.master_seed, opts.stream_base + i);
        const EulerPath nominal = simulate_path(model, grid, base.substream(0));
        try {
            const BranchedPair pair =
                make_branched_pair(model, grid, nominal, law, base.substream(1), base.substream(2));
            if (!pair.active) {
                acc.inactive += 1;
                acc.stats.push(0.0);
                return;
            }
            acc.stats.push(pair.weight * (functional(pair.plus) - functional(pair.minus)));
        } catch (const DecompositionError&) {
            acc.dropped += 1;
        }
    });
}

GradientTarget plain_target(std::function<double(const EulerPath&)> functional) {
    GradientTarget t;
    t.value = [fn = std::move(functional)](double, const EulerPath& path) { return fn(path); };
    t.explicit_theta = false;
    return t;
}

WdGradient wd_gradient(const ModelSpec& model, const TimeGrid& grid, const GradientTarget& target,
                       const BranchLaw& law, const McOptions& opts) {
    const double theta = model.theta;
    const double h = partial_step(theta);
    return run_wd(opts, [&](std::uint64_t i, WdShard& acc) {
        RngStream base = RngStream::from(opts.master_seed, opts.stream_base + i);
        const EulerPath nominal = simulate_path(model, grid, base.substream(0));
        try {
            const BranchedPair pair =
                make_branched_pair(model, grid, nominal, law, base.substream(1), base.substream(2));
            double measure = 0.0;
            if (pair.active) {
                measure = pair.weight *
                          (target.value(theta, pair.plus) - target.value(theta, pair.minus));
            } else {
                acc.inactive += 1;
            }
            double partial = 0.0;
            if (target.explicit_theta) {
                partial = (target.value(theta + h, nominal) - target.value(theta - h, nominal)) /
                          (2.0 * h);
            }
            acc.stats.push(measure + partial);
        } catch (const DecompositionError&) {
            acc.dropped += 1;
        }
    });
}

double phantom_gradient_bruteforce(const ModelSpec& model, const TimeGrid& grid,
                                   const std::function<double(const EulerPath&)>& functional,
                                   std::size_t gh_nodes) {
    if (grid.M > 3) {
        throw ContractError("phantom_gradient_bruteforce: refuses grids beyond three steps");
    }
    const GaussHermite rule = gauss_hermite(gh_nodes);
    const int M = grid.M;

    EulerPath path;
    path.grid = grid;
    path.states.resize(static_cast<std::size_t>(M) + 1);
    path.noises.resize(static_cast<std::size_t>(M));
    path.states[0] = model.x0;
    const double sqrt_dt = std::sqrt(grid.dt);

    double total = 0.0;
    for (int k = 0; k < M; ++k) {
        // Nested quadrature over all noise dimensions; the branch dimension is
        // integrated against the signed density qt(z) phi(z) directly, which
        // equals c_k (rho+ - rho-) without constructing the decomposition.
        double contribution = 0.0;
        auto recurse = [&](auto&& self, int dim) -> double {
            if (dim == M) return functional(path);
            const double x = path.states[static_cast<std::size_t>(dim)];
            const double t = grid.node(dim);
            double acc = 0.0;
            if (dim == k) {
                const KernelParams kp = kernel_params(model, x, dim, grid);
                const double at = kp.ds / kp.s;
                const double bt = kp.dm / kp.s;
                for (std::size_t q = 0; q < rule.node.size(); ++q) {
                    const double z = rule.node[q];
                    path.noises[static_cast<std::size_t>(dim)] = z;
                    path.states[static_cast<std::size_t>(dim) + 1] = kp.m + kp.s * z;
                    const double qt = at * (z * z - 1.0) + bt * z;
                    acc += rule.weight[q] * qt * self(self, dim + 1);
                }
            } else {
                for (std::size_t q = 0; q < rule.node.size(); ++q) {
                    const double z = rule.node[q];
                    path.noises[static_cast<std::size_t>(dim)] = z;
                    path.states[static_cast<std::size_t>(dim) + 1] =
                        x + grid.dt * model.drift(model.theta, x, t) +
                        sqrt_dt * model.diffusion(model.theta, x, t) * z;
                    acc += rule.weight[q] * self(self, dim + 1);
                }
            }
            return acc;
        };
        contribution = recurse(recurse, 0);
        total += contribution;
    }
    return total;
}

std::vector<VarianceRow> variance_vs_horizon(
    const ModelSpec& model, const std::vector<double>& horizons, double dt,
    const std::function<std::function<double(const EulerPath&)>(const TimeGrid&)>& target_factory,
    const McOptions& opts) {
    std::vector<VarianceRow> rows;
    if (opts.n == 0) return rows;

    for (std::size_t ti = 0; ti < horizons.size(); ++ti) {
        const double T = horizons[ti];
        const int M = static_cast<int>(std::llround(T / dt));
        if (std::fabs(M * dt - T) > 1e-9 * T) {
            throw ConfigError("variance_vs_horizon: horizon " + std::to_string(T) +
                              " is not a multiple of dt");
        }
        const TimeGrid grid = build_grid(T, M);
        const BranchLaw law = BranchLaw::uniform(M);
        const auto functional = target_factory(grid);

        std::vector<double> wd_samples(opts.n), score_samples(opts.n);
        for_each_shard(opts.n, opts.shards, opts.threads,
                       [&](int, std::uint64_t lo, std::uint64_t hi) {
                           for (std::uint64_t i = lo; i < hi; ++i) {
                               RngStream base =
                                   RngStream::from(opts.master_seed, opts.stream_base + i);
                               const EulerPath nominal =
                                   simulate_path(model, grid, base.substream(0));
                               const BranchedPair pair = make_branched_pair(
                                   model, grid, nominal, law, base.substream(1), base.substream(2));
                               wd_samples[i] =
                                   pair.active
                                       ? pair.weight * (functional(pair.plus) - functional(pair.minus))
                                       : 0.0;
                               score_samples[i] =
                                   functional(nominal) * compute_score(model, grid, nominal).total;
                           }
                       });

        auto summarize = [&](const char* name, const std::vector<double>& samples,
                             std::uint64_t boot_stream) {
            EstimatorStats stats;
            for (double v : samples) stats.push(v);
            VarianceRow row;
            row.estimator = name;
            row.T = T;
            row.M = M;
            row.n = opts.n;
            row.var = stats.variance();
            row.mean = stats.mean;
            // Percentile bootstrap over replication contributions.
            const int B = 200;
            std::vector<double> boot(B);
            RngStream rng = RngStream::from(opts.master_seed, boot_stream);
            for (int b = 0; b < B; ++b) {
                EstimatorStats bs;
                for (std::uint64_t i = 0; i < opts.n; ++i) {
                    bs.push(samples[rng.next_u64() % opts.n]);
                }
                boot[static_cast<std::size_t>(b)] = bs.variance();
            }
            std::sort(boot.begin(), boot.end());
            row.var_lo = boot[static_cast<std::size_t>(0.025 * (B - 1))];
            row.var_hi = boot[static_cast<std::size_t>(0.975 * (B - 1))];
            rows.push_back(row);
        };
        summarize("wd", wd_samples, 0xB007000ULL + 2 * ti);
        summarize("score", score_samples, 0xB007000ULL + 2 * ti + 1);
    }
    return rows;
}

} // namespace cg
