#include <doctest.h>

#include "condgreeks/bs.hpp"
#include "condgreeks/conditional.hpp"
#include "condgreeks/errors.hpp"
#include "condgreeks/stats.hpp"

#include <cmath>
#include <vector>

using namespace cg;

namespace {

struct Setup {
    bs::BsConfig cfg;
    ModelSpec model;
    TimeGrid grid;
    ConditionalEvaluator eval;

    explicit Setup(bs::BsConfig c, int steps = 64)
        : cfg(c),
          model(bs::make_model(cfg)),
          grid(build_grid(cfg.horizon, steps)),
          eval(model, grid, bs::make_conditional_spec(model, grid, cfg)) {}
};

McOptions mc(std::uint64_t n, std::uint64_t seed = 42) {
    McOptions m;
    m.n = n;
    m.master_seed = seed;
    return m;
}

} // namespace

TEST_CASE("contributions vanish outside the localizer") {
    Setup s{bs::BsConfig{}};
    // Strongly negative noises push the mid state far below the stress level.
    const EulerPath p = simulate_from_noises(s.model, s.grid, std::vector<double>(64, -2.0));
    REQUIRE(s.eval.spec().constraint.value(p) < 0.0);
    const Contributions c = s.eval.contributions(p);
    CHECK(c.e1 == 0.0);
    CHECK(c.e2 == 0.0);
}

TEST_CASE("contributions match the stressed-call closed form on a path") {
    Setup s{bs::BsConfig{}};
    const EulerPath p = simulate_path(s.model, s.grid, RngStream::from(3, 11).substream(0));
    const Contributions c = s.eval.contributions(p);

    double w_half = 0.0;
    for (int k = 0; k < s.grid.mid(); ++k) w_half += p.noises[static_cast<std::size_t>(k)];
    w_half *= std::sqrt(s.grid.dt);
    const double s_u = 2.0 / (s.cfg.vol * s.grid.T) * w_half;
    const double s_T = std::exp(p.terminal());
    const double disc = std::exp(-s.cfg.rate * s.grid.T);
    const double indicator = p.at_mid() > std::log(s.cfg.stress) ? 1.0 : 0.0;
    const double payoff = s_T > s.cfg.strike ? disc * (s_T - s.cfg.strike) : 0.0;
    const double correction = s_T > s.cfg.strike ? disc * s_T : 0.0;

    CHECK(c.skorohod == doctest::Approx(s_u).epsilon(1e-13));
    CHECK(c.e1 == doctest::Approx(indicator * (payoff * s_u - correction)).epsilon(1e-12));
    CHECK(c.e2 == doctest::Approx(indicator * s_u).epsilon(1e-13));
}

TEST_CASE("a dead payoff zeroes the numerator contribution on every path") {
    bs::BsConfig cfg;
    cfg.strike = 1e12;
    Setup s{cfg};
    for (int i = 0; i < 50; ++i) {
        const EulerPath p = simulate_path(s.model, s.grid, RngStream::from(4, i).substream(0));
        CHECK(s.eval.contributions(p).e1 == 0.0);
    }
}

TEST_CASE("paired contributions share one Skorohod value exactly") {
    Setup s{bs::BsConfig{}};
    for (int i = 0; i < 20; ++i) {
        const EulerPath p = simulate_path(s.model, s.grid, RngStream::from(5, i).substream(0));
        const Contributions c = s.eval.contributions(p);
        if (c.constraint > 0.0) {
            CHECK(c.e2 == c.skorohod);
        }
    }
}

TEST_CASE("conditioned forward value is recovered for a zero strike") {
    bs::BsConfig cfg;
    cfg.strike = 0.0;
    Setup s{cfg};
    const RatioEstimate r = estimate_L(s.eval, mc(200000));
    const double oracle = cfg.stress * std::exp(-cfg.rate * cfg.horizon / 2.0);
    CHECK(std::fabs(r.value() - oracle) <= 2.0 * r.ci95());

    SUBCASE("martingale case at zero rate") {
        bs::BsConfig flat = cfg;
        flat.rate = 0.0;
        Setup sf{flat};
        const RatioEstimate rf = estimate_L(sf.eval, mc(200000));
        CHECK(std::fabs(rf.value() - flat.stress) <= 2.5 * rf.ci95());
    }
}

TEST_CASE("generic parameters agree with the conditional closed-form price") {
    Setup s{bs::BsConfig{}};
    const RatioEstimate r = estimate_L(s.eval, mc(1000000));
    CHECK(std::fabs(r.value() - bs::oracle_price(s.cfg)) <= 2.0 * r.ci95());
}

TEST_CASE("an always-on localizer drives the denominator to the vanishing tail density") {
    bs::BsConfig cfg;
    cfg.stress = 1e-6; // indicator is almost surely one, so E2 -> E[S(u)] = 0
    Setup s{cfg};
    EstimatorStats e2;
    for (int i = 0; i < 50000; ++i) {
        const EulerPath p = simulate_path(s.model, s.grid, RngStream::from(45, i).substream(0));
        e2.push(s.eval.contributions(p).e2);
    }
    CHECK(std::fabs(e2.mean) < 3.0 * e2.std_error());
}

TEST_CASE("denominator expectation estimates the mid-horizon density") {
    Setup s{bs::BsConfig{}};
    EstimatorStats e2;
    for (int i = 0; i < 100000; ++i) {
        const EulerPath p = simulate_path(s.model, s.grid, RngStream::from(42, i).substream(0));
        e2.push(s.eval.contributions(p).e2);
    }
    CHECK(std::fabs(e2.mean - bs::mid_density_at_stress(s.cfg)) < 3.0 * e2.std_error());
}

TEST_CASE("guard refuses a denominator lost in the noise but raw values survive") {
    bs::BsConfig cfg;
    cfg.stress = 1e6; // the stress event is unreachable
    Setup s{cfg};
    CHECK_THROWS_AS(estimate_L(s.eval, mc(1000)), IllConditionedError);

    McOptions raw = mc(1000);
    raw.enforce_guard = false;
    const RatioEstimate r = estimate_L(s.eval, raw);
    CHECK(!r.guard_ok());
    CHECK_THROWS_AS(r.value(), IllConditionedError);
    (void)r.value_unchecked(); // NaN or garbage is acceptable here, but no throw
}

TEST_CASE("shard partition determinism and near-invariance") {
    Setup s{bs::BsConfig{}};
    McOptions four = mc(20000);
    four.shards = 4;
    const RatioEstimate a = estimate_L(s.eval, four);
    const RatioEstimate b = estimate_L(s.eval, four);
    CHECK(a.num.mean == b.num.mean);
    CHECK(a.den.m2 == b.den.m2);

    const RatioEstimate one = estimate_L(s.eval, mc(20000));
    CHECK(one.num.mean == doctest::Approx(a.num.mean).epsilon(1e-12));
    CHECK(one.value() == doctest::Approx(a.value()).epsilon(1e-12));
    CHECK(a.shards.size() == 4);
}

TEST_CASE("kernel baseline: flat limit, agreement, spread, starvation") {
    Setup s{bs::BsConfig{}};

    SUBCASE("a huge bandwidth recovers the unconditional mean") {
        McOptions opts = mc(20000);
        const KernelEstimate kb = kernel_baseline_L(s.eval, opts, 1e9);
        EstimatorStats plain;
        for (std::uint64_t i = 0; i < opts.n; ++i) {
            const EulerPath p = simulate_path(s.model, s.grid, RngStream::from(42, i).substream(0));
            plain.push(s.eval.spec().loss.value(p));
        }
        CHECK(kb.ratio.value() == doctest::Approx(plain.mean).epsilon(1e-6));
    }
    SUBCASE("agrees with the exact estimator as the bandwidth shrinks") {
        // The smoothing bias scales with the squared bandwidth (about +0.9
        // at 0.05 for these parameters), so the agreement check runs at a
        // bandwidth where it is far below the Monte Carlo noise.
        McOptions opts = mc(200000);
        const KernelEstimate kb = kernel_baseline_L(s.eval, opts, 0.01);
        const RatioEstimate exact = estimate_L(s.eval, opts);
        const double joint = std::sqrt(kb.ratio.std_error() * kb.ratio.std_error() +
                                       exact.std_error() * exact.std_error());
        CHECK(std::fabs(kb.ratio.value() - exact.value()) <=
              std::fmax(4.0 * joint, 0.02 * std::fabs(exact.value())));
    }
    SUBCASE("near the delta limit the kernel error bar blows up") {
        McOptions opts = mc(200000);
        const KernelEstimate tight = kernel_baseline_L(s.eval, opts, 2e-4);
        const RatioEstimate exact = estimate_L(s.eval, opts);
        CHECK(tight.ratio.std_error() > 1.3 * exact.std_error());
    }
    SUBCASE("automatic bandwidth follows the n^(-1/5) rule") {
        McOptions opts = mc(50000);
        const KernelEstimate kb = kernel_baseline_L(s.eval, opts, 0.0);
        CHECK(kb.bandwidth > 0.0);
        CHECK(kb.bandwidth < 1.0);
    }
    SUBCASE("an out-of-reach event starves the kernel") {
        bs::BsConfig far = s.cfg;
        far.stress = 1e9;
        Setup sf{far};
        McOptions opts = mc(1000);
        opts.enforce_guard = false;
        CHECK_THROWS_AS(kernel_baseline_L(sf.eval, opts, 1e-12), StarvationError);
    }
}

TEST_CASE("estimate_L input contracts") {
    Setup s{bs::BsConfig{}};
    CHECK_THROWS_AS(estimate_L(s.eval, mc(1)), ContractError);
}

TEST_CASE("a run drowning in singular tangents fails loudly") {
    // Mean reversion exactly at the Euler stability boundary: the per-step
    // tangent factor 1 + dt * drift_dx is exactly zero, so every replication
    // that reaches the generic correction drops, far beyond the 0.1% budget.
    ModelSpec model;
    model.name = "fragile";
    model.theta = 0.5;
    model.x0 = 0.0;
    model.drift = [](double, double x, double) { return -16.0 * x; };
    model.diffusion = [](double, double, double) { return 1.0; };
    model.drift_dx = [](double, double, double) { return -16.0; };
    model.diffusion_dx = [](double, double, double) { return 0.0; };
    model.drift_dtheta = [](double, double, double) { return 1.0; };
    model.diffusion_dtheta = [](double, double, double) { return 0.0; };
    const TimeGrid g = build_grid(1.0, 16);

    ConditionalSpec spec;
    spec.u.values.assign(16, 1.0 / g.T);
    spec.dg.assign(16, 1.0);
    spec.loss = terminal_functional([](double x) { return x * x; },
                                    [](double x) { return 2.0 * x; });
    spec.constraint = terminal_functional([](double x) { return x; }, [](double) { return 1.0; });
    const ConditionalEvaluator eval(model, g, spec);
    McOptions opts = mc(5000);
    opts.enforce_guard = false;
    CHECK_THROWS_AS(estimate_L(eval, opts), EstimationError);
}
