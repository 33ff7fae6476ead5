#include <doctest.h>

#include "condgreeks/bs.hpp"
#include "condgreeks/errors.hpp"
#include "condgreeks/sde.hpp"
#include "condgreeks/stats.hpp"

#include <cmath>
#include <vector>

using namespace cg;

namespace {

bs::BsConfig default_bs() {
    return bs::BsConfig{};
}

} // namespace

TEST_CASE("build_grid lays out nodes and rejects bad input") {
    const TimeGrid g = build_grid(1.0, 4);
    CHECK(g.dt == doctest::Approx(0.25));
    CHECK(g.node(0) == 0.0);
    CHECK(g.node(2) == doctest::Approx(0.5));
    CHECK(g.node(4) == 1.0);
    CHECK_THROWS_AS(build_grid(1.0, 0), ConfigError);
    CHECK_THROWS_AS(build_grid(-1.0, 8), ConfigError);
    CHECK(build_grid(8.0, 800).dt == doctest::Approx(0.01).epsilon(1e-15));
}

TEST_CASE("kernel_params matches hand substitution for the log-price model") {
    bs::BsConfig cfg = default_bs();
    cfg.spot = 1.0; // x0 = 0
    cfg.rate = 0.0;
    cfg.vol = 1.0;
    const ModelSpec model = bs::make_model(cfg);
    const TimeGrid g = build_grid(1.0, 4);
    const KernelParams kp = kernel_params(model, 0.0, 0, g);
    CHECK(kp.m == doctest::Approx(-0.125));
    CHECK(kp.s == doctest::Approx(0.5));
    CHECK(kp.dm == doctest::Approx(-0.25));
    CHECK(kp.ds == doctest::Approx(0.5));

    bs::BsConfig cfg2 = default_bs();
    cfg2.vol = 0.2;
    cfg2.rate = 0.05;
    const ModelSpec model2 = bs::make_model(cfg2);
    const TimeGrid g2 = build_grid(1.0, 100);
    const KernelParams kp2 = kernel_params(model2, 4.6, 0, g2);
    CHECK(kp2.m == doctest::Approx(4.6003).epsilon(1e-12));
    CHECK(kp2.s == doctest::Approx(0.02).epsilon(1e-12));
}

TEST_CASE("a parameter-free kernel has zero parameter derivatives") {
    ModelSpec m;
    m.theta = 0.7;
    m.x0 = 0.0;
    m.drift = [](double, double x, double) { return -x; };
    m.diffusion = [](double, double, double) { return 0.5; };
    m.drift_dx = [](double, double, double) { return -1.0; };
    m.diffusion_dx = [](double, double, double) { return 0.0; };
    m.drift_dtheta = [](double, double, double) { return 0.0; };
    m.diffusion_dtheta = [](double, double, double) { return 0.0; };
    const TimeGrid g = build_grid(1.0, 8);
    const KernelParams kp = kernel_params(m, 0.3, 2, g);
    CHECK(kp.dm == 0.0);
    CHECK(kp.ds == 0.0);
}

TEST_CASE("degenerate diffusion raises") {
    ModelSpec m = bs::make_model(default_bs());
    m.diffusion = [](double, double, double) { return 0.0; };
    const TimeGrid g = build_grid(1.0, 4);
    CHECK_THROWS_AS(kernel_params(m, 0.0, 0, g), DegenerateKernelError);
}

TEST_CASE("zero noises give the deterministic drift skeleton") {
    const bs::BsConfig cfg = default_bs();
    const ModelSpec model = bs::make_model(cfg);
    const TimeGrid g = build_grid(1.0, 16);
    const EulerPath path = simulate_from_noises(model, g, std::vector<double>(16, 0.0));
    const double b = cfg.rate - 0.5 * cfg.vol * cfg.vol;
    for (int k = 0; k <= 16; ++k) {
        CHECK(path.states[static_cast<std::size_t>(k)] ==
              doctest::Approx(cfg.x0() + k * g.dt * b).epsilon(1e-13));
    }
}

TEST_CASE("same stream twice gives identical paths, and the Euler identity holds") {
    const ModelSpec model = bs::make_model(default_bs());
    const TimeGrid g = build_grid(1.0, 64);
    const EulerPath a = simulate_path(model, g, RngStream::from(42, 5).substream(0));
    const EulerPath b = simulate_path(model, g, RngStream::from(42, 5).substream(0));
    REQUIRE(a.states.size() == 65);
    REQUIRE(a.noises.size() == 64);
    for (std::size_t k = 0; k < a.states.size(); ++k) CHECK(a.states[k] == b.states[k]);

    const double sqrt_dt = std::sqrt(g.dt);
    for (int k = 0; k < g.M; ++k) {
        const double x = a.states[static_cast<std::size_t>(k)];
        const double recon = x + g.dt * model.drift(model.theta, x, g.node(k)) +
                             sqrt_dt * model.diffusion(model.theta, x, g.node(k)) *
                                 a.noises[static_cast<std::size_t>(k)];
        CHECK(recon == a.states[static_cast<std::size_t>(k) + 1]);
    }
}

TEST_CASE("lognormal martingale mean is recovered by simulation") {
    bs::BsConfig cfg = default_bs();
    cfg.rate = 0.0;
    const ModelSpec model = bs::make_model(cfg);
    const TimeGrid g = build_grid(1.0, 32);
    // At r = 0 the price ratio S_T/S_0 = exp(X_M - x0) is a martingale with
    // mean one; the drift correction theta^2 T / 2 is already inside X_M.
    EstimatorStats stats;
    for (int i = 0; i < 100000; ++i) {
        const EulerPath p = simulate_path(model, g, RngStream::from(7, i).substream(0));
        stats.push(std::exp(p.terminal() - cfg.x0()));
    }
    CHECK(std::fabs(stats.mean - 1.0) < 3.0 * stats.std_error());
}

TEST_CASE("propagate_from applies the recursion verbatim") {
    const ModelSpec model = bs::make_model(default_bs());
    const TimeGrid g = build_grid(1.0, 8);
    const EulerPath p = simulate_path(model, g, RngStream::from(3, 1).substream(0));

    SUBCASE("single step from M-1") {
        const std::vector<double> tail =
            propagate_from(model, g, 7, p.states[7], std::span<const double>(&p.noises[7], 1));
        REQUIRE(tail.size() == 1);
        CHECK(tail[0] == p.states[8]);
    }
    SUBCASE("nominal state and noises reproduce the nominal tail exactly") {
        const std::vector<double> tail = propagate_from(
            model, g, 3, p.states[3], std::span<const double>(p.noises.data() + 3, 5));
        for (int j = 0; j < 5; ++j) {
            CHECK(tail[static_cast<std::size_t>(j)] == p.states[static_cast<std::size_t>(4 + j)]);
        }
    }
    SUBCASE("additive dynamics keep branch differences constant") {
        const double offset = 0.37;
        const std::vector<double> hi = propagate_from(
            model, g, 3, p.states[3] + offset, std::span<const double>(p.noises.data() + 3, 5));
        const std::vector<double> lo = propagate_from(
            model, g, 3, p.states[3], std::span<const double>(p.noises.data() + 3, 5));
        for (std::size_t j = 0; j < hi.size(); ++j) {
            CHECK(hi[j] - lo[j] == doctest::Approx(offset).epsilon(1e-13));
        }
    }
    SUBCASE("wrong noise count is a contract violation") {
        CHECK_THROWS_AS(
            propagate_from(model, g, 3, 0.0, std::span<const double>(p.noises.data(), 3)),
            ContractError);
    }
}

TEST_CASE("derivative callback validation accepts the shipped models and flags corruption") {
    const TimeGrid g = build_grid(1.0, 16);
    CHECK_NOTHROW(validate_model(bs::make_model(default_bs()), g));

    ModelSpec bad = bs::make_model(default_bs());
    bad.drift_dtheta = [](double theta, double, double) { return -0.5 * theta; };
    CHECK_THROWS_AS(validate_model(bad, g), ConfigError);
}
