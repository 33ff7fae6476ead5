#include <doctest.h>

#include "condgreeks/bs.hpp"
#include "condgreeks/conditional.hpp"
#include "condgreeks/errors.hpp"

#include <cmath>

using namespace cg;

TEST_CASE("log-price model coefficients") {
    bs::BsConfig cfg;
    cfg.vol = 1.0;
    const ModelSpec model = bs::make_model(cfg);
    CHECK(model.drift(1.0, 0.0, 0.0) == doctest::Approx(cfg.rate - 0.5));
    CHECK(model.x0 == doctest::Approx(std::log(cfg.spot)));

    const TimeGrid g = build_grid(1.0, 64);
    const KernelParams kp = kernel_params(model, model.x0, 5, g);
    CHECK(kp.dm == doctest::Approx(-cfg.vol * g.dt));
    CHECK(kp.ds == doctest::Approx(std::sqrt(g.dt)));
}

TEST_CASE("odd step counts are rejected for the mid-horizon constraint") {
    bs::BsConfig cfg;
    const ModelSpec model = bs::make_model(cfg);
    const TimeGrid g = build_grid(1.0, 9);
    CHECK_THROWS_AS(bs::make_conditional_spec(model, g, cfg), ConfigError);
}

TEST_CASE("generic chain rule reproduces the closed forms path by path") {
    bs::BsConfig cfg;
    const ModelSpec model = bs::make_model(cfg);
    const TimeGrid g = build_grid(1.0, 64);
    const ConditionalEvaluator closed(model, g, bs::make_conditional_spec(model, g, cfg));
    const ConditionalEvaluator generic(model, g, bs::make_generic_conditional_spec(model, g, cfg));
    for (int i = 0; i < 1000; ++i) {
        const EulerPath p = simulate_path(model, g, RngStream::from(71, i).substream(0));
        const Contributions a = closed.contributions(p);
        const Contributions b = generic.contributions(p);
        CHECK(std::fabs(a.e1 - b.e1) <= 1e-12);
        CHECK(std::fabs(a.e2 - b.e2) <= 1e-12);
        CHECK(a.skorohod == b.skorohod);
    }
}

TEST_CASE("oracle price limits") {
    SUBCASE("zero strike discounts the stress forward") {
        bs::BsConfig cfg;
        cfg.strike = 0.0;
        CHECK(bs::oracle_price(cfg) ==
              doctest::Approx(cfg.stress * std::exp(-cfg.rate * cfg.horizon / 2.0)));
    }
    SUBCASE("vanishing volatility leaves the deterministic payoff") {
        bs::BsConfig cfg;
        cfg.vol = 1e-9;
        cfg.strike = 80.0; // below the stress forward, so the limit is the intrinsic value
        const double tau = cfg.horizon / 2.0;
        const double intrinsic =
            std::exp(-cfg.rate * cfg.horizon) * (cfg.stress * std::exp(cfg.rate * tau) - cfg.strike);
        CHECK(bs::oracle_price(cfg) == doctest::Approx(intrinsic).epsilon(1e-9));
    }
}

TEST_CASE("oracle price agrees with the restart simulation") {
    bs::BsConfig cfg;
    const bs::RestartEstimate mc = bs::restart_mc_price(cfg, 32, 2000000, 4242);
    CHECK(std::fabs(mc.mean - bs::oracle_price(cfg)) < 3.0 * mc.std_error);
}

TEST_CASE("oracle vega") {
    bs::BsConfig cfg;
    SUBCASE("zero strike has no volatility exposure") {
        bs::BsConfig flat = cfg;
        flat.strike = 0.0;
        CHECK(bs::oracle_vega(flat) == 0.0);
    }
    SUBCASE("matches the central difference of the oracle price") {
        const double h = 1e-5;
        bs::BsConfig up = cfg, dn = cfg;
        up.vol += h;
        dn.vol -= h;
        const double fd = (bs::oracle_price(up) - bs::oracle_price(dn)) / (2.0 * h);
        CHECK(bs::oracle_vega(cfg) == doctest::Approx(fd).epsilon(1e-6));
    }
    SUBCASE("deep in the money the optionality dies") {
        bs::BsConfig deep = cfg;
        deep.strike = 1.0;
        CHECK(std::fabs(bs::oracle_vega(deep)) < 1e-6);
    }
}

TEST_CASE("denominator mean equals the closed-form mid density") {
    bs::BsConfig cfg;
    const ModelSpec model = bs::make_model(cfg);
    const TimeGrid g = build_grid(1.0, 64);
    const ConditionalEvaluator eval(model, g, bs::make_conditional_spec(model, g, cfg));
    EstimatorStats e2;
    for (int i = 0; i < 100000; ++i) {
        const EulerPath p = simulate_path(model, g, RngStream::from(73, i).substream(0));
        e2.push(eval.contributions(p).e2);
    }
    CHECK(std::fabs(e2.mean - bs::mid_density_at_stress(cfg)) < 3.0 * e2.std_error());
}
