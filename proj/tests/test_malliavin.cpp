#include <doctest.h>

#include "condgreeks/bs.hpp"
#include "condgreeks/config.hpp"
#include "condgreeks/errors.hpp"
#include "condgreeks/malliavin.hpp"
#include "condgreeks/stats.hpp"

#include <cmath>
#include <vector>

using namespace cg;

namespace {

ModelSpec sine_model() {
    ModelConfig cfg;
    cfg.type = "sine";
    cfg.theta = 0.8;
    cfg.x0 = 0.5;
    return make_model(cfg);
}

ModelSpec gbm_model() {
    ModelConfig cfg;
    cfg.type = "gbm";
    cfg.theta = 0.2;
    cfg.x0 = 100.0;
    cfg.gbm_rate = 0.05;
    return make_model(cfg);
}

} // namespace

TEST_CASE("additive dynamics have unit tangent") {
    const ModelSpec model = bs::make_model(bs::BsConfig{});
    const TimeGrid g = build_grid(1.0, 32);
    const EulerPath p = simulate_path(model, g, RngStream::from(1, 0).substream(0));
    const TangentProcess t = tangent(p, model);
    for (double y : t.y) CHECK(y == 1.0);
}

TEST_CASE("multiplicative dynamics match the per-step tangent factor") {
    const ModelSpec model = gbm_model();
    const TimeGrid g = build_grid(1.0, 16);
    const EulerPath p = simulate_path(model, g, RngStream::from(2, 3).substream(0));
    const TangentProcess t = tangent(p, model);
    const double sqrt_dt = std::sqrt(g.dt);
    for (int k = 0; k < g.M; ++k) {
        const double factor = 1.0 + 0.05 * g.dt +
                              0.2 * sqrt_dt * p.noises[static_cast<std::size_t>(k)];
        CHECK(t.y[static_cast<std::size_t>(k) + 1] / t.y[static_cast<std::size_t>(k)] ==
              doctest::Approx(factor).epsilon(1e-12));
    }
}

TEST_CASE("tangent matches the pathwise initial-state finite difference") {
    const ModelSpec model = sine_model();
    const TimeGrid g = build_grid(1.0, 32);
    for (int rep = 0; rep < 5; ++rep) {
        const EulerPath base = simulate_path(model, g, RngStream::from(17, rep).substream(0));
        const TangentProcess t = tangent(base, model);
        const double h = 1e-6;
        ModelSpec bumped = model;
        bumped.x0 = model.x0 + h;
        const EulerPath up = simulate_from_noises(bumped, g, base.noises);
        const double fd = (up.terminal() - base.terminal()) / h;
        CHECK(fd == doctest::Approx(t.y.back()).epsilon(1e-4));
    }
}

TEST_CASE("tangent aborts a path whose first variation collapses") {
    ModelSpec model = sine_model();
    model.diffusion_dx = [](double, double, double) { return 8.0; }; // inflate the noise term
    model.diffusion = [](double, double, double) { return 1.0; };
    model.drift_dx = [](double, double, double) { return 0.0; };
    const TimeGrid g = build_grid(1.0, 4);
    // Choose the first increment so the step factor 1 + sqrt(dt) * 8 * xi hits zero.
    std::vector<double> noises{-1.0 / (8.0 * std::sqrt(g.dt)), 0.0, 0.0, 0.0};
    const EulerPath p = simulate_from_noises(model, g, noises);
    CHECK_THROWS_AS(tangent(p, model), SingularTangentError);
}

TEST_CASE("log-price Malliavin matrix is theta below the diagonal and zero elsewhere") {
    bs::BsConfig cfg;
    const ModelSpec model = bs::make_model(cfg);
    const TimeGrid g = build_grid(1.0, 16);
    const EulerPath p = simulate_path(model, g, RngStream::from(5, 1).substream(0));
    const MalliavinMatrix mat = malliavin_state(p, model, tangent(p, model));
    for (int j = 0; j < g.M; ++j) {
        for (int k = 0; k <= g.M; ++k) {
            if (j < k) {
                CHECK(mat.entry(j, k) == cfg.vol);
            } else {
                CHECK(mat.entry(j, k) == 0.0);
            }
        }
    }
}

TEST_CASE("state sensitivities match the noise-bump finite difference") {
    const ModelSpec model = sine_model();
    const TimeGrid g = build_grid(1.0, 16);
    const EulerPath base = simulate_path(model, g, RngStream::from(23, 9).substream(0));
    const MalliavinMatrix mat = malliavin_state(base, model, tangent(base, model));
    const double h = 1e-6;
    const double sqrt_dt = std::sqrt(g.dt);
    for (int j : {0, 3, 7, 15}) {
        std::vector<double> bumped = base.noises;
        bumped[static_cast<std::size_t>(j)] += h;
        const EulerPath up = simulate_from_noises(model, g, bumped);
        const double fd = (up.terminal() - base.terminal()) / (h * sqrt_dt);
        CHECK(fd == doctest::Approx(mat.entry(j, g.M)).epsilon(1e-4));
    }
}

TEST_CASE("functional rows: call payoff, mid constraint, constants") {
    bs::BsConfig cfg;
    const ModelSpec model = bs::make_model(cfg);
    const TimeGrid g = build_grid(1.0, 16);
    const EulerPath p = simulate_path(model, g, RngStream::from(29, 2).substream(0));
    const MalliavinMatrix mat = malliavin_state(p, model, tangent(p, model));
    const ConditionalSpec spec = bs::make_generic_conditional_spec(model, g, cfg);

    const std::vector<double> ell_row = malliavin_row(spec.loss, p, mat);
    const double s_T = std::exp(p.terminal());
    const double expect = s_T > cfg.strike ? std::exp(-cfg.rate) * cfg.vol * s_T : 0.0;
    for (double v : ell_row) CHECK(v == doctest::Approx(expect).epsilon(1e-12));

    const std::vector<double> g_row = malliavin_row(spec.constraint, p, mat);
    for (int j = 0; j < g.M; ++j) {
        CHECK(g_row[static_cast<std::size_t>(j)] == (j < g.mid() ? cfg.vol : 0.0));
    }

    const std::vector<double> zeros = malliavin_row(constant_functional(3.5), p, mat);
    for (double v : zeros) CHECK(v == 0.0);
}

TEST_CASE("integral functional row matches its noise-bump finite difference") {
    const ModelSpec model = sine_model();
    const TimeGrid g = build_grid(1.0, 16);
    const PathFunctional f = integral_functional([](double x) { return x * x; },
                                                 [](double x) { return 2.0 * x; });
    const EulerPath base = simulate_path(model, g, RngStream::from(31, 4).substream(0));
    const MalliavinMatrix mat = malliavin_state(base, model, tangent(base, model));
    const std::vector<double> row = malliavin_row(f, base, mat);
    const double h = 1e-6;
    const double sqrt_dt = std::sqrt(g.dt);
    for (int j : {0, 5, 11}) {
        std::vector<double> bumped = base.noises;
        bumped[static_cast<std::size_t>(j)] += h;
        const EulerPath up = simulate_from_noises(model, g, bumped);
        const double fd = (f.value(up) - f.value(base)) / (h * sqrt_dt);
        CHECK(fd == doctest::Approx(row[static_cast<std::size_t>(j)]).epsilon(1e-4));
    }
}

TEST_CASE("default weight reproduces the stressed-call weight and normalizes exactly") {
    bs::BsConfig cfg;
    const ModelSpec model = bs::make_model(cfg);
    const TimeGrid g = build_grid(1.0, 64);
    const ConditionalSpec spec = bs::make_conditional_spec(model, g, cfg);
    const double expected = 2.0 / (cfg.vol * g.T);
    for (int k = 0; k < g.M; ++k) {
        if (k < g.mid()) {
            CHECK(spec.u.values[static_cast<std::size_t>(k)] ==
                  doctest::Approx(expected).epsilon(1e-14));
        } else {
            CHECK(spec.u.values[static_cast<std::size_t>(k)] == 0.0);
        }
    }
    double norm = 0.0;
    for (int k = 0; k < g.M; ++k) {
        norm += spec.dg[static_cast<std::size_t>(k)] * spec.u.values[static_cast<std::size_t>(k)];
    }
    norm *= g.dt;
    CHECK(std::fabs(norm - 1.0) <= 1e-14);

    SUBCASE("uniform row reduces to 1/(c T)") {
        std::vector<double> dg(64, 1.7);
        const WeightProcess u = default_weight(dg, g);
        for (double v : u.values) CHECK(v == doctest::Approx(1.0 / (1.7 * g.T)).epsilon(1e-14));
    }
    SUBCASE("random deterministic rows normalize to machine precision") {
        RngStream rng = RngStream::from(77, 0);
        for (int rep = 0; rep < 50; ++rep) {
            std::vector<double> dg(64);
            for (double& v : dg) v = rng.next_normal();
            const WeightProcess u = default_weight(dg, g);
            double acc = 0.0;
            for (int k = 0; k < 64; ++k) {
                acc += dg[static_cast<std::size_t>(k)] * u.values[static_cast<std::size_t>(k)];
            }
            acc *= g.dt;
            CHECK(std::fabs(acc - 1.0) <= 1e-13);
        }
    }
    SUBCASE("identically zero row is degenerate") {
        std::vector<double> dg(64, 0.0);
        CHECK_THROWS_AS(default_weight(dg, g), DegenerateConstraintError);
    }
}

TEST_CASE("adapted Skorohod integral is the Ito sum") {
    bs::BsConfig cfg;
    const ModelSpec model = bs::make_model(cfg);
    const TimeGrid g = build_grid(1.0, 64);
    const ConditionalSpec spec = bs::make_conditional_spec(model, g, cfg);

    SUBCASE("matches the explicit half-horizon sum") {
        const EulerPath p = simulate_path(model, g, RngStream::from(41, 0).substream(0));
        double w_half = 0.0;
        for (int k = 0; k < g.mid(); ++k) w_half += p.noises[static_cast<std::size_t>(k)];
        w_half *= std::sqrt(g.dt);
        CHECK(skorohod_adapted(spec.u, p) ==
              doctest::Approx(2.0 / (cfg.vol * g.T) * w_half).epsilon(1e-13));
    }
    SUBCASE("zero noises give zero") {
        const EulerPath p = simulate_from_noises(model, g, std::vector<double>(64, 0.0));
        CHECK(skorohod_adapted(spec.u, p) == 0.0);
    }
    SUBCASE("Ito isometry holds at Monte Carlo scale") {
        EstimatorStats stats;
        for (int i = 0; i < 100000; ++i) {
            const EulerPath p = simulate_path(model, g, RngStream::from(43, i).substream(0));
            stats.push(skorohod_adapted(spec.u, p));
        }
        double target = 0.0;
        for (double v : spec.u.values) target += v * v;
        target *= g.dt;
        CHECK(std::fabs(stats.mean) < 3.0 * stats.std_error());
        CHECK(stats.variance() == doctest::Approx(target).epsilon(0.05));
    }
    SUBCASE("non-adapted weights are rejected") {
        WeightProcess bad = spec.u;
        bad.adapted = false;
        const EulerPath p = simulate_path(model, g, RngStream::from(44, 0).substream(0));
        CHECK_THROWS_AS(skorohod_adapted(bad, p), ContractError);
    }
}

TEST_CASE("Skorohod expansion: reduction, hand value, and duality") {
    bs::BsConfig cfg;
    const ModelSpec model = bs::make_model(cfg);
    const TimeGrid g = build_grid(1.0, 64);
    const ConditionalSpec spec = bs::make_conditional_spec(model, g, cfg);

    SUBCASE("constant factor reduces to the adapted integral exactly") {
        const EulerPath p = simulate_path(model, g, RngStream::from(51, 0).substream(0));
        const std::vector<double> zero_row(64, 0.0);
        CHECK(skorohod_expand(1.0, zero_row, spec.u, p) == skorohod_adapted(spec.u, p));

        // The reduction holds for arbitrary adapted weights, not just the
        // shipped one.
        RngStream rng = RngStream::from(51, 1);
        for (int rep = 0; rep < 20; ++rep) {
            WeightProcess w;
            w.values.resize(64);
            for (double& v : w.values) v = rng.next_normal();
            CHECK(skorohod_expand(1.0, zero_row, w, p) == skorohod_adapted(w, p));
        }
    }
    SUBCASE("terminal-state factor subtracts exactly one") {
        // sum_k D_k X_M u_k dt = theta * (2/(theta T)) * T/2 = 1, so
        // S(X_M u) = X_M S(u) - 1 path by path, with zero mean overall.
        EstimatorStats stats;
        const PathFunctional f = terminal_functional([](double x) { return x; },
                                                     [](double) { return 1.0; });
        for (int i = 0; i < 100000; ++i) {
            const EulerPath p = simulate_path(model, g, RngStream::from(52, i).substream(0));
            const MalliavinMatrix mat = malliavin_state(p, model, tangent(p, model));
            const std::vector<double> row = malliavin_row(f, p, mat);
            const double s = skorohod_expand(p.terminal(), row, spec.u, p);
            CHECK(s == doctest::Approx(p.terminal() * skorohod_adapted(spec.u, p) - 1.0)
                           .epsilon(1e-12));
            stats.push(s);
        }
        CHECK(std::fabs(stats.mean) < 3.0 * stats.std_error());
    }
    SUBCASE("duality holds on the nonlinear model") {
        const ModelSpec nonlinear = sine_model();
        const TimeGrid g16 = build_grid(1.0, 16);
        WeightProcess u;
        u.values.assign(16, 1.0 / g16.T);
        const PathFunctional f = terminal_functional([](double x) { return x; },
                                                     [](double) { return 1.0; });
        EstimatorStats gap; // paired difference of the two duality sides
        for (int i = 0; i < 100000; ++i) {
            const EulerPath p = simulate_path(nonlinear, g16, RngStream::from(53, i).substream(0));
            const MalliavinMatrix mat = malliavin_state(p, nonlinear, tangent(p, nonlinear));
            const std::vector<double> row = malliavin_row(f, p, mat);
            double inner = 0.0;
            for (int k = 0; k < 16; ++k) {
                inner += row[static_cast<std::size_t>(k)] * u.values[static_cast<std::size_t>(k)];
            }
            inner *= g16.dt;
            gap.push(p.terminal() * skorohod_adapted(u, p) - inner);
        }
        CHECK(std::fabs(gap.mean) < 3.0 * gap.std_error());
    }
}
