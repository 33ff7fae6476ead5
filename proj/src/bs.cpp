#include "condgreeks/bs.hpp"
#include "condgreeks/errors.hpp"
#include "condgreeks/num.hpp"

#include <cmath>
#include <string>

namespace cg::bs {

double BsConfig::x0() const {
    return std::log(spot);
}

void BsConfig::validate() const {
    if (!(spot > 0.0)) throw ConfigError("bs: spot must be positive");
    if (!(rate >= 0.0)) throw ConfigError("bs: rate must be nonnegative");
    if (!(vol > 0.0)) throw ConfigError("bs: vol must be positive");
    if (!(horizon > 0.0)) throw ConfigError("bs: horizon must be positive");
    if (!(strike >= 0.0)) throw ConfigError("bs: strike must be nonnegative");
    if (!(stress > 0.0)) throw ConfigError("bs: stress level must be positive");
}

ModelSpec make_model(const BsConfig& cfg) {
    cfg.validate();
    const double r = cfg.rate;
    ModelSpec m;
    m.name = "bs";
    m.theta = cfg.vol;
    m.x0 = cfg.x0();
    m.drift = [r](double theta, double, double) { return r - 0.5 * theta * theta; };
    m.diffusion = [](double theta, double, double) { return theta; };
    m.drift_dx = [](double, double, double) { return 0.0; };
    m.diffusion_dx = [](double, double, double) { return 0.0; };
    m.drift_dtheta = [](double theta, double, double) { return -theta; };
    m.diffusion_dtheta = [](double, double, double) { return 1.0; };
    return m;
}

namespace {

void require_even(const TimeGrid& grid) {
    if (grid.M % 2 != 0) {
        throw ConfigError("bs: the mid-horizon constraint needs an even step count, got M = " +
                          std::to_string(grid.M));
    }
}

PathFunctional closed_loss(const BsConfig& cfg, double theta) {
    const double disc = std::exp(-cfg.rate * cfg.horizon);
    const double strike = cfg.strike;
    PathFunctional f;
    f.value = [disc, strike](const EulerPath& path) {
        const double s_T = std::exp(path.terminal());
        return s_T > strike ? disc * (s_T - strike) : 0.0;
    };
    // Derivative of the call kink at S_T = K is taken as zero.
    f.fill_row = [disc, strike, theta](const EulerPath& path, const MalliavinMatrix&,
                                       std::span<double> row) {
        const double s_T = std::exp(path.terminal());
        const double v = s_T > strike ? disc * theta * s_T : 0.0;
        for (double& r : row) r = v;
    };
    return f;
}

PathFunctional closed_constraint(const BsConfig& cfg, double theta, int mid) {
    const double log_stress = std::log(cfg.stress);
    PathFunctional f;
    f.value = [log_stress](const EulerPath& path) { return path.at_mid() - log_stress; };
    f.fill_row = [theta, mid](const EulerPath&, const MalliavinMatrix&, std::span<double> row) {
        for (int j = 0; j < static_cast<int>(row.size()); ++j) {
            row[static_cast<std::size_t>(j)] = j < mid ? theta : 0.0;
        }
    };
    return f;
}

std::vector<double> constraint_row(double theta, const TimeGrid& grid) {
    std::vector<double> dg(static_cast<std::size_t>(grid.M), 0.0);
    for (int j = 0; j < grid.mid(); ++j) dg[static_cast<std::size_t>(j)] = theta;
    return dg;
}

} // namespace

ConditionalSpec make_conditional_spec(const ModelSpec& model, const TimeGrid& grid,
                                      const BsConfig& cfg) {
    require_even(grid);
    const double theta = model.theta;
    ConditionalSpec spec;
    spec.dg = constraint_row(theta, grid);
    spec.u = default_weight(spec.dg, grid);
    spec.loss = closed_loss(cfg, theta);
    spec.constraint = closed_constraint(cfg, theta, grid.mid());
    const double disc = std::exp(-cfg.rate * cfg.horizon);
    const double strike = cfg.strike;
    spec.correction_closed = [disc, strike](const EulerPath& path) {
        const double s_T = std::exp(path.terminal());
        return s_T > strike ? disc * s_T : 0.0;
    };
    return spec;
}

ConditionalSpec make_generic_conditional_spec(const ModelSpec& model, const TimeGrid& grid,
                                              const BsConfig& cfg) {
    require_even(grid);
    const double disc = std::exp(-cfg.rate * cfg.horizon);
    const double strike = cfg.strike;
    const double log_stress = std::log(cfg.stress);
    ConditionalSpec spec;
    spec.dg = constraint_row(model.theta, grid);
    spec.u = default_weight(spec.dg, grid);
    spec.loss = terminal_functional(
        [disc, strike](double x) {
            const double s = std::exp(x);
            return s > strike ? disc * (s - strike) : 0.0;
        },
        [disc, strike](double x) {
            const double s = std::exp(x);
            return s > strike ? disc * s : 0.0;
        });
    spec.constraint = node_functional(
        grid.mid(), [log_stress](double x) { return x - log_stress; },
        [](double) { return 1.0; });
    return spec;
}

double norm_cdf(double x) {
    return normal_cdf(x);
}

double call_price(double spot, double strike, double rate, double vol, double tau) {
    if (strike <= 0.0) return spot; // zero-strike call is the asset itself
    const double stdev = vol * std::sqrt(tau);
    if (stdev <= 0.0) {
        const double fwd = spot - strike * std::exp(-rate * tau);
        return fwd > 0.0 ? fwd : 0.0;
    }
    const double d1 = (std::log(spot / strike) + (rate + 0.5 * vol * vol) * tau) / stdev;
    const double d2 = d1 - stdev;
    return spot * norm_cdf(d1) - strike * std::exp(-rate * tau) * norm_cdf(d2);
}

double call_vega(double spot, double strike, double rate, double vol, double tau) {
    if (strike <= 0.0) return 0.0;
    const double stdev = vol * std::sqrt(tau);
    if (stdev <= 0.0) return 0.0;
    const double d1 = (std::log(spot / strike) + (rate + 0.5 * vol * vol) * tau) / stdev;
    return spot * normal_pdf(d1) * std::sqrt(tau);
}

double oracle_price(const BsConfig& cfg) {
    cfg.validate();
    const double tau = 0.5 * cfg.horizon;
    return std::exp(-cfg.rate * tau) * call_price(cfg.stress, cfg.strike, cfg.rate, cfg.vol, tau);
}

double oracle_vega(const BsConfig& cfg) {
    cfg.validate();
    const double tau = 0.5 * cfg.horizon;
    return std::exp(-cfg.rate * tau) * call_vega(cfg.stress, cfg.strike, cfg.rate, cfg.vol, tau);
}

RestartEstimate restart_mc_price(const BsConfig& cfg, int steps_second_half, std::uint64_t n,
                                 std::uint64_t seed) {
    cfg.validate();
    BsConfig restarted = cfg;
    restarted.spot = cfg.stress;
    ModelSpec model = make_model(restarted);
    const TimeGrid half = build_grid(0.5 * cfg.horizon, steps_second_half);
    const double disc = std::exp(-cfg.rate * cfg.horizon);
    EstimatorStats stats;
    for (std::uint64_t i = 0; i < n; ++i) {
        RngStream stream = RngStream::from(seed, i);
        const EulerPath path = simulate_path(model, half, stream.substream(0));
        const double s_T = std::exp(path.terminal());
        stats.push(s_T > cfg.strike ? disc * (s_T - cfg.strike) : 0.0);
    }
    return {stats.mean, stats.std_error()};
}

double mid_density_at_stress(const BsConfig& cfg) {
    const double tau = 0.5 * cfg.horizon;
    const double mean = cfg.x0() + (cfg.rate - 0.5 * cfg.vol * cfg.vol) * tau;
    const double stdev = cfg.vol * std::sqrt(tau);
    const double z = (std::log(cfg.stress) - mean) / stdev;
    return normal_pdf(z) / stdev;
}

} // namespace cg::bs
