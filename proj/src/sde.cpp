#include "condgreeks/sde.hpp"
#include "condgreeks/errors.hpp"

#include <cmath>
#include <string>
#include <utility>

namespace cg {

TimeGrid build_grid(double T, int M) {
    if (!(T > 0.0)) throw ConfigError("build_grid: horizon T must be positive");
    if (M < 2) throw ConfigError("build_grid: need at least two steps, got " + std::to_string(M));
    TimeGrid g;
    g.T = T;
    g.M = M;
    g.dt = T / M;
    return g;
}

KernelParams kernel_params(const ModelSpec& model, double x, int k, const TimeGrid& grid) {
    const double t = grid.node(k);
    const double sigma = model.diffusion(model.theta, x, t);
    if (!(sigma > 0.0)) {
        throw DegenerateKernelError("kernel_params: sigma(theta,x,t) = " + std::to_string(sigma) +
                                    " is not positive at step " + std::to_string(k));
    }
    const double sqrt_dt = std::sqrt(grid.dt);
    KernelParams kp;
    kp.m = x + grid.dt * model.drift(model.theta, x, t);
    kp.s = sqrt_dt * sigma;
    kp.dm = grid.dt * model.drift_dtheta(model.theta, x, t);
    kp.ds = sqrt_dt * model.diffusion_dtheta(model.theta, x, t);
    return kp;
}

EulerPath simulate_from_noises(const ModelSpec& model, const TimeGrid& grid,
                               std::vector<double> noises, std::uint64_t stream_id) {
    if (static_cast<int>(noises.size()) != grid.M) {
        throw ContractError("simulate_from_noises: expected M noises");
    }
    EulerPath path;
    path.grid = grid;
    path.noises = std::move(noises);
    path.states.resize(static_cast<std::size_t>(grid.M) + 1);
    path.stream_id = stream_id;
    path.states[0] = model.x0;
    const double sqrt_dt = std::sqrt(grid.dt);
    double x = model.x0;
    for (int k = 0; k < grid.M; ++k) {
        const double t = grid.node(k);
        x = x + grid.dt * model.drift(model.theta, x, t) +
            sqrt_dt * model.diffusion(model.theta, x, t) * path.noises[static_cast<std::size_t>(k)];
        path.states[static_cast<std::size_t>(k) + 1] = x;
    }
    return path;
}

EulerPath simulate_path(const ModelSpec& model, const TimeGrid& grid, RngStream stream) {
    std::vector<double> noises(static_cast<std::size_t>(grid.M));
    for (double& z : noises) z = stream.next_normal();
    return simulate_from_noises(model, grid, std::move(noises), stream.stream_index);
}

std::vector<double> propagate_from(const ModelSpec& model, const TimeGrid& grid, int k,
                                   double x_k, std::span<const double> noises) {
    if (k < 0 || k >= grid.M) throw ContractError("propagate_from: step index out of range");
    if (static_cast<int>(noises.size()) != grid.M - k) {
        throw ContractError("propagate_from: expected " + std::to_string(grid.M - k) +
                            " noises, got " + std::to_string(noises.size()));
    }
    std::vector<double> tail(static_cast<std::size_t>(grid.M - k));
    const double sqrt_dt = std::sqrt(grid.dt);
    double x = x_k;
    for (int j = k; j < grid.M; ++j) {
        const double t = grid.node(j);
        x = x + grid.dt * model.drift(model.theta, x, t) +
            sqrt_dt * model.diffusion(model.theta, x, t) * noises[static_cast<std::size_t>(j - k)];
        tail[static_cast<std::size_t>(j - k)] = x;
    }
    return tail;
}

void validate_model(const ModelSpec& model, const TimeGrid& grid, int probes, std::uint64_t seed) {
    RngStream rng = RngStream::from(seed, 0);
    // Probe around the initial state on a scale set by the model itself.
    const double sigma0 = model.diffusion(model.theta, model.x0, 0.0);
    const double span = std::fmax(1.0, std::fabs(sigma0) * std::sqrt(grid.T) * 5.0);
    const double tol = 1e-5;

    auto check = [&](const char* name, double fd, double exact) {
        const double rel = std::fabs(fd - exact) / std::fmax(std::fabs(exact), 1e-8);
        if (rel > tol) {
            throw ConfigError(std::string("validate_model: callback ") + name +
                              " disagrees with finite differences (rel err " +
                              std::to_string(rel) + ")");
        }
    };

    for (int p = 0; p < probes; ++p) {
        const double x = model.x0 + span * (2.0 * rng.next_uniform() - 1.0);
        const int k = static_cast<int>(rng.next_u64() % static_cast<std::uint64_t>(grid.M));
        const double t = grid.node(k);
        const double hx = 1e-6 * std::fmax(1.0, std::fabs(x));
        const double ht = 1e-6 * std::fmax(1.0, std::fabs(model.theta));

        check("drift_dx",
              (model.drift(model.theta, x + hx, t) - model.drift(model.theta, x - hx, t)) / (2 * hx),
              model.drift_dx(model.theta, x, t));
        check("diffusion_dx",
              (model.diffusion(model.theta, x + hx, t) - model.diffusion(model.theta, x - hx, t)) /
                  (2 * hx),
              model.diffusion_dx(model.theta, x, t));
        check("drift_dtheta",
              (model.drift(model.theta + ht, x, t) - model.drift(model.theta - ht, x, t)) / (2 * ht),
              model.drift_dtheta(model.theta, x, t));
        check("diffusion_dtheta",
              (model.diffusion(model.theta + ht, x, t) - model.diffusion(model.theta - ht, x, t)) /
                  (2 * ht),
              model.diffusion_dtheta(model.theta, x, t));
    }
}

} // namespace cg
