#pragma once

#include "condgreeks/rng.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace cg {

/// Uniform time grid t_k = k*dt on [0,T].
struct TimeGrid {
    double T = 0.0;
    int M = 0;
    double dt = 0.0;

    double node(int k) const { return k == M ? T : k * dt; }
    int mid() const { return M / 2; }
};

/// Throws ConfigError unless T > 0 and M >= 2.
TimeGrid build_grid(double T, int M);

/// Scalar parameterized diffusion dX = b(theta,x,t) dt + sigma(theta,x,t) dW
/// together with the state- and parameter-derivatives of its coefficients.
/// The derivative callbacks are user-supplied; validate_model cross-checks
/// them against finite differences because downstream estimators rely on
/// their exactness.
struct ModelSpec {
    using Coeff = std::function<double(double theta, double x, double t)>;

    Coeff drift;
    Coeff diffusion;        // must stay positive on the configured domain
    Coeff drift_dx;
    Coeff diffusion_dx;
    Coeff drift_dtheta;
    Coeff diffusion_dtheta;
    double theta = 0.0;
    double x0 = 0.0;
    std::string name;

    ModelSpec with_theta(double new_theta) const {
        ModelSpec m = *this;
        m.theta = new_theta;
        return m;
    }
};

/// One-step Gaussian transition kernel N(m, s^2) of the Euler scheme,
/// with its parameter derivatives.
struct KernelParams {
    double m = 0.0;  // x + dt * b
    double s = 0.0;  // sqrt(dt) * sigma
    double dm = 0.0; // dt * d b / d theta
    double ds = 0.0; // sqrt(dt) * d sigma / d theta
};

/// Throws DegenerateKernelError when sigma(theta, x, t_k) <= 0.
KernelParams kernel_params(const ModelSpec& model, double x, int k, const TimeGrid& grid);

/// One simulated trajectory plus the standard normal increments that drove
/// it.  The stored noises make common-random-number coupling, Ito sums and
/// score factors exact reconstructions rather than approximations.
struct EulerPath {
    TimeGrid grid;
    std::vector<double> states; // size M+1
    std::vector<double> noises; // size M, noises[k] drives step k -> k+1
    std::uint64_t stream_id = 0;

    double terminal() const { return states.back(); }
    double at_mid() const { return states[static_cast<std::size_t>(grid.mid())]; }
};

/// Euler-Maruyama path from the given noise stream (consumed in order).
EulerPath simulate_path(const ModelSpec& model, const TimeGrid& grid, RngStream stream);

/// Deterministic variant used by tests and coupled estimators: the supplied
/// increments are used verbatim.
EulerPath simulate_from_noises(const ModelSpec& model, const TimeGrid& grid,
                               std::vector<double> noises, std::uint64_t stream_id = 0);

/// Applies the Euler recursion from (k, x_k) using the supplied noises
/// verbatim; returns states k+1..M.  Throws ContractError unless exactly
/// M-k noises are supplied and k < M.
std::vector<double> propagate_from(const ModelSpec& model, const TimeGrid& grid, int k,
                                   double x_k, std::span<const double> noises);

/// Cross-checks all four derivative callbacks against central finite
/// differences at random probe points; throws ConfigError on relative error
/// above 1e-5.
void validate_model(const ModelSpec& model, const TimeGrid& grid, int probes = 100,
                    std::uint64_t seed = 0x5eedULL);

} // namespace cg
