#include "condgreeks/malliavin.hpp"
#include "condgreeks/errors.hpp"

#include <cmath>
#include <string>
#include <utility>

namespace cg {

TangentProcess tangent(const EulerPath& path, const ModelSpec& model) {
    const int M = path.grid.M;
    TangentProcess t;
    t.y.resize(static_cast<std::size_t>(M) + 1);
    t.y_inv.resize(static_cast<std::size_t>(M) + 1);
    const double sqrt_dt = std::sqrt(path.grid.dt);
    double y = 1.0;
    t.y[0] = 1.0;
    t.y_inv[0] = 1.0;
    for (int k = 0; k < M; ++k) {
        const double x = path.states[static_cast<std::size_t>(k)];
        const double tk = path.grid.node(k);
        y *= 1.0 + path.grid.dt * model.drift_dx(model.theta, x, tk) +
             sqrt_dt * model.diffusion_dx(model.theta, x, tk) *
                 path.noises[static_cast<std::size_t>(k)];
        if (std::fabs(y) < 1e-12) {
            throw SingularTangentError("tangent: first variation vanished at step " +
                                       std::to_string(k + 1));
        }
        t.y[static_cast<std::size_t>(k) + 1] = y;
        t.y_inv[static_cast<std::size_t>(k) + 1] = 1.0 / y;
    }
    return t;
}

MalliavinMatrix::MalliavinMatrix(const EulerPath& path, const ModelSpec& model,
                                 const TangentProcess& tang)
    : y_(tang.y) {
    const int M = path.grid.M;
    sigma_.resize(static_cast<std::size_t>(M));
    for (int j = 0; j < M; ++j) {
        sigma_[static_cast<std::size_t>(j)] =
            model.diffusion(model.theta, path.states[static_cast<std::size_t>(j)], path.grid.node(j));
    }
}

MalliavinMatrix malliavin_state(const EulerPath& path, const ModelSpec& model,
                                const TangentProcess& tang) {
    return MalliavinMatrix(path, model, tang);
}

PathFunctional node_functional(int k, std::function<double(double)> phi,
                               std::function<double(double)> dphi) {
    PathFunctional f;
    f.value = [k, phi](const EulerPath& path) {
        return phi(path.states[static_cast<std::size_t>(k)]);
    };
    f.fill_row = [k, dphi](const EulerPath& path, const MalliavinMatrix& mat,
                           std::span<double> row) {
        const double slope = dphi(path.states[static_cast<std::size_t>(k)]);
        for (int j = 0; j < static_cast<int>(row.size()); ++j) {
            row[static_cast<std::size_t>(j)] = slope * mat.entry(j, k);
        }
    };
    return f;
}

PathFunctional terminal_functional(std::function<double(double)> phi,
                                   std::function<double(double)> dphi) {
    PathFunctional f;
    f.value = [phi](const EulerPath& path) { return phi(path.terminal()); };
    f.fill_row = [dphi](const EulerPath& path, const MalliavinMatrix& mat, std::span<double> row) {
        const int M = path.grid.M;
        const double slope = dphi(path.terminal());
        for (int j = 0; j < static_cast<int>(row.size()); ++j) {
            row[static_cast<std::size_t>(j)] = slope * mat.entry(j, M);
        }
    };
    return f;
}

PathFunctional integral_functional(std::function<double(double)> gamma,
                                   std::function<double(double)> dgamma) {
    PathFunctional f;
    f.value = [gamma](const EulerPath& path) {
        double acc = 0.0;
        for (int k = 0; k < path.grid.M; ++k) {
            acc += gamma(path.states[static_cast<std::size_t>(k)]);
        }
        return acc * path.grid.dt;
    };
    f.fill_row = [dgamma](const EulerPath& path, const MalliavinMatrix& mat,
                          std::span<double> row) {
        const int M = path.grid.M;
        for (int j = 0; j < static_cast<int>(row.size()); ++j) {
            double acc = 0.0;
            for (int k = j + 1; k < M; ++k) {
                acc += dgamma(path.states[static_cast<std::size_t>(k)]) * mat.entry(j, k);
            }
            row[static_cast<std::size_t>(j)] = acc * path.grid.dt;
        }
    };
    return f;
}

PathFunctional constant_functional(double c) {
    PathFunctional f;
    f.value = [c](const EulerPath&) { return c; };
    f.fill_row = [](const EulerPath&, const MalliavinMatrix&, std::span<double> row) {
        for (double& r : row) r = 0.0;
    };
    return f;
}

std::vector<double> malliavin_row(const PathFunctional& f, const EulerPath& path,
                                  const MalliavinMatrix& matrix) {
    std::vector<double> row(static_cast<std::size_t>(path.grid.M));
    f.fill_row(path, matrix, row);
    return row;
}

WeightProcess default_weight(std::span<const double> dg, const TimeGrid& grid) {
    if (static_cast<int>(dg.size()) != grid.M) {
        throw ContractError("default_weight: row size must equal the step count");
    }
    double norm = 0.0;
    for (double v : dg) norm += v * v;
    norm *= grid.dt;
    if (norm == 0.0) {
        throw DegenerateConstraintError("default_weight: constraint derivative is identically zero");
    }
    WeightProcess u;
    u.adapted = true;
    u.values.resize(dg.size());
    for (std::size_t k = 0; k < dg.size(); ++k) u.values[k] = dg[k] / norm;
    return u;
}

double skorohod_adapted(const WeightProcess& u, const EulerPath& path) {
    if (!u.adapted) {
        throw ContractError("skorohod_adapted: weight process is not adapted, use skorohod_expand");
    }
    if (static_cast<int>(u.values.size()) != path.grid.M) {
        throw ContractError("skorohod_adapted: weight size must equal the step count");
    }
    const double sqrt_dt = std::sqrt(path.grid.dt);
    double acc = 0.0;
    for (std::size_t k = 0; k < u.values.size(); ++k) {
        acc += u.values[k] * path.noises[k];
    }
    return acc * sqrt_dt;
}

double skorohod_expand(double f_value, std::span<const double> df, const WeightProcess& u,
                       const EulerPath& path) {
    if (df.size() != u.values.size()) {
        throw ContractError("skorohod_expand: derivative row and weight sizes differ");
    }
    double correction = 0.0;
    for (std::size_t k = 0; k < df.size(); ++k) correction += df[k] * u.values[k];
    correction *= path.grid.dt;
    return f_value * skorohod_adapted(u, path) - correction;
}

} // namespace cg
