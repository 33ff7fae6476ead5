#pragma once

#include "condgreeks/sde.hpp"

#include <functional>
#include <span>
#include <vector>

namespace cg {

/// First-variation process Y_k = dX_k/dX_0 and its reciprocal.
struct TangentProcess {
    std::vector<double> y;     // size M+1, y[0] = 1
    std::vector<double> y_inv; // 1 / y[k]
};

/// Throws SingularTangentError when |Y_k| falls below 1e-12.
TangentProcess tangent(const EulerPath& path, const ModelSpec& model);

/// Discrete Malliavin derivatives of the path states.  Row j is the
/// sensitivity to the step-j increment rescaled by sqrt(dt); it is the exact
/// derivative of the Euler map, so entry(j,k) = Y_k * sigma_j / Y_{j+1} for
/// j < k and exactly zero otherwise.  Entries are computed on demand from
/// O(M) stored factors, never materialized as a dense matrix.
class MalliavinMatrix {
public:
    MalliavinMatrix(const EulerPath& path, const ModelSpec& model, const TangentProcess& tang);

    double entry(int j, int k) const {
        if (j >= k) return 0.0;
        return y_[static_cast<std::size_t>(k)] * sigma_[static_cast<std::size_t>(j)] /
               y_[static_cast<std::size_t>(j) + 1];
    }
    int steps() const { return static_cast<int>(sigma_.size()); }

private:
    std::vector<double> y_;
    std::vector<double> sigma_; // sigma(theta, X_j, t_j), j = 0..M-1
};

MalliavinMatrix malliavin_state(const EulerPath& path, const ModelSpec& model,
                                const TangentProcess& tang);

/// A real-valued path functional together with its Malliavin derivative row.
/// Closed-form rows may ignore the matrix argument; generic ones use the
/// chain rule through the states they depend on.
struct PathFunctional {
    std::function<double(const EulerPath&)> value;
    /// Fills row[j] = D_j f for j = 0..M-1.
    std::function<void(const EulerPath&, const MalliavinMatrix&, std::span<double>)> fill_row;
};

/// f = phi(X_k) for a fixed grid node k.
PathFunctional node_functional(int k, std::function<double(double)> phi,
                               std::function<double(double)> dphi);
/// f = phi(X_M).
PathFunctional terminal_functional(std::function<double(double)> phi,
                                   std::function<double(double)> dphi);
/// f = sum_k gamma(X_k) dt over left endpoints k = 0..M-1.
PathFunctional integral_functional(std::function<double(double)> gamma,
                                   std::function<double(double)> dgamma);
PathFunctional constant_functional(double c);

std::vector<double> malliavin_row(const PathFunctional& f, const EulerPath& path,
                                  const MalliavinMatrix& matrix);

/// Deterministic per-step integrand of a Skorohod/Ito integral.
struct WeightProcess {
    std::vector<double> values; // size M
    bool adapted = true;
};

/// Projection weight u_k = Dg_k / (sum_j Dg_j^2 dt).  The normalization
/// sum_k Dg_k u_k dt = 1 then holds as a deterministic identity, not just in
/// expectation.  Requires a deterministic, not identically zero row; throws
/// DegenerateConstraintError otherwise.
WeightProcess default_weight(std::span<const double> dg, const TimeGrid& grid);

/// Ito sum sum_k u_k sqrt(dt) xi_{k+1}; requires u.adapted.
double skorohod_adapted(const WeightProcess& u, const EulerPath& path);

/// S(F u) = F S(u) - sum_k DF_k u_k dt for adapted u and a random variable F
/// with Malliavin row df.
double skorohod_expand(double f_value, std::span<const double> df, const WeightProcess& u,
                       const EulerPath& path);

} // namespace cg
