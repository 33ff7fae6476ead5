#pragma once

#include "condgreeks/conditional.hpp"
#include "condgreeks/sde.hpp"
#include "condgreeks/stats.hpp"
#include "condgreeks/weak_derivative.hpp"

#include <vector>

namespace cg {

/// Per-step likelihood-ratio factors of an Euler path with respect to theta:
/// score_k = dm_k (X_{k+1}-m_k)/s_k^2 + ds_k ((X_{k+1}-m_k)^2/s_k^3 - 1/s_k).
/// Each factor has zero conditional mean given X_k.
struct ScorePath {
    std::vector<double> per_step;
    double total = 0.0;
};

ScorePath compute_score(const ModelSpec& model, const TimeGrid& grid, const EulerPath& path);

/// Likelihood-ratio gradient estimator of d/dtheta E[C]: per path
/// C(path) * total score, plus the same frozen-path explicit-theta partial
/// as the weak-derivative pipeline.  Variance grows linearly in the horizon.
EstimatorStats score_gradient(const ModelSpec& model, const TimeGrid& grid,
                              const GradientTarget& target, const McOptions& opts);

} // namespace cg
