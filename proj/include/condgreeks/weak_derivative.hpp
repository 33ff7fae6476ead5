#pragma once

#include "condgreeks/conditional.hpp"
#include "condgreeks/rng.hpp"
#include "condgreeks/sde.hpp"
#include "condgreeks/stats.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace cg {

/// Hahn-Jordan decomposition of the parameter derivative of a one-step
/// Gaussian kernel N(m, s^2):  d/dtheta P = c (rho+ - rho-), where rho+- are
/// mutually singular probability measures supported on the sign regions of
/// the quadratic score factor
///     q(x) = dm (x-m)/s^2 + ds ((x-m)^2/s^3 - 1/s).
/// In standardized coordinates z = (x-m)/s the factor reads
/// qt(z) = (ds/s)(z^2-1) + (dm/s) z; when ds != 0 its two roots have product
/// -1, so the sign partition is either "outside the roots" or "between the
/// roots".  The common mass c comes from truncated Gaussian moments in closed
/// form; sampling uses a tabulated inverse CDF over the region-restricted
/// density with cell masses from the exact antiderivative.
struct HahnJordanTriple {
    enum class Topology {
        Null,         // dm = ds = 0, zero measure
        LinearPos,    // ds = 0, dm > 0: positive region z > 0
        LinearNeg,    // ds = 0, dm < 0: positive region z < 0
        OutsideRoots, // ds > 0: positive region |z| outside [z1, z2]
        BetweenRoots, // ds < 0: positive region z in (z1, z2)
    };

    double m = 0.0, s = 1.0, dm = 0.0, ds = 0.0;
    double c = 0.0;
    Topology topology = Topology::Null;
    double z1 = 0.0, z2 = 0.0; // standardized roots, z1 <= z2 (linear: z1 = z2 = 0)

    /// Score factor q at a state value x.
    double score(double x) const;
    /// Signed standardized density factor qt(z).
    double qt(double z) const;
    bool in_positive_region(double z) const;

    /// Draw from rho+ (positive=true) or rho- in state coordinates, using the
    /// uniform u01.  Throws ContractError on a null triple.
    double sample(bool positive, double u01) const;

    struct Table {
        std::vector<double> edge; // cell boundaries in z
        std::vector<double> cum;  // cumulative mass per cell
        double total = 0.0;
    };
    Table pos, neg;
};

/// Builds the decomposition; requires s > 0.  A null triple (c = 0) is
/// returned when dm = ds = 0.  Throws DecompositionError when the tabulated
/// masses disagree with the closed-form c by more than 1e-8.
HahnJordanTriple hj_decompose(double m, double s, double dm, double ds);
HahnJordanTriple hj_decompose(const KernelParams& kp);

/// Draw from one signed part using the next uniform of the given stream.
double sample_branch(const HahnJordanTriple& triple, bool positive, RngStream& substream);

/// Branch-step distribution over {0..M-1}.
struct BranchLaw {
    std::vector<double> prob;
    std::vector<double> cdf;

    static BranchLaw uniform(int steps);
    /// Normalized law proportional to the given strictly positive weights.
    static BranchLaw proportional(std::vector<double> weights);
    int sample(double u01) const;
};

/// A nominal path branched once at step k: both branch paths share the
/// nominal prefix and are propagated with identical fresh tail noises, so
/// their difference isolates the kernel perturbation at t_k.
struct BranchedPair {
    int k = -1;
    double weight = 0.0; // c_k / q_k
    bool active = false; // false when the step-k kernel has zero sensitivity
    EulerPath plus, minus;
};

BranchedPair make_branched_pair(const ModelSpec& model, const TimeGrid& grid,
                                const EulerPath& nominal, const BranchLaw& law,
                                RngStream branch_stream, RngStream tail_stream);

struct WdGradient {
    EstimatorStats stats;
    std::uint64_t inactive = 0; // replications whose branch kernel had c = 0
    std::uint64_t dropped = 0;  // replications lost to decomposition failures
};

/// Single-run weak-derivative estimator of d/dtheta E[C(path)]: one branch
/// per replication, contribution (c_K/q_K) (C(plus) - C(minus)).
WdGradient single_run_gradient(const ModelSpec& model, const TimeGrid& grid,
                               const std::function<double(const EulerPath&)>& functional,
                               const BranchLaw& law, const McOptions& opts);

/// Deterministic tensor-product Gauss-Hermite evaluation of the branched
/// product-rule sum; a test oracle for tiny grids, not a production path.
/// Refuses M > 3.
double phantom_gradient_bruteforce(const ModelSpec& model, const TimeGrid& grid,
                                   const std::function<double(const EulerPath&)>& functional,
                                   std::size_t gh_nodes = 40);

/// A path functional with explicit parameter dependence (weights or
/// derivative rows that carry theta directly).  The total gradient of its
/// expectation is the weak-derivative measure term plus the frozen-path
/// central difference of the explicit dependence.
struct GradientTarget {
    std::function<double(double theta, const EulerPath&)> value;
    bool explicit_theta = true;
};

GradientTarget plain_target(std::function<double(const EulerPath&)> functional);

/// Measure term plus explicit-theta partial, sampled per replication.
WdGradient wd_gradient(const ModelSpec& model, const TimeGrid& grid, const GradientTarget& target,
                       const BranchLaw& law, const McOptions& opts);

struct VarianceRow {
    std::string estimator; // "wd" or "score"
    double T = 0.0;
    int M = 0;
    std::uint64_t n = 0;
    double var = 0.0;
    double var_lo = 0.0, var_hi = 0.0; // bootstrap 95% interval
    double mean = 0.0;
};

/// Per-horizon sample variance of the weak-derivative and score-function
/// estimators for the same target, on a fixed step size dt (M = T/dt grows
/// with T).  Both estimators consume identical nominal paths.  n = 0 yields
/// an empty table.
std::vector<VarianceRow> variance_vs_horizon(
    const ModelSpec& model, const std::vector<double>& horizons, double dt,
    const std::function<std::function<double(const EulerPath&)>(const TimeGrid&)>& target_factory,
    const McOptions& opts);

} // namespace cg
