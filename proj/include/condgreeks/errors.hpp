#pragma once

#include <stdexcept>
#include <string>

namespace cg {

/// Bad user-facing configuration (CLI exit code 2).
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

/// A caller broke an API contract (wrong sizes, non-adapted weight, ...).
struct ContractError : std::logic_error {
    explicit ContractError(const std::string& msg) : std::logic_error(msg) {}
};

/// One-step transition kernel has non-positive standard deviation.
struct DegenerateKernelError : std::runtime_error {
    explicit DegenerateKernelError(const std::string& msg) : std::runtime_error(msg) {}
};

/// The constraint derivative vanishes identically, no admissible weight exists.
struct DegenerateConstraintError : std::runtime_error {
    explicit DegenerateConstraintError(const std::string& msg) : std::runtime_error(msg) {}
};

/// First-variation process hit (numerical) zero along a path.
struct SingularTangentError : std::runtime_error {
    explicit SingularTangentError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Tabulated signed-measure decomposition failed its mass self-check.
struct DecompositionError : std::runtime_error {
    explicit DecompositionError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Every kernel-smoothing weight underflowed; the event is out of reach.
struct StarvationError : std::runtime_error {
    explicit StarvationError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Denominator of a ratio estimate is statistically indistinguishable from
/// zero (CLI exit code 3).  Carries the diagnostics instead of emitting NaN.
struct IllConditionedError : std::runtime_error {
    double den_mean;
    double den_std_error;
    unsigned long long n;
    IllConditionedError(const std::string& msg, double mean, double se, unsigned long long count)
        : std::runtime_error(msg), den_mean(mean), den_std_error(se), n(count) {}
};

/// A Monte Carlo run exceeded its allowed replication drop rate.
struct EstimationError : std::runtime_error {
    explicit EstimationError(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace cg
