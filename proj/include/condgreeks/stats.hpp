#pragma once

#include <array>
#include <cstdint>
#include <vector>

namespace cg {

/// Streaming count/mean/variance accumulator (Welford).  merge() is
/// associative and order-insensitive up to floating-point commutation; a
/// merged accumulator agrees with a single-pass one to relative 1e-12.
struct EstimatorStats {
    std::uint64_t n = 0;
    double mean = 0.0;
    double m2 = 0.0; // sum of squared deviations from the running mean

    void push(double x);
    void merge(const EstimatorStats& other);
    double variance() const;  // unbiased, 0 for n < 2
    double std_error() const; // sqrt(variance / n)
    double ci95() const;      // 1.96 * std_error
};

/// Streaming mean vector and covariance co-moments for jointly sampled
/// per-replication contributions (dim <= 4).
class CovAccum {
public:
    explicit CovAccum(int dim);
    void push(const double* x);
    void merge(const CovAccum& other);
    int dim() const { return dim_; }
    std::uint64_t count() const { return n_; }
    double mean(int i) const { return mean_[i]; }
    /// Sample covariance between components i and j (0 for n < 2).
    double cov(int i, int j) const;
    EstimatorStats component(int i) const;

private:
    int dim_;
    std::uint64_t n_ = 0;
    std::array<double, 4> mean_{};
    std::array<double, 16> cm_{};
};

/// Per-shard raw moments kept alongside merged results so a run can be
/// audited or re-merged.
struct ShardMoments {
    std::uint64_t n = 0;
    double num_mean = 0.0, num_m2 = 0.0;
    double den_mean = 0.0, den_m2 = 0.0;
    double comoment = 0.0;
};

/// Ratio of two means estimated from paired per-path contributions, with a
/// delta-method confidence interval.  The denominator guard refuses to report
/// a ratio whose denominator is statistically indistinguishable from zero.
struct RatioEstimate {
    EstimatorStats num;
    EstimatorStats den;
    double cov_num_den = 0.0; // sample covariance of the paired contributions
    std::uint64_t dropped = 0;
    std::vector<ShardMoments> shards;

    static constexpr double kGuardStdErrors = 5.0;
    static constexpr double kGuardFloor = 1e-12;

    bool guard_ok() const;
    /// Ratio value; throws IllConditionedError when the guard fails.
    double value() const;
    /// Ratio value with no guard, for experiments that record raw estimates.
    double value_unchecked() const;
    double variance() const; // delta-method variance of the ratio
    double std_error() const;
    double ci95() const;
};

RatioEstimate make_ratio(const CovAccum& pair, std::uint64_t dropped,
                         std::vector<ShardMoments> shards);

} // namespace cg
