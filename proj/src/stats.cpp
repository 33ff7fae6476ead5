#include "condgreeks/stats.hpp"
#include "condgreeks/errors.hpp"

#include <cmath>
#include <string>
#include <utility>

namespace cg {

namespace {
constexpr double kZ95 = 1.959963984540054;
}

void EstimatorStats::push(double x) {
    n += 1;
    const double delta = x - mean;
    mean += delta / static_cast<double>(n);
    m2 += delta * (x - mean);
}

void EstimatorStats::merge(const EstimatorStats& other) {
    if (other.n == 0) return;
    if (n == 0) {
        *this = other;
        return;
    }
    const double na = static_cast<double>(n);
    const double nb = static_cast<double>(other.n);
    const double delta = other.mean - mean;
    const double nt = na + nb;
    mean += delta * nb / nt;
    m2 += other.m2 + delta * delta * na * nb / nt;
    n += other.n;
}

double EstimatorStats::variance() const {
    return n < 2 ? 0.0 : m2 / static_cast<double>(n - 1);
}

double EstimatorStats::std_error() const {
    return n < 2 ? 0.0 : std::sqrt(variance() / static_cast<double>(n));
}

double EstimatorStats::ci95() const {
    return kZ95 * std_error();
}

CovAccum::CovAccum(int dim) : dim_(dim) {
    if (dim < 1 || dim > 4) throw ContractError("CovAccum: dim must be 1..4");
}

void CovAccum::push(const double* x) {
    n_ += 1;
    const double inv_n = 1.0 / static_cast<double>(n_);
    std::array<double, 4> delta{};
    for (int i = 0; i < dim_; ++i) {
        delta[i] = x[i] - mean_[i];
        mean_[i] += delta[i] * inv_n;
    }
    for (int i = 0; i < dim_; ++i) {
        const double post = x[i] - mean_[i];
        for (int j = 0; j <= i; ++j) {
            cm_[static_cast<std::size_t>(i) * 4 + j] += post * delta[j];
        }
    }
}

void CovAccum::merge(const CovAccum& other) {
    if (other.dim_ != dim_) throw ContractError("CovAccum: dim mismatch in merge");
    if (other.n_ == 0) return;
    if (n_ == 0) {
        *this = other;
        return;
    }
    const double na = static_cast<double>(n_);
    const double nb = static_cast<double>(other.n_);
    const double nt = na + nb;
    std::array<double, 4> delta{};
    for (int i = 0; i < dim_; ++i) delta[i] = other.mean_[i] - mean_[i];
    for (int i = 0; i < dim_; ++i) {
        for (int j = 0; j <= i; ++j) {
            cm_[static_cast<std::size_t>(i) * 4 + j] +=
                other.cm_[static_cast<std::size_t>(i) * 4 + j] +
                delta[i] * delta[j] * na * nb / nt;
        }
    }
    for (int i = 0; i < dim_; ++i) mean_[i] += delta[i] * nb / nt;
    n_ += other.n_;
}

double CovAccum::cov(int i, int j) const {
    if (n_ < 2) return 0.0;
    const int a = i >= j ? i : j;
    const int b = i >= j ? j : i;
    return cm_[static_cast<std::size_t>(a) * 4 + b] / static_cast<double>(n_ - 1);
}

EstimatorStats CovAccum::component(int i) const {
    EstimatorStats s;
    s.n = n_;
    s.mean = mean_[i];
    s.m2 = cm_[static_cast<std::size_t>(i) * 4 + i];
    return s;
}

bool RatioEstimate::guard_ok() const {
    const double bar = std::fmax(kGuardStdErrors * den.std_error(), kGuardFloor);
    return std::fabs(den.mean) > bar;
}

double RatioEstimate::value() const {
    if (!guard_ok()) {
        throw IllConditionedError(
            "ill-conditioned conditioning: |denominator mean| " + std::to_string(den.mean) +
                " does not clear " + std::to_string(kGuardStdErrors) + " standard errors (" +
                std::to_string(den.std_error()) + ") at n=" + std::to_string(den.n),
            den.mean, den.std_error(), den.n);
    }
    return value_unchecked();
}

double RatioEstimate::value_unchecked() const {
    return num.mean / den.mean;
}

double RatioEstimate::variance() const {
    if (num.n < 2) return 0.0;
    const double n = static_cast<double>(num.n);
    const double mu_n = num.mean;
    const double mu_d = den.mean;
    const double var = num.variance() / (mu_d * mu_d) -
                       2.0 * mu_n * cov_num_den / (mu_d * mu_d * mu_d) +
                       mu_n * mu_n * den.variance() / (mu_d * mu_d * mu_d * mu_d);
    return std::fmax(var, 0.0) / n;
}

double RatioEstimate::std_error() const {
    return std::sqrt(variance());
}

double RatioEstimate::ci95() const {
    return kZ95 * std_error();
}

RatioEstimate make_ratio(const CovAccum& pair, std::uint64_t dropped,
                         std::vector<ShardMoments> shards) {
    if (pair.dim() != 2) throw ContractError("make_ratio: expected a 2-component accumulator");
    RatioEstimate r;
    r.num = pair.component(0);
    r.den = pair.component(1);
    r.cov_num_den = pair.cov(0, 1);
    r.dropped = dropped;
    r.shards = std::move(shards);
    return r;
}

} // namespace cg
