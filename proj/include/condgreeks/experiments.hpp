#pragma once

#include "condgreeks/config.hpp"
#include "condgreeks/greeks.hpp"
#include "condgreeks/stats.hpp"
#include "condgreeks/weak_derivative.hpp"

#include <map>
#include <string>
#include <vector>

namespace cg {

/// One experiment run: CSV payloads keyed by file name, a human summary, and
/// the exit code contract (0 ok, 2 config, 3 guard, 4 property failure).
struct ExperimentOutput {
    std::string command;
    std::map<std::string, std::string> files;
    std::string summary;
    int exit_code = 0;
};

ExperimentOutput run_price(const RunConfig& cfg);

struct ConvergenceSummary {
    std::vector<double> n_values;
    std::vector<double> rmse;
    double slope = 0.0;
    bool slope_defined = false;
};

ExperimentOutput run_convergence(const RunConfig& cfg, ConvergenceSummary* out = nullptr);

struct VarianceSummary {
    std::vector<VarianceRow> rows;
    double wd_ratio_max_over_min = 0.0;
    double wd_slope = 0.0;
    double score_slope = 0.0;
    bool slopes_defined = false;
};

ExperimentOutput run_variance_scaling(const RunConfig& cfg, VarianceSummary* out = nullptr);

ExperimentOutput run_greek(const RunConfig& cfg, GreekResult* out = nullptr);

ExperimentOutput run_sgd(const RunConfig& cfg, SgdTrace* out = nullptr);

struct HjCheckSummary {
    int combos = 0;
    int failures = 0;
};

ExperimentOutput run_hj_check(const RunConfig& cfg, HjCheckSummary* out = nullptr);

/// Writes every file of the output plus the run manifest into out_dir.
void write_outputs(const std::string& out_dir, const ExperimentOutput& output,
                   const RunConfig& cfg);

std::string format_double(double v);

} // namespace cg
