#pragma once

#include "condgreeks/bs.hpp"
#include "condgreeks/greeks.hpp"
#include "condgreeks/sde.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace cg {

inline constexpr const char* kVersion = "condgreeks 1.0.0";

struct GridConfig {
    double T = 1.0;
    int M = 64;
};

struct McConfig {
    std::uint64_t N = 200000;
    std::uint64_t master_seed = 42;
    int shards = 1;
    int threads = 1;
};

struct EstimatorConfig {
    std::string method = "malliavin"; // or "kernel"
    double bandwidth = 0.0;           // <= 0 selects std(g) * N^(-1/5)
};

struct GradientConfig {
    std::string method = "wd"; // or "score"
    std::string branch_law = "uniform";
};

struct ModelConfig {
    std::string type = "bs"; // bs | gbm | sine
    bs::BsConfig bs;
    // generic models
    double theta = 0.8;
    double x0 = 0.5;
    double gbm_rate = 0.05;
};

struct ConvergenceConfig {
    std::vector<std::uint64_t> N_list{100, 1000, 10000, 100000};
    int macro_reps = 20;
};

struct VarianceConfig {
    std::vector<double> T_list{1.0, 2.0, 4.0, 8.0};
    double dt = 1.0 / 64.0;
    std::uint64_t N = 100000;
};

struct GreekConfig {
    std::uint64_t N = 1000000;
};

struct SgdConfig {
    double theta0 = 0.35;
    double step = 5e-4;
    int iters = 20;
    std::uint64_t N_per_iter = 100000;
    double box_lo = 0.05;
    double box_hi = 0.8;
    double theta_star = 0.2; // target L is the oracle price at this parameter
    std::string schedule = "fixed";
};

struct HjConfig {
    std::vector<double> dm_list{-1.0, -0.5, 0.0, 0.5, 1.0};
    std::vector<double> ds_list{-1.0, -0.5, 0.0, 0.5, 1.0};
    std::vector<double> m_list{-2.0, 0.0, 3.0};
    std::vector<double> s_list{0.05, 1.0, 5.0};
};

struct RunConfig {
    ModelConfig model;
    GridConfig grid;
    McConfig mc;
    EstimatorConfig estimator;
    GradientConfig gradient;
    ConvergenceConfig convergence;
    VarianceConfig variance;
    GreekConfig greek;
    SgdConfig sgd;
    HjConfig hj;
};

/// Parses a config (or a previously emitted run manifest, whose "config"
/// object is unwrapped) with a strict schema: unknown keys are rejected by
/// name, defaults are materialized.  Throws ConfigError.
RunConfig load_config_file(const std::string& path);
RunConfig parse_config_text(const std::string& text);

/// Fully resolved config as JSON text (every default made explicit).
std::string resolved_config_json(const RunConfig& cfg);

/// Run manifest: command, code version, and the resolved config.
std::string manifest_json(const std::string& command, const RunConfig& cfg);

ModelSpec make_model(const ModelConfig& cfg);

/// Conditioned stressed-call problem for the configured model; only the
/// Black-Scholes model has the deterministic constraint-derivative row the
/// default weight construction needs.
ConditionalProblem make_conditional_problem(const RunConfig& cfg);

} // namespace cg
