#include "condgreeks/config.hpp"
#include "condgreeks/errors.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string>

namespace cg {

namespace {

using nlohmann::json;

void check_keys(const json& j, const std::string& section,
                std::initializer_list<const char*> allowed) {
    if (!j.is_object()) throw ConfigError("config section '" + section + "' must be an object");
    for (const auto& item : j.items()) {
        bool known = false;
        for (const char* k : allowed) {
            if (item.key() == k) {
                known = true;
                break;
            }
        }
        if (!known) {
            throw ConfigError("unknown key '" + item.key() + "' in config section '" + section +
                              "'");
        }
    }
}

template <typename T>
void read(const json& j, const char* key, T& out) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("bad value for '") + key + "': " + e.what());
    }
}

void parse_model(const json& j, ModelConfig& m) {
    check_keys(j, "model", {"type", "S0", "r", "theta", "K", "s", "x0", "gbm_rate"});
    read(j, "type", m.type);
    if (m.type != "bs" && m.type != "gbm" && m.type != "sine") {
        throw ConfigError("model.type must be one of bs, gbm, sine");
    }
    read(j, "S0", m.bs.spot);
    read(j, "r", m.bs.rate);
    read(j, "K", m.bs.strike);
    read(j, "s", m.bs.stress);
    if (m.type == "bs") {
        read(j, "theta", m.bs.vol);
    } else {
        read(j, "theta", m.theta);
        read(j, "x0", m.x0);
        read(j, "gbm_rate", m.gbm_rate);
    }
}

} // namespace

RunConfig parse_config_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    // A run manifest wraps the config; unwrap it so manifests replay directly.
    if (j.contains("config")) {
        check_keys(j, "<manifest>", {"command", "code_version", "config"});
        j = j.at("config");
    }
    check_keys(j, "<top>", {"model", "grid", "mc", "estimator", "gradient", "convergence",
                            "variance", "greek", "sgd", "hj"});
    RunConfig cfg;
    if (j.contains("model")) parse_model(j.at("model"), cfg.model);
    if (j.contains("grid")) {
        const json& g = j.at("grid");
        check_keys(g, "grid", {"T", "M"});
        read(g, "T", cfg.grid.T);
        read(g, "M", cfg.grid.M);
    }
    if (j.contains("mc")) {
        const json& g = j.at("mc");
        check_keys(g, "mc", {"N", "master_seed", "shards", "threads"});
        read(g, "N", cfg.mc.N);
        read(g, "master_seed", cfg.mc.master_seed);
        read(g, "shards", cfg.mc.shards);
        read(g, "threads", cfg.mc.threads);
    }
    if (j.contains("estimator")) {
        const json& g = j.at("estimator");
        check_keys(g, "estimator", {"method", "bandwidth"});
        read(g, "method", cfg.estimator.method);
        read(g, "bandwidth", cfg.estimator.bandwidth);
        if (cfg.estimator.method != "malliavin" && cfg.estimator.method != "kernel") {
            throw ConfigError("estimator.method must be malliavin or kernel");
        }
    }
    if (j.contains("gradient")) {
        const json& g = j.at("gradient");
        check_keys(g, "gradient", {"method", "branch_law"});
        read(g, "method", cfg.gradient.method);
        read(g, "branch_law", cfg.gradient.branch_law);
        if (cfg.gradient.method != "wd" && cfg.gradient.method != "score") {
            throw ConfigError("gradient.method must be wd or score");
        }
        if (cfg.gradient.branch_law != "uniform") {
            throw ConfigError("gradient.branch_law must be uniform");
        }
    }
    if (j.contains("convergence")) {
        const json& g = j.at("convergence");
        check_keys(g, "convergence", {"N_list", "macro_reps"});
        read(g, "N_list", cfg.convergence.N_list);
        read(g, "macro_reps", cfg.convergence.macro_reps);
    }
    if (j.contains("variance")) {
        const json& g = j.at("variance");
        check_keys(g, "variance", {"T_list", "dt", "N"});
        read(g, "T_list", cfg.variance.T_list);
        read(g, "dt", cfg.variance.dt);
        read(g, "N", cfg.variance.N);
    }
    if (j.contains("greek")) {
        const json& g = j.at("greek");
        check_keys(g, "greek", {"N"});
        read(g, "N", cfg.greek.N);
    }
    if (j.contains("sgd")) {
        const json& g = j.at("sgd");
        check_keys(g, "sgd", {"theta0", "step", "iters", "N_per_iter", "box_lo", "box_hi",
                              "theta_star", "schedule"});
        read(g, "theta0", cfg.sgd.theta0);
        read(g, "step", cfg.sgd.step);
        read(g, "iters", cfg.sgd.iters);
        read(g, "N_per_iter", cfg.sgd.N_per_iter);
        read(g, "box_lo", cfg.sgd.box_lo);
        read(g, "box_hi", cfg.sgd.box_hi);
        read(g, "theta_star", cfg.sgd.theta_star);
        read(g, "schedule", cfg.sgd.schedule);
        if (cfg.sgd.schedule != "fixed" && cfg.sgd.schedule != "decreasing") {
            throw ConfigError("sgd.schedule must be fixed or decreasing");
        }
    }
    if (j.contains("hj")) {
        const json& g = j.at("hj");
        check_keys(g, "hj", {"dm_list", "ds_list", "m_list", "s_list"});
        read(g, "dm_list", cfg.hj.dm_list);
        read(g, "ds_list", cfg.hj.ds_list);
        read(g, "m_list", cfg.hj.m_list);
        read(g, "s_list", cfg.hj.s_list);
    }

    // Cross-field validation.
    (void)build_grid(cfg.grid.T, cfg.grid.M);
    if (cfg.model.type == "bs") {
        cfg.model.bs.horizon = cfg.grid.T;
        cfg.model.bs.validate();
        if (cfg.grid.M % 2 != 0) {
            throw ConfigError("grid.M must be even: the stress constraint sits at T/2");
        }
    }
    if (cfg.mc.shards < 1) throw ConfigError("mc.shards must be at least 1");
    if (cfg.mc.N < 2) throw ConfigError("mc.N must be at least 2");
    return cfg;
}

RunConfig load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str());
}

namespace {

json to_json(const RunConfig& cfg) {
    json j;
    j["model"]["type"] = cfg.model.type;
    if (cfg.model.type == "bs") {
        j["model"]["S0"] = cfg.model.bs.spot;
        j["model"]["r"] = cfg.model.bs.rate;
        j["model"]["theta"] = cfg.model.bs.vol;
        j["model"]["K"] = cfg.model.bs.strike;
        j["model"]["s"] = cfg.model.bs.stress;
    } else {
        j["model"]["theta"] = cfg.model.theta;
        j["model"]["x0"] = cfg.model.x0;
        j["model"]["gbm_rate"] = cfg.model.gbm_rate;
        j["model"]["S0"] = cfg.model.bs.spot;
        j["model"]["r"] = cfg.model.bs.rate;
        j["model"]["K"] = cfg.model.bs.strike;
        j["model"]["s"] = cfg.model.bs.stress;
    }
    j["grid"]["T"] = cfg.grid.T;
    j["grid"]["M"] = cfg.grid.M;
    j["mc"]["N"] = cfg.mc.N;
    j["mc"]["master_seed"] = cfg.mc.master_seed;
    j["mc"]["shards"] = cfg.mc.shards;
    j["mc"]["threads"] = cfg.mc.threads;
    j["estimator"]["method"] = cfg.estimator.method;
    j["estimator"]["bandwidth"] = cfg.estimator.bandwidth;
    j["gradient"]["method"] = cfg.gradient.method;
    j["gradient"]["branch_law"] = cfg.gradient.branch_law;
    j["convergence"]["N_list"] = cfg.convergence.N_list;
    j["convergence"]["macro_reps"] = cfg.convergence.macro_reps;
    j["variance"]["T_list"] = cfg.variance.T_list;
    j["variance"]["dt"] = cfg.variance.dt;
    j["variance"]["N"] = cfg.variance.N;
    j["greek"]["N"] = cfg.greek.N;
    j["sgd"]["theta0"] = cfg.sgd.theta0;
    j["sgd"]["step"] = cfg.sgd.step;
    j["sgd"]["iters"] = cfg.sgd.iters;
    j["sgd"]["N_per_iter"] = cfg.sgd.N_per_iter;
    j["sgd"]["box_lo"] = cfg.sgd.box_lo;
    j["sgd"]["box_hi"] = cfg.sgd.box_hi;
    j["sgd"]["theta_star"] = cfg.sgd.theta_star;
    j["sgd"]["schedule"] = cfg.sgd.schedule;
    j["hj"]["dm_list"] = cfg.hj.dm_list;
    j["hj"]["ds_list"] = cfg.hj.ds_list;
    j["hj"]["m_list"] = cfg.hj.m_list;
    j["hj"]["s_list"] = cfg.hj.s_list;
    return j;
}

} // namespace

std::string resolved_config_json(const RunConfig& cfg) {
    return to_json(cfg).dump(2) + "\n";
}

std::string manifest_json(const std::string& command, const RunConfig& cfg) {
    json j;
    j["command"] = command;
    j["code_version"] = kVersion;
    j["config"] = to_json(cfg);
    return j.dump(2) + "\n";
}

ModelSpec make_model(const ModelConfig& cfg) {
    if (cfg.type == "bs") return bs::make_model(cfg.bs);
    if (cfg.type == "gbm") {
        const double r = cfg.gbm_rate;
        ModelSpec m;
        m.name = "gbm";
        m.theta = cfg.theta;
        m.x0 = cfg.x0;
        m.drift = [r](double, double x, double) { return r * x; };
        m.diffusion = [](double theta, double x, double) { return theta * x; };
        m.drift_dx = [r](double, double, double) { return r; };
        m.diffusion_dx = [](double theta, double, double) { return theta; };
        m.drift_dtheta = [](double, double, double) { return 0.0; };
        m.diffusion_dtheta = [](double, double x, double) { return x; };
        return m;
    }
    if (cfg.type == "sine") {
        ModelSpec m;
        m.name = "sine";
        m.theta = cfg.theta;
        m.x0 = cfg.x0;
        m.drift = [](double theta, double x, double) { return theta * std::sin(x); };
        m.diffusion = [](double theta, double x, double) {
            return 0.5 + 0.2 * std::cos(x) + 0.1 * theta;
        };
        m.drift_dx = [](double theta, double x, double) { return theta * std::cos(x); };
        m.diffusion_dx = [](double, double x, double) { return -0.2 * std::sin(x); };
        m.drift_dtheta = [](double, double x, double) { return std::sin(x); };
        m.diffusion_dtheta = [](double, double, double) { return 0.1; };
        return m;
    }
    throw ConfigError("unknown model type '" + cfg.type + "'");
}

ConditionalProblem make_conditional_problem(const RunConfig& cfg) {
    if (cfg.model.type != "bs") {
        throw ConfigError("conditioned estimation needs a deterministic constraint-derivative row; "
                          "model '" + cfg.model.type + "' does not provide one (use model.type = bs)");
    }
    bs::BsConfig bs_cfg = cfg.model.bs;
    bs_cfg.horizon = cfg.grid.T;
    ConditionalProblem p;
    p.model = bs::make_model(bs_cfg);
    p.grid = build_grid(cfg.grid.T, cfg.grid.M);
    p.build_spec = [bs_cfg](const ModelSpec& m, const TimeGrid& g) {
        return bs::make_conditional_spec(m, g, bs_cfg);
    };
    return p;
}

} // namespace cg
