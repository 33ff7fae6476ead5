#include "condgreeks/experiments.hpp"
#include "condgreeks/bs.hpp"
#include "condgreeks/errors.hpp"
#include "condgreeks/num.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>

namespace cg {

namespace {

McOptions mc_options(const RunConfig& cfg, std::uint64_t n, std::uint64_t stream_base = 0) {
    McOptions mc;
    mc.n = n;
    mc.master_seed = cfg.mc.master_seed;
    mc.stream_base = stream_base;
    mc.shards = cfg.mc.shards;
    mc.threads = cfg.mc.threads;
    return mc;
}

double simpson(const std::function<double(double)>& f, double a, double b, int cells) {
    if (cells % 2 != 0) cells += 1;
    const double h = (b - a) / cells;
    double acc = f(a) + f(b);
    for (int i = 1; i < cells; ++i) {
        acc += f(a + h * i) * (i % 2 == 0 ? 2.0 : 4.0);
    }
    return acc * h / 3.0;
}

} // namespace

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

ExperimentOutput run_price(const RunConfig& cfg) {
    ExperimentOutput out;
    out.command = "price";
    const ConditionalProblem problem = make_conditional_problem(cfg);
    const ConditionalEvaluator eval(problem.model, problem.grid,
                                    problem.build_spec(problem.model, problem.grid));
    bs::BsConfig bs_cfg = cfg.model.bs;
    bs_cfg.horizon = cfg.grid.T;
    const double oracle = bs::oracle_price(bs_cfg);

    std::ostringstream csv;
    csv << "estimator,N,estimate,stderr,ci_lo,ci_hi,oracle,abs_err\n";
    auto emit = [&](const std::string& name, const RatioEstimate& r) {
        const double est = r.value_unchecked();
        csv << name << ',' << cfg.mc.N << ',' << format_double(est) << ','
            << format_double(r.std_error()) << ',' << format_double(est - r.ci95()) << ','
            << format_double(est + r.ci95()) << ',' << format_double(oracle) << ','
            << format_double(std::fabs(est - oracle)) << '\n';
        return est;
    };

    const RatioEstimate est = estimate_L(eval, mc_options(cfg, cfg.mc.N));
    const double value = emit("malliavin", est);

    std::ostringstream summary;
    summary << "price: estimate " << value << " +- " << est.ci95() << " (95%), oracle " << oracle
            << ", abs err " << std::fabs(value - oracle) << ", N " << cfg.mc.N << "\n";

    if (cfg.estimator.method == "kernel") {
        const KernelEstimate kb = kernel_baseline_L(eval, mc_options(cfg, cfg.mc.N),
                                                    cfg.estimator.bandwidth);
        const double kv = emit("kernel", kb.ratio);
        summary << "kernel baseline: estimate " << kv << " +- " << kb.ratio.ci95()
                << " (bandwidth " << kb.bandwidth << ")\n";
    }
    out.files["price.csv"] = csv.str();
    out.summary = summary.str();
    return out;
}

ExperimentOutput run_convergence(const RunConfig& cfg, ConvergenceSummary* summary_out) {
    ExperimentOutput out;
    out.command = "convergence";
    const ConditionalProblem problem = make_conditional_problem(cfg);
    const ConditionalEvaluator eval(problem.model, problem.grid,
                                    problem.build_spec(problem.model, problem.grid));
    bs::BsConfig bs_cfg = cfg.model.bs;
    bs_cfg.horizon = cfg.grid.T;
    const double oracle = bs::oracle_price(bs_cfg);
    const bool with_kernel = cfg.estimator.method == "kernel";

    std::ostringstream csv;
    csv << "estimator,N,rep,estimate,stderr,ci_lo,ci_hi,oracle,abs_err,guard_ok\n";

    ConvergenceSummary summary;
    std::uint64_t stream_base = 0;
    std::vector<double> kernel_rmse;
    for (std::uint64_t n : cfg.convergence.N_list) {
        double sq_err = 0.0;
        double sq_err_kernel = 0.0;
        for (int rep = 0; rep < cfg.convergence.macro_reps; ++rep) {
            McOptions mc = mc_options(cfg, n, stream_base);
            mc.enforce_guard = false; // raw estimates feed the error study
            const RatioEstimate r = estimate_L(eval, mc);
            const double est = r.value_unchecked();
            const double err = std::fabs(est - oracle);
            sq_err += err * err;
            csv << "malliavin," << n << ',' << rep << ',' << format_double(est) << ','
                << format_double(r.std_error()) << ',' << format_double(est - r.ci95()) << ','
                << format_double(est + r.ci95()) << ',' << format_double(oracle) << ','
                << format_double(err) << ',' << (r.guard_ok() ? 1 : 0) << '\n';
            if (with_kernel) {
                McOptions mk = mc;
                const KernelEstimate kb = kernel_baseline_L(eval, mk, cfg.estimator.bandwidth);
                const double kest = kb.ratio.value_unchecked();
                const double kerr = std::fabs(kest - oracle);
                sq_err_kernel += kerr * kerr;
                csv << "kernel," << n << ',' << rep << ',' << format_double(kest) << ','
                    << format_double(kb.ratio.std_error()) << ','
                    << format_double(kest - kb.ratio.ci95()) << ','
                    << format_double(kest + kb.ratio.ci95()) << ',' << format_double(oracle) << ','
                    << format_double(kerr) << ',' << (kb.ratio.guard_ok() ? 1 : 0) << '\n';
            }
            stream_base += n;
        }
        summary.n_values.push_back(static_cast<double>(n));
        summary.rmse.push_back(std::sqrt(sq_err / cfg.convergence.macro_reps));
        if (with_kernel) {
            kernel_rmse.push_back(std::sqrt(sq_err_kernel / cfg.convergence.macro_reps));
        }
    }

    std::ostringstream text;
    text << "convergence: oracle " << oracle << ", macro reps " << cfg.convergence.macro_reps
         << "\n";
    for (std::size_t i = 0; i < summary.n_values.size(); ++i) {
        text << "  N " << summary.n_values[i] << ": rmse " << summary.rmse[i];
        if (with_kernel) text << " (kernel " << kernel_rmse[i] << ")";
        text << "\n";
    }
    if (summary.n_values.size() >= 2) {
        std::vector<double> lx, ly;
        for (std::size_t i = 0; i < summary.n_values.size(); ++i) {
            lx.push_back(std::log10(summary.n_values[i]));
            ly.push_back(std::log10(summary.rmse[i]));
        }
        summary.slope = fitted_slope(lx, ly);
        summary.slope_defined = true;
        text << "  log-log RMSE slope " << summary.slope << "\n";
    } else {
        text << "  slope omitted (single N value)\n";
    }

    out.files["convergence.csv"] = csv.str();
    out.summary = text.str();
    if (summary_out) *summary_out = summary;
    return out;
}

ExperimentOutput run_variance_scaling(const RunConfig& cfg, VarianceSummary* summary_out) {
    ExperimentOutput out;
    out.command = "variance-scaling";
    const ModelSpec model = make_model(cfg.model);
    const auto terminal_factory = [](const TimeGrid&) {
        return std::function<double(const EulerPath&)>(
            [](const EulerPath& path) { return path.terminal(); });
    };
    const std::vector<VarianceRow> rows = variance_vs_horizon(
        model, cfg.variance.T_list, cfg.variance.dt, terminal_factory,
        mc_options(cfg, cfg.variance.N));

    std::ostringstream csv;
    csv << "estimator,T,M,N,var,var_ci_lo,var_ci_hi,mean\n";
    for (const VarianceRow& r : rows) {
        csv << r.estimator << ',' << format_double(r.T) << ',' << r.M << ',' << r.n << ','
            << format_double(r.var) << ',' << format_double(r.var_lo) << ','
            << format_double(r.var_hi) << ',' << format_double(r.mean) << '\n';
    }

    VarianceSummary summary;
    summary.rows = rows;
    std::vector<double> wd_log_t, wd_log_v, sc_log_t, sc_log_v;
    double wd_min = 0.0, wd_max = 0.0;
    for (const VarianceRow& r : rows) {
        if (r.estimator == "wd") {
            if (wd_log_t.empty()) wd_min = r.var;
            wd_max = r.var;
            wd_log_t.push_back(std::log(r.T));
            wd_log_v.push_back(std::log(r.var));
        } else {
            sc_log_t.push_back(std::log(r.T));
            sc_log_v.push_back(std::log(r.var));
        }
    }
    std::ostringstream text;
    text << "variance scaling over T:";
    for (double t : cfg.variance.T_list) text << ' ' << t;
    text << " (dt " << cfg.variance.dt << ", N " << cfg.variance.N << ")\n";
    if (wd_log_t.size() >= 2) {
        summary.wd_slope = fitted_slope(wd_log_t, wd_log_v);
        summary.score_slope = fitted_slope(sc_log_t, sc_log_v);
        summary.wd_ratio_max_over_min = wd_max / wd_min;
        summary.slopes_defined = true;
        text << "  wd:    var(Tmax)/var(Tmin) " << summary.wd_ratio_max_over_min
             << ", log-log slope " << summary.wd_slope << "\n";
        text << "  score: log-log slope " << summary.score_slope << "\n";
    } else {
        text << "  fit omitted (single horizon)\n";
    }

    out.files["variance_scaling.csv"] = csv.str();
    out.summary = text.str();
    if (summary_out) *summary_out = summary;
    return out;
}

ExperimentOutput run_greek(const RunConfig& cfg, GreekResult* greek_out) {
    ExperimentOutput out;
    out.command = "greek";
    const ConditionalProblem problem = make_conditional_problem(cfg);
    bs::BsConfig bs_cfg = cfg.model.bs;
    bs_cfg.horizon = cfg.grid.T;
    const double oracle_l = bs::oracle_price(bs_cfg);
    const double oracle_v = bs::oracle_vega(bs_cfg);

    const GradientMethod method = gradient_method_from_string(cfg.gradient.method);
    const GreekResult greek = conditional_greek(problem, mc_options(cfg, cfg.greek.N), method);

    std::ostringstream csv;
    csv << "method,N,E1,E1_se,E2,E2_se,dE1,dE1_se,dE2,dE2_se,L,L_ci95,dL,dL_ci95,"
           "oracle_L,oracle_vega\n";
    csv << cfg.gradient.method << ',' << cfg.greek.N << ',' << format_double(greek.e1.mean) << ','
        << format_double(greek.e1.std_error()) << ',' << format_double(greek.e2.mean) << ','
        << format_double(greek.e2.std_error()) << ',' << format_double(greek.de1.mean) << ','
        << format_double(greek.de1.std_error()) << ',' << format_double(greek.de2.mean) << ','
        << format_double(greek.de2.std_error()) << ',' << format_double(greek.value) << ','
        << format_double(greek.value_ci95) << ',' << format_double(greek.grad) << ','
        << format_double(greek.grad_ci95) << ',' << format_double(oracle_l) << ','
        << format_double(oracle_v) << '\n';

    std::ostringstream text;
    text << "greek (" << cfg.gradient.method << "): L " << greek.value << " +- "
         << greek.value_ci95 << " (oracle " << oracle_l << "), dL " << greek.grad << " +- "
         << greek.grad_ci95 << " (oracle " << oracle_v << "), N " << cfg.greek.N << "\n";

    out.files["greek.csv"] = csv.str();
    out.summary = text.str();
    if (greek_out) *greek_out = greek;
    return out;
}

ExperimentOutput run_sgd(const RunConfig& cfg, SgdTrace* trace_out) {
    ExperimentOutput out;
    out.command = "sgd";
    const ConditionalProblem problem = make_conditional_problem(cfg);
    bs::BsConfig star_cfg = cfg.model.bs;
    star_cfg.horizon = cfg.grid.T;
    star_cfg.vol = cfg.sgd.theta_star;
    const double target = bs::oracle_price(star_cfg);

    SgdOptions opts;
    opts.theta0 = cfg.sgd.theta0;
    opts.step = cfg.sgd.step;
    opts.iters = cfg.sgd.iters;
    opts.n_per_iter = cfg.sgd.N_per_iter;
    opts.box_lo = cfg.sgd.box_lo;
    opts.box_hi = cfg.sgd.box_hi;
    opts.schedule = cfg.sgd.schedule;
    opts.method = gradient_method_from_string(cfg.gradient.method);
    opts.master_seed = cfg.mc.master_seed;
    opts.shards = cfg.mc.shards;
    opts.threads = cfg.mc.threads;

    const SgdTrace trace = sgd_minimize(problem, target, opts);

    std::ostringstream csv;
    csv << "iter,theta,L_hat,dL_hat,dL_stderr\n";
    for (const SgdIterate& it : trace.iterates) {
        csv << it.iter << ',' << format_double(it.theta) << ',' << format_double(it.l_hat) << ','
            << format_double(it.dl_hat) << ',' << format_double(it.dl_std_error) << '\n';
    }

    std::ostringstream text;
    text << "sgd: theta0 " << cfg.sgd.theta0 << " -> " << trace.final_theta() << " (target "
         << cfg.sgd.theta_star << ", target L " << target << ")"
         << (trace.completed ? "" : " ABORTED: " + trace.abort_reason) << "\n";

    out.files["sgd_trace.csv"] = csv.str();
    out.summary = text.str();
    out.exit_code = trace.completed ? 0 : 3;
    if (trace_out) *trace_out = trace;
    return out;
}

ExperimentOutput run_hj_check(const RunConfig& cfg, HjCheckSummary* summary_out) {
    ExperimentOutput out;
    out.command = "hj-check";
    HjCheckSummary summary;

    std::ostringstream csv;
    csv << "dm,ds,m,s,c,rho_plus_mass_err,rho_minus_mass_err,balance_err,"
           "fd_err_h2,fd_err_h3,ok\n";
    std::ostringstream text;

    // Independent route: composite Simpson over the sign regions, split at the
    // roots so every segment is smooth.
    const double zmax = 12.0;
    const double fd_bound_scale = 100.0; // third-derivative envelope over the grid

    for (double dm : cfg.hj.dm_list) {
        for (double ds : cfg.hj.ds_list) {
            for (double m : cfg.hj.m_list) {
                for (double s : cfg.hj.s_list) {
                    const HahnJordanTriple t = hj_decompose(m, s, dm, ds);
                    bool ok = true;
                    double pos_err = 0.0, neg_err = 0.0, balance_err = 0.0;
                    double fd_err_h2 = 0.0, fd_err_h3 = 0.0;
                    if (t.c > 0.0) {
                        auto signed_density = [&](double z) {
                            return t.qt(z) * normal_pdf(z);
                        };
                        std::vector<double> cuts{-zmax};
                        if (t.z1 > -zmax && t.z1 < zmax) cuts.push_back(t.z1);
                        if (t.z2 > -zmax && t.z2 < zmax && t.z2 != t.z1) cuts.push_back(t.z2);
                        cuts.push_back(zmax);
                        double pos_mass = 0.0, neg_mass = 0.0;
                        for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
                            const double part = simpson(signed_density, cuts[i], cuts[i + 1], 4000);
                            if (t.in_positive_region(0.5 * (cuts[i] + cuts[i + 1]))) {
                                pos_mass += part;
                            } else {
                                neg_mass -= part;
                            }
                        }
                        pos_err = std::fabs(pos_mass / t.c - 1.0);
                        neg_err = std::fabs(neg_mass / t.c - 1.0);
                        balance_err = std::fabs(pos_mass - neg_mass);
                        ok = ok && pos_err <= 1e-8 && neg_err <= 1e-8 && balance_err <= 1e-8;
                    }

                    // Kernel-level check: the signed-measure action on f must
                    // match the central difference of the closed-form Gaussian
                    // expectation along theta -> (m + dm h, s + ds h).
                    struct TestFn {
                        std::function<double(double)> f;
                        std::function<double(double, double)> expect; // (m, s)
                    };
                    const TestFn fns[4] = {
                        {[](double) { return 1.0; }, [](double, double) { return 1.0; }},
                        {[](double x) { return x; }, [](double mm, double) { return mm; }},
                        {[](double x) { return x * x; },
                         [](double mm, double ss) { return mm * mm + ss * ss; }},
                        {[](double x) { return std::sin(x); },
                         [](double mm, double ss) { return std::sin(mm) * std::exp(-0.5 * ss * ss); }},
                    };
                    for (const TestFn& fn : fns) {
                        auto weighted = [&](double z) {
                            return t.c > 0.0 ? t.qt(z) * normal_pdf(z) * fn.f(m + s * z) : 0.0;
                        };
                        const double wd_val =
                            t.c > 0.0 ? simpson(weighted, -zmax, zmax, 12000) : 0.0;
                        auto fd = [&](double h) {
                            return (fn.expect(m + dm * h, s + ds * h) -
                                    fn.expect(m - dm * h, s - ds * h)) /
                                   (2.0 * h);
                        };
                        const double e2 = std::fabs(wd_val - fd(1e-2));
                        const double e3 = std::fabs(wd_val - fd(1e-3));
                        fd_err_h2 = std::fmax(fd_err_h2, e2);
                        fd_err_h3 = std::fmax(fd_err_h3, e3);
                        ok = ok && e2 <= fd_bound_scale * 1e-4 + 1e-8 &&
                             e3 <= fd_bound_scale * 1e-6 + 1e-8;
                        // Quadratic decay between the two step sizes.
                        ok = ok && (e3 <= e2 / 25.0 + 2e-8);
                    }

                    summary.combos += 1;
                    if (!ok) summary.failures += 1;
                    csv << format_double(dm) << ',' << format_double(ds) << ',' << format_double(m)
                        << ',' << format_double(s) << ',' << format_double(t.c) << ','
                        << format_double(pos_err) << ',' << format_double(neg_err) << ','
                        << format_double(balance_err) << ',' << format_double(fd_err_h2) << ','
                        << format_double(fd_err_h3) << ',' << (ok ? 1 : 0) << '\n';
                }
            }
        }
    }

    text << "hj-check: " << (summary.combos - summary.failures) << "/" << summary.combos
         << " combos passed mass, singularity and finite-difference checks\n";
    text << (summary.failures == 0 ? "  [pass] normalization |int rho+- - 1| <= 1e-8\n"
                                     "  [pass] positive mass = negative mass = c (1e-8)\n"
                                     "  [pass] kernel derivative matches FD with O(h^2) decay\n"
                                   : "  [FAIL] see hj_check.csv for offending combos\n");

    out.files["hj_check.csv"] = csv.str();
    out.summary = text.str();
    out.exit_code = summary.failures == 0 ? 0 : 4;
    if (summary_out) *summary_out = summary;
    return out;
}

void write_outputs(const std::string& out_dir, const ExperimentOutput& output,
                   const RunConfig& cfg) {
    std::filesystem::create_directories(out_dir);
    for (const auto& [name, content] : output.files) {
        std::ofstream f(std::filesystem::path(out_dir) / name, std::ios::binary);
        if (!f) throw ConfigError("cannot write output file '" + name + "' in " + out_dir);
        f << content;
    }
    std::ofstream mf(std::filesystem::path(out_dir) / "run_manifest.json", std::ios::binary);
    if (!mf) throw ConfigError("cannot write run manifest in " + out_dir);
    mf << manifest_json(output.command, cfg);
}

} // namespace cg
