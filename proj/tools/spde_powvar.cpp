// Command-line front end: simulate / estimate / mc-consistency / mc-normality
// / kernels-table / verify.
//
// Configuration is a flat key-value set assembled in precedence order
// preset < config file < command-line flags, echoed to
// <output-dir>/config_echo.json so any run can be reproduced byte-identically
// from its echo.  Config files are JSON objects or key=value lines.
//
// Exit codes: 0 success, 1 usage error, 2 domain error, 3 numerical error.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "powvar/estimators.hpp"
#include "powvar/io.hpp"
#include "powvar/montecarlo.hpp"
#include "powvar/oracle.hpp"
#include "powvar/simulate.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace powvar;

namespace {

json parse_config_file(const fs::path& path) {
    const std::string text = read_file(path);
    // JSON object or flat key=value lines
    if (!text.empty() && text.find_first_not_of(" \t\r\n") != std::string::npos &&
        text[text.find_first_not_of(" \t\r\n")] == '{')
        return json::parse(text);
    json out = json::object();
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw domain_error("config: expected key=value, got: " + line);
        const std::string key = line.substr(0, eq);
        const std::string val = line.substr(eq + 1);
        try {
            out[key] = json::parse(val);
        } catch (const json::parse_error&) {
            out[key] = val;  // bare string
        }
    }
    return out;
}

void apply_override(json& cfg, const std::string& kv) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw domain_error("--set expects key=value, got: " + kv);
    const std::string key = kv.substr(0, eq);
    const std::string val = kv.substr(eq + 1);
    try {
        cfg[key] = json::parse(val);
    } catch (const json::parse_error&) {
        cfg[key] = val;
    }
}

json preset_config(const std::string& name) {
    // Section-4 experiment presets: theta = sigma = 0.1, T = 1, domain (0,pi),
    // 10^4 Fourier modes, forward stencil.
    if (name == "paper-fig1")
        return {{"theta", 0.1},        {"sigma", 0.1},
                {"simulator", "spectral_bounded"},
                {"estimator", "sigma2_check"},
                {"correct_bias", true},
                {"n_list", json::array({64, 128, 256, 512, 1024})},
                {"M", 50},             {"T", 1.0},
                {"modes", 10000},      {"reps", 20},
                {"seed", 42}};
    if (name == "paper-fig1-ux")
        return {{"theta", 0.1},
                {"sigma", 0.1},
                {"simulator", "cov_line"},
                {"estimator", "sigma2_ux"},
                {"a_end", 0.0},
                {"b_end", std::numbers::pi},
                {"n_list", json::array({1024})},
                {"M", 4},
                {"T", 1.0},
                {"reps", 20},
                {"seed", 42}};
    if (name == "paper-fig2")
        return {{"theta", 0.1},        {"sigma", 0.1},
                {"simulator", "spectral_bounded"},
                {"estimator", "sigma2_check"},
                {"correct_bias", true},
                {"N", 1000},           {"M", 1},
                {"t", 0.2},            {"modes", 10000},
                {"reps", 1000},        {"statistic", "sigma_level"},
                {"seed", 42}};
    throw domain_error("unknown preset: " + name);
}

std::vector<double> times_from_config(const json& cfg) {
    const int m = cfg.value("M", 1);
    if (cfg.contains("t") && !cfg.at("t").is_null()) {
        const double t = cfg.at("t").get<double>();
        if (m != 1)
            throw domain_error("config: single observation time t requires M = 1");
        return {t};
    }
    const double horizon = cfg.value("T", 1.0);
    std::vector<double> times(static_cast<std::size_t>(m));
    for (int j = 1; j <= m; ++j) times[j - 1] = horizon * j / m;
    return times;
}

SamplingScheme scheme_from_config(const json& cfg, bool bounded) {
    SamplingScheme s;
    s.a_end = cfg.value("a_end", bounded ? 0.0 : 0.0);
    s.b_end = cfg.value("b_end", bounded ? std::numbers::pi : 1.0);
    s.n_space = cfg.value("N", 16);
    s.times = times_from_config(cfg);
    s.gamma = cfg.value("gamma", 1.0);
    s.stencil_a = cfg.value("a", 1.0);
    s.stencil_b = cfg.value("b", 0.0);
    s.validate();
    return s;
}

ExperimentConfig experiment_from_flat(const json& cfg) {
    ExperimentConfig e;
    e.params = ModelParams(cfg.value("theta", 0.1), cfg.value("sigma", 0.1));
    e.simulator = simulator_from_string(cfg.value("simulator", "spectral_bounded"));
    e.scheme = scheme_from_config(cfg, e.simulator == SimulatorKind::spectral_bounded);
    if (cfg.contains("n_list"))
        e.n_sweep = cfg.at("n_list").get<std::vector<int>>();
    else
        e.n_sweep = {cfg.value("N", e.scheme.n_space)};
    e.scheme.n_space = e.n_sweep.front();
    e.estimator = estimator_id_from_string(cfg.value("estimator", "sigma2_check"));
    e.correct_bias = cfg.value("correct_bias", true);
    e.replications = cfg.value("reps", 20);
    e.master_seed = cfg.value("seed", std::uint64_t{1});
    e.n_modes = cfg.value("modes", 10000);
    e.statistic = statistic_from_string(cfg.value("statistic", "sigma_level"));
    e.threads = cfg.value("threads", 0);
    e.dense_cap = cfg.value("dense_cap", kDenseFactorizationCap);
    e.validate();
    return e;
}

void echo_config(const json& cfg, const fs::path& outdir) {
    atomic_write(outdir / "config_echo.json", cfg.dump(2) + "\n");
}

int run_simulate(const json& cfg, const fs::path& outdir) {
    const std::string domain = cfg.value("domain", "bounded");
    const ModelParams params(cfg.value("theta", 0.1), cfg.value("sigma", 0.1));
    const std::uint64_t seed = cfg.value("seed", std::uint64_t{1});
    FieldSample field;
    if (domain == "bounded") {
        SamplingScheme s = scheme_from_config(cfg, true);
        std::vector<double> xs(static_cast<std::size_t>(s.n_space) + 1);
        for (int i = 0; i <= s.n_space; ++i) xs[i] = s.a_end + i * s.h();
        field = simulate_spectral_bounded(params, s.times, xs, cfg.value("modes", 10000), seed);
    } else if (domain == "line") {
        SamplingScheme s = scheme_from_config(cfg, false);
        const std::string kind = cfg.value("field", "ux");
        const int cap = cfg.value("dense_cap", kDenseFactorizationCap);
        if (kind == "ux")
            field = simulate_ux_increments(params, s, seed, cap);
        else if (kind == "delta")
            field = simulate_delta_u_increments(params, s, seed, cap);
        else
            throw domain_error("simulate: field must be 'ux' or 'delta'");
    } else {
        throw domain_error("simulate: domain must be 'bounded' or 'line'");
    }
    atomic_write(outdir / "sample.csv", to_csv(field));
    atomic_write(outdir / "sample.json", to_json(field).dump(2) + "\n");
    echo_config(cfg, outdir);
    std::cerr << "wrote " << (outdir / "sample.csv").string() << " and sample.json\n";
    return 0;
}

int run_estimate(const json& cfg, const fs::path& outdir) {
    if (!cfg.contains("input")) throw domain_error("estimate: missing input path");
    const fs::path input = cfg.at("input").get<std::string>();
    const std::string text = read_file(input);
    FieldSample field = input.extension() == ".json" ? field_from_json(json::parse(text))
                                                     : field_from_csv(text);
    const EstimatorId id = estimator_id_from_string(cfg.value("estimator", "sigma2_ux"));
    const bool theta_target = is_theta_estimator(id);
    const Known known = theta_target ? Known::sigma : Known::theta;
    double known_value;
    if (theta_target)
        known_value = cfg.contains("sigma") ? cfg.at("sigma").get<double>()
                                            : field.params.sigma;
    else
        known_value = cfg.contains("theta") ? cfg.at("theta").get<double>()
                                            : field.params.theta;
    const bool correct = cfg.value("correct_bias", true);
    EstimateReport rep;
    switch (id) {
        case EstimatorId::theta2_ux:
        case EstimatorId::sigma2_ux:
            rep = estimate_from_ux(field, known, known_value);
            break;
        case EstimatorId::theta2_check:
        case EstimatorId::sigma2_check:
            rep = estimate_from_u_seconddiff(field, known, known_value, correct);
            break;
        case EstimatorId::theta2_tilde:
        case EstimatorId::sigma2_tilde:
            rep = estimate_from_delta_u(field, known, known_value, correct);
            break;
    }
    if (cfg.contains("true_value")) {
        rep.normalized_stat = normalized_stat(rep, cfg.at("true_value").get<double>());
        rep.has_normalized_stat = true;
    }
    atomic_write(outdir / "estimate.json", to_json(rep).dump(2) + "\n");
    atomic_write(outdir / "estimate.csv", to_csv_line(rep));
    echo_config(cfg, outdir);
    std::cout << fmt17(rep.bias_corrected_value) << "\n";
    return 0;
}

int run_mc(const json& cfg, const fs::path& outdir, bool normality) {
    ExperimentConfig e = experiment_from_flat(cfg);
    if (normality) {
        McSummary s = run_normality(e);
        atomic_write(outdir / "normality.csv", normality_csv(s));
        atomic_write(outdir / "histogram.csv", histogram_csv(s));
        atomic_write(outdir / "qq.csv", qq_csv(s));
        atomic_write(outdir / "summary.json", to_json(s, e).dump(2) + "\n");
        echo_config(cfg, outdir);
        std::cerr << "ks_stat = " << fmt17(s.ks_stat) << ", failures = " << s.failures
                  << "\n";
    } else {
        auto rows = run_consistency(e);
        atomic_write(outdir / "consistency.csv", consistency_csv(rows));
        json summary;
        summary["config"] = to_json(e);
        summary["rows"] = json::array();
        for (const auto& r : rows)
            summary["rows"].push_back({{"N", r.n_space},
                                       {"mean", r.mean},
                                       {"stderr", r.stderr_mean},
                                       {"failures", r.failures}});
        atomic_write(outdir / "summary.json", summary.dump(2) + "\n");
        echo_config(cfg, outdir);
        for (const auto& r : rows)
            std::cerr << "N=" << r.n_space << " mean=" << fmt17(r.mean)
                      << " stderr=" << fmt17(r.stderr_mean) << " failures=" << r.failures
                      << "\n";
    }
    return 0;
}

int run_kernels_table(const json& cfg) {
    const std::string op = cfg.value("op", "mu");
    const ModelParams params(cfg.value("theta", 0.1), cfg.value("sigma", 0.1));
    if (op == "mu") {
        std::cout << fmt17(
                         mu_factor(cfg.value("a", 1.0), cfg.value("b", 0.0),
                                   cfg.value("gamma", 1.0))
                             .mu)
                  << "\n";
        return 0;
    }
    if (op == "gamma-half") {
        std::cout << fmt17(gamma_half_integral(cfg.value("x", 1.0))) << "\n";
        return 0;
    }
    if (op == "rect-5half") {
        std::cout << fmt17(rect_integral_5half(cfg.value("t", 1.0), cfg.value("tp", 1.0),
                                               cfg.value("c", 1.0)))
                  << "\n";
        return 0;
    }
    if (op == "pointwise-cov") {
        std::cout << fmt17(ux_pointwise_cov(cfg.value("t", 0.2), cfg.value("tp", 0.2),
                                            cfg.value("x", 0.0), cfg.value("y", 0.0), params))
                  << "\n";
        return 0;
    }
    if (op == "bounded-cov") {
        std::cout << fmt17(bounded_domain_cov(cfg.value("t", 0.2), cfg.value("tp", 0.2),
                                              cfg.value("x", 1.0), cfg.value("y", 1.0), params,
                                              cfg.value("modes", 10000)))
                  << "\n";
        return 0;
    }
    // tabulated evaluations over lags / times
    const bool bounded = false;
    SamplingScheme s = scheme_from_config(cfg, bounded);
    if (op == "ux-variance" || op == "delta-variance") {
        std::cout << "t,value\n";
        for (double t : s.times)
            std::cout << fmt17(t) << ','
                      << fmt17(op == "ux-variance"
                                   ? ux_increment_variance(t, s.h(), params)
                                   : delta_u_increment_variance(t, params, s))
                      << "\n";
        return 0;
    }
    if (op == "ux-cov" || op == "delta-cov") {
        const double tk = s.times.front(), tl = s.times.back();
        std::cout << "lag,value\n";
        const int lag_lo = op == "ux-cov" ? 0 : 1;
        const int lag_hi = std::min(s.n_space, cfg.value("max_lag", 16));
        for (int lag = lag_lo; lag <= lag_hi; ++lag)
            std::cout << lag << ','
                      << fmt17(op == "ux-cov"
                                   ? ux_increment_cov(lag, tk, tl, params, s)
                                   : delta_u_increment_cov(lag, tk, tl, params, s))
                      << "\n";
        return 0;
    }
    if (op == "q-exp") {
        const QVariant v =
            cfg.value("variant", "ux") == std::string("ux") ? QVariant::ux : QVariant::delta_u;
        auto q = q_expectations(params, s, v);
        std::cout << "q_diag,q_nd\n" << fmt17(q.q_diag) << ',' << fmt17(q.q_nd) << "\n";
        return 0;
    }
    throw domain_error("kernels-table: unknown op " + op);
}

int run_verify(const json& cfg, const fs::path& outdir) {
    const double tol = cfg.value("tol", 1e-6);
    const int trials = cfg.value("trials", 100);
    const std::uint64_t seed = cfg.value("seed", std::uint64_t{20240901});
    auto rep = oracle::verify_closed_forms(tol, trials, seed);
    json j;
    j["pass"] = rep.pass;
    j["tolerance_double_integrals"] = tol;
    j["tolerance_single_integrals"] = tol * 1e-2;
    j["checks"] = json::array();
    for (const auto& c : rep.checks) {
        j["checks"].push_back({{"formula", c.formula},
                               {"trials", c.trials},
                               {"max_rel_err", c.max_rel_err},
                               {"tolerance", c.tolerance},
                               {"pass", c.pass}});
        std::cout << (c.pass ? "PASS " : "FAIL ") << c.formula
                  << " max_rel_err=" << fmt17(c.max_rel_err) << " tol=" << c.tolerance
                  << "\n";
    }
    atomic_write(outdir / "verify.json", j.dump(2) + "\n");
    echo_config(cfg, outdir);
    if (!rep.pass) throw numerical_error("verify: closed-form check failed");
    std::cout << "verify: all closed forms within tolerance\n";
    return 0;
}

struct FlagSet {
    std::optional<double> theta, sigma, T, t, gamma, a, b, x, y, tp, c, tol, a_end, b_end;
    std::optional<int> N, M, modes, reps, trials, threads, max_lag, dense_cap;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> estimator, simulator, statistic, domain, field, op, input,
        n_list, variant;
    std::optional<bool> correct_bias;
};

void add_flags(CLI::App* cmd, FlagSet& f) {
    cmd->add_option("--theta", f.theta, "drift parameter theta > 0");
    cmd->add_option("--sigma", f.sigma, "volatility sigma");
    cmd->add_option("--N", f.N, "number of spatial subintervals");
    cmd->add_option("--M", f.M, "number of observation times");
    cmd->add_option("--T", f.T, "time horizon (uniform times j T / M)");
    cmd->add_option("--t", f.t, "single observation time (requires M = 1)");
    cmd->add_option("--gamma", f.gamma, "stencil offset exponent gamma >= 1");
    cmd->add_option("--a", f.a, "forward stencil weight in [0,1]");
    cmd->add_option("--b", f.b, "backward stencil weight in [0,1]");
    cmd->add_option("--A", f.a_end, "left end of the sampling interval");
    cmd->add_option("--B", f.b_end, "right end of the sampling interval");
    cmd->add_option("--modes", f.modes, "Fourier modes for the bounded-domain series");
    cmd->add_option("--reps", f.reps, "Monte Carlo replications");
    cmd->add_option("--estimator", f.estimator,
                    "estimator id (theta2_ux, sigma2_ux, theta2_check, sigma2_check, "
                    "theta2_tilde, sigma2_tilde)");
    cmd->add_option("--simulator", f.simulator, "spectral_bounded or cov_line");
    cmd->add_option("--statistic", f.statistic, "sigma_level, squared_level, or q_stat");
    cmd->add_option("--seed", f.seed, "master seed");
    cmd->add_option("--threads", f.threads,
                    "worker threads (0 = auto; env SPDE_POWVAR_THREADS as fallback)");
    cmd->add_option("--domain", f.domain, "bounded or line (simulate)");
    cmd->add_option("--field", f.field, "ux or delta (simulate --domain line)");
    cmd->add_option("--op", f.op, "kernels-table operation");
    cmd->add_option("--input", f.input, "input FieldSample path (estimate)");
    cmd->add_option("--n-list", f.n_list, "comma-separated N sweep (mc-consistency)");
    cmd->add_option("--variant", f.variant, "q-exp variant: ux or delta");
    cmd->add_option("--x", f.x, "spatial point / integral endpoint");
    cmd->add_option("--y", f.y, "second spatial point");
    cmd->add_option("--tp", f.tp, "second time argument");
    cmd->add_option("--c", f.c, "exponent scale");
    cmd->add_option("--tol", f.tol, "verify tolerance for double integrals");
    cmd->add_option("--trials", f.trials, "verify randomized trials");
    cmd->add_option("--max-lag", f.max_lag, "largest tabulated lag");
    cmd->add_option("--dense-cap", f.dense_cap, "dense factorization cap on M*N");
    cmd->add_option("--correct-bias", f.correct_bias, "apply the mu bias correction");
}

void merge_flags(json& cfg, const FlagSet& f) {
    auto put = [&cfg](const char* key, const auto& opt) {
        if (opt.has_value()) cfg[key] = *opt;
    };
    put("theta", f.theta);
    put("sigma", f.sigma);
    put("N", f.N);
    put("M", f.M);
    put("T", f.T);
    put("t", f.t);
    put("gamma", f.gamma);
    put("a", f.a);
    put("b", f.b);
    put("a_end", f.a_end);
    put("b_end", f.b_end);
    put("modes", f.modes);
    put("reps", f.reps);
    put("estimator", f.estimator);
    put("simulator", f.simulator);
    put("statistic", f.statistic);
    put("seed", f.seed);
    put("threads", f.threads);
    put("domain", f.domain);
    put("field", f.field);
    put("op", f.op);
    put("input", f.input);
    put("variant", f.variant);
    put("x", f.x);
    put("y", f.y);
    put("tp", f.tp);
    put("c", f.c);
    put("tol", f.tol);
    put("trials", f.trials);
    put("max_lag", f.max_lag);
    put("dense_cap", f.dense_cap);
    put("correct_bias", f.correct_bias);
    if (f.n_list) {
        std::vector<int> ns;
        std::istringstream ss(*f.n_list);
        std::string tok;
        while (std::getline(ss, tok, ',')) ns.push_back(std::stoi(tok));
        cfg["n_list"] = ns;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Simulation and power-variation estimation for the stochastic heat "
                 "equation with additive space-only white noise"};
    app.require_subcommand(1);

    std::string config_path, preset, output_dir = "powvar_out";
    std::vector<std::string> overrides;
    app.add_option("--config", config_path, "config file (JSON object or key=value lines)")
        ->expected(1);
    app.add_option("--preset", preset, "named preset: paper-fig1, paper-fig1-ux, paper-fig2");
    app.add_option("--output-dir", output_dir, "directory for all outputs");
    app.add_option("--set", overrides, "explicit key=value config overrides");

    FlagSet flags;
    CLI::App* c_sim = app.add_subcommand("simulate", "draw one field realization");
    CLI::App* c_est = app.add_subcommand("estimate", "estimate from a stored FieldSample");
    CLI::App* c_con = app.add_subcommand("mc-consistency", "estimator mean over an N sweep");
    CLI::App* c_nor = app.add_subcommand("mc-normality", "normalized-statistic diagnostics");
    CLI::App* c_ker = app.add_subcommand("kernels-table", "tabulate closed-form kernels");
    CLI::App* c_ver = app.add_subcommand("verify", "closed forms vs quadrature oracle");
    for (CLI::App* c : {c_sim, c_est, c_con, c_nor, c_ker, c_ver}) {
        c->fallthrough();  // global options may follow the subcommand name
        add_flags(c, flags);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }

    try {
        json cfg = json::object();
        if (!preset.empty()) cfg.update(preset_config(preset));
        if (!config_path.empty()) cfg.update(parse_config_file(config_path));
        merge_flags(cfg, flags);
        for (const auto& kv : overrides) apply_override(cfg, kv);
        if (!cfg.contains("threads")) {
            if (const char* env = std::getenv("SPDE_POWVAR_THREADS"))
                cfg["threads"] = std::atoi(env);
        }
        const fs::path outdir = output_dir;

        if (app.got_subcommand(c_sim)) return run_simulate(cfg, outdir);
        if (app.got_subcommand(c_est)) return run_estimate(cfg, outdir);
        if (app.got_subcommand(c_con)) return run_mc(cfg, outdir, false);
        if (app.got_subcommand(c_nor)) return run_mc(cfg, outdir, true);
        if (app.got_subcommand(c_ker)) return run_kernels_table(cfg);
        if (app.got_subcommand(c_ver)) return run_verify(cfg, outdir);
        std::cerr << "error: no subcommand\n";
        return 1;
    } catch (const domain_error& e) {
        std::cerr << "domain error: " << e.what() << "\n";
        return 2;
    } catch (const numerical_error& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return 3;
    } catch (const json::exception& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
}
