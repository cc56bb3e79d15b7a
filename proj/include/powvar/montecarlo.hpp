#pragma once

// Replication engine: consistency sweeps over N, normality diagnostics
// (KS statistic, histogram, Q-Q pairs), CSV/JSON emission.  Replications run
// on a small work pool; replication r always consumes stream (master_seed, r),
// so serial and parallel runs produce identical output.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "powvar/estimators.hpp"
#include "powvar/io.hpp"
#include "powvar/simulate.hpp"

namespace powvar {

enum class SimulatorKind { spectral_bounded, cov_line };

inline const char* to_string(SimulatorKind s) {
    return s == SimulatorKind::spectral_bounded ? "spectral_bounded" : "cov_line";
}

inline SimulatorKind simulator_from_string(const std::string& s) {
    if (s == "spectral_bounded") return SimulatorKind::spectral_bounded;
    if (s == "cov_line") return SimulatorKind::cov_line;
    throw domain_error("unknown simulator: " + s);
}

// Normalized statistic collected by the normality experiment.
enum class McStatistic { sigma_level, squared_level, q_stat };

inline const char* to_string(McStatistic s) {
    switch (s) {
        case McStatistic::sigma_level: return "sigma_level";
        case McStatistic::squared_level: return "squared_level";
        case McStatistic::q_stat: return "q_stat";
    }
    return "unknown";
}

inline McStatistic statistic_from_string(const std::string& s) {
    if (s == "sigma_level") return McStatistic::sigma_level;
    if (s == "squared_level") return McStatistic::squared_level;
    if (s == "q_stat") return McStatistic::q_stat;
    throw domain_error("unknown statistic: " + s);
}

struct ExperimentConfig {
    ModelParams params;
    SamplingScheme scheme;     // template; n_space is overridden by the sweep
    std::vector<int> n_sweep;  // at least one entry
    EstimatorId estimator = EstimatorId::sigma2_check;
    bool correct_bias = true;
    int replications = 20;
    std::uint64_t master_seed = 1;
    int n_modes = 10000;
    SimulatorKind simulator = SimulatorKind::spectral_bounded;
    McStatistic statistic = McStatistic::sigma_level;
    int threads = 0;  // 0 = hardware concurrency
    int dense_cap = kDenseFactorizationCap;

    void validate() const {
        scheme.validate();
        if (replications < 1) throw domain_error("ExperimentConfig: replications must be >= 1");
        if (n_sweep.empty()) throw domain_error("ExperimentConfig: empty N sweep");
        for (int n : n_sweep)
            if (n < 3) throw domain_error("ExperimentConfig: N values must be >= 3");
        if (n_modes < 1) throw domain_error("ExperimentConfig: n_modes must be >= 1");
        if (simulator == SimulatorKind::spectral_bounded &&
            (estimator == EstimatorId::sigma2_tilde || estimator == EstimatorId::theta2_tilde))
            throw domain_error("ExperimentConfig: tilde estimators need the cov_line simulator");
        if (simulator == SimulatorKind::spectral_bounded &&
            (estimator == EstimatorId::sigma2_ux || estimator == EstimatorId::theta2_ux))
            throw domain_error("ExperimentConfig: ux estimators need the cov_line simulator");
    }
};

inline nlohmann::json to_json(const ExperimentConfig& c) {
    return {
        {"theta", c.params.theta},
        {"sigma", c.params.sigma},
        {"scheme",
         {{"a_end", c.scheme.a_end},
          {"b_end", c.scheme.b_end},
          {"n_space", c.scheme.n_space},
          {"times", c.scheme.times},
          {"gamma", c.scheme.gamma},
          {"stencil_a", c.scheme.stencil_a},
          {"stencil_b", c.scheme.stencil_b}}},
        {"n_sweep", c.n_sweep},
        {"estimator", to_string(c.estimator)},
        {"correct_bias", c.correct_bias},
        {"replications", c.replications},
        {"master_seed", c.master_seed},
        {"n_modes", c.n_modes},
        {"simulator", to_string(c.simulator)},
        {"statistic", to_string(c.statistic)},
        {"threads", c.threads},
        {"dense_cap", c.dense_cap},
    };
}

inline ExperimentConfig experiment_from_json(const nlohmann::json& j) {
    ExperimentConfig c;
    c.params = ModelParams(j.at("theta").get<double>(), j.at("sigma").get<double>());
    const auto& s = j.at("scheme");
    c.scheme.a_end = s.at("a_end").get<double>();
    c.scheme.b_end = s.at("b_end").get<double>();
    c.scheme.n_space = s.at("n_space").get<int>();
    c.scheme.times = s.at("times").get<std::vector<double>>();
    c.scheme.gamma = s.at("gamma").get<double>();
    c.scheme.stencil_a = s.at("stencil_a").get<double>();
    c.scheme.stencil_b = s.at("stencil_b").get<double>();
    c.n_sweep = j.at("n_sweep").get<std::vector<int>>();
    c.estimator = estimator_id_from_string(j.at("estimator").get<std::string>());
    c.correct_bias = j.at("correct_bias").get<bool>();
    c.replications = j.at("replications").get<int>();
    c.master_seed = j.at("master_seed").get<std::uint64_t>();
    c.n_modes = j.at("n_modes").get<int>();
    c.simulator = simulator_from_string(j.at("simulator").get<std::string>());
    c.statistic = statistic_from_string(j.at("statistic").get<std::string>());
    c.threads = j.at("threads").get<int>();
    c.dense_cap = j.at("dense_cap").get<int>();
    c.validate();
    return c;
}

// sup-distance between the empirical CDF of `sample` and the standard normal CDF
inline double ks_statistic(std::vector<double> sample) {
    if (sample.empty()) throw domain_error("ks_statistic: empty sample");
    std::sort(sample.begin(), sample.end());
    const double n = static_cast<double>(sample.size());
    double d = 0.0;
    for (std::size_t i = 0; i < sample.size(); ++i) {
        const double cdf = normal_cdf(sample[i]);
        d = std::max(d, std::max((i + 1) / n - cdf, cdf - i / n));
    }
    return d;
}

struct ConsistencyRow {
    int n_space = 0;
    double mean = 0.0;
    double stderr_mean = 0.0;
    int failures = 0;
};

struct McSummary {
    std::vector<double> estimates;  // bias-corrected, parameter level
    std::vector<double> stats;      // normalized statistics
    double ks_stat = 0.0;
    std::vector<double> hist_edges;  // 31 edges for 30 bins on [-4,4]
    std::vector<int> hist_counts;    // clipped at the edge bins; sums to reps
    std::vector<double> qq_theoretical;
    std::vector<double> qq_sample;
    double mean = 0.0;
    double stderr_mean = 0.0;
    int failures = 0;
};

namespace detail {

struct RepOutcome {
    bool ok = false;
    double estimate = 0.0;
    double stat = 0.0;
};

// Runs fn(r) for r in [0, reps) on `threads` workers; outcomes keyed by r.
template <class Fn>
std::vector<RepOutcome> run_pool(int reps, int threads, Fn fn) {
    std::vector<RepOutcome> out(static_cast<std::size_t>(reps));
    if (threads <= 0) threads = static_cast<int>(std::thread::hardware_concurrency());
    threads = std::max(1, std::min(threads, reps));
    std::atomic<int> next{0};
    auto worker = [&]() {
        for (;;) {
            const int r = next.fetch_add(1);
            if (r >= reps) return;
            try {
                auto [estimate, stat] = fn(r);
                out[r] = {true, estimate, stat};
            } catch (const error&) {
                out[r].ok = false;
            }
        }
    };
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(threads);
        for (int i = 0; i < threads; ++i) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    return out;
}

inline void mean_stderr(const std::vector<double>& xs, double& mean, double& se) {
    mean = 0.0;
    se = 0.0;
    if (xs.empty()) return;
    long double m = 0.0L;
    for (double x : xs) m += x;
    m /= xs.size();
    mean = static_cast<double>(m);
    if (xs.size() < 2) return;
    long double v = 0.0L;
    for (double x : xs) v += (x - m) * (x - m);
    v /= (xs.size() - 1);
    se = static_cast<double>(std::sqrt(v / xs.size()));
}

}  // namespace detail

// Per-replication simulate + estimate for one grid size.  Shares the
// spectral basis / covariance factor across replications.
class ReplicationEngine {
  public:
    ReplicationEngine(const ExperimentConfig& cfg, int n_space) : cfg_(cfg) {
        scheme_ = cfg.scheme;
        scheme_.n_space = n_space;
        scheme_.validate();
        if (cfg_.simulator == SimulatorKind::spectral_bounded) {
            std::vector<double> xs(static_cast<std::size_t>(n_space) + 1);
            const double h = std::numbers::pi / n_space;
            for (int i = 0; i <= n_space; ++i) xs[static_cast<std::size_t>(i)] = i * h;
            scheme_.a_end = 0.0;
            scheme_.b_end = std::numbers::pi;
            basis_ = SpectralBasis::build(xs, cfg_.n_modes);
        } else {
            const FieldKind kind = cfg_.estimator == EstimatorId::sigma2_tilde ||
                                           cfg_.estimator == EstimatorId::theta2_tilde
                                       ? FieldKind::delta_u_increments
                                       : FieldKind::ux_increments;
            line_ = LineSimulator::prepare(cfg_.params, scheme_, kind, cfg_.dense_cap);
        }
    }

    // (bias-corrected parameter-level estimate, normalized statistic);
    // the statistic needs the true parameter and is skipped for consistency runs
    std::pair<double, double> run(int replication, bool want_stat) const {
        FieldSample field =
            cfg_.simulator == SimulatorKind::spectral_bounded
                ? simulate_spectral_bounded(cfg_.params, scheme_.times, basis_,
                                            cfg_.master_seed,
                                            static_cast<std::uint64_t>(replication))
                : line_.draw(cfg_.master_seed, static_cast<std::uint64_t>(replication));
        if (cfg_.statistic == McStatistic::q_stat) {
            const double q = q_statistic(field, cfg_.params);
            return {q, q};
        }
        const bool theta_target = is_theta_estimator(cfg_.estimator);
        const Known known = theta_target ? Known::sigma : Known::theta;
        const double known_value = theta_target ? cfg_.params.sigma : cfg_.params.theta;
        const double true_value = theta_target ? cfg_.params.theta : cfg_.params.sigma;
        EstimateReport rep;
        switch (cfg_.estimator) {
            case EstimatorId::theta2_ux:
            case EstimatorId::sigma2_ux:
                rep = estimate_from_ux(field, known, known_value);
                break;
            case EstimatorId::theta2_check:
            case EstimatorId::sigma2_check:
                rep = estimate_from_u_seconddiff(field, known, known_value, cfg_.correct_bias);
                break;
            case EstimatorId::theta2_tilde:
            case EstimatorId::sigma2_tilde:
                rep = estimate_from_delta_u(field, known, known_value, cfg_.correct_bias);
                break;
        }
        const double level = std::sqrt(std::max(rep.bias_corrected_value, 0.0));
        if (!want_stat) return {level, 0.0};
        const double stat = cfg_.statistic == McStatistic::sigma_level
                                ? normalized_stat_level(rep, true_value)
                                : normalized_stat(rep, true_value);
        return {level, stat};
    }

    const SamplingScheme& scheme() const { return scheme_; }

  private:
    ExperimentConfig cfg_;
    SamplingScheme scheme_;
    SpectralBasis basis_;
    LineSimulator line_;
};

// For each N in the sweep: run all replications, aggregate the bias-corrected
// parameter-level estimates.  Failed replications are counted and excluded.
inline std::vector<ConsistencyRow> run_consistency(const ExperimentConfig& cfg) {
    cfg.validate();
    std::vector<ConsistencyRow> rows;
    rows.reserve(cfg.n_sweep.size());
    for (int n : cfg.n_sweep) {
        ReplicationEngine engine(cfg, n);
        auto outcomes = detail::run_pool(cfg.replications, cfg.threads,
                                         [&](int r) { return engine.run(r, false); });
        ConsistencyRow row;
        row.n_space = n;
        std::vector<double> vals;
        for (const auto& o : outcomes)
            if (o.ok)
                vals.push_back(o.estimate);
            else
                ++row.failures;
        detail::mean_stderr(vals, row.mean, row.stderr_mean);
        rows.push_back(row);
    }
    return rows;
}

// Assembles KS statistic, histogram (30 bins on [-4,4], outliers clipped to
// the edge bins), and 99 Q-Q pairs at percentiles 1..99 from normalized
// statistics.  Exposed separately so tests can feed exact normal draws.
inline McSummary mc_summary_from_stats(std::vector<double> estimates,
                                       std::vector<double> stats, int failures) {
    McSummary s;
    s.estimates = std::move(estimates);
    s.stats = std::move(stats);
    s.failures = failures;
    detail::mean_stderr(s.estimates, s.mean, s.stderr_mean);
    s.ks_stat = ks_statistic(s.stats);
    constexpr int kBins = 30;
    s.hist_edges.resize(kBins + 1);
    s.hist_counts.assign(kBins, 0);
    for (int i = 0; i <= kBins; ++i) s.hist_edges[i] = -4.0 + 8.0 * i / kBins;
    for (double v : s.stats) {
        int bin = static_cast<int>(std::floor((v + 4.0) / 8.0 * kBins));
        bin = std::clamp(bin, 0, kBins - 1);
        ++s.hist_counts[bin];
    }
    std::vector<double> sorted = s.stats;
    std::sort(sorted.begin(), sorted.end());
    s.qq_theoretical.resize(99);
    s.qq_sample.resize(99);
    const std::size_t n = sorted.size();
    for (int p = 1; p <= 99; ++p) {
        s.qq_theoretical[p - 1] = normal_icdf(p / 100.0);
        const double pos = (n - 1) * (p / 100.0);
        const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
        const std::size_t hi = std::min(lo + 1, n - 1);
        const double w = pos - lo;
        s.qq_sample[p - 1] = (1.0 - w) * sorted[lo] + w * sorted[hi];
    }
    return s;
}

inline McSummary run_normality(const ExperimentConfig& cfg) {
    cfg.validate();
    ReplicationEngine engine(cfg, cfg.n_sweep.front());
    auto outcomes = detail::run_pool(cfg.replications, cfg.threads,
                                     [&](int r) { return engine.run(r, true); });
    std::vector<double> estimates, stats;
    int failures = 0;
    for (const auto& o : outcomes)
        if (o.ok) {
            estimates.push_back(o.estimate);
            stats.push_back(o.stat);
        } else {
            ++failures;
        }
    if (stats.empty()) throw numerical_error("run_normality: every replication failed");
    return mc_summary_from_stats(std::move(estimates), std::move(stats), failures);
}

// ---- serialization ----

inline std::string consistency_csv(const std::vector<ConsistencyRow>& rows) {
    std::string out = "N,mean,stderr,failures\n";
    for (const auto& r : rows)
        out += std::to_string(r.n_space) + ',' + fmt17(r.mean) + ',' + fmt17(r.stderr_mean) +
               ',' + std::to_string(r.failures) + '\n';
    return out;
}

inline std::string normality_csv(const McSummary& s) {
    std::string out = "stat\n";
    for (double v : s.stats) out += fmt17(v) + '\n';
    return out;
}

inline std::string histogram_csv(const McSummary& s) {
    std::string out = "bin_lo,bin_hi,count\n";
    for (std::size_t i = 0; i < s.hist_counts.size(); ++i)
        out += fmt17(s.hist_edges[i]) + ',' + fmt17(s.hist_edges[i + 1]) + ',' +
               std::to_string(s.hist_counts[i]) + '\n';
    return out;
}

inline std::string qq_csv(const McSummary& s) {
    std::string out = "theoretical,sample\n";
    for (std::size_t i = 0; i < s.qq_theoretical.size(); ++i)
        out += fmt17(s.qq_theoretical[i]) + ',' + fmt17(s.qq_sample[i]) + '\n';
    return out;
}

inline nlohmann::json to_json(const McSummary& s, const ExperimentConfig& cfg) {
    return {
        {"config", to_json(cfg)},
        {"estimates", s.estimates},
        {"stats", s.stats},
        {"ks_stat", s.ks_stat},
        {"hist_edges", s.hist_edges},
        {"hist_counts", s.hist_counts},
        {"qq_theoretical", s.qq_theoretical},
        {"qq_sample", s.qq_sample},
        {"mean", s.mean},
        {"stderr", s.stderr_mean},
        {"failures", s.failures},
    };
}

}  // namespace powvar
