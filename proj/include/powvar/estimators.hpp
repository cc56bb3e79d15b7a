#pragma once

// Power-variation estimators of theta^2 and sigma^2, the difference-quotient
// operator, the mu bias correction, and the normalized CLT statistics.
//
// Index ranges follow the printed estimators: the second-difference sums run
// over i = 1..N-1, the difference-quotient sums over i = 2..N-1.  The two
// differ by one boundary term, which is asymptotically negligible.

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "powvar/field.hpp"
#include "powvar/kernels.hpp"
#include "powvar/params.hpp"

namespace powvar {

enum class EstimatorId {
    theta2_ux,
    sigma2_ux,
    theta2_check,
    sigma2_check,
    theta2_tilde,
    sigma2_tilde,
};

inline const char* to_string(EstimatorId id) {
    switch (id) {
        case EstimatorId::theta2_ux: return "theta2_ux";
        case EstimatorId::sigma2_ux: return "sigma2_ux";
        case EstimatorId::theta2_check: return "theta2_check";
        case EstimatorId::sigma2_check: return "sigma2_check";
        case EstimatorId::theta2_tilde: return "theta2_tilde";
        case EstimatorId::sigma2_tilde: return "sigma2_tilde";
    }
    return "unknown";
}

inline EstimatorId estimator_id_from_string(const std::string& s) {
    for (EstimatorId id : {EstimatorId::theta2_ux, EstimatorId::sigma2_ux,
                           EstimatorId::theta2_check, EstimatorId::sigma2_check,
                           EstimatorId::theta2_tilde, EstimatorId::sigma2_tilde})
        if (s == to_string(id)) return id;
    throw domain_error("unknown estimator id: " + s);
}

inline bool is_theta_estimator(EstimatorId id) {
    return id == EstimatorId::theta2_ux || id == EstimatorId::theta2_check ||
           id == EstimatorId::theta2_tilde;
}

// Which model parameter is assumed known when estimating the other.
enum class Known { sigma, theta };

struct EstimateReport {
    EstimatorId estimator_id = EstimatorId::sigma2_ux;
    double raw_value = 0.0;
    // raw * mu for theta-type, raw / mu for sigma-type; mu = 1 when no
    // correction applies (u_x estimators, or correct_bias = false).
    double bias_corrected_value = 0.0;
    double mu = 1.0;
    int n_space = 0;
    int n_time = 0;
    bool has_normalized_stat = false;
    double normalized_stat = 0.0;
};

inline nlohmann::json to_json(const EstimateReport& r) {
    nlohmann::json j;
    j["estimator_id"] = to_string(r.estimator_id);
    j["raw_value"] = r.raw_value;
    j["bias_corrected_value"] = r.bias_corrected_value;
    j["mu"] = r.mu;
    j["n_space"] = r.n_space;
    j["n_time"] = r.n_time;
    if (r.has_normalized_stat) j["normalized_stat"] = r.normalized_stat;
    return j;
}

inline std::string to_csv_line(const EstimateReport& r, bool with_header = true) {
    std::string out;
    if (with_header)
        out += "estimator_id,raw_value,bias_corrected_value,mu,n_space,n_time,normalized_stat\n";
    out += std::string(to_string(r.estimator_id)) + ',' + fmt17(r.raw_value) + ',' +
           fmt17(r.bias_corrected_value) + ',' + fmt17(r.mu) + ',' +
           std::to_string(r.n_space) + ',' + std::to_string(r.n_time) + ',' +
           (r.has_normalized_stat ? fmt17(r.normalized_stat) : std::string()) + '\n';
    return out;
}

// sum of squared increments
inline double quadratic_variation(std::span<const double> increments) {
    if (increments.empty()) throw domain_error("quadratic_variation: empty sequence");
    long double s = 0.0L;
    for (double v : increments) s += static_cast<long double>(v) * v;
    return static_cast<double>(s);
}

// Difference quotient (u(y_i) - u(z_i)) / ((a+b) h) per grid point.
inline std::vector<double> delta_h_apply(std::span<const double> u_at_y,
                                         std::span<const double> u_at_z, double a, double b,
                                         double h) {
    if (u_at_y.size() != u_at_z.size())
        throw domain_error("delta_h_apply: mismatched y/z samples");
    if (a + b <= 0.0) throw domain_error("delta_h_apply: a + b must be positive");
    if (h <= 0.0) throw domain_error("delta_h_apply: h must be positive");
    std::vector<double> out(u_at_y.size());
    const double scale = 1.0 / ((a + b) * h);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = (u_at_y[i] - u_at_z[i]) * scale;
    return out;
}

namespace detail {

inline long double field_square_sum(const FieldSample& f) {
    long double s = 0.0L;
    for (Eigen::Index r = 0; r < f.values.rows(); ++r)
        for (Eigen::Index c = 0; c < f.values.cols(); ++c)
            s += static_cast<long double>(f.values(r, c)) * f.values(r, c);
    return s;
}

inline EstimateReport make_report(EstimatorId theta_id, EstimatorId sigma_id, Known known,
                                  double known_value, double quad_sum, double denom,
                                  double mu, const FieldSample& f) {
    EstimateReport rep;
    rep.n_space = f.scheme.n_space;
    rep.n_time = f.scheme.n_time();
    rep.mu = mu;
    if (known == Known::sigma) {
        rep.estimator_id = theta_id;
        if (quad_sum <= 0.0)
            throw degenerate_sample_error(
                "estimate: zero quadratic sum, theta estimator undefined");
        rep.raw_value = known_value * known_value * denom / quad_sum;
        rep.bias_corrected_value = rep.raw_value * mu;
    } else {
        rep.estimator_id = sigma_id;
        rep.raw_value = known_value * known_value * quad_sum / denom;
        rep.bias_corrected_value = rep.raw_value / mu;
    }
    return rep;
}

}  // namespace detail

// Estimators from sampled u_x increments (no bias factor; mu = 1):
//   theta^2 = sigma^2 (B-A) M / sum D^2,   sigma^2 = theta^2 sum D^2 / ((B-A) M).
inline EstimateReport estimate_from_ux(const FieldSample& field, Known known,
                                       double known_value) {
    field.validate();
    if (field.kind != FieldKind::ux_increments)
        throw domain_error("estimate_from_ux: field must hold ux_increments");
    const double quad_sum = static_cast<double>(detail::field_square_sum(field));
    const double denom = (field.scheme.b_end - field.scheme.a_end) * field.scheme.n_time();
    return detail::make_report(EstimatorId::theta2_ux, EstimatorId::sigma2_ux, known,
                               known_value, quad_sum, denom, 1.0, field);
}

// Estimators from the solution itself via second differences
// u(t,x_{i+1}) - 2u(t,x_i) + u(t,x_{i-1}), i = 1..N-1 (forward stencil
// a=1, b=0 on the uniform grid, so the bias factor is mu(1,0,1) = 2/3).
// The quadratic sum of second differences divided by h^2 plays the role of
// the Delta-increment sum: sigma^2 = theta^2 S / (M (B-A) h^2).
inline EstimateReport estimate_from_u_seconddiff(const FieldSample& field, Known known,
                                                 double known_value, bool correct_bias) {
    field.validate();
    if (field.kind != FieldKind::u_values)
        throw domain_error("estimate_from_u_seconddiff: field must hold u_values");
    if (field.scheme.n_space < 3)
        throw domain_error("estimate_from_u_seconddiff: need n_space >= 3");
    long double s = 0.0L;
    for (Eigen::Index r = 0; r < field.values.rows(); ++r)
        for (int i = 1; i <= field.scheme.n_space - 1; ++i) {
            const long double d = static_cast<long double>(field.values(r, i + 1)) -
                                  2.0L * field.values(r, i) + field.values(r, i - 1);
            s += d * d;
        }
    const double h = field.scheme.h();
    const double quad_sum = static_cast<double>(s) / (h * h);
    const double denom = (field.scheme.b_end - field.scheme.a_end) * field.scheme.n_time();
    const double mu = correct_bias ? mu_factor(1.0, 0.0, 1.0).mu : 1.0;
    return detail::make_report(EstimatorId::theta2_check, EstimatorId::sigma2_check, known,
                               known_value, quad_sum, denom, mu, field);
}

// Estimators from pre-simulated difference-quotient increments (i = 2..N-1);
// the bias factor is mu(a, b, gamma) from the field's stencil.
inline EstimateReport estimate_from_delta_u(const FieldSample& field, Known known,
                                            double known_value, bool correct_bias) {
    field.validate();
    if (field.kind != FieldKind::delta_u_increments)
        throw domain_error("estimate_from_delta_u: field must hold delta_u_increments");
    const double quad_sum = static_cast<double>(detail::field_square_sum(field));
    const double denom = (field.scheme.b_end - field.scheme.a_end) * field.scheme.n_time();
    const double mu =
        correct_bias
            ? mu_factor(field.scheme.stencil_a, field.scheme.stencil_b, field.scheme.gamma).mu
            : 1.0;
    return detail::make_report(EstimatorId::theta2_tilde, EstimatorId::sigma2_tilde, known,
                               known_value, quad_sum, denom, mu, field);
}

// sqrt(NM) (estimate^2 - true^2) / (sqrt(2) true^2): asymptotically N(0,1)
// for both parameter targets.  `true_value` is at parameter level (sigma or
// theta), the report carries the squared-parameter estimate.
inline double normalized_stat(const EstimateReport& rep, double true_value) {
    if (!(true_value > 0.0)) throw domain_error("normalized_stat: true_value must be positive");
    const double nm = static_cast<double>(rep.n_space) * rep.n_time;
    const double t2 = true_value * true_value;
    return std::sqrt(nm) * (rep.bias_corrected_value - t2) / (std::sqrt(2.0) * t2);
}

// Delta-method sigma-level variant: sqrt(2NM) (sqrt(estimate^2) - true)/true.
inline double normalized_stat_level(const EstimateReport& rep, double true_value) {
    if (!(true_value > 0.0))
        throw domain_error("normalized_stat_level: true_value must be positive");
    if (rep.bias_corrected_value < 0.0)
        throw numerical_error("normalized_stat_level: negative squared estimate");
    const double nm = static_cast<double>(rep.n_space) * rep.n_time;
    return std::sqrt(2.0 * nm) * (std::sqrt(rep.bias_corrected_value) - true_value) /
           true_value;
}

// Renormalized centered quadratic variation
//   Q_{N,M} = (1/M) sum_j sum_i [ D_{j,i}^2 / E U(t_j) - 1 ],
//   script-Q = sqrt(M/(2N)) Q_{N,M},
// with E U(t_j) supplied by the closed-form kernels.
inline double q_statistic(const FieldSample& field, const ModelParams& params) {
    field.validate();
    if (field.kind == FieldKind::u_values)
        throw domain_error("q_statistic: field must hold increments");
    const int m = field.scheme.n_time();
    const int n = field.scheme.n_space;
    long double q = 0.0L;
    for (int j = 0; j < m; ++j) {
        const double eu =
            field.kind == FieldKind::ux_increments
                ? ux_increment_variance(field.scheme.times[j], field.scheme.h(), params)
                : delta_u_increment_variance(field.scheme.times[j], params, field.scheme);
        long double row = 0.0L;
        for (Eigen::Index c = 0; c < field.values.cols(); ++c) {
            const long double d = field.values(j, c);
            row += d * d / eu - 1.0L;
        }
        q += row;
    }
    q /= m;
    return static_cast<double>(std::sqrt(static_cast<long double>(m) / (2.0L * n)) * q);
}

}  // namespace powvar
