#pragma once

// Model parameters and sampling-grid descriptions for the stochastic heat
// equation  du/dt = theta u_xx + sigma dW(x)  with space-only white noise.

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "powvar/errors.hpp"

namespace powvar {

struct ModelParams {
    double theta = 0.1;  // drift coefficient, > 0
    double sigma = 0.1;  // volatility

    ModelParams() = default;
    ModelParams(double theta_, double sigma_) : theta(theta_), sigma(sigma_) {
        if (!std::isfinite(theta) || theta <= 0.0)
            throw domain_error("ModelParams: theta must be positive");
        if (!std::isfinite(sigma)) throw domain_error("ModelParams: sigma must be finite");
    }

    // tau = sigma^2 / (theta^{3/2} sqrt(pi)); always recomputed, never stored.
    double tau() const {
        return sigma * sigma / (std::pow(theta, 1.5) * std::sqrt(std::numbers::pi));
    }
};

// Uniform space grid x_i = A + i h on [A,B] with h = (B-A)/N, observation
// times t_1 < ... < t_M, plus the stencil offsets used by the difference
// quotient: y_i = x_i + a h_gamma, z_i = x_i - b h_gamma with
// h_gamma = (B-A)/N^gamma.
struct SamplingScheme {
    double a_end = 0.0;
    double b_end = 1.0;
    int n_space = 2;
    std::vector<double> times;
    double gamma = 1.0;
    double stencil_a = 1.0;
    double stencil_b = 0.0;

    void validate() const {
        if (!(a_end < b_end) || !std::isfinite(a_end) || !std::isfinite(b_end))
            throw domain_error("SamplingScheme: need A < B finite");
        if (n_space < 2) throw domain_error("SamplingScheme: n_space must be >= 2");
        if (times.empty()) throw domain_error("SamplingScheme: times must be nonempty");
        double prev = 0.0;
        for (double t : times) {
            if (!std::isfinite(t) || t <= prev)
                throw domain_error("SamplingScheme: times must be positive and strictly increasing");
            prev = t;
        }
        if (!(gamma >= 1.0)) throw domain_error("SamplingScheme: gamma must be >= 1");
        if (stencil_a < 0.0 || stencil_a > 1.0 || stencil_b < 0.0 || stencil_b > 1.0)
            throw domain_error("SamplingScheme: stencil weights must lie in [0,1]");
        if (stencil_a + stencil_b <= 0.0)
            throw domain_error("SamplingScheme: stencil_a + stencil_b must be positive");
    }

    double h() const { return (b_end - a_end) / n_space; }
    double h_gamma() const { return (b_end - a_end) / std::pow(double(n_space), gamma); }
    int n_time() const { return static_cast<int>(times.size()); }
    double x(int i) const { return a_end + i * h(); }
    double y(int i) const { return x(i) + stencil_a * h_gamma(); }
    double z(int i) const { return x(i) - stencil_b * h_gamma(); }

    static SamplingScheme uniform_times(double a, double b, int n, int m, double horizon,
                                        double gam = 1.0, double sa = 1.0, double sb = 0.0) {
        SamplingScheme s;
        s.a_end = a;
        s.b_end = b;
        s.n_space = n;
        s.times.resize(m);
        for (int j = 1; j <= m; ++j) s.times[j - 1] = horizon * j / m;
        s.gamma = gam;
        s.stencil_a = sa;
        s.stencil_b = sb;
        s.validate();
        return s;
    }
};

enum class MuRegime { gamma_gt_one, sum_ge_one, sum_lt_one };

// The multiplicative bias of difference-quotient-based quadratic variation.
struct StencilRegime {
    double mu = 1.0;  // in (0,1]; 1 exactly iff gamma > 1
    MuRegime regime = MuRegime::gamma_gt_one;
};

inline const char* to_string(MuRegime r) {
    switch (r) {
        case MuRegime::gamma_gt_one: return "gamma_gt_one";
        case MuRegime::sum_ge_one: return "sum_ge_one";
        case MuRegime::sum_lt_one: return "sum_lt_one";
    }
    return "unknown";
}

// mu = 1/(a+b) - 1/(3(a+b)^2)  if gamma = 1 and a+b >= 1,
//      1 - (a+b)/3              if gamma = 1 and a+b < 1,
//      1                        if gamma > 1.
inline StencilRegime mu_factor(double a, double b, double gamma) {
    const double s = a + b;
    if (!(s > 0.0)) throw domain_error("mu_factor: a + b must be positive");
    if (!(gamma >= 1.0)) throw domain_error("mu_factor: gamma must be >= 1");
    StencilRegime r;
    if (gamma > 1.0) {
        r.mu = 1.0;
        r.regime = MuRegime::gamma_gt_one;
    } else if (s >= 1.0) {
        r.mu = 1.0 / s - 1.0 / (3.0 * s * s);
        r.regime = MuRegime::sum_ge_one;
    } else {
        r.mu = 1.0 - s / 3.0;
        r.regime = MuRegime::sum_lt_one;
    }
    return r;
}

}  // namespace powvar
