#pragma once

// Exact Gaussian simulation of the solution and its derivative:
//  - truncated sine-series sampling of u on (0,pi) (one xi draw shared by the
//    whole space-time grid),
//  - covariance-factorization sampling of increment fields on the line, with
//    the (M N) x (M N) covariance assembled from the closed-form kernels.

#include <Eigen/Dense>
#include <cstdint>
#include <memory>
#include <numbers>
#include <vector>

#include "powvar/covariance.hpp"
#include "powvar/field.hpp"
#include "powvar/kernels.hpp"
#include "powvar/rng.hpp"

namespace powvar {

inline constexpr int kDenseFactorizationCap = 4096;  // max M*N for dense LLT

// Cached sin(k x_i) table; building it dominates the per-realization cost, so
// Monte Carlo loops share one instance per grid.
struct SpectralBasis {
    std::vector<double> xs;
    int n_modes = 0;
    Eigen::MatrixXd sines;  // xs.size() x n_modes

    static SpectralBasis build(const std::vector<double>& xs, int n_modes) {
        constexpr double pi = std::numbers::pi;
        constexpr double slack = 1e-12;
        if (n_modes < 1) throw domain_error("SpectralBasis: n_modes must be >= 1");
        SpectralBasis b;
        b.xs = xs;
        b.n_modes = n_modes;
        b.sines.resize(static_cast<Eigen::Index>(xs.size()), n_modes);
        for (std::size_t i = 0; i < xs.size(); ++i) {
            if (xs[i] < -slack || xs[i] > pi + slack)
                throw domain_error("SpectralBasis: grid points must lie in [0, pi]");
            for (int k = 1; k <= n_modes; ++k)
                b.sines(static_cast<Eigen::Index>(i), k - 1) = std::sin(k * xs[i]);
        }
        return b;
    }
};

// u(t,x) = sqrt(2/pi) (sigma/theta) sum_k (1. - e^{-k^2 theta t}) k^{-2} sin(kx) xi_k
// on (0,pi) with Dirichlet conditions; xi drawn once per realization.
inline FieldSample simulate_spectral_bounded(const ModelParams& params,
                                             const std::vector<double>& times,
                                             const SpectralBasis& basis, std::uint64_t seed,
                                             std::uint64_t stream = 0) {
    const int m = static_cast<int>(times.size());
    const int k_max = basis.n_modes;
    const int nx = static_cast<int>(basis.xs.size());
    if (m < 1) throw domain_error("simulate_spectral_bounded: need at least one time");

    Eigen::VectorXd xi(k_max);
    NormalStream normals(seed, stream);
    normals.fill(xi.data(), static_cast<std::size_t>(k_max));

    // coef(k, j) = (1 - e^{-k^2 theta t_j}) / k^2 * xi_k
    Eigen::MatrixXd coef(k_max, m);
    for (int k = 1; k <= k_max; ++k) {
        const double kk = static_cast<double>(k) * k;
        for (int j = 0; j < m; ++j)
            coef(k - 1, j) = -std::expm1(-kk * params.theta * times[j]) / kk * xi[k - 1];
    }
    const double pref = std::sqrt(2.0 / std::numbers::pi) * params.sigma / params.theta;
    Eigen::MatrixXd u = pref * (basis.sines * coef);  // nx x m

    FieldSample f;
    f.kind = FieldKind::u_values;
    f.params = params;
    f.seed = seed;
    f.n_modes = k_max;
    f.scheme.a_end = 0.0;
    f.scheme.b_end = std::numbers::pi;
    f.scheme.n_space = nx - 1;
    f.scheme.times = times;
    f.values = u.transpose();
    f.validate();
    return f;
}

inline FieldSample simulate_spectral_bounded(const ModelParams& params,
                                             const std::vector<double>& times,
                                             const std::vector<double>& xs, int n_modes,
                                             std::uint64_t seed, std::uint64_t stream = 0) {
    return simulate_spectral_bounded(params, times, SpectralBasis::build(xs, n_modes), seed,
                                     stream);
}

// Joint covariance of the u_x increments D_{k,i} over the full space-time
// grid: entry [(k,i),(l,j)] = Phi_N(|i-j|, t_k, t_l).
inline CovarianceMatrix ux_increment_covariance(const ModelParams& params,
                                                const SamplingScheme& scheme) {
    scheme.validate();
    const int n = scheme.n_space;
    const int m = scheme.n_time();
    CovarianceMatrix cov;
    cov.entries.resize(static_cast<Eigen::Index>(n) * m, static_cast<Eigen::Index>(n) * m);
    for (int k = 0; k < m; ++k)
        for (int l = k; l < m; ++l) {
            std::vector<double> phi(n);
            for (int lag = 0; lag < n; ++lag)
                phi[lag] =
                    ux_increment_cov(lag, scheme.times[k], scheme.times[l], params, scheme);
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j) {
                    const double v = phi[std::abs(i - j)];
                    cov.entries(k * n + i, l * n + j) = v;
                    cov.entries(l * n + j, k * n + i) = v;
                }
        }
    return cov;
}

// Joint covariance of the Delta_{h_gamma} u increments on the interior range
// i = 2..N-1 (N-2 columns per time point).
inline CovarianceMatrix delta_increment_covariance(const ModelParams& params,
                                                   const SamplingScheme& scheme) {
    scheme.validate();
    const int cols = scheme.n_space - 2;
    if (cols < 1) throw domain_error("delta_increment_covariance: need n_space >= 3");
    const int m = scheme.n_time();
    CovarianceMatrix cov;
    cov.entries.resize(static_cast<Eigen::Index>(cols) * m,
                       static_cast<Eigen::Index>(cols) * m);
    for (int k = 0; k < m; ++k)
        for (int l = k; l < m; ++l) {
            std::vector<double> phi(cols);
            phi[0] = k == l ? delta_u_increment_variance(scheme.times[k], params, scheme)
                            : delta_u_increment_cov_lag0(scheme.times[k], scheme.times[l],
                                                         params, scheme);
            for (int lag = 1; lag < cols; ++lag)
                phi[lag] = delta_u_increment_cov(lag, scheme.times[k], scheme.times[l], params,
                                                 scheme);
            for (int i = 0; i < cols; ++i)
                for (int j = 0; j < cols; ++j) {
                    const double v = phi[std::abs(i - j)];
                    cov.entries(k * cols + i, l * cols + j) = v;
                    cov.entries(l * cols + j, k * cols + i) = v;
                }
        }
    return cov;
}

namespace detail {

inline FieldSample gaussian_field_from_factor(const ModelParams& params,
                                              const SamplingScheme& scheme, FieldKind kind,
                                              const CovarianceMatrix& cov, std::uint64_t seed,
                                              std::uint64_t stream) {
    const int cols = field_columns(kind, scheme.n_space);
    const int m = scheme.n_time();
    const Eigen::Index dim = static_cast<Eigen::Index>(cols) * m;
    Eigen::VectorXd z(dim);
    NormalStream normals(seed, stream);
    normals.fill(z.data(), static_cast<std::size_t>(dim));
    const Eigen::VectorXd d = cov.factor.triangularView<Eigen::Lower>() * z;
    FieldSample f;
    f.kind = kind;
    f.params = params;
    f.scheme = scheme;
    f.seed = seed;
    f.values = Eigen::Map<const Eigen::MatrixXd>(d.data(), cols, m).transpose();
    f.validate();
    return f;
}

}  // namespace detail

struct LineSimulator {
    ModelParams params;
    SamplingScheme scheme;
    FieldKind kind = FieldKind::ux_increments;
    CovarianceMatrix cov;  // factorized

    static LineSimulator prepare(const ModelParams& params, const SamplingScheme& scheme,
                                 FieldKind kind, int cap = kDenseFactorizationCap) {
        if (kind != FieldKind::ux_increments && kind != FieldKind::delta_u_increments)
            throw domain_error("LineSimulator: kind must be an increment field");
        const long dim =
            static_cast<long>(field_columns(kind, scheme.n_space)) * scheme.n_time();
        if (dim > cap)
            throw size_error("LineSimulator: M*N = " + std::to_string(dim) +
                             " exceeds dense factorization cap " + std::to_string(cap));
        LineSimulator s;
        s.params = params;
        s.scheme = scheme;
        s.kind = kind;
        if (params.sigma != 0.0)
            s.cov = factorize(kind == FieldKind::ux_increments
                                  ? ux_increment_covariance(params, scheme)
                                  : delta_increment_covariance(params, scheme));
        return s;
    }

    FieldSample draw(std::uint64_t seed, std::uint64_t stream = 0) const {
        if (params.sigma == 0.0) {
            FieldSample f;
            f.kind = kind;
            f.params = params;
            f.scheme = scheme;
            f.seed = seed;
            f.values = Eigen::MatrixXd::Zero(scheme.n_time(),
                                             field_columns(kind, scheme.n_space));
            return f;
        }
        return detail::gaussian_field_from_factor(params, scheme, kind, cov, seed, stream);
    }
};

// One-shot samplers; Monte Carlo loops should prepare a LineSimulator once
// and share the factor across replications.
inline FieldSample simulate_ux_increments(const ModelParams& params,
                                          const SamplingScheme& scheme, std::uint64_t seed,
                                          int cap = kDenseFactorizationCap) {
    return LineSimulator::prepare(params, scheme, FieldKind::ux_increments, cap).draw(seed);
}

inline FieldSample simulate_delta_u_increments(const ModelParams& params,
                                               const SamplingScheme& scheme,
                                               std::uint64_t seed,
                                               int cap = kDenseFactorizationCap) {
    return LineSimulator::prepare(params, scheme, FieldKind::delta_u_increments, cap)
        .draw(seed);
}

}  // namespace powvar
