#pragma once

// Closed-form covariances, moments, and Q-statistic expectations for the
// solution u and its spatial derivative u_x on the line, plus the Fourier
// covariance on (0,pi).  All formulas reduce to erf/erfc and the truncated
// gamma integrals in special.hpp.
//
// The increment covariances are second differences of O(1) quantities that
// cancel down to O(N^-2); intermediate sums are kept in long double and
// grouped so the bulk terms cancel exactly rather than numerically.

#include <cmath>
#include <numbers>
#include <vector>

#include "powvar/params.hpp"
#include "powvar/special.hpp"

namespace powvar {

// phi_c(z, x) = 2 e^{-c x^2} - e^{-c (x+z)^2} - e^{-c (x-z)^2}
inline double phi_c(double c, double z, double x) {
    if (!std::isfinite(c) || c <= 0.0) throw domain_error("phi_c: c must be positive");
    const long double cl = c, zl = z, xl = x;
    return static_cast<double>(2.0L * std::exp(-cl * xl * xl) -
                               std::exp(-cl * (xl + zl) * (xl + zl)) -
                               std::exp(-cl * (xl - zl) * (xl - zl)));
}

namespace detail {

// erf(w/sqrt(c1)) + erf(w/sqrt(c2)) - erf(w/sqrt(c1+c2))
inline long double erf_triplet(long double c1, long double c2, long double w) {
    return std::erf(w / std::sqrt(c1)) + std::erf(w / std::sqrt(c2)) -
           std::erf(w / std::sqrt(c1 + c2));
}

inline long double pair_group_signed(long double c1, long double c2, long double w) {
    return w * (erf_triplet(c1, c2, w) - 1.0L);
}

// Even continuation in w: the underlying identity holds for the distance |w|,
// so covariance assembly must evaluate the group at |w|.  For w >= 0 this is
// identical to the printed group.
inline long double pair_group_abs(long double c1, long double c2, long double w) {
    const long double aw = std::fabs(w);
    return aw * (erf_triplet(c1, c2, aw) - 1.0L);
}

inline long double phi_pair_with(long double c1, long double c2, long double z, long double x,
                                 long double (*group)(long double, long double, long double)) {
    return 2.0L * group(c1, c2, x) - group(c1, c2, x + z) - group(c1, c2, x - z);
}

}  // namespace detail

// phi_{(c1,c2)}(z, x): three erf groups weighted by 2x, -(x+z), -(x-z),
// exactly as printed.  Intended domain x >= z > 0; see pair_group_abs for the
// continuation used inside the increment covariances.
inline double phi_pair(double c1, double c2, double z, double x) {
    if (!(c1 > 0.0) || !(c2 > 0.0)) throw domain_error("phi_pair: c1, c2 must be positive");
    return static_cast<double>(
        detail::phi_pair_with(c1, c2, z, x, detail::pair_group_signed));
}

// E |u_x(t, x+h) - u_x(t, x)|^2, independent of x.
inline double ux_increment_variance(double t, double h, const ModelParams& p) {
    detail::require_finite_positive(t, "ux_increment_variance: t");
    detail::require_finite_positive(h, "ux_increment_variance: h");
    const long double tau = p.tau();
    const long double th = p.theta;
    const long double hl = h, tl = t;
    const long double q = hl * hl / (4.0L * th);  // h^2/(4 theta)
    long double v = -2.0L * std::sqrt(2.0L * tl) * tau * (-std::expm1(-q / (2.0L * tl)));
    v += 4.0L * std::sqrt(tl) * tau * (-std::expm1(-q / tl));
    v += tau * hl / std::sqrt(th) *
         (2.0L * detail::gamma_half_integral_l(tl / q) -
          detail::gamma_half_integral_l(2.0L * tl / q));
    return static_cast<double>(v);
}

// Phi_N(lag, t_l, t_k) = E[(u_x(t_k,x_i)-u_x(t_k,x_{i-1}))
//                          (u_x(t_l,x_j)-u_x(t_l,x_{j-1}))],  |i-j| = lag.
// Stationary in x: only the lag and the mesh width h enter (z = h,
// x = lag*h in the phi groupings).
inline double ux_increment_cov(int lag, double t_k, double t_l, const ModelParams& p,
                               const SamplingScheme& scheme) {
    detail::require_finite_positive(t_k, "ux_increment_cov: t_k");
    detail::require_finite_positive(t_l, "ux_increment_cov: t_l");
    if (lag < 0 || lag > scheme.n_space)
        throw domain_error("ux_increment_cov: lag must lie in [0, N]");
    const long double tau = p.tau();
    const long double th = p.theta;
    const long double z = scheme.h();
    const long double x = lag * scheme.h();
    const long double tk = t_k, tl = t_l;
    auto phic = [&](long double tt) {
        const long double c = 1.0L / (4.0L * th * tt);
        return 2.0L * std::exp(-c * x * x) - std::exp(-c * (x + z) * (x + z)) -
               std::exp(-c * (x - z) * (x - z));
    };
    long double v = tau * std::sqrt(tl) * phic(tl) + tau * std::sqrt(tk) * phic(tk) -
                    tau * std::sqrt(tl + tk) * phic(tl + tk);
    v += tau * kSqrtPiL / (2.0L * std::sqrt(th)) *
         detail::phi_pair_with(4.0L * th * tl, 4.0L * th * tk, z, x, detail::pair_group_abs);
    return static_cast<double>(v);
}

// E[u_x(t, x) u_x(tp, y)] in closed form; for x = y the erf group vanishes
// and the value degenerates to tau (sqrt(t) + sqrt(tp) - sqrt(t+tp)).
inline double ux_pointwise_cov(double t, double tp, double x, double y, const ModelParams& p) {
    detail::require_finite_positive(t, "ux_pointwise_cov: t");
    detail::require_finite_positive(tp, "ux_pointwise_cov: tp");
    const long double tau = p.tau();
    const long double th = p.theta;
    const long double d = std::fabs(static_cast<long double>(x) - y);
    const long double tl = t, tq = tp;
    const long double c = d * d / (4.0L * th);
    long double v = std::sqrt(tq) * std::exp(-c / tq) + std::sqrt(tl) * std::exp(-c / tl) -
                    std::sqrt(tl + tq) * std::exp(-c / (tl + tq));
    v += 0.5L * kSqrtPiL * d / std::sqrt(th) *
         (detail::erf_triplet(4.0L * th * tq, 4.0L * th * tl, d) - 1.0L);
    return static_cast<double>(tau * v);
}

namespace detail {

// Second moment building block for the difference-quotient field:
// W(d) = 2 I1(c(d)) - I1(c(d+s)) - I1(c(d-s)) with c(x) = x^2/(4 theta) and
// s = (a+b) h_gamma; E[Delta u(t_k, x) Delta u(t_l, x+d)] = tau theta/(2 s^2) W(d).
inline long double delta_pair_block(long double tk, long double tl, long double d,
                                    long double s, long double theta) {
    auto c_of = [&](long double w) { return w * w / (4.0L * theta); };
    return 2.0L * lemma_int_half(tk, tl, c_of(d)) - lemma_int_half(tk, tl, c_of(d + s)) -
           lemma_int_half(tk, tl, c_of(d - s));
}

}  // namespace detail

// tildePhi_N(lag, t_k, t_l): increment covariance of the difference-quotient
// field across space lag >= 1 and a pair of times.
inline double delta_u_increment_cov(int lag, double t_k, double t_l, const ModelParams& p,
                                    const SamplingScheme& scheme) {
    detail::require_finite_positive(t_k, "delta_u_increment_cov: t_k");
    detail::require_finite_positive(t_l, "delta_u_increment_cov: t_l");
    if (lag < 1 || lag > scheme.n_space)
        throw domain_error("delta_u_increment_cov: lag must lie in [1, N]");
    const long double tau = p.tau();
    const long double th = p.theta;
    const long double h = scheme.h();
    const long double s = (scheme.stencil_a + scheme.stencil_b) *
                          static_cast<long double>(scheme.h_gamma());
    const long double tk = t_k, tl = t_l;
    const long double f0 = detail::delta_pair_block(tk, tl, lag * h, s, th);
    const long double fp = detail::delta_pair_block(tk, tl, (lag + 1) * h, s, th);
    const long double fm = detail::delta_pair_block(tk, tl, (lag - 1) * h, s, th);
    return static_cast<double>(tau * th / (2.0L * s * s) * (2.0L * f0 - fp - fm));
}

namespace detail {

// Literal assembly of E|Delta u(t,x+h) - Delta u(t,x)|^2 from the three
// closed-form blocks (diagnostic reference for the regrouped version below).
inline long double delta_variance_blocks(long double t, long double h, long double s,
                                         long double tau, long double theta) {
    const long double k = tau * theta / (s * s);
    auto c_of = [&](long double w) { return w * w / (4.0L * theta); };
    const long double c0 = lemma_int_half(t, t, 0.0L);
    const long double a1 = 2.0L * k * (c0 - lemma_int_half(t, t, c_of(s)));
    const long double a2 =
        k * (lemma_int_half(t, t, c_of(h + s)) - lemma_int_half(t, t, c_of(h)));
    const long double a3 =
        k * (lemma_int_half(t, t, c_of(h - s)) - lemma_int_half(t, t, c_of(h)));
    return a1 + a2 + a3;
}

}  // namespace detail

namespace detail {

// Lag-0 increment covariance of the difference-quotient field across a pair
// of times, E[(Delta u(tk,x+h)-Delta u(tk,x))(Delta u(tl,x+h)-Delta u(tl,x))]
// = tau theta/s^2 * sum_w I1(tk, tl, c), weights (2,-2,-2,1,1) at squared
// distances {0, s, h, h+s, |h-s|}/(4 theta).
//
// The weights sum to zero with zero first moment in c, so the O(1) and O(c)
// parts of I1 drop out exactly.  The sum is regrouped accordingly: the
// leading c^{3/2} combination is expanded algebraically
// ((h+s)^3 + |h-s|^3 - 2h^3 - 2s^3 = 6 max*min^2 - 2 min^3) and the remaining
// blocks go through expm1/erf differences that stay relatively accurate even
// when s << h (gamma > 1 at large N).
inline long double delta_lag0_regrouped(long double tk, long double tl, long double h,
                                        long double s, long double tau, long double th) {
    const long double xs[5] = {0.0L, s, h, h + s, std::fabs(h - s)};
    const long double ws[5] = {2.0L, -2.0L, -2.0L, 1.0L, 1.0L};
    long double c[5];
    for (int i = 0; i < 5; ++i) c[i] = xs[i] * xs[i] / (4.0L * th);

    // E2(e) = expm1(-e) + e = e^2/2 - ...; usable because sum w = sum w c = 0.
    auto e2 = [](long double e) {
        if (e < 1e-8L) return e * e * (0.5L - e / 6.0L);
        return std::expm1(-e) + e;
    };
    const long double tm = std::min(tk, tl), tM = std::max(tk, tl);
    const long double ts = tk + tl;
    long double sum32 = 0.0L, sum12 = 0.0L, sum_lin = 0.0L;
    for (int i = 0; i < 5; ++i) {
        sum32 += ws[i] * (std::pow(ts, 1.5L) * e2(c[i] / ts) -
                          std::pow(tk, 1.5L) * e2(c[i] / tk) -
                          std::pow(tl, 1.5L) * e2(c[i] / tl));
        sum12 += ws[i] * c[i] *
                 (std::sqrt(ts) * std::expm1(-c[i] / ts) -
                  std::sqrt(tk) * std::expm1(-c[i] / tk) -
                  std::sqrt(tl) * std::expm1(-c[i] / tl));
        if (c[i] > 0.0L) {
            const long double c32 = c[i] * std::sqrt(c[i]);
            // deviation of the G bracket from its c -> 0 limit -sqrt(pi)
            const long double sp =
                kSqrtPiL * (std::erf(std::sqrt(c[i] / tk)) + std::erf(std::sqrt(c[i] / tl)) -
                            std::erf(std::sqrt(c[i] / ts)));
            // deviation of R(tk/c, tl/c) from sqrt(pi)
            const long double drho =
                -sp +
                (tm / c[i]) * (lower_gamma_3half(c[i] / tm) - lower_gamma_3half(c[i] / tM)) +
                (ts / c[i]) * (lower_gamma_3half(c[i] / tM) - lower_gamma_3half(c[i] / ts));
            sum_lin += ws[i] * c32 * (-(16.0L / 3.0L) * sp - 4.0L * drho);
        }
    }
    const long double mn = std::min(h, s), mx = std::max(h, s);
    const long double c32_comb =
        (6.0L * mx * mn * mn - 2.0L * mn * mn * mn) / (8.0L * th * std::sqrt(th));
    long double brace = (4.0L / 3.0L) * sum32 + (16.0L / 3.0L) * sum12;
    brace += (16.0L * kSqrtPiL / 3.0L - 4.0L * kSqrtPiL) * c32_comb;
    brace += sum_lin;
    return tau * th / (s * s) * brace;
}

inline long double delta_stencil_span(const SamplingScheme& scheme) {
    return (scheme.stencil_a + scheme.stencil_b) *
           static_cast<long double>(scheme.h_gamma());
}

}  // namespace detail

// E |Delta_{h_gamma} u(t, x+h) - Delta_{h_gamma} u(t, x)|^2, independent of x.
inline double delta_u_increment_variance(double t, const ModelParams& p,
                                         const SamplingScheme& scheme) {
    detail::require_finite_positive(t, "delta_u_increment_variance: t");
    scheme.validate();
    return static_cast<double>(detail::delta_lag0_regrouped(
        t, t, scheme.h(), detail::delta_stencil_span(scheme), p.tau(), p.theta));
}

// Lag-0 cross-time companion of delta_u_increment_variance, used when
// assembling the joint law over several observation times.
inline double delta_u_increment_cov_lag0(double t_k, double t_l, const ModelParams& p,
                                         const SamplingScheme& scheme) {
    detail::require_finite_positive(t_k, "delta_u_increment_cov_lag0: t_k");
    detail::require_finite_positive(t_l, "delta_u_increment_cov_lag0: t_l");
    scheme.validate();
    return static_cast<double>(detail::delta_lag0_regrouped(
        t_k, t_l, scheme.h(), detail::delta_stencil_span(scheme), p.tau(), p.theta));
}

enum class QVariant { ux, delta_u };

struct QExpectations {
    double q_diag = 0.0;  // 2N/M, exact
    double q_nd = 0.0;    // off-diagonal contribution to E Q_{N,M}^2
};

// E Q_{N,M}^2 = Q_D + Q_ND with Q_D = 2N/M.  Q_ND collects every
// off-diagonal (k,i) != (l,j) term of the Gaussian isometry
//   E Q^2 = (2/M^2) sum_{k,l} (EU_k EU_l)^{-1} sum_{i,j} Phi^2(|i-j|, t_k, t_l):
// same-time space lags, equal-location cross-time pairs (whose correlation
// approaches 1 as N grows -- the W(x) component of u_x is shared across
// times), and cross-time space lags.  For M = 1 only the first block
// survives and Q_ND/N -> 0; for M >= 2 the equal-location block is Theta(N).
inline QExpectations q_expectations(const ModelParams& p, const SamplingScheme& scheme,
                                    QVariant variant) {
    scheme.validate();
    const int n = scheme.n_space;
    const int m = scheme.n_time();
    // increments live on i = 1..N (ux) or the interior i = 2..N-1 (delta_u)
    const int cols = variant == QVariant::ux ? n : n - 2;
    if (cols < 1) throw domain_error("q_expectations: grid too small for variant");
    QExpectations out;
    out.q_diag = 2.0 * n / m;
    std::vector<double> eu(m);
    for (int j = 0; j < m; ++j)
        eu[j] = variant == QVariant::ux
                    ? ux_increment_variance(scheme.times[j], scheme.h(), p)
                    : delta_u_increment_variance(scheme.times[j], p, scheme);
    auto phi_at = [&](int lag, int k, int l) {
        if (variant == QVariant::ux)
            return ux_increment_cov(lag, scheme.times[k], scheme.times[l], p, scheme);
        return lag == 0 ? delta_u_increment_cov_lag0(scheme.times[k], scheme.times[l], p,
                                                     scheme)
                        : delta_u_increment_cov(lag, scheme.times[k], scheme.times[l], p,
                                                scheme);
    };
    long double nd = 0.0L;
    for (int k = 0; k < m; ++k) {
        long double same = 0.0L;
        for (int lag = 1; lag <= cols - 1; ++lag) {
            const double phi = phi_at(lag, k, k);
            same += 2.0L * (cols - lag) * phi * phi;
        }
        nd += same / (static_cast<long double>(eu[k]) * eu[k]);
    }
    for (int l = 1; l < m; ++l)
        for (int k = 0; k < l; ++k) {
            const double phi0 = phi_at(0, k, l);
            long double cross = static_cast<long double>(cols) * phi0 * phi0;
            for (int lag = 1; lag <= cols - 1; ++lag) {
                const double phi = phi_at(lag, k, l);
                cross += 2.0L * (cols - lag) * phi * phi;
            }
            nd += 2.0L * cross / (static_cast<long double>(eu[k]) * eu[l]);
        }
    out.q_nd = static_cast<double>(2.0L / (static_cast<long double>(m) * m) * nd);
    return out;
}

// E[u(t,x) u(tp,y)] on (0,pi) with Dirichlet conditions:
// (2 sigma^2/(pi theta^2)) sum_k (1-e^{-k^2 theta t})(1-e^{-k^2 theta tp})
//                                 k^{-4} sin(kx) sin(ky).
inline double bounded_domain_cov(double t, double tp, double x, double y,
                                 const ModelParams& p, int n_modes) {
    detail::require_finite_positive(t, "bounded_domain_cov: t");
    detail::require_finite_positive(tp, "bounded_domain_cov: tp");
    if (n_modes < 1) throw domain_error("bounded_domain_cov: n_modes must be >= 1");
    constexpr double pi = std::numbers::pi;
    constexpr double slack = 1e-12;  // grid endpoints may overshoot pi by rounding
    if (x < -slack || x > pi + slack || y < -slack || y > pi + slack)
        throw domain_error("bounded_domain_cov: x, y must lie in [0, pi]");
    const long double th = p.theta;
    long double sum = 0.0L;
    for (int k = n_modes; k >= 1; --k) {
        const long double kk = static_cast<long double>(k) * k;
        const long double w = -std::expm1(-kk * th * t) * -std::expm1(-kk * th * tp);
        sum += w / (kk * kk) * std::sin(k * static_cast<long double>(x)) *
               std::sin(k * static_cast<long double>(y));
    }
    const long double pref =
        2.0L * p.sigma * p.sigma / (std::numbers::pi_v<long double> * th * th);
    return static_cast<double>(pref * sum);
}

}  // namespace powvar
