#pragma once

// Brute-force validation engine: adaptive Gauss quadrature of the raw
// covariance integrands (the three lemma integrals plus the F and
// (s1+s2)^{-5/2} auxiliaries).  Deliberately independent of the closed forms
// in kernels.hpp -- only the printed integrand definitions are shared.
//
// All integrands here depend on s1+s2 only; they are still integrated as
// honest 2-D functions over the time rectangle.  The integrable singularity
// at s1+s2 -> 0 is handled by adaptive bisection toward the corner.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <queue>
#include <random>
#include <string>
#include <vector>

#include "powvar/kernels.hpp"
#include "powvar/params.hpp"

namespace powvar::oracle {

struct QuadResult {
    double value = 0.0;
    double est_error = 0.0;
    long cells = 0;
};

namespace qdetail {

struct GaussRule {
    std::vector<double> x, w;
};

// Gauss-Legendre nodes on [-1,1] by Newton iteration on P_n.
inline GaussRule make_rule(int n) {
    GaussRule r;
    r.x.resize(n);
    r.w.resize(n);
    for (int i = 0; i < (n + 1) / 2; ++i) {
        double xi = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = xi;
            for (int k = 2; k <= n; ++k) {
                const double p2 = ((2.0 * k - 1.0) * xi * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            dp = n * (xi * p1 - p0) / (xi * xi - 1.0);
            const double dx = p1 / dp;
            xi -= dx;
            if (std::fabs(dx) < 1e-16) break;
        }
        r.x[i] = -xi;
        r.x[n - 1 - i] = xi;
        r.w[i] = r.w[n - 1 - i] = 2.0 / ((1.0 - xi * xi) * dp * dp);
    }
    return r;
}

inline const GaussRule& rule(int n) {
    static const GaussRule g6 = make_rule(6);
    static const GaussRule g12 = make_rule(12);
    static const GaussRule g7 = make_rule(7);
    static const GaussRule g15 = make_rule(15);
    switch (n) {
        case 6: return g6;
        case 7: return g7;
        case 15: return g15;
        default: return g12;
    }
}

template <class F>
long double cell_2d(const F& f, double x0, double x1, double y0, double y1, int n) {
    const GaussRule& g = rule(n);
    const double hx = 0.5 * (x1 - x0), cx = 0.5 * (x1 + x0);
    const double hy = 0.5 * (y1 - y0), cy = 0.5 * (y1 + y0);
    long double sum = 0.0L;
    for (int i = 0; i < n; ++i) {
        long double row = 0.0L;
        const double sx = cx + hx * g.x[i];
        for (int j = 0; j < n; ++j) row += g.w[j] * f(sx, cy + hy * g.x[j]);
        sum += g.w[i] * row;
    }
    return sum * hx * hy;
}

template <class F>
long double cell_1d(const F& f, double a, double b, int n) {
    const GaussRule& g = rule(n);
    const double h = 0.5 * (b - a), c = 0.5 * (b + a);
    long double sum = 0.0L;
    for (int i = 0; i < n; ++i) sum += g.w[i] * f(c + h * g.x[i]);
    return sum * h;
}

struct Cell {
    double x0, x1, y0, y1;
    double value, err;
    bool operator<(const Cell& o) const { return err < o.err; }
};

}  // namespace qdetail

// Adaptive 2-D quadrature over (0,t1) x (0,t2) with bisection refinement.
template <class F>
QuadResult integrate_rect(const F& f, double t1, double t2, double rel_tol,
                          long max_cells = 40000) {
    using qdetail::Cell;
    auto eval = [&](double x0, double x1, double y0, double y1) {
        Cell c{x0, x1, y0, y1, 0.0, 0.0};
        const long double hi = qdetail::cell_2d(f, x0, x1, y0, y1, 12);
        const long double lo = qdetail::cell_2d(f, x0, x1, y0, y1, 6);
        c.value = static_cast<double>(hi);
        c.err = static_cast<double>(std::fabs(hi - lo));
        return c;
    };
    std::priority_queue<Cell> heap;
    long double total = 0.0L, toterr = 0.0L;
    const double mx = 0.5 * t1, my = 0.5 * t2;
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) {
            Cell c = eval(i * mx, (i + 1) * mx, j * my, (j + 1) * my);
            total += c.value;
            toterr += c.err;
            heap.push(c);
        }
    long cells = 4;
    while (toterr > rel_tol * std::max(std::fabs(static_cast<double>(total)), 1e-300) &&
           !heap.empty()) {
        if (cells >= max_cells) {
            throw accuracy_error("integrate_rect: subdivision budget exhausted",
                                 static_cast<double>(total), static_cast<double>(toterr));
        }
        Cell w = heap.top();
        heap.pop();
        total -= w.value;
        toterr -= w.err;
        const double xm = 0.5 * (w.x0 + w.x1), ym = 0.5 * (w.y0 + w.y1);
        const double xs[3] = {w.x0, xm, w.x1};
        const double ys[3] = {w.y0, ym, w.y1};
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j) {
                Cell c = eval(xs[i], xs[i + 1], ys[j], ys[j + 1]);
                total += c.value;
                toterr += c.err;
                heap.push(c);
            }
        cells += 3;
    }
    return {static_cast<double>(total), static_cast<double>(toterr), cells};
}

template <class F>
QuadResult integrate_1d(const F& f, double a, double b, double rel_tol,
                        long max_intervals = 20000) {
    struct Seg {
        double a, b, value, err;
        bool operator<(const Seg& o) const { return err < o.err; }
    };
    auto eval = [&](double lo, double hi) {
        Seg s{lo, hi, 0.0, 0.0};
        const long double v15 = qdetail::cell_1d(f, lo, hi, 15);
        const long double v7 = qdetail::cell_1d(f, lo, hi, 7);
        s.value = static_cast<double>(v15);
        s.err = static_cast<double>(std::fabs(v15 - v7));
        return s;
    };
    std::priority_queue<Seg> heap;
    long double total = 0.0L, toterr = 0.0L;
    const double mid = 0.5 * (a + b);
    for (Seg s : {eval(a, mid), eval(mid, b)}) {
        total += s.value;
        toterr += s.err;
        heap.push(s);
    }
    long n = 2;
    while (toterr > rel_tol * std::max(std::fabs(static_cast<double>(total)), 1e-300) &&
           !heap.empty()) {
        if (n >= max_intervals)
            throw accuracy_error("integrate_1d: subdivision budget exhausted",
                                 static_cast<double>(total), static_cast<double>(toterr));
        Seg w = heap.top();
        heap.pop();
        total -= w.value;
        toterr -= w.err;
        const double m = 0.5 * (w.a + w.b);
        for (Seg s : {eval(w.a, m), eval(m, w.b)}) {
            total += s.value;
            toterr += s.err;
            heap.push(s);
        }
        ++n;
    }
    return {static_cast<double>(total), static_cast<double>(toterr), n};
}

enum class IntegrandId { A1, A2, A3, F_raw, fifth_power };

// Parameters for the raw lemma integrands.  Not every field is used by every
// integrand; see quad_cov.
struct QuadratureSpec {
    IntegrandId id = IntegrandId::A3;
    double t = 1.0, tp = 1.0;       // time rectangle (0,t) x (0,tp)
    double x = 0.0, y = 0.0;        // spatial points
    double h = 0.0;                 // stencil step h (A1/A2) or grid step (F_raw)
    double a = 1.0, b = 0.0;        // stencil weights
    double theta = 0.1, sigma = 0.1;
    double c = 1.0;                 // exponent scale for fifth_power
    int lag = 1;                    // F_raw distance index
    int n_space = 8;                // F_raw grid size
    double gamma = 1.0;             // F_raw offset exponent
    double interval = 1.0;          // F_raw B - A
    double rel_tol = 1e-9;
    long max_subdivisions = 40000;

    void validate() const {
        if (!(rel_tol >= 1e-12 && rel_tol <= 1e-4))
            throw domain_error("QuadratureSpec: rel_tol must lie in [1e-12, 1e-4]");
        if (!(t > 0.0) || !(tp > 0.0))
            throw domain_error("QuadratureSpec: times must be positive");
    }
};

namespace qdetail {

inline long double exp_sq(long double d, long double fourtheta_w) {
    return std::exp(-d * d / fourtheta_w);
}

}  // namespace qdetail

// Adaptive quadrature of the raw integrand named by spec.id over the time
// rectangle.  Values match the printed right-hand sides including prefactors.
inline QuadResult quad_cov(const QuadratureSpec& spec) {
    spec.validate();
    const long double th = spec.theta;
    const long double sg = spec.sigma;
    const long double d = static_cast<long double>(spec.x) - spec.y;
    const long double ab = static_cast<long double>(spec.a) + spec.b;
    const long double hl = spec.h;
    switch (spec.id) {
        case IntegrandId::A1: {
            const long double pref =
                sg * sg /
                (2.0L * std::sqrt(std::numbers::pi_v<long double> * th) * ab * ab * hl * hl);
            auto f = [=](double s1, double s2) -> long double {
                const long double w = static_cast<long double>(s1) + s2;
                const long double ftw = 4.0L * th * w;
                return pref / std::sqrt(w) *
                       (2.0L * qdetail::exp_sq(d, ftw) - qdetail::exp_sq(d + ab * hl, ftw) -
                        qdetail::exp_sq(d - ab * hl, ftw));
            };
            return integrate_rect(f, spec.t, spec.tp, spec.rel_tol, spec.max_subdivisions);
        }
        case IntegrandId::A2: {
            const long double pref =
                sg * sg / (4.0L * std::sqrt(std::numbers::pi_v<long double>) *
                           std::pow(th, 1.5L) * ab);
            const long double al = spec.a, bl = spec.b;
            auto f = [=](double s1, double s2) -> long double {
                const long double w = static_cast<long double>(s1) + s2;
                const long double ftw = 4.0L * th * w;
                return pref / (w * std::sqrt(w)) *
                       (al * qdetail::exp_sq(al * hl, ftw) + bl * qdetail::exp_sq(bl * hl, ftw));
            };
            return integrate_rect(f, spec.t, spec.tp, spec.rel_tol, spec.max_subdivisions);
        }
        case IntegrandId::A3: {
            const long double pref =
                sg * sg / (4.0L * std::sqrt(std::numbers::pi_v<long double>) *
                           std::pow(th, 1.5L));
            auto f = [=](double s1, double s2) -> long double {
                const long double w = static_cast<long double>(s1) + s2;
                return pref / (w * std::sqrt(w)) * qdetail::exp_sq(d, 4.0L * th * w) *
                       (1.0L - d * d / (2.0L * th * w));
            };
            return integrate_rect(f, spec.t, spec.tp, spec.rel_tol, spec.max_subdivisions);
        }
        case IntegrandId::F_raw: {
            const long double ba = spec.interval;
            const long double n = spec.n_space;
            const long double dist = spec.lag * ba / n;
            const long double off = ab * ba / std::pow(n, static_cast<long double>(spec.gamma));
            auto f = [=](double s1, double s2) -> long double {
                const long double w = static_cast<long double>(s1) + s2;
                const long double ftw = 4.0L * th * w;
                return (2.0L * qdetail::exp_sq(dist, ftw) - qdetail::exp_sq(dist + off, ftw) -
                        qdetail::exp_sq(dist - off, ftw)) /
                       std::sqrt(w);
            };
            return integrate_rect(f, spec.t, spec.tp, spec.rel_tol, spec.max_subdivisions);
        }
        case IntegrandId::fifth_power: {
            const long double cl = spec.c;
            auto f = [=](double s1, double s2) -> long double {
                const long double w = static_cast<long double>(s1) + s2;
                return std::exp(-cl / w) / (w * w * std::sqrt(w));
            };
            return integrate_rect(f, spec.t, spec.tp, spec.rel_tol, spec.max_subdivisions);
        }
    }
    throw domain_error("quad_cov: unknown integrand");
}

// ---- composite assemblies (pointwise combinations of the raw integrands,
//      evaluated in long double so the small second differences survive) ----

// E|u_x(t,x+h) - u_x(t,x)|^2 as 2[A3(d=0) - A3(d=h)] under one integral sign.
inline QuadResult quad_ux_increment_variance(double t, double h, const ModelParams& p,
                                             double rel_tol = 1e-10) {
    const long double th = p.theta;
    const long double pref = p.sigma * static_cast<long double>(p.sigma) /
                             (4.0L * std::sqrt(std::numbers::pi_v<long double>) *
                              std::pow(th, 1.5L));
    const long double hl = h;
    auto f = [=](double s1, double s2) -> long double {
        const long double w = static_cast<long double>(s1) + s2;
        const long double q = qdetail::exp_sq(hl, 4.0L * th * w) *
                              (1.0L - hl * hl / (2.0L * th * w));
        return 2.0L * pref / (w * std::sqrt(w)) * (1.0L - q);
    };
    return integrate_rect(f, t, t, rel_tol);
}

// Phi_N(lag, t_l, t_k) as the 2C(lag h) - C((lag+1)h) - C(|lag-1| h)
// combination of A3 integrands.
inline QuadResult quad_ux_increment_cov(int lag, double t_k, double t_l, const ModelParams& p,
                                        const SamplingScheme& scheme, double rel_tol = 1e-10) {
    const long double th = p.theta;
    const long double pref = p.sigma * static_cast<long double>(p.sigma) /
                             (4.0L * std::sqrt(std::numbers::pi_v<long double>) *
                              std::pow(th, 1.5L));
    const long double h = scheme.h();
    const long double d0 = lag * h, dp = (lag + 1) * h, dm = std::fabs(lag - 1.0L) * h;
    auto f = [=](double s1, double s2) -> long double {
        const long double w = static_cast<long double>(s1) + s2;
        const long double ftw = 4.0L * th * w;
        auto q = [&](long double dd) {
            return qdetail::exp_sq(dd, ftw) * (1.0L - dd * dd / (2.0L * th * w));
        };
        return pref / (w * std::sqrt(w)) * (2.0L * q(d0) - q(dp) - q(dm));
    };
    return integrate_rect(f, t_k, t_l, rel_tol);
}

namespace qdetail {

// Nine-term expansion of the Delta-increment product: second difference (in
// the space lag) of the A1 three-term group.
template <class Next>
auto delta_nineterm(long double th, long double d0, long double dp, long double dm,
                    long double off, Next pref) {
    return [=](double s1, double s2) -> long double {
        const long double w = static_cast<long double>(s1) + s2;
        const long double ftw = 4.0L * th * w;
        auto g = [&](long double dd) {
            return 2.0L * exp_sq(dd, ftw) - exp_sq(dd + off, ftw) - exp_sq(dd - off, ftw);
        };
        return pref(w) * (2.0L * g(d0) - g(dp) - g(dm));
    };
}

}  // namespace qdetail

// tildePhi_N(lag, t_k, t_l) assembled from A1 quadratures.
inline QuadResult quad_delta_increment_cov(int lag, double t_k, double t_l,
                                           const ModelParams& p, const SamplingScheme& scheme,
                                           double rel_tol = 1e-10) {
    const long double th = p.theta;
    const long double h = scheme.h();
    const long double s =
        (scheme.stencil_a + scheme.stencil_b) * static_cast<long double>(scheme.h_gamma());
    const long double pref0 = p.sigma * static_cast<long double>(p.sigma) /
                              (2.0L * std::sqrt(std::numbers::pi_v<long double> * th) * s * s);
    auto f = qdetail::delta_nineterm(th, lag * h, (lag + 1) * h, std::fabs(lag - 1.0L) * h, s,
                                     [=](long double w) { return pref0 / std::sqrt(w); });
    return integrate_rect(f, t_k, t_l, rel_tol);
}

// E|Delta u(t,x+h) - Delta u(t,x)|^2 = 2[A1(d=0) - A1(d=h)].
inline QuadResult quad_delta_increment_variance(double t, const ModelParams& p,
                                                const SamplingScheme& scheme,
                                                double rel_tol = 1e-10) {
    const long double th = p.theta;
    const long double h = scheme.h();
    const long double s =
        (scheme.stencil_a + scheme.stencil_b) * static_cast<long double>(scheme.h_gamma());
    const long double pref0 = p.sigma * static_cast<long double>(p.sigma) /
                              (2.0L * std::sqrt(std::numbers::pi_v<long double> * th) * s * s);
    auto f = [=](double s1, double s2) -> long double {
        const long double w = static_cast<long double>(s1) + s2;
        const long double ftw = 4.0L * th * w;
        auto g = [&](long double dd) {
            return 2.0L * qdetail::exp_sq(dd, ftw) - qdetail::exp_sq(dd + s, ftw) -
                   qdetail::exp_sq(dd - s, ftw);
        };
        return 2.0L * pref0 / std::sqrt(w) * (g(0.0L) - g(h));
    };
    return integrate_rect(f, t, t, rel_tol);
}

inline QuadResult quad_gamma_half(double x, double rel_tol = 1e-12) {
    auto f = [](double sd) -> long double {
        const long double s = sd;
        return std::exp(-1.0L / s) / (s * std::sqrt(s));
    };
    return integrate_1d(f, 0.0, x, rel_tol);
}

// ---- randomized closed-form verification ----

struct FormulaCheck {
    std::string formula;
    int trials = 0;
    double max_rel_err = 0.0;
    double tolerance = 0.0;
    bool pass = true;
};

struct VerifyReport {
    std::vector<FormulaCheck> checks;
    bool pass = true;
};

namespace qdetail {

inline double rel_err(double got, double want) {
    const double scale = std::max(std::fabs(want), std::fabs(got));
    if (scale == 0.0) return 0.0;
    return std::fabs(got - want) / scale;
}

}  // namespace qdetail

// Samples random admissible parameter tuples and compares every kernels
// closed form against its quadrature counterpart.  `tolerance` gates the
// double-integral formulas; single integrals are gated 100x tighter.
inline VerifyReport verify_closed_forms(double tolerance = 1e-6, int trials = 100,
                                        std::uint64_t seed = 20240901u) {
    std::mt19937_64 rng(seed);
    auto unif = [&](double lo, double hi) {
        return std::uniform_real_distribution<double>(lo, hi)(rng);
    };
    auto unif_int = [&](int lo, int hi) {
        return std::uniform_int_distribution<int>(lo, hi)(rng);
    };
    const double tol_single = tolerance * 1e-2;
    FormulaCheck gh{"gamma_half_integral", 0, 0.0, tol_single, true};
    FormulaCheck r5{"rect_integral_5half", 0, 0.0, tolerance, true};
    FormulaCheck upc{"ux_pointwise_cov", 0, 0.0, tolerance, true};
    FormulaCheck uiv{"ux_increment_variance", 0, 0.0, tolerance, true};
    FormulaCheck uic{"ux_increment_cov", 0, 0.0, tolerance, true};
    FormulaCheck uic0{"ux_increment_cov_lag0_vs_variance", 0, 0.0, 1e-10, true};
    FormulaCheck div{"delta_u_increment_variance", 0, 0.0, tolerance, true};
    FormulaCheck dl0{"delta_u_increment_cov_lag0", 0, 0.0, tolerance, true};
    FormulaCheck dic{"delta_u_increment_cov", 0, 0.0, tolerance, true};

    for (int trial = 0; trial < trials; ++trial) {
        const bool degenerate = trial % 10 == 0;  // force t = t', x = y coverage
        const double theta = unif(0.05, 1.5);
        const double sigma = unif(0.3, 2.0);
        const ModelParams p(theta, sigma);
        const double t1 = unif(0.05, 2.0);
        const double t2 = degenerate ? t1 : unif(0.05, 2.0);

        {
            const double x = unif(0.05, 30.0);
            gh.max_rel_err = std::max(
                gh.max_rel_err,
                qdetail::rel_err(gamma_half_integral(x), quad_gamma_half(x).value));
            ++gh.trials;
        }
        {
            const double c = unif(0.1, 4.0);
            QuadratureSpec s;
            s.id = IntegrandId::fifth_power;
            s.t = t1;
            s.tp = t2;
            s.c = c;
            s.rel_tol = 1e-10;
            r5.max_rel_err = std::max(
                r5.max_rel_err, qdetail::rel_err(rect_integral_5half(t1, t2, c), quad_cov(s).value));
            ++r5.trials;
        }
        {
            const double x = unif(-1.0, 1.0);
            const double y = degenerate ? x : unif(-1.0, 1.0);
            QuadratureSpec s;
            s.id = IntegrandId::A3;
            s.t = t1;
            s.tp = t2;
            s.x = x;
            s.y = y;
            s.theta = theta;
            s.sigma = sigma;
            s.rel_tol = 1e-10;
            upc.max_rel_err =
                std::max(upc.max_rel_err, qdetail::rel_err(ux_pointwise_cov(t1, t2, x, y, p),
                                                           quad_cov(s).value));
            ++upc.trials;
        }

        SamplingScheme scheme;
        scheme.a_end = unif(-1.0, 0.0);
        scheme.b_end = scheme.a_end + unif(0.5, 2.0);
        scheme.n_space = unif_int(8, 48);
        scheme.times = {std::min(t1, t2)};
        if (!degenerate && t2 != t1) scheme.times.push_back(std::max(t1, t2));
        scheme.gamma = degenerate ? 1.0 : unif(1.0, 2.0);
        scheme.stencil_a = unif(0.0, 1.0);
        scheme.stencil_b = unif(0.0, 1.0);
        if (scheme.stencil_a + scheme.stencil_b < 0.2) scheme.stencil_a += 0.5;
        scheme.validate();

        {
            uiv.max_rel_err = std::max(
                uiv.max_rel_err,
                qdetail::rel_err(ux_increment_variance(t1, scheme.h(), p),
                                 quad_ux_increment_variance(t1, scheme.h(), p).value));
            ++uiv.trials;
        }
        {
            const int lag = unif_int(0, 5);
            uic.max_rel_err = std::max(
                uic.max_rel_err,
                qdetail::rel_err(ux_increment_cov(lag, t1, t2, p, scheme),
                                 quad_ux_increment_cov(lag, t1, t2, p, scheme).value));
            ++uic.trials;
        }
        {
            uic0.max_rel_err = std::max(
                uic0.max_rel_err,
                qdetail::rel_err(ux_increment_cov(0, t1, t1, p, scheme),
                                 ux_increment_variance(t1, scheme.h(), p)));
            ++uic0.trials;
        }
        {
            div.max_rel_err = std::max(
                div.max_rel_err,
                qdetail::rel_err(delta_u_increment_variance(t1, p, scheme),
                                 quad_delta_increment_variance(t1, p, scheme).value));
            ++div.trials;
        }
        {
            dl0.max_rel_err = std::max(
                dl0.max_rel_err,
                qdetail::rel_err(delta_u_increment_cov_lag0(t1, t2, p, scheme),
                                 quad_delta_increment_cov(0, t1, t2, p, scheme).value));
            ++dl0.trials;
        }
        {
            const int lag = unif_int(1, 5);
            dic.max_rel_err = std::max(
                dic.max_rel_err,
                qdetail::rel_err(delta_u_increment_cov(lag, t1, t2, p, scheme),
                                 quad_delta_increment_cov(lag, t1, t2, p, scheme).value));
            ++dic.trials;
        }
    }
    VerifyReport rep;
    rep.checks = {gh, r5, upc, uiv, uic, uic0, div, dl0, dic};
    for (FormulaCheck& c : rep.checks) {
        c.pass = c.max_rel_err <= c.tolerance;
        rep.pass = rep.pass && c.pass;
    }
    return rep;
}

}  // namespace powvar::oracle
