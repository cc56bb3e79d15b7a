#pragma once

// Special-function layer shared by the covariance kernels: the truncated
// integrals of s^{-3/2} e^{-1/s} and (s1+s2)^{-5/2} e^{-1/(s1+s2)}, the lower
// incomplete gamma of order 3/2, and the inverse standard-normal CDF.
//
// Everything here is evaluated in long double; the kernels combine terms that
// cancel by many orders of magnitude, so the extra mantissa bits matter.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "powvar/errors.hpp"

namespace powvar {

inline constexpr double kSqrtPi = 1.7724538509055160273;
inline constexpr long double kSqrtPiL = 1.772453850905516027298L;

namespace detail {

// Lower incomplete gamma g(3/2, z) = int_0^z sqrt(u) e^{-u} du.
// Series for small z avoids the cancellation in (sqrt(pi)/2) erf(sqrt(z)) -
// sqrt(z) e^{-z}; closed form elsewhere.
inline long double lower_gamma_3half(long double z) {
    if (z <= 0.0L) return 0.0L;
    if (z < 1.0L) {
        // g(a,z) = z^a e^{-z} sum_n z^n / (a (a+1) ... (a+n)), a = 3/2
        long double term = 1.0L / 1.5L;
        long double sum = term;
        for (int n = 1; n < 80; ++n) {
            term *= z / (1.5L + n);
            sum += term;
            if (term < sum * 1e-22L) break;
        }
        return std::pow(z, 1.5L) * std::exp(-z) * sum;
    }
    return 0.5L * kSqrtPiL * std::erf(std::sqrt(z)) - std::sqrt(z) * std::exp(-z);
}

// G(x) = int_0^x s^{-3/2} e^{-1/s} ds = sqrt(pi) erfc(x^{-1/2})  (u = 1/s).
inline long double gamma_half_integral_l(long double x) {
    if (x <= 0.0L) return 0.0L;
    return kSqrtPiL * std::erfc(1.0L / std::sqrt(x));
}

// R(T1,T2) = int_0^{T2} int_0^{T1} (s1+s2)^{-5/2} e^{-1/(s1+s2)} ds1 ds2.
// Reduced along diagonals w = s1+s2: the cross-section has length
// min(w, T1, T2, T1+T2-w), giving three 1-D pieces expressed through G and
// the incomplete gamma of order 3/2. R -> sqrt(pi) as T1,T2 -> inf.
inline long double rect_5half_unit(long double t1, long double t2) {
    if (!(t1 > 0.0L) || !(t2 > 0.0L)) return 0.0L;
    const long double lo = std::min(t1, t2);
    const long double hi = std::max(t1, t2);
    const long double both = lo + hi;
    // int w^{-5/2} e^{-1/w} dw over [p,q] = g(3/2, 1/p) - g(3/2, 1/q)
    const long double mid = lo * (lower_gamma_3half(1.0L / lo) - lower_gamma_3half(1.0L / hi));
    const long double top = both * (lower_gamma_3half(1.0L / hi) - lower_gamma_3half(1.0L / both));
    return gamma_half_integral_l(lo) + mid + top + gamma_half_integral_l(hi) -
           gamma_half_integral_l(both);
}

// I1(t, t', c) = int_0^{t'} int_0^t (s1+s2)^{-1/2} e^{-c/(s1+s2)} ds1 ds2,
// in the integrated-by-parts form (exponential blocks + G + R terms).
inline long double lemma_int_half(long double t, long double tp, long double c) {
    if (!(t > 0.0L) || !(tp > 0.0L)) return 0.0L;
    const long double ts = t + tp;
    if (c <= 0.0L)
        return (4.0L / 3.0L) *
               (std::pow(ts, 1.5L) - std::pow(t, 1.5L) - std::pow(tp, 1.5L));
    const long double es = std::exp(-c / ts);
    const long double et = std::exp(-c / t);
    const long double ep = std::exp(-c / tp);
    const long double c32 = c * std::sqrt(c);
    // grouped so evaluation is exactly symmetric under swapping t and tp
    long double v = (4.0L / 3.0L) * (std::pow(ts, 1.5L) * es -
                                     (std::pow(t, 1.5L) * et + std::pow(tp, 1.5L) * ep));
    v += (16.0L * c / 3.0L) *
         (std::sqrt(ts) * es - (std::sqrt(t) * et + std::sqrt(tp) * ep));
    v -= (16.0L * c32 / 3.0L) *
         (gamma_half_integral_l(ts / c) -
          (gamma_half_integral_l(t / c) + gamma_half_integral_l(tp / c)));
    v -= 4.0L * c32 * rect_5half_unit(t / c, tp / c);
    return v;
}

inline void require_finite_positive(double x, const char* what) {
    if (!std::isfinite(x) || x <= 0.0)
        throw domain_error(std::string(what) + " must be finite and positive");
}

}  // namespace detail

// int_0^x s^{-3/2} e^{-1/s} ds; increasing in x, bounded by sqrt(pi).
inline double gamma_half_integral(double x) {
    detail::require_finite_positive(x, "gamma_half_integral: x");
    return static_cast<double>(detail::gamma_half_integral_l(x));
}

// int_0^{t2} int_0^{t1} (s1+s2)^{-5/2} e^{-c/(s1+s2)} ds1 ds2.  Rescaling
// s_i = c u_i reduces to the unit-exponent rectangle integral.
inline double rect_integral_5half(double t1, double t2, double c) {
    detail::require_finite_positive(t1, "rect_integral_5half: t1");
    detail::require_finite_positive(t2, "rect_integral_5half: t2");
    detail::require_finite_positive(c, "rect_integral_5half: c");
    return static_cast<double>(detail::rect_5half_unit(t1 / c, t2 / c) /
                               std::sqrt(static_cast<long double>(c)));
}

// Inverse standard-normal CDF: Acklam's rational approximation polished with
// Halley steps against the erfc-based CDF (relative error ~1e-15).
inline double normal_icdf(double p) {
    if (!(p > 0.0) || !(p < 1.0))
        throw domain_error("normal_icdf: p must lie strictly in (0,1)");
    static constexpr double a[6] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                    -2.759285104469687e+02, 1.383577518672690e+02,
                                    -3.066479806614716e+01, 2.506628277459239e+00};
    static constexpr double b[5] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                    -1.556989798598866e+02, 6.680131188771972e+01,
                                    -1.328068155288572e+01};
    static constexpr double c[6] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                    -2.400758277161838e+00, -2.549732539343734e+00,
                                    4.374664141464968e+00,  2.938163982698783e+00};
    static constexpr double d[4] = {7.784695709041462e-03, 3.224671290700398e-01,
                                    2.445134137142996e+00, 3.754408661907416e+00};
    constexpr double p_low = 0.02425;
    double x;
    if (p < p_low) {
        const double q = std::sqrt(-2.0 * std::log(p));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    } else if (p <= 1.0 - p_low) {
        const double q = p - 0.5;
        const double r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    } else {
        const double q = std::sqrt(-2.0 * std::log1p(-p));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    for (int it = 0; it < 2; ++it) {
        const double e = 0.5 * std::erfc(-x / std::numbers::sqrt2) - p;
        const double u = e * std::sqrt(2.0 * std::numbers::pi) * std::exp(0.5 * x * x);
        x -= u / (1.0 + 0.5 * x * u);
    }
    return x;
}

// Standard-normal CDF.
inline double normal_cdf(double x) {
    return 0.5 * std::erfc(-x / std::numbers::sqrt2);
}

}  // namespace powvar
