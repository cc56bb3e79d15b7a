#include <doctest.h>

#include <cmath>
#include <random>

#include "powvar/oracle.hpp"
#include "powvar/special.hpp"

using namespace powvar;

TEST_CASE("gamma_half_integral limits and quadrature") {
    // tail toward the full integral sqrt(pi): deviation at x is
    // sqrt(pi) erf(x^{-1/2}) ~ 2 x^{-1/2}
    CHECK(gamma_half_integral(1e12) == doctest::Approx(kSqrtPi).epsilon(1.5e-6));
    CHECK(std::fabs(gamma_half_integral(1e13) - kSqrtPi) < 1e-6);
    CHECK(gamma_half_integral(1e-8) < 1e-30);  // x -> 0+ empty integral

    auto q = oracle::quad_gamma_half(1.0);
    CHECK(gamma_half_integral(1.0) ==
          doctest::Approx(q.value).epsilon(1e-10));

    CHECK_THROWS_AS(gamma_half_integral(0.0), domain_error);
    CHECK_THROWS_AS(gamma_half_integral(-1.0), domain_error);
    CHECK_THROWS_AS(gamma_half_integral(std::nan("")), domain_error);
}

TEST_CASE("gamma_half_integral is increasing and bounded by sqrt(pi)") {
    double prev = 0.0;
    for (double x = 0.01; x < 1e6; x *= 1.7) {
        const double v = gamma_half_integral(x);
        CHECK(v >= prev);
        CHECK(v <= kSqrtPi);
        prev = v;
    }
}

TEST_CASE("rect_integral_5half limits, symmetry, quadrature") {
    // full-plane value sqrt(pi); convergence is ~1.7/sqrt(T)
    CHECK(rect_integral_5half(1e13, 1e13, 1.0) == doctest::Approx(kSqrtPi).epsilon(1e-6));

    oracle::QuadratureSpec s;
    s.id = oracle::IntegrandId::fifth_power;
    s.t = 1.0;
    s.tp = 1.0;
    s.c = 1.0;
    s.rel_tol = 1e-10;
    CHECK(rect_integral_5half(1.0, 1.0, 1.0) ==
          doctest::Approx(oracle::quad_cov(s).value).epsilon(1e-8));

    // exact symmetry in (t1, t2)
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(0.05, 3.0);
    for (int i = 0; i < 50; ++i) {
        const double t1 = u(rng), t2 = u(rng), c = u(rng);
        CHECK(rect_integral_5half(t1, t2, c) == rect_integral_5half(t2, t1, c));
    }
    CHECK_THROWS_AS(rect_integral_5half(0.0, 1.0, 1.0), domain_error);
    CHECK_THROWS_AS(rect_integral_5half(1.0, 1.0, 0.0), domain_error);
}

TEST_CASE("normal_icdf matches reference quantiles") {
    CHECK(normal_icdf(0.5) == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(normal_icdf(0.975) == doctest::Approx(1.9599639845400545).epsilon(1e-12));
    CHECK(normal_icdf(0.84134474606854293) == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(normal_icdf(1e-10) == doctest::Approx(-6.3613409024040557).epsilon(1e-10));
    // round trip through the CDF
    for (double p : {1e-6, 0.01, 0.2, 0.5, 0.77, 0.999, 1.0 - 1e-9})
        CHECK(normal_cdf(normal_icdf(p)) == doctest::Approx(p).epsilon(1e-12));
    CHECK_THROWS_AS(normal_icdf(0.0), domain_error);
    CHECK_THROWS_AS(normal_icdf(1.0), domain_error);
}

TEST_CASE("lower incomplete gamma 3/2: series vs closed form agree") {
    for (double z : {1e-6, 1e-3, 0.3, 0.999, 1.001, 2.0, 10.0}) {
        const long double series = [&] {
            long double term = 1.0L / 1.5L, sum = term;
            for (int n = 1; n < 200; ++n) {
                term *= z / (1.5L + n);
                sum += term;
                if (term < sum * 1e-22L) break;
            }
            return std::pow((long double)z, 1.5L) * std::exp((long double)-z) * sum;
        }();
        CHECK(static_cast<double>(detail::lower_gamma_3half(z)) ==
              doctest::Approx(static_cast<double>(series)).epsilon(1e-14));
    }
    // gamma(3/2, inf) = sqrt(pi)/2
    CHECK(static_cast<double>(detail::lower_gamma_3half(60.0)) ==
          doctest::Approx(kSqrtPi / 2).epsilon(1e-14));
}
