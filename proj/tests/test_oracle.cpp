#include <doctest.h>

#include <cmath>

#include "powvar/oracle.hpp"

using namespace powvar;
using oracle::IntegrandId;
using oracle::QuadratureSpec;

namespace {
const ModelParams kP(0.1, 0.1);
}

TEST_CASE("quad_cov A3 at x=y, t=t' matches the elementary rectangle integral") {
    // int over (0,t)^2 of (s1+s2)^{-3/2} = 4(2-sqrt(2)) sqrt(t)
    for (double t : {0.2, 1.0}) {
        QuadratureSpec s;
        s.id = IntegrandId::A3;
        s.t = t;
        s.tp = t;
        s.x = 0.7;
        s.y = 0.7;
        s.theta = kP.theta;
        s.sigma = kP.sigma;
        s.rel_tol = 1e-10;
        const double want = 4.0 * (2.0 - std::sqrt(2.0)) * std::sqrt(t) * kP.sigma *
                            kP.sigma / (4.0 * kSqrtPi * std::pow(kP.theta, 1.5));
        const auto q = oracle::quad_cov(s);
        CHECK(q.value == doctest::Approx(want).epsilon(1e-9));
        CHECK(q.est_error <= 1e-9 * std::fabs(q.value));
    }
}

TEST_CASE("quad_cov A1 vanishes for distances far beyond the heat scale") {
    QuadratureSpec base;
    base.id = IntegrandId::A1;
    base.t = 0.2;
    base.tp = 0.2;
    base.h = 0.01;
    base.a = 1.0;
    base.b = 0.0;
    base.theta = kP.theta;
    base.sigma = kP.sigma;
    base.rel_tol = 1e-9;
    QuadratureSpec near = base;
    near.x = 0.0;
    near.y = 0.0;
    const double scale = std::fabs(oracle::quad_cov(near).value);
    QuadratureSpec far = base;
    far.x = 40.0;  // distance >> sqrt(theta t) ~ 0.14
    far.y = 0.0;
    CHECK(std::fabs(oracle::quad_cov(far).value) <= 1e-12 * scale);
}

TEST_CASE("quad_cov A2: (a+b) * value / sigma^2 is symmetric in (a,b)") {
    auto scaled = [&](double a, double b) {
        QuadratureSpec s;
        s.id = IntegrandId::A2;
        s.t = 0.4;
        s.tp = 0.7;
        s.h = 0.05;
        s.a = a;
        s.b = b;
        s.theta = kP.theta;
        s.sigma = kP.sigma;
        s.rel_tol = 1e-10;
        return (a + b) * oracle::quad_cov(s).value / (kP.sigma * kP.sigma);
    };
    CHECK(scaled(1.0, 0.25) == doctest::Approx(scaled(0.25, 1.0)).epsilon(1e-9));
    CHECK(scaled(0.6, 0.0) == doctest::Approx(scaled(0.0, 0.6)).epsilon(1e-9));
}

TEST_CASE("error estimates are honest under tolerance halving") {
    for (double tol : {1e-6, 1e-8}) {
        QuadratureSpec s;
        s.id = IntegrandId::A3;
        s.t = 0.3;
        s.tp = 0.9;
        s.x = 0.1;
        s.y = 0.0;
        s.theta = kP.theta;
        s.sigma = kP.sigma;
        s.rel_tol = tol;
        const auto coarse = oracle::quad_cov(s);
        s.rel_tol = tol / 2.0;
        const auto fine = oracle::quad_cov(s);
        CHECK(std::fabs(fine.value - coarse.value) <= coarse.est_error + 1e-300);
    }
}

TEST_CASE("subdivision budget exhaustion raises accuracy_error with best value") {
    QuadratureSpec s;
    s.id = IntegrandId::A3;
    s.t = 0.3;
    s.tp = 0.3;
    s.x = 0.0;  // singular diagonal
    s.y = 0.0;
    s.theta = kP.theta;
    s.sigma = kP.sigma;
    s.rel_tol = 1e-12;
    s.max_subdivisions = 8;
    try {
        oracle::quad_cov(s);
        FAIL("expected accuracy_error");
    } catch (const accuracy_error& e) {
        CHECK(std::isfinite(e.best_value));
        CHECK(e.est_error > 0.0);
    }
}

TEST_CASE("QuadratureSpec validation") {
    QuadratureSpec s;
    s.rel_tol = 1e-13;
    CHECK_THROWS_AS(s.validate(), domain_error);
    s.rel_tol = 1e-3;
    CHECK_THROWS_AS(s.validate(), domain_error);
    s.rel_tol = 1e-8;
    s.t = -1.0;
    CHECK_THROWS_AS(s.validate(), domain_error);
}

TEST_CASE("reduced randomized verification corpus passes") {
    const auto rep = oracle::verify_closed_forms(1e-6, 12, 7u);
    for (const auto& c : rep.checks) {
        INFO(c.formula, " max_rel_err=", c.max_rel_err);
        CHECK(c.pass);
        CHECK(c.trials == 12);
    }
    CHECK(rep.pass);
}
