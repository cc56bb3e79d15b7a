#include <doctest.h>

#include <cmath>
#include <numbers>

#include "powvar/estimators.hpp"
#include "powvar/simulate.hpp"

using namespace powvar;

namespace {
const ModelParams kP(0.1, 0.1);
constexpr double kPi = std::numbers::pi;

FieldSample constant_increment_field(const SamplingScheme& s, double value) {
    FieldSample f;
    f.kind = FieldKind::ux_increments;
    f.params = kP;
    f.scheme = s;
    f.values = Eigen::MatrixXd::Constant(s.n_time(), s.n_space, value);
    return f;
}

std::vector<double> uniform_grid(double a, double b, int n) {
    std::vector<double> xs(static_cast<std::size_t>(n) + 1);
    for (int i = 0; i <= n; ++i) xs[i] = a + (b - a) * i / n;
    return xs;
}
}  // namespace

TEST_CASE("quadratic_variation basics") {
    std::vector<double> zeros(10, 0.0);
    CHECK(quadratic_variation(zeros) == 0.0);
    // increments of x_i = A + i (B-A)/N are constant (B-A)/N
    const int n = 64;
    std::vector<double> incs(n, 1.0 / n);
    CHECK(quadratic_variation(incs) == doctest::Approx(1.0 / n).epsilon(1e-15));
    CHECK_THROWS_AS(quadratic_variation(std::span<const double>{}), domain_error);
}

TEST_CASE("delta_h_apply: linear, constant, quadratic") {
    const double h = 0.01, a = 1.0, b = 0.0;
    std::vector<double> xs = {0.1, 0.2, 0.3};
    std::vector<double> uy(3), uz(3);
    // u(x) = 3x: forward quotient = 3 everywhere
    for (int i = 0; i < 3; ++i) {
        uy[i] = 3.0 * (xs[i] + a * h);
        uz[i] = 3.0 * (xs[i] - b * h);
    }
    for (double v : delta_h_apply(uy, uz, a, b, h)) CHECK(v == doctest::Approx(3.0).epsilon(1e-13));
    // constant
    std::fill(uy.begin(), uy.end(), 5.0);
    std::fill(uz.begin(), uz.end(), 5.0);
    for (double v : delta_h_apply(uy, uz, a, b, h)) CHECK(v == 0.0);
    // u(x) = x^2 with a=1,b=0: (u(x+h)-u(x))/h = 2x + h
    for (int i = 0; i < 3; ++i) {
        uy[i] = (xs[i] + h) * (xs[i] + h);
        uz[i] = xs[i] * xs[i];
    }
    const auto q = delta_h_apply(uy, uz, a, b, h);
    for (int i = 0; i < 3; ++i) CHECK(q[i] == doctest::Approx(2.0 * xs[i] + h).epsilon(1e-11));
    CHECK_THROWS_AS(delta_h_apply(uy, uz, 0.0, 0.0, h), domain_error);
    CHECK_THROWS_AS(delta_h_apply(uy, uz, 1.0, 0.0, 0.0), domain_error);
    uz.pop_back();
    CHECK_THROWS_AS(delta_h_apply(uy, uz, 1.0, 0.0, h), domain_error);
}

TEST_CASE("estimate_from_ux: plug-in fixed point is exact") {
    SamplingScheme s = SamplingScheme::uniform_times(0.0, 1.0, 128, 3, 0.6);
    const double inc = std::sqrt(kP.sigma * kP.sigma / (kP.theta * kP.theta * 128.0));
    const auto f = constant_increment_field(s, inc);
    const auto sig = estimate_from_ux(f, Known::theta, kP.theta);
    CHECK(sig.raw_value == doctest::Approx(kP.sigma * kP.sigma).epsilon(1e-14));
    CHECK(sig.bias_corrected_value == sig.raw_value);
    CHECK(sig.mu == 1.0);
    CHECK(sig.estimator_id == EstimatorId::sigma2_ux);
    const auto th = estimate_from_ux(f, Known::sigma, kP.sigma);
    CHECK(th.raw_value == doctest::Approx(kP.theta * kP.theta).epsilon(1e-14));
    CHECK(th.estimator_id == EstimatorId::theta2_ux);
}

TEST_CASE("estimate_from_ux: doubling sigma scales the estimate by 4 on the same seed") {
    SamplingScheme s = SamplingScheme::uniform_times(0.0, 1.0, 64, 2, 0.4);
    const auto f1 = simulate_ux_increments(ModelParams(0.1, 0.1), s, 777);
    const auto f2 = simulate_ux_increments(ModelParams(0.1, 0.2), s, 777);
    const double v1 = estimate_from_ux(f1, Known::theta, 0.1).raw_value;
    const double v2 = estimate_from_ux(f2, Known::theta, 0.1).raw_value;
    CHECK(v2 == doctest::Approx(4.0 * v1).epsilon(1e-13));
}

TEST_CASE("estimate_from_ux on simulated fields: sigma within 5% for 19/20 seeds") {
    SamplingScheme s = SamplingScheme::uniform_times(0.0, 1.0, 1024, 1, 0.2);
    auto sim = LineSimulator::prepare(kP, s, FieldKind::ux_increments);
    int good = 0;
    for (int r = 0; r < 20; ++r) {
        const auto rep = estimate_from_ux(sim.draw(2025, r), Known::theta, kP.theta);
        if (std::fabs(std::sqrt(rep.bias_corrected_value) - 0.1) <= 0.005) ++good;
    }
    CHECK(good >= 19);
}

TEST_CASE("degenerate samples: theta estimators error, sigma estimators return 0") {
    SamplingScheme s = SamplingScheme::uniform_times(0.0, 1.0, 16, 1, 0.2);
    const auto f = constant_increment_field(s, 0.0);
    CHECK_THROWS_AS(estimate_from_ux(f, Known::sigma, 0.1), degenerate_sample_error);
    CHECK(estimate_from_ux(f, Known::theta, 0.1).raw_value == 0.0);

    // u linear in x: all second differences vanish
    FieldSample ulin;
    ulin.kind = FieldKind::u_values;
    ulin.params = kP;
    ulin.scheme = s;
    ulin.values.resize(1, 17);
    for (int i = 0; i <= 16; ++i) ulin.values(0, i) = 2.0 + 3.0 * s.x(i);
    CHECK_THROWS_AS(estimate_from_u_seconddiff(ulin, Known::sigma, 0.1, true),
                    degenerate_sample_error);
    CHECK(estimate_from_u_seconddiff(ulin, Known::theta, 0.1, true).raw_value == 0.0);
}

TEST_CASE("estimate_from_u_seconddiff needs at least N = 3") {
    SamplingScheme s = SamplingScheme::uniform_times(0.0, 1.0, 2, 1, 0.2);
    FieldSample f;
    f.kind = FieldKind::u_values;
    f.params = kP;
    f.scheme = s;
    f.values = Eigen::MatrixXd::Zero(1, 3);
    CHECK_THROWS_AS(estimate_from_u_seconddiff(f, Known::theta, 0.1, true), domain_error);
}

TEST_CASE("spectral fields: corrected sigma-check within 5%, raw shows sqrt(2/3) bias") {
    const int n = 1024, k_modes = 10000, m = 50;
    std::vector<double> times(m);
    for (int j = 1; j <= m; ++j) times[j - 1] = static_cast<double>(j) / m;
    SpectralBasis basis = SpectralBasis::build(uniform_grid(0.0, kPi, n), k_modes);
    int good = 0;
    long double raw_mean = 0.0L;
    for (int r = 0; r < 20; ++r) {
        const auto f = simulate_spectral_bounded(kP, times, basis, 2121, r);
        const auto rep = estimate_from_u_seconddiff(f, Known::theta, kP.theta, true);
        const double corrected = std::sqrt(rep.bias_corrected_value);
        if (std::fabs(corrected - 0.1) <= 0.005) ++good;
        raw_mean += std::sqrt(rep.raw_value);
        CHECK(rep.mu == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
    }
    CHECK(good >= 19);
    // uncorrected level estimate sits near sqrt(2/3) * 0.1 ~ 0.08165
    const double bias_target = std::sqrt(2.0 / 3.0) * 0.1;
    CHECK(static_cast<double>(raw_mean / 20.0) ==
          doctest::Approx(bias_target).epsilon(0.05));
}

TEST_CASE("estimate_from_delta_u: regimes, sigma = 0, raw 5/12 bias") {
    // gamma = 2: mu = 1, corrected and raw coincide
    SamplingScheme s2 = SamplingScheme::uniform_times(0.0, 1.0, 32, 1, 0.2, 2.0, 0.5, 0.5);
    const auto f2 = simulate_delta_u_increments(kP, s2, 500);
    const auto r2 = estimate_from_delta_u(f2, Known::theta, kP.theta, true);
    CHECK(r2.mu == 1.0);
    CHECK(r2.bias_corrected_value == r2.raw_value);

    const ModelParams zero(0.1, 0.0);
    SamplingScheme s1 = SamplingScheme::uniform_times(0.0, 1.0, 32, 1, 0.2, 1.0, 1.0, 1.0);
    const auto f0 = simulate_delta_u_increments(zero, s1, 1);
    CHECK(estimate_from_delta_u(f0, Known::theta, 0.1, true).raw_value == 0.0);

    // a = b = 1, gamma = 1: raw sigma~^2 concentrates near (5/12) sigma^2
    SamplingScheme sb = SamplingScheme::uniform_times(0.0, 1.0, 1024, 1, 0.2, 1.0, 1.0, 1.0);
    auto sim = LineSimulator::prepare(kP, sb, FieldKind::delta_u_increments);
    long double mean = 0.0L;
    for (int r = 0; r < 50; ++r)
        mean += estimate_from_delta_u(sim.draw(808, r), Known::theta, kP.theta, false)
                    .raw_value;
    CHECK(static_cast<double>(mean / 50.0) ==
          doctest::Approx(5.0 / 12.0 * kP.sigma * kP.sigma).epsilon(0.10));
}

TEST_CASE("reciprocity, scale equivariance, bias-correction identity") {
    SamplingScheme s = SamplingScheme::uniform_times(0.0, 1.0, 64, 2, 0.4, 1.0, 1.0, 0.0);
    const auto field = simulate_ux_increments(kP, s, 1301);

    const auto th = estimate_from_ux(field, Known::sigma, kP.sigma);
    const auto sg = estimate_from_ux(field, Known::theta, kP.theta);
    CHECK(th.raw_value * sg.raw_value ==
          doctest::Approx(kP.theta * kP.theta * kP.sigma * kP.sigma).epsilon(1e-13));

    FieldSample scaled = field;
    scaled.values *= 3.0;
    CHECK(estimate_from_ux(scaled, Known::theta, kP.theta).raw_value ==
          doctest::Approx(9.0 * sg.raw_value).epsilon(1e-13));
    CHECK(estimate_from_ux(scaled, Known::sigma, kP.sigma).raw_value ==
          doctest::Approx(th.raw_value / 9.0).epsilon(1e-13));

    const auto fd = simulate_delta_u_increments(kP, s, 77);
    const auto td = estimate_from_delta_u(fd, Known::sigma, kP.sigma, true);
    const auto sd = estimate_from_delta_u(fd, Known::theta, kP.theta, true);
    const auto td_raw = estimate_from_delta_u(fd, Known::sigma, kP.sigma, false);
    const auto sd_raw = estimate_from_delta_u(fd, Known::theta, kP.theta, false);
    // corrected(theta) * corrected(sigma) is invariant to mu
    CHECK(td.bias_corrected_value * sd.bias_corrected_value ==
          doctest::Approx(td_raw.raw_value * sd_raw.raw_value).epsilon(1e-13));
    CHECK(td.mu == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("second-difference and delta-quotient estimators agree on shared terms") {
    const int n = 32;
    SamplingScheme s = SamplingScheme::uniform_times(0.0, 1.0, n, 2, 0.4, 1.0, 1.0, 0.0);
    SpectralBasis basis = SpectralBasis::build(uniform_grid(0.0, kPi, n), 400);
    auto f = simulate_spectral_bounded(kP, {0.2, 0.4}, basis, 9001, 0);
    const double h = f.scheme.h();

    // feed the second differences divided by h as delta increments (i = 2..N-1)
    FieldSample fd;
    fd.kind = FieldKind::delta_u_increments;
    fd.params = kP;
    fd.scheme = f.scheme;
    fd.values.resize(2, n - 2);
    for (int r = 0; r < 2; ++r)
        for (int i = 2; i <= n - 1; ++i)
            fd.values(r, i - 2) =
                (f.values(r, i + 1) - 2.0 * f.values(r, i) + f.values(r, i - 1)) / h;

    const auto rc = estimate_from_u_seconddiff(f, Known::theta, kP.theta, false);
    const auto rt = estimate_from_delta_u(fd, Known::theta, kP.theta, false);
    // check sums differ exactly by the i = 1 boundary term
    const double ba = f.scheme.b_end - f.scheme.a_end;
    long double boundary = 0.0L;
    for (int r = 0; r < 2; ++r) {
        const long double d =
            (f.values(r, 2) - 2.0L * f.values(r, 1) + f.values(r, 0)) / h;
        boundary += d * d;
    }
    const double expect_check =
        rt.raw_value + kP.theta * kP.theta * static_cast<double>(boundary) / (2.0 * ba);
    CHECK(rc.raw_value == doctest::Approx(expect_check).epsilon(1e-12));
}

TEST_CASE("normalized_stat algebra") {
    EstimateReport rep;
    rep.estimator_id = EstimatorId::sigma2_ux;
    rep.n_space = 100;
    rep.n_time = 4;
    rep.mu = 1.0;
    rep.raw_value = rep.bias_corrected_value = 0.1 * 0.1;  // estimate^2 == true^2
    CHECK(normalized_stat(rep, 0.1) == 0.0);
    CHECK(normalized_stat_level(rep, 0.1) == 0.0);
    const double nm = 400.0;
    rep.bias_corrected_value = (0.1 * 0.1) * (1.0 + std::sqrt(2.0) / std::sqrt(nm));
    CHECK(normalized_stat(rep, 0.1) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK_THROWS_AS(normalized_stat(rep, 0.0), domain_error);
    CHECK_THROWS_AS(normalized_stat_level(rep, -1.0), domain_error);
}

TEST_CASE("q_statistic: zero at expected squares, moments and normality") {
    SamplingScheme s = SamplingScheme::uniform_times(0.0, 1.0, 64, 1, 0.2);
    FieldSample f;
    f.kind = FieldKind::ux_increments;
    f.params = kP;
    f.scheme = s;
    const double eu = ux_increment_variance(0.2, s.h(), kP);
    f.values = Eigen::MatrixXd::Constant(1, 64, std::sqrt(eu));
    CHECK(q_statistic(f, kP) == doctest::Approx(0.0).epsilon(1e-12));

    // sample mean of Q^2 vs analytic (Q_D + Q_ND) M/(2N), N = 64, M = 2
    SamplingScheme s2 = SamplingScheme::uniform_times(0.0, 1.0, 64, 2, 0.4);
    auto sim = LineSimulator::prepare(kP, s2, FieldKind::ux_increments);
    const int reps = 1000;
    std::vector<double> q2(reps);
    for (int r = 0; r < reps; ++r) {
        const double q = q_statistic(sim.draw(606, r), kP);
        q2[r] = q * q;
    }
    long double mean = 0.0L, var = 0.0L;
    for (double v : q2) mean += v;
    mean /= reps;
    for (double v : q2) var += (v - mean) * (v - mean);
    var /= (reps - 1);
    const auto qe = q_expectations(kP, s2, QVariant::ux);
    const double want = (qe.q_diag + qe.q_nd) * 2.0 / (2.0 * 64.0);
    const double se = std::sqrt(static_cast<double>(var) / reps);
    CHECK(std::fabs(static_cast<double>(mean) - want) <= 4.0 * se);

    // M = 1, N = 1000: script-Q passes KS against N(0,1)
    SamplingScheme s3 = SamplingScheme::uniform_times(0.0, 1.0, 1000, 1, 0.2);
    auto sim3 = LineSimulator::prepare(kP, s3, FieldKind::ux_increments);
    std::vector<double> qs(1000);
    for (int r = 0; r < 1000; ++r) qs[r] = q_statistic(sim3.draw(33, r), kP);
    long double m = 0.0L;
    for (double v : qs) m += v;
    // KS computed in test_montecarlo; here check first two moments
    long double v2 = 0.0L;
    for (double v : qs) v2 += v * v;
    CHECK(std::fabs(static_cast<double>(m) / 1000.0) <= 4.0 / std::sqrt(1000.0));
    CHECK(static_cast<double>(v2) / 1000.0 == doctest::Approx(1.0).epsilon(0.2));
}

TEST_CASE("EstimateReport serialization") {
    EstimateReport r;
    r.estimator_id = EstimatorId::sigma2_tilde;
    r.raw_value = 0.0123456789012345678;
    r.bias_corrected_value = r.raw_value * 1.5;
    r.mu = 2.0 / 3.0;
    r.n_space = 128;
    r.n_time = 2;
    const auto j = to_json(r);
    CHECK(j.at("estimator_id") == "sigma2_tilde");
    CHECK(j.at("raw_value").get<double>() == r.raw_value);
    const auto csv = to_csv_line(r);
    CHECK(csv.find("sigma2_tilde") != std::string::npos);
    CHECK(estimator_id_from_string("theta2_check") == EstimatorId::theta2_check);
    CHECK_THROWS_AS(estimator_id_from_string("nope"), domain_error);
}
