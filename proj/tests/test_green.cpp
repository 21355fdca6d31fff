#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>

#include "asianop/green.hpp"
#include "asianop/parallel.hpp"
#include "asianop/quadrature.hpp"
#include "asianop/rng.hpp"

using namespace asianop;

TEST_CASE("geometric kernel is positive and needs forward time") {
    CHECK(gamma_G({0.0, 0.0, 0.0}, {1.0, 0.3, -0.2}) > 0.0);
    CHECK_THROWS_AS(gamma_G({1.0, 0.0, 0.0}, {1.0, 0.3, -0.2}), std::domain_error);
}

TEST_CASE("geometric kernel integrates to one") {
    const GroupElement z0{0.0, 0.0, 0.0};
    const double mass = integrate2d(
        [&](double X1, double X2) { return gamma_G(z0, {1.0, X1, X2}); }, -20.0, 20.0, -60.0,
        60.0, 1e-8, 24);
    CHECK(mass == Catch::Approx(1.0).margin(1e-6));

    const GroupElement z1{0.2, 0.7, -0.3};
    const double mass2 = integrate2d(
        [&](double X1, double X2) { return gamma_G(z1, {1.4, X1, X2}); }, -20.0, 20.0, -60.0,
        60.0, 1e-8, 24);
    CHECK(mass2 == Catch::Approx(1.0).margin(1e-6));
}

TEST_CASE("kernel mode sits at the transported start point") {
    const double x1 = 0.3, x2 = -0.2, tau = 0.7;
    const GroupElement z0{0.0, x1, x2};
    // grid argmax against the expected mean (x1, x2 + tau*x1)
    double best = -1.0, b1 = 0.0, b2 = 0.0;
    for (int i = 0; i <= 80; ++i)
        for (int j = 0; j <= 80; ++j) {
            const double X1 = x1 - 0.4 + 0.8 * i / 80.0;
            const double X2 = x2 + tau * x1 - 0.4 + 0.8 * j / 80.0;
            const double g = gamma_G(z0, {tau, X1, X2});
            if (g > best) {
                best = g;
                b1 = X1;
                b2 = X2;
            }
        }
    CHECK(std::fabs(b1 - x1) <= 0.011);
    CHECK(std::fabs(b2 - (x2 + tau * x1)) <= 0.011);

    // Euler run of dX1 = sqrt(2) dW, dX2 = X1 dt reproduces the same mean
    const std::size_t n = 20000;
    const int steps = 200;
    const double dt = tau / steps;
    std::vector<double> m1(block_count(n), 0.0), m2(block_count(n), 0.0);
    for_each_block(n, [&](std::size_t b, std::size_t lo, std::size_t hi) {
        double s1 = 0.0, s2 = 0.0;
        for (std::size_t p = lo; p < hi; ++p) {
            double X1 = x1, X2 = x2;
            for (int k = 0; k < steps; ++k) {
                const double z = counter_gaussian(97, p, static_cast<std::uint32_t>(k));
                X2 += X1 * dt;
                X1 += std::sqrt(2.0 * dt) * z;
            }
            s1 += X1;
            s2 += X2;
        }
        m1[b] = s1;
        m2[b] = s2;
    });
    double mean1 = 0.0, mean2 = 0.0;
    for (std::size_t b = 0; b < m1.size(); ++b) {
        mean1 += m1[b];
        mean2 += m2[b];
    }
    mean1 /= n;
    mean2 /= n;
    const double se1 = std::sqrt(2.0 * tau / n);
    const double se2 = std::sqrt(2.0 * tau * tau * tau / 3.0 / n);
    CHECK(std::fabs(mean1 - x1) <= 3.0 * se1);
    CHECK(std::fabs(mean2 - (x2 + tau * x1)) <= 3.0 * se2);
}

TEST_CASE("kernel depends on the pair only through the group displacement") {
    for (std::size_t i = 0; i < 100; ++i) {
        const UniformPair a = counter_uniforms(101, i, 0, 0);
        const UniformPair b = counter_uniforms(101, i, 1, 0);
        const UniformPair c = counter_uniforms(101, i, 2, 0);
        const GroupElement z{a.u0, 2.0 * a.u1 - 1.0, 2.0 * b.u0 - 1.0};
        const GroupElement Z{1.0 + b.u1, 2.0 * c.u0 - 1.0, 2.0 * c.u1 - 1.0};
        const GroupElement shift{0.5 - a.u0, 2.0 * b.u0 - 1.0, 2.0 * c.u0 - 1.0};
        const double direct = gamma_G(z, Z);
        const double shifted = gamma_G(compose_G(shift, z), compose_G(shift, Z));
        CHECK(shifted == Catch::Approx(direct).epsilon(1e-11));
    }
}

TEST_CASE("two half-horizon kernels compose into the full kernel") {
    const GroupElement z0{0.0, 0.1, -0.2};
    const GroupElement z2{1.0, 0.4, 0.3};
    const double direct = gamma_G(z0, z2);
    const double composed = integrate2d(
        [&](double m1, double m2) {
            return gamma_G(z0, {0.5, m1, m2}) * gamma_G({0.5, m1, m2}, z2);
        },
        -12.0, 12.0, -12.0, 12.0, 1e-8, 24);
    CHECK(composed == Catch::Approx(direct).margin(1e-4));
}

TEST_CASE("reduced-kernel quadratic form is negative definite for negative time") {
    for (double t : {-0.1, -0.5, -2.0}) {
        const double a11 = 1.0 / t;
        const double a12 = 3.0 / (2.0 * t * t);
        const double a22 = 3.0 / (t * t * t);
        const double det = a11 * a22 - a12 * a12;
        CHECK(det == Catch::Approx(3.0 / (4.0 * t * t * t * t)));
        CHECK(det > 0.0);
        CHECK(a11 < 0.0);
    }
}

TEST_CASE("backward residual of the kernel decays at second order") {
    std::vector<GroupElement> pts;
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) pts.push_back({0.1, -0.9 + 0.6 * i, -0.9 + 0.6 * j});
    const GroupElement end{1.0, 0.0, 0.0};
    const double r_coarse = gamma_G_pde_residual(pts, end, 0.5, 2e-3);
    const double r_fine = gamma_G_pde_residual(pts, end, 0.5, 1e-3);
    CHECK(r_fine < r_coarse);
    CHECK(r_coarse / r_fine >= 3.0);

    // margin guard
    CHECK_THROWS_AS(gamma_G_pde_residual({{0.9, 0.0, 0.0}}, end, 0.5, 1e-3), std::domain_error);

    // far tail: both sides vanish below the absolute floor
    const double tail = gamma_G_pde_residual({{0.1, 8.0, 30.0}}, end, 0.5, 1e-3);
    CHECK(tail <= 1e-12);
    CHECK(gamma_G({0.1, 8.0, 30.0}, end) < 1e-12);
}

TEST_CASE("canonical-process density estimate is a probability on its grid") {
    const SpaceTimePoint start{0.0, 1.0, 1.0};
    const DensityEstimate est = estimate_gamma_A(start, 0.5, 20000, 1.0, 777, 48);
    for (double v : est.density) CHECK(v >= 0.0);
    CHECK(est.integral_on_grid() == Catch::Approx(1.0).margin(0.02));
    CHECK(est.bandwidth_x1 > 0.0);
    CHECK(est.bandwidth_x2 > 0.0);

    // first moment of the estimator's x1 marginal equals the sample mean,
    // which must sit within three standard errors of the martingale value
    std::vector<double> X1, X2;
    simulate_canonical_endpoints(1.0, 1.0, 0.5, 20000, 777, X1, X2);
    double mean = 0.0, var = 0.0;
    for (double v : X1) mean += v;
    mean /= X1.size();
    for (double v : X1) var += (v - mean) * (v - mean);
    var /= (X1.size() - 1);
    CHECK(std::fabs(mean - 1.0) <= 3.0 * std::sqrt(var / X1.size()));

    // the accumulator only increases
    for (double v : X2) CHECK(v > 1.0);

    CHECK_THROWS_AS(estimate_gamma_A(start, 0.5, 20000, -1.0, 1, 48), std::invalid_argument);
    CHECK_THROWS_AS(estimate_gamma_A(start, -0.5, 20000, 1.0, 1, 48), std::invalid_argument);
    CHECK_THROWS_AS(estimate_gamma_A(start, 0.5, 100, 1.0, 1, 48), std::invalid_argument);
}

TEST_CASE("density estimation is independent of the thread layout") {
    const SpaceTimePoint start{0.0, 1.0, 1.0};
    set_thread_count(1);
    const DensityEstimate a = estimate_gamma_A(start, 0.4, 12000, 1.0, 2024, 32);
    set_thread_count(8);
    const DensityEstimate b = estimate_gamma_A(start, 0.4, 12000, 1.0, 2024, 32);
    set_thread_count(1);
    REQUIRE(a.density.size() == b.density.size());
    for (std::size_t i = 0; i < a.density.size(); ++i) CHECK(a.density[i] == b.density[i]);
    CHECK(a.bandwidth_x1 == b.bandwidth_x1);
}

TEST_CASE("multiplicative scaling of the arithmetic density: unit scale") {
    ScalingCheckConfig cfg;
    cfg.end_x1 = 1.0;
    cfg.n_paths = 100000;
    cfg.horizon = 0.5;
    const ScalingCheckReport rep = check_gamma_A_scaling(cfg);
    CHECK(rep.pass);
    CHECK(rep.matched == ScalingCheckReport::Orientation::AsPrinted);
}

TEST_CASE("multiplicative scaling of the arithmetic density: scale two") {
    ScalingCheckConfig cfg;
    cfg.end_x1 = 2.0;
    cfg.n_paths = 150000;
    cfg.horizon = 0.5;
    const ScalingCheckReport rep = check_gamma_A_scaling(cfg);
    CHECK(rep.pass);
    CHECK(rep.discrepancy_as_printed <= 3.0 * rep.noise_floor);
    // the reversed orientation evaluates the reference density outside its
    // support and cannot match
    CHECK(rep.discrepancy_flipped > rep.discrepancy_as_printed);
    CHECK(rep.matched == ScalingCheckReport::Orientation::AsPrinted);
}

TEST_CASE("scaled reference side integrates to one over the end variables") {
    const double total = gamma_A_scaling_jacobian_integral(1.0, 1.0, 0.5, 40000, 4242, 20, 101);
    CHECK(total == Catch::Approx(1.0).margin(0.03));
}
