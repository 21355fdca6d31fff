#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "operators.hpp"
#include "parallel.hpp"
#include "rng.hpp"

namespace asianop {

// Fundamental solution of the geometric operator between a start z=(t,x)
// and an end Z=(T,X), t < T. The pair is first reduced by the group law,
//   Gamma(z; Z) = Gamma(Z^{-1} o z; origin),
// and the reduced kernel (negative time w.t) is the displayed Gaussian
//   sqrt(3)/(2 pi w.t^2) exp(w1^2/w.t + 3 w1 q/w.t^2 + 3 q^2/w.t^3),
// q = w2 - w.t*w1. Strictly positive on its domain.
inline double gamma_G(const GroupElement& start, const GroupElement& end) {
    if (!(start.t < end.t)) throw std::domain_error("gamma_G needs start time < end time");
    const GroupElement w = compose_G(inverse_G(end), start);
    const double t = w.t;  // negative by construction
    const double q = w.x2 - t * w.x1;
    const double expo = w.x1 * w.x1 / t + 3.0 * w.x1 * q / (t * t) + 3.0 * q * q / (t * t * t);
    return std::numbers::sqrt3 / (2.0 * std::numbers::pi * t * t) * std::exp(expo);
}

// Max |L_G gamma_G(.; end)| over the given backward points, with central
// finite differences of absolute step fd_step. Every point must keep the
// given time margin from the pole.
inline double gamma_G_pde_residual(const std::vector<GroupElement>& points,
                                   const GroupElement& end, double margin, double fd_step) {
    if (!(margin > 0.0)) throw std::invalid_argument("margin must be positive");
    if (!(fd_step > 0.0)) throw std::invalid_argument("fd_step must be positive");
    TestFunction g;
    g.value = [end](double t, double x1, double x2) {
        return gamma_G(GroupElement{t, x1, x2}, end);
    };
    g.fd_step = fd_step;
    g.fd_relative = false;
    const OperatorTag tag = OperatorTag::geometric();
    double worst = 0.0;
    for (const GroupElement& z : points) {
        if (!(z.t <= end.t - margin))
            throw std::domain_error("residual point violates the pole margin");
        worst = std::max(worst, std::fabs(apply_operator(tag, g, SpaceTimePoint{z.t, z.x1, z.x2})));
    }
    return worst;
}

// --- empirical transition density of the canonical arithmetic process ---

inline constexpr int kDefaultStepsPerUnit = 512;

// dX1 = sqrt(2) X1 dW stepped exactly (X1(t+d) = X1(t) exp(sqrt2 dW - d)),
// dX2 = X1 dt by the trapezoid rule; only X2 carries discretization bias.
inline void simulate_canonical_endpoints(double x1, double x2, double horizon,
                                         std::size_t n_paths, std::uint64_t seed,
                                         std::vector<double>& out_x1, std::vector<double>& out_x2,
                                         int steps_per_unit = kDefaultStepsPerUnit) {
    if (!(x1 > 0.0)) throw std::invalid_argument("start x1 must be positive");
    if (!(horizon > 0.0)) throw std::invalid_argument("horizon must be positive");
    const int steps = std::max(1, static_cast<int>(std::ceil(steps_per_unit * horizon)));
    const double dt = horizon / steps;
    const double vol = std::sqrt(2.0 * dt);
    out_x1.assign(n_paths, 0.0);
    out_x2.assign(n_paths, 0.0);
    for_each_block(n_paths, [&](std::size_t, std::size_t lo, std::size_t hi) {
        for (std::size_t p = lo; p < hi; ++p) {
            double cur = x1;
            double acc = x2;
            for (int k = 0; k < steps; ++k) {
                const double z = counter_gaussian(seed, p, static_cast<std::uint32_t>(k));
                const double next = cur * std::exp(vol * z - dt);
                acc += 0.5 * dt * (cur + next);
                cur = next;
            }
            out_x1[p] = cur;
            out_x2[p] = acc;
        }
    });
}

// product-Gaussian kernel density over a 2d sample
struct Kde2 {
    std::vector<double> x1;
    std::vector<double> x2;
    double h1 = 0.0;
    double h2 = 0.0;

    double value(double p1, double p2) const {
        const std::size_t n = x1.size();
        const double norm = 1.0 / (2.0 * std::numbers::pi * h1 * h2 * static_cast<double>(n));
        const double sum = block_sum(n, [&](std::size_t i) {
            const double d1 = (p1 - x1[i]) / h1;
            const double d2 = (p2 - x2[i]) / h2;
            return std::exp(-0.5 * (d1 * d1 + d2 * d2));
        });
        return norm * sum;
    }

    // pointwise standard error of the estimate, R(K) = 1/(4 pi) in 2d
    double stderr_at(double f_hat) const {
        const double n = static_cast<double>(x1.size());
        return std::sqrt(std::max(f_hat, 0.0) / (4.0 * std::numbers::pi * n * h1 * h2));
    }
};

namespace detail {

inline double sample_sd(const std::vector<double>& v) {
    const std::size_t n = v.size();
    const double mean = block_sum(n, [&](std::size_t i) { return v[i]; }) / static_cast<double>(n);
    const double var =
        block_sum(n, [&](std::size_t i) { return (v[i] - mean) * (v[i] - mean); }) /
        static_cast<double>(n - 1);
    return std::sqrt(var);
}

inline double silverman_bandwidth(const std::vector<double>& v) {
    // n^{-1/6} rate for a two-dimensional product kernel
    return sample_sd(v) * std::pow(static_cast<double>(v.size()), -1.0 / 6.0);
}

inline double quantile_sorted(const std::vector<double>& sorted, double q) {
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const std::size_t i = static_cast<std::size_t>(pos);
    if (i + 1 >= sorted.size()) return sorted.back();
    const double w = pos - static_cast<double>(i);
    return sorted[i] * (1.0 - w) + sorted[i + 1] * w;
}

}  // namespace detail

struct DensityEstimate {
    std::vector<double> x1_nodes;
    std::vector<double> x2_nodes;
    std::vector<double> density;  // [j * x1_nodes.size() + i]
    double bandwidth_x1 = 0.0;
    double bandwidth_x2 = 0.0;
    std::size_t n_paths = 0;
    std::uint64_t seed = 0;

    double at(std::size_t i, std::size_t j) const { return density[j * x1_nodes.size() + i]; }

    // trapezoid mass over the grid
    double integral_on_grid() const {
        double total = 0.0;
        for (std::size_t j = 0; j + 1 < x2_nodes.size(); ++j) {
            for (std::size_t i = 0; i + 1 < x1_nodes.size(); ++i) {
                const double cell = 0.25 * (at(i, j) + at(i + 1, j) + at(i, j + 1) + at(i + 1, j + 1));
                total += cell * (x1_nodes[i + 1] - x1_nodes[i]) * (x2_nodes[j + 1] - x2_nodes[j]);
            }
        }
        return total;
    }
};

// Kernel-density estimate of the canonical transition density on a grid;
// bandwidths follow a Silverman-type rule scaled by bandwidth_factor.
inline DensityEstimate estimate_gamma_A(const SpaceTimePoint& x_start, double horizon,
                                        std::size_t n_paths, double bandwidth_factor,
                                        std::uint64_t seed, int grid_n = 64,
                                        int steps_per_unit = kDefaultStepsPerUnit) {
    if (!(x_start.s > 0.0) || !(x_start.a > 0.0))
        throw std::domain_error("start point must have positive coordinates");
    if (!(bandwidth_factor > 0.0)) throw std::invalid_argument("bandwidth factor must be positive");
    if (!(horizon > 0.0)) throw std::invalid_argument("horizon must be positive");
    if (n_paths < 10000) throw std::invalid_argument("density estimation needs >= 1e4 paths");
    if (grid_n < 8) throw std::invalid_argument("grid_n must be >= 8");

    Kde2 kde;
    simulate_canonical_endpoints(x_start.s, x_start.a, horizon, n_paths, seed, kde.x1, kde.x2,
                                 steps_per_unit);
    kde.h1 = bandwidth_factor * detail::silverman_bandwidth(kde.x1);
    kde.h2 = bandwidth_factor * detail::silverman_bandwidth(kde.x2);

    std::vector<double> s1 = kde.x1;
    std::vector<double> s2 = kde.x2;
    std::sort(s1.begin(), s1.end());
    std::sort(s2.begin(), s2.end());
    const double lo1 = detail::quantile_sorted(s1, 0.001) - 4.0 * kde.h1;
    const double hi1 = detail::quantile_sorted(s1, 0.999) + 4.0 * kde.h1;
    const double lo2 = detail::quantile_sorted(s2, 0.001) - 4.0 * kde.h2;
    const double hi2 = detail::quantile_sorted(s2, 0.999) + 4.0 * kde.h2;

    DensityEstimate est;
    est.bandwidth_x1 = kde.h1;
    est.bandwidth_x2 = kde.h2;
    est.n_paths = n_paths;
    est.seed = seed;
    est.x1_nodes.resize(grid_n);
    est.x2_nodes.resize(grid_n);
    for (int i = 0; i < grid_n; ++i) {
        est.x1_nodes[i] = lo1 + (hi1 - lo1) * i / (grid_n - 1);
        est.x2_nodes[i] = lo2 + (hi2 - lo2) * i / (grid_n - 1);
    }
    est.density.assign(static_cast<std::size_t>(grid_n) * grid_n, 0.0);
    for (int j = 0; j < grid_n; ++j)
        for (int i = 0; i < grid_n; ++i)
            est.density[static_cast<std::size_t>(j) * grid_n + i] =
                kde.value(est.x1_nodes[i], est.x2_nodes[j]);
    return est;
}

// --- multiplicative-scaling identity of the arithmetic density ---

struct ScalingCheckConfig {
    double x1_start = 1.0;
    double x2_start = 1.0;
    double horizon = 0.5;
    double end_x1 = 2.0;          // scale X1 at which the identity is tested
    std::size_t n_paths = 200000; // per side; sides use independent streams
    std::uint64_t seed = 20240817;
    int n_eval = 33;
    int steps_per_unit = kDefaultStepsPerUnit;
    double bandwidth_factor = 1.0;
};

struct ScalingCheckReport {
    enum class Orientation { AsPrinted, Flipped };

    double discrepancy_as_printed = 0.0;
    double discrepancy_flipped = 0.0;
    double noise_floor = 0.0;  // sup over the grid of combined pointwise standard errors
    Orientation matched = Orientation::AsPrinted;
    bool pass = false;
    std::vector<double> x2_eval;
    std::vector<double> lhs;
    std::vector<double> rhs_as_printed;
    std::vector<double> rhs_flipped;
};

// Tests Gamma_A(t,x;T,X) = X1^{-2} Gamma_A(t-T, x1/X1, (x2-X2)/X1; 0,1,0)
// with two independent simulations. The reference side is reduced to a
// start (x1/X1, 0) through the additive covariance of X2, and its
// bandwidths are the mapped ones so the leading kernel bias cancels in the
// comparison. Both orientations of the x2 argument are evaluated and the
// matching one is reported.
inline ScalingCheckReport check_gamma_A_scaling(const ScalingCheckConfig& cfg) {
    const double c = cfg.end_x1;
    if (!(c > 0.0)) throw std::invalid_argument("end X1 must be positive");

    Kde2 lhs_kde;
    simulate_canonical_endpoints(cfg.x1_start, cfg.x2_start, cfg.horizon, cfg.n_paths,
                                 derive_seed(cfg.seed, 1), lhs_kde.x1, lhs_kde.x2,
                                 cfg.steps_per_unit);
    lhs_kde.h1 = cfg.bandwidth_factor * detail::silverman_bandwidth(lhs_kde.x1);
    lhs_kde.h2 = cfg.bandwidth_factor * detail::silverman_bandwidth(lhs_kde.x2);

    Kde2 ref_kde;
    simulate_canonical_endpoints(cfg.x1_start / c, 0.0, cfg.horizon, cfg.n_paths,
                                 derive_seed(cfg.seed, 2), ref_kde.x1, ref_kde.x2,
                                 cfg.steps_per_unit);
    ref_kde.h1 = lhs_kde.h1 / c;
    ref_kde.h2 = lhs_kde.h2 / c;

    // evaluation band: central X2 quantiles of the left side, intersected
    // with the mapped support of the reference side
    std::vector<double> s2 = lhs_kde.x2;
    std::sort(s2.begin(), s2.end());
    double lo = detail::quantile_sorted(s2, 0.15);
    double hi = detail::quantile_sorted(s2, 0.85);
    std::vector<double> r2 = ref_kde.x2;
    std::sort(r2.begin(), r2.end());
    lo = std::max(lo, cfg.x2_start + c * detail::quantile_sorted(r2, 0.01));
    hi = std::min(hi, cfg.x2_start + c * detail::quantile_sorted(r2, 0.99));
    if (!(lo < hi)) throw NumericalError("scaling check: evaluation supports do not overlap");

    ScalingCheckReport report;
    report.x2_eval.resize(cfg.n_eval);
    report.lhs.resize(cfg.n_eval);
    report.rhs_as_printed.resize(cfg.n_eval);
    report.rhs_flipped.resize(cfg.n_eval);
    double worst_printed = 0.0;
    double worst_flipped = 0.0;
    double floor = 0.0;
    for (int k = 0; k < cfg.n_eval; ++k) {
        const double X2 = lo + (hi - lo) * k / (cfg.n_eval - 1);
        report.x2_eval[k] = X2;
        const double lhs = lhs_kde.value(c, X2);
        // as printed, the third argument is (x2 - X2)/X1: a start below the
        // end, i.e. evaluation of the reduced density at +(X2 - x2)/X1
        const double rhs_printed = ref_kde.value(1.0, (X2 - cfg.x2_start) / c) / (c * c);
        const double rhs_flipped = ref_kde.value(1.0, (cfg.x2_start - X2) / c) / (c * c);
        report.lhs[k] = lhs;
        report.rhs_as_printed[k] = rhs_printed;
        report.rhs_flipped[k] = rhs_flipped;
        worst_printed = std::max(worst_printed, std::fabs(lhs - rhs_printed));
        worst_flipped = std::max(worst_flipped, std::fabs(lhs - rhs_flipped));
        const double se_l = lhs_kde.stderr_at(lhs);
        const double se_r = ref_kde.stderr_at(rhs_printed * c * c) / (c * c);
        floor = std::max(floor, std::sqrt(se_l * se_l + se_r * se_r));
    }
    report.discrepancy_as_printed = worst_printed;
    report.discrepancy_flipped = worst_flipped;
    report.noise_floor = floor;
    report.matched = worst_printed <= worst_flipped ? ScalingCheckReport::Orientation::AsPrinted
                                                    : ScalingCheckReport::Orientation::Flipped;
    const double matched_disc = std::min(worst_printed, worst_flipped);
    report.pass = matched_disc <= 3.0 * floor;
    return report;
}

// Integrates the scaled reference side over the end variables (X1, X2);
// the X1^{-2} Jacobian factor makes this a probability, so the result
// should be 1 up to estimation error. One independent simulation per X1
// node.
inline double gamma_A_scaling_jacobian_integral(double x1_start, [[maybe_unused]] double x2_start,
                                                double horizon, std::size_t n_paths_per_node,
                                                std::uint64_t seed, int n_x1 = 24, int n_x2 = 129,
                                                int steps_per_unit = kDefaultStepsPerUnit) {
    // the start x2 only shifts the inner variable; it drops out of the mass
    // X1 grid: log-spaced over the lognormal end-point quantiles
    const double mu = std::log(x1_start) - horizon;
    const double sd = std::sqrt(2.0 * horizon);
    const double z = 2.807;  // ~0.25% tails
    double total = 0.0;
    std::vector<double> c_nodes(n_x1);
    for (int i = 0; i < n_x1; ++i)
        c_nodes[i] = std::exp(mu - z * sd + 2.0 * z * sd * i / (n_x1 - 1));

    std::vector<double> slice(n_x1, 0.0);
    for (int i = 0; i < n_x1; ++i) {
        const double c = c_nodes[i];
        // kernel in (log X1, X2): the first coordinate is exactly Gaussian,
        // which keeps the slice at X1=1 well conditioned for every c
        Kde2 kde;
        simulate_canonical_endpoints(x1_start / c, 0.0, horizon, n_paths_per_node,
                                     derive_seed(seed, 100 + static_cast<std::uint64_t>(i)),
                                     kde.x1, kde.x2, steps_per_unit);
        for (double& v : kde.x1) v = std::log(v);
        kde.h1 = detail::silverman_bandwidth(kde.x1);
        kde.h2 = detail::silverman_bandwidth(kde.x2);
        std::vector<double> sorted = kde.x2;
        std::sort(sorted.begin(), sorted.end());
        const double lo = detail::quantile_sorted(sorted, 0.0005) - 5.0 * kde.h2;
        const double hi = detail::quantile_sorted(sorted, 0.9995) + 5.0 * kde.h2;
        // integral over X2 at fixed X1=c: substitute y=(X2-x2)/c, dX2 = c dy;
        // the density at X1=1 equals the (log X1, X2) density at log X1 = 0
        double inner = 0.0;
        double prev_y = lo;
        double prev_f = kde.value(0.0, lo);
        for (int k = 1; k < n_x2; ++k) {
            const double y = lo + (hi - lo) * k / (n_x2 - 1);
            const double f = kde.value(0.0, y);
            inner += 0.5 * (f + prev_f) * (y - prev_y);
            prev_y = y;
            prev_f = f;
        }
        slice[i] = inner / c;  // (1/c^2) * c from the substitution
    }
    // outer integral over X1 in log coordinates
    for (int i = 0; i + 1 < n_x1; ++i) {
        const double w = std::log(c_nodes[i + 1] / c_nodes[i]);
        total += 0.5 * (slice[i] * c_nodes[i] + slice[i + 1] * c_nodes[i + 1]) * w;
    }
    return total;
}

}  // namespace asianop
