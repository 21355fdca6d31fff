#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "asianop/mc.hpp"
#include "asianop/parallel.hpp"

using namespace asianop;

namespace {

const ModelParams kRef{0.4, 0.05, 1.0, Averaging::Arithmetic, 1e-12};
const PayoffSpec kFixed{PayoffKind::FixedStrike, 1.0};
const SpaceTimePoint kStart{0.5, 1.0, 0.5};

}  // namespace

TEST_CASE("noise-free paths follow the exact exponential and its trapezoid") {
    ModelParams m = kRef;
    m.sigma = 0.0;
    const int M = 16;
    const PathBatch b = simulate_paths(m, kStart, M, 4, 1, false);
    const double dt = (m.T - kStart.t) / M;
    double A = kStart.a;
    double prev = kStart.s;
    for (int k = 0; k <= M; ++k) {
        const double S = kStart.s * std::exp(m.r * k * dt);
        CHECK(b.s_at(0, k) == Catch::Approx(S).epsilon(1e-13));
        if (k > 0) {
            A += 0.5 * dt * (prev + b.s_at(0, k));
            CHECK(b.a_at(0, k) == Catch::Approx(A).epsilon(1e-13));
        }
        prev = b.s_at(0, k);
    }
}

TEST_CASE("discounted spot is a martingale under the exact stepping") {
    const std::size_t N = 100000;
    const PathBatch b = simulate_paths(kRef, kStart, 16, N, 321, false);
    const double tau = kRef.T - kStart.t;
    double mean = 0.0;
    for (std::size_t p = 0; p < N; ++p) mean += b.s_at(p, 16);
    mean /= N;
    const double expect = kStart.s * std::exp(kRef.r * tau);
    const double sd = expect * std::sqrt(std::exp(kRef.sigma * kRef.sigma * tau) - 1.0);
    CHECK(std::fabs(mean - expect) <= 3.0 * sd / std::sqrt(static_cast<double>(N)));
}

TEST_CASE("batches are identical across thread layouts") {
    set_thread_count(1);
    const PathBatch a = simulate_paths(kRef, kStart, 8, 3 * 8192, 77, true);
    set_thread_count(8);
    const PathBatch b = simulate_paths(kRef, kStart, 8, 3 * 8192, 77, true);
    set_thread_count(1);
    REQUIRE(a.S.size() == b.S.size());
    for (std::size_t i = 0; i < a.S.size(); ++i) {
        CHECK(a.S[i] == b.S[i]);
        CHECK(a.A[i] == b.A[i]);
    }
}

TEST_CASE("accumulator increases pathwise and start values are validated") {
    const PathBatch b = simulate_paths(kRef, kStart, 32, 64, 5, false);
    for (std::size_t p = 0; p < b.N; ++p)
        for (int k = 1; k <= 32; ++k) CHECK(b.a_at(p, k) > b.a_at(p, k - 1));
    CHECK_THROWS_AS(simulate_paths(kRef, {0.5, -1.0, 0.5}, 8, 8, 1, false),
                    std::invalid_argument);
    CHECK_THROWS_AS(simulate_paths(kRef, {1.5, 1.0, 0.5}, 8, 8, 1, false),
                    std::invalid_argument);
}

TEST_CASE("european prices: deterministic limit and zero-strike closed form") {
    ModelParams m = kRef;
    m.sigma = 0.0;
    const PriceEstimate det = european_price_mc(m, kFixed, kStart, 64, 16, 9, false);
    // every path identical: zero spread, value equals the discounted
    // trapezoid payoff
    CHECK(det.std_error == 0.0);
    const PathBatch b = simulate_paths(m, kStart, 64, 2, 9, false);
    const double expect = std::exp(-m.r * (m.T - kStart.t)) *
                          payoff_eval(kFixed, {m.T, b.s_at(0, 64), b.a_at(0, 64)});
    CHECK(det.price == Catch::Approx(expect).epsilon(1e-13));

    // zero strike: price = disc * E[A_T] / T with E[A_T] in closed form
    const PayoffSpec zero{PayoffKind::FixedStrike, 0.0};
    const std::size_t N = 100000;
    const PriceEstimate est = european_price_mc(kRef, zero, kStart, 128, N, 31, false);
    const double tau = kRef.T - kStart.t;
    const double ea = kStart.a + kStart.s * (std::exp(kRef.r * tau) - 1.0) / kRef.r;
    const double target = std::exp(-kRef.r * tau) * ea / kRef.T;
    CHECK(std::fabs(est.price - target) <= 3.0 * est.std_error + 1e-4);
}

TEST_CASE("deterministic oracle scans the schedule") {
    ModelParams m = kRef;
    m.sigma = 0.0;
    m.r = 0.0;
    // with r = 0 the spot is frozen and the averaging drift is explicit
    const SpaceTimePoint start{0.5, 1.0, 0.8};
    const int M = 64;
    double byhand = 0.0;
    for (int k = 0; k <= M; ++k) {
        const double tau = 0.5 + 0.5 * k / M;
        const double A = 0.8 + 1.0 * (tau - 0.5);
        byhand = std::max(byhand, std::max(A / tau - 1.0, 0.0));
    }
    CHECK(deterministic_oracle_price(m, kFixed, start, M) == Catch::Approx(byhand));

    // refinement never loses more than the scan gap allows
    ModelParams mr = kRef;
    mr.sigma = 0.0;
    const double coarse = deterministic_oracle_price(mr, kFixed, kStart, 32);
    const double fine = deterministic_oracle_price(mr, kFixed, kStart, 64);
    CHECK(fine >= coarse - 1e-12);
    const double lip = (kStart.s / kStart.t + 1.0) * (kRef.T - kStart.t) / 32.0;
    CHECK(fine - coarse <= lip);

    const PayoffSpec far{PayoffKind::FixedStrike, 1e9};
    CHECK(deterministic_oracle_price(mr, far, kStart, 32) == 0.0);
    CHECK_THROWS_AS(deterministic_oracle_price(kRef, kFixed, kStart, 32),
                    std::invalid_argument);
}

TEST_CASE("stopping estimate on a worthless payoff is exactly zero") {
    const PayoffSpec far{PayoffKind::FixedStrike, 1e9};
    const StoppingEstimate est = lsmc_price(kRef, far, kStart, 16, 2000, 2, 17, false);
    CHECK(est.price == 0.0);
    CHECK(est.std_error == 0.0);
}

TEST_CASE("stopping estimate reduces to the deterministic oracle as noise vanishes") {
    ModelParams tiny = kRef;
    tiny.sigma = 1e-4;
    ModelParams zero = kRef;
    zero.sigma = 0.0;
    const PayoffSpec spec{PayoffKind::FixedStrike, 0.5};
    const SpaceTimePoint start{0.5, 1.0, 0.45};
    const double oracle = deterministic_oracle_price(zero, spec, start, 128);
    const StoppingEstimate est = lsmc_price(tiny, spec, start, 128, 20000, 2, 23, false);
    CHECK(std::fabs(est.price - oracle) <= 0.005 * oracle);
}

TEST_CASE("out-of-sample estimate keeps the lower-bound discipline") {
    const StoppingEstimate est = lsmc_price(kRef, kFixed, kStart, 64, 20000, 2, 41, true);
    CHECK(est.price <= est.in_sample + 3.0 * est.std_error + 1e-12);
    CHECK(est.price >= payoff_eval(kFixed, kStart) - 3.0 * est.std_error);

    const PriceEstimate euro = european_price_mc(kRef, kFixed, kStart, 64, 20000, 41, true);
    CHECK(euro.price <=
          est.price + 3.0 * std::sqrt(euro.std_error * euro.std_error +
                                      est.std_error * est.std_error));
}

TEST_CASE("enriching the basis does not move the price beyond noise") {
    const StoppingEstimate d2 = lsmc_price(kRef, kFixed, kStart, 64, 40000, 2, 59, true);
    const StoppingEstimate d3 = lsmc_price(kRef, kFixed, kStart, 64, 40000, 3, 59, true);
    const double band = 3.0 * std::sqrt(d2.std_error * d2.std_error +
                                        d3.std_error * d3.std_error);
    CHECK(std::fabs(d2.price - d3.price) <= band + 1e-4);
}

TEST_CASE("schedule refinement sensitivity stays within noise") {
    const StoppingEstimate m64 = lsmc_price(kRef, kFixed, kStart, 64, 30000, 2, 67, true);
    const StoppingEstimate m128 = lsmc_price(kRef, kFixed, kStart, 128, 30000, 2, 67, true);
    // denser exercise dates can only add value up to noise; report-style check
    CHECK(m128.price >= m64.price - 3.0 * std::sqrt(m64.std_error * m64.std_error +
                                                    m128.std_error * m128.std_error) -
                            1e-3);
}

TEST_CASE("degenerate regression input triggers basis truncation, not failure") {
    ModelParams tiny = kRef;
    tiny.sigma = 1e-8;
    const PayoffSpec spec{PayoffKind::FixedStrike, 0.5};
    const StoppingEstimate est = lsmc_price(tiny, spec, {0.5, 1.0, 0.45}, 32, 4000, 3, 71, false);
    CHECK(est.basis_truncated);
    CHECK(est.price > 0.0);
}
