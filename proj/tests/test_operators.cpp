#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "asianop/operators.hpp"
#include "asianop/rng.hpp"
#include "asianop/run.hpp"

using namespace asianop;

namespace {

GroupElement random_element(std::uint64_t seed, std::size_t i, double scale = 2.0) {
    const UniformPair a = counter_uniforms(seed, i, 0, 0);
    const UniformPair b = counter_uniforms(seed, i, 1, 0);
    return {scale * (2.0 * a.u0 - 1.0), scale * (2.0 * a.u1 - 1.0), scale * (2.0 * b.u0 - 1.0)};
}

bool close(const GroupElement& x, const GroupElement& y, double tol = 1e-12) {
    return std::fabs(x.t - y.t) <= tol && std::fabs(x.x1 - y.x1) <= tol &&
           std::fabs(x.x2 - y.x2) <= tol;
}

}  // namespace

TEST_CASE("group composition, identity and inverse") {
    const GroupElement c = compose_G({1.0, 1.0, 0.0}, {2.0, 0.0, 0.0});
    CHECK(c.t == 3.0);
    CHECK(c.x1 == 1.0);
    CHECK(c.x2 == 2.0);

    for (std::size_t i = 0; i < 100; ++i) {
        const GroupElement z = random_element(31, i);
        CHECK(close(compose_G({0.0, 0.0, 0.0}, z), z));
        CHECK(close(compose_G(inverse_G(z), z), {0.0, 0.0, 0.0}));
        CHECK(close(compose_G(z, inverse_G(z)), {0.0, 0.0, 0.0}));
        CHECK(close(inverse_G(inverse_G(z)), z));
    }

    const GroupElement inv = inverse_G({2.0, 3.0, 5.0});
    CHECK(inv.t == -2.0);
    CHECK(inv.x1 == -3.0);
    CHECK(inv.x2 == 1.0);
    CHECK(close(inverse_G({0.0, 0.0, 0.0}), {0.0, 0.0, 0.0}));
}

TEST_CASE("composition is associative") {
    for (std::size_t i = 0; i < 300; ++i) {
        const GroupElement x = random_element(37, 3 * i);
        const GroupElement y = random_element(37, 3 * i + 1);
        const GroupElement z = random_element(37, 3 * i + 2);
        CHECK(close(compose_G(compose_G(x, y), z), compose_G(x, compose_G(y, z)), 1e-12));
    }
}

TEST_CASE("dilations form a one-parameter group") {
    const GroupElement d = dilate_G(2.0, {1.0, 1.0, 1.0});
    CHECK(d.t == 4.0);
    CHECK(d.x1 == 2.0);
    CHECK(d.x2 == 8.0);
    for (std::size_t i = 0; i < 100; ++i) {
        const GroupElement z = random_element(41, i);
        CHECK(close(dilate_G(1.0, z), z));
        const UniformPair u = counter_uniforms(41, i, 7, 0);
        const double lam = 0.3 + 2.0 * u.u0;
        const double mu = 0.3 + 2.0 * u.u1;
        CHECK(close(dilate_G(lam, dilate_G(mu, z)), dilate_G(lam * mu, z), 1e-11));
    }
    CHECK_THROWS_AS(dilate_G(0.0, {1.0, 1.0, 1.0}), std::invalid_argument);
}

TEST_CASE("multiplicative action: identity, example, associativity") {
    const GroupElement w{2.0, 4.0, 5.0};
    CHECK(close(translate_A({0.0, 1.0, 0.0}, w), w));

    const GroupElement r = translate_A({1.0, 2.0, 3.0}, {2.0, 4.0, 5.0});
    CHECK(r.t == 3.0);
    CHECK(r.x1 == 8.0);
    CHECK(r.x2 == 13.0);

    for (std::size_t i = 0; i < 200; ++i) {
        const UniformPair a = counter_uniforms(43, i, 0, 0);
        const UniformPair b = counter_uniforms(43, i, 1, 0);
        const UniformPair c = counter_uniforms(43, i, 2, 0);
        const GroupElement zpp{2.0 * a.u0 - 1.0, 0.2 + 2.0 * a.u1, 2.0 * b.u0 - 1.0};
        const GroupElement zp{2.0 * b.u1 - 1.0, 0.2 + 2.0 * c.u0, 2.0 * c.u1 - 1.0};
        const GroupElement z{a.u0, 0.2 + b.u0, c.u0};
        // the induced composition (t''+t', x1'' x1', x2'' + x1'' x2')
        const GroupElement fused{zpp.t + zp.t, zpp.x1 * zp.x1, zpp.x2 + zpp.x1 * zp.x2};
        CHECK(close(translate_A(zpp, translate_A(zp, z)), translate_A(fused, z), 1e-11));
    }
    CHECK_THROWS_AS(translate_A({0.0, -1.0, 0.0}, w), std::domain_error);
}

TEST_CASE("homogeneous norm and its scaling") {
    CHECK(homogeneous_norm_G({0.0, 0.0, 0.0}) == 0.0);
    CHECK(homogeneous_norm_G({4.0, 2.0, 8.0}) == Catch::Approx(6.0));
    for (std::size_t i = 0; i < 100; ++i) {
        const GroupElement z = random_element(47, i);
        const UniformPair u = counter_uniforms(47, i, 9, 0);
        const double lam = 0.2 + 3.0 * u.u0;
        CHECK(homogeneous_norm_G(dilate_G(lam, z)) ==
              Catch::Approx(lam * homogeneous_norm_G(z)).margin(1e-12));
    }
}

TEST_CASE("operator application on simple carriers") {
    TestFunction ux2;
    ux2.value = [](double, double, double x2) { return x2; };
    CHECK(apply_operator(OperatorTag::geometric(), ux2, {0.5, 3.0, 0.7}) == Catch::Approx(3.0));

    TestFunction ux1sq;
    ux1sq.value = [](double, double x1, double) { return x1 * x1; };
    ux1sq.fd_step = 1e-4;
    CHECK(apply_operator(OperatorTag::canonical_arithmetic(), ux1sq, {0.2, 2.0, 1.0}) ==
          Catch::Approx(8.0).margin(1e-6));

    ModelParams m{0.2, 0.0, 1.0, Averaging::Arithmetic, 1e-8};
    TestFunction ua;
    ua.value = [](double, double, double a) { return a; };
    CHECK(apply_operator(OperatorTag::full(m), ua, {1.0, 4.0, 1.0}) ==
          Catch::Approx(4.0).epsilon(1e-7));

    CHECK_THROWS_AS(apply_operator(OperatorTag::canonical_arithmetic(), ux1sq, {0.2, -2.0, 1.0}),
                    std::domain_error);
}

TEST_CASE("perturbed operator with unit coefficient equals the geometric one") {
    const OperatorTag lh = OperatorTag::perturbed(
        [](double, double, double) { return 1.0; }, 0.5, 2.0);
    const OperatorTag lg = OperatorTag::geometric();
    const TestFunction u = cubic_test_function();
    for (std::size_t i = 0; i < 50; ++i) {
        const GroupElement z = random_element(53, i);
        const SpaceTimePoint p{z.t, z.x1, z.x2};
        CHECK(apply_operator(lh, u, p) == Catch::Approx(apply_operator(lg, u, p)).margin(1e-12));
    }
    const OperatorTag bad = OperatorTag::perturbed(
        [](double, double, double) { return 10.0; }, 0.5, 2.0);
    CHECK_THROWS_AS(apply_operator(bad, u, {0.1, 0.1, 0.1}), std::domain_error);
    CHECK_THROWS_AS(OperatorTag::perturbed([](double, double, double) { return 1.0; }, -1.0, 2.0),
                    std::invalid_argument);
}

TEST_CASE("full operator is the sum of its defining terms") {
    const ModelParams m{0.3, 0.04, 1.0, Averaging::Arithmetic, 1e-8};
    const TestFunction u = cubic_test_function();
    for (std::size_t i = 0; i < 50; ++i) {
        const UniformPair a = counter_uniforms(59, i, 0, 0);
        const UniformPair b = counter_uniforms(59, i, 1, 0);
        const SpaceTimePoint z{0.2 + a.u0, 0.3 + 2.0 * a.u1, 0.3 + 2.0 * b.u0};
        const Partials p = partials_at(u, z.t, z.s, z.a);
        const double by_terms = 0.5 * m.sigma * m.sigma * z.s * z.s * p.u11 +
                                m.r * z.s * p.u1 + z.s * p.u2 + p.ut - m.r * p.u;
        CHECK(apply_operator(OperatorTag::full(m), u, z) ==
              Catch::Approx(by_terms).margin(1e-12));
    }
}

TEST_CASE("geometric invariances hold to rounding on analytic cubics") {
    const TestFunction u = cubic_test_function();
    const auto samples = invariance_samples(61, 500, false);
    const auto trans = check_invariance(OperatorTag::geometric(), GroupAction::LeftTranslateG, u,
                                        samples);
    CHECK(trans.max_abs_deviation <= 1e-10);
    CHECK_FALSE(trans.used_finite_differences);

    for (double lam : {0.5, 2.0, 3.0}) {
        const auto dil =
            check_invariance(OperatorTag::geometric(), GroupAction::DilateG, u, samples, lam);
        CHECK(dil.max_abs_deviation <= 1e-10);
    }
}

TEST_CASE("arithmetic translation invariance with finite differences refines") {
    const auto samples = invariance_samples(67, 150, true);
    // steps large enough that truncation still dominates rounding noise,
    // so second-order decay is observable
    const double coarse = check_invariance(OperatorTag::canonical_arithmetic(),
                                           GroupAction::TranslateA,
                                           smooth_rational_test_function(4e-3), samples)
                              .max_abs_deviation;
    const double fine = check_invariance(OperatorTag::canonical_arithmetic(),
                                         GroupAction::TranslateA,
                                         smooth_rational_test_function(1e-3), samples)
                            .max_abs_deviation;
    CHECK(fine <= 1e-6);
    CHECK(fine < coarse);
}

TEST_CASE("dilation check is rejected for the arithmetic operator") {
    const TestFunction u = cubic_test_function();
    const auto samples = invariance_samples(71, 10, true);
    CHECK_THROWS_AS(check_invariance(OperatorTag::canonical_arithmetic(), GroupAction::DilateG, u,
                                     samples, 2.0),
                    std::invalid_argument);
}

TEST_CASE("intrinsic Hoelder seminorm basics") {
    const Box3 box{0.2, 1.2, 0.5, 1.5, 0.5, 1.5};
    const double flat = holder_seminorm_G([](double, double, double) { return 3.14; }, 0.5, box);
    CHECK(flat == 0.0);

    const auto linear = [](double, double s, double) { return s; };
    const double coarse = holder_seminorm_G(linear, 0.5, box, 6);
    const double fine = holder_seminorm_G(linear, 0.5, box, 12);
    CHECK(coarse > 0.0);
    CHECK(fine >= coarse);  // enrichment cannot lower the estimate
    CHECK(std::fabs(fine - coarse) <= 0.2 * coarse);

    CHECK_THROWS_AS(holder_seminorm_G(linear, 1.5, box), std::invalid_argument);
}
