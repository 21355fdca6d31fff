#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "model.hpp"

namespace asianop {

// element of the homogeneous group carried by the geometric operator;
// also reused as the argument of the multiplicative arithmetic action
struct GroupElement {
    double t = 0.0;
    double x1 = 0.0;
    double x2 = 0.0;
};

// (t',x') o (t,x) = (t'+t, x1'+x1, x2'+x2+t*x1')
inline GroupElement compose_G(const GroupElement& zp, const GroupElement& z) {
    return {zp.t + z.t, zp.x1 + z.x1, zp.x2 + z.x2 + z.t * zp.x1};
}

// (T,X)^{-1} = (-T, -X1, -X2 + T*X1)
inline GroupElement inverse_G(const GroupElement& z) {
    return {-z.t, -z.x1, -z.x2 + z.t * z.x1};
}

// delta_lambda(t,x) = (lambda^2 t, lambda x1, lambda^3 x2)
inline GroupElement dilate_G(double lambda, const GroupElement& z) {
    if (!(lambda > 0.0)) throw std::invalid_argument("dilation needs lambda > 0");
    return {lambda * lambda * z.t, lambda * z.x1, lambda * lambda * lambda * z.x2};
}

// l_{(t',x')}(t,x) = (t'+t, x1'*x1, x2'+x1'*x2); identity is (0,(1,0))
inline GroupElement translate_A(const GroupElement& zp, const GroupElement& z) {
    if (!(zp.x1 > 0.0) || !(z.x1 > 0.0))
        throw std::domain_error("the multiplicative action needs x1 > 0");
    return {zp.t + z.t, zp.x1 * z.x1, zp.x2 + zp.x1 * z.x2};
}

// |t|^{1/2} + |x1| + |x2|^{1/3}: homogeneous of degree one under dilations
inline double homogeneous_norm_G(const GroupElement& z) {
    return std::sqrt(std::fabs(z.t)) + std::fabs(z.x1) + std::cbrt(std::fabs(z.x2));
}

// test-function carrier: evaluator plus optional analytic partials
struct TestFunction {
    using Field3 = std::function<double(double t, double x1, double x2)>;

    Field3 value;
    Field3 dt;      // optional: all four present => analytic partials used
    Field3 dx1;
    Field3 dx1x1;
    Field3 dx2;
    double fd_step = 1e-5;   // central-difference step (relative by default)
    bool fd_relative = true; // scale the step by max(1, |coordinate|)

    bool has_analytic() const {
        return static_cast<bool>(dt) && static_cast<bool>(dx1) && static_cast<bool>(dx1x1) &&
               static_cast<bool>(dx2);
    }
};

struct Partials {
    double u;
    double ut;
    double u1;
    double u11;
    double u2;
};

namespace detail {

inline double fd_h(const TestFunction& f, double coord) {
    return f.fd_relative ? f.fd_step * std::max(1.0, std::fabs(coord)) : f.fd_step;
}

}  // namespace detail

inline Partials partials_at(const TestFunction& f, double t, double x1, double x2) {
    Partials p{};
    p.u = f.value(t, x1, x2);
    if (f.has_analytic()) {
        p.ut = f.dt(t, x1, x2);
        p.u1 = f.dx1(t, x1, x2);
        p.u11 = f.dx1x1(t, x1, x2);
        p.u2 = f.dx2(t, x1, x2);
        return p;
    }
    const double ht = detail::fd_h(f, t);
    const double h1 = detail::fd_h(f, x1);
    const double h2 = detail::fd_h(f, x2);
    p.ut = (f.value(t + ht, x1, x2) - f.value(t - ht, x1, x2)) / (2.0 * ht);
    p.u1 = (f.value(t, x1 + h1, x2) - f.value(t, x1 - h1, x2)) / (2.0 * h1);
    p.u11 = (f.value(t, x1 + h1, x2) - 2.0 * p.u + f.value(t, x1 - h1, x2)) / (h1 * h1);
    p.u2 = (f.value(t, x1, x2 + h2) - f.value(t, x1, x2 - h2)) / (2.0 * h2);
    return p;
}

// Which degenerate-parabolic operator to apply.
//   Full:      (sigma^2 s^2/2) u_ss + r s u_s + f(s) u_a + u_t - r u   on s,a > 0
//   Canonical: x1^2 u_11 + x1 u_2 + u_t                                on x > 0
//   Geometric: u_11 + x1 u_2 + u_t                                     on R^2
//   Perturbed: a_H(z) u_11 + x1 u_2 + u_t with 0 < a_lo <= a_H <= a_hi
struct OperatorTag {
    enum class Kind { Full, CanonicalArithmetic, Geometric, Perturbed };

    Kind kind = Kind::Geometric;
    ModelParams model{};  // Full only
    std::function<double(double, double, double)> a_H;
    double a_low = 0.0;
    double a_high = 0.0;

    static OperatorTag full(const ModelParams& m) {
        OperatorTag tag;
        tag.kind = Kind::Full;
        tag.model = m;
        return tag;
    }
    static OperatorTag canonical_arithmetic() {
        OperatorTag tag;
        tag.kind = Kind::CanonicalArithmetic;
        return tag;
    }
    static OperatorTag geometric() {
        OperatorTag tag;
        tag.kind = Kind::Geometric;
        return tag;
    }
    static OperatorTag perturbed(std::function<double(double, double, double)> a,
                                 double lo, double hi) {
        if (!(0.0 < lo) || !(lo <= hi))
            throw std::invalid_argument("perturbed operator needs 0 < a_low <= a_high");
        OperatorTag tag;
        tag.kind = Kind::Perturbed;
        tag.a_H = std::move(a);
        tag.a_low = lo;
        tag.a_high = hi;
        return tag;
    }
};

inline double apply_operator(const OperatorTag& tag, const TestFunction& u,
                             const SpaceTimePoint& z) {
    using Kind = OperatorTag::Kind;
    if ((tag.kind == Kind::Full || tag.kind == Kind::CanonicalArithmetic) && !(z.s > 0.0))
        throw std::domain_error("operator needs x1 > 0");
    const Partials p = partials_at(u, z.t, z.s, z.a);
    switch (tag.kind) {
        case Kind::Full: {
            const ModelParams& m = tag.model;
            const double fs = averaging_rate(m.averaging, z.s);
            return 0.5 * m.sigma * m.sigma * z.s * z.s * p.u11 + m.r * z.s * p.u1 + fs * p.u2 +
                   p.ut - m.r * p.u;
        }
        case Kind::CanonicalArithmetic:
            return z.s * z.s * p.u11 + z.s * p.u2 + p.ut;
        case Kind::Geometric:
            return p.u11 + z.s * p.u2 + p.ut;
        case Kind::Perturbed: {
            const double a = tag.a_H(z.t, z.s, z.a);
            if (!(a >= tag.a_low) || !(a <= tag.a_high))
                throw std::domain_error("perturbed coefficient left its declared bounds");
            return a * p.u11 + z.s * p.u2 + p.ut;
        }
    }
    throw std::logic_error("unreachable operator kind");
}

enum class GroupAction { LeftTranslateG, DilateG, TranslateA };

inline GroupElement act(GroupAction action, const GroupElement& param, double lambda,
                        const GroupElement& z) {
    switch (action) {
        case GroupAction::LeftTranslateG: return compose_G(param, z);
        case GroupAction::DilateG: return dilate_G(lambda, z);
        case GroupAction::TranslateA: return translate_A(param, z);
    }
    throw std::logic_error("unreachable action");
}

// u composed with a group action; analytic partials are transported by the
// chain rule (the actions are affine in z for fixed parameters), finite
// differences fall back to differentiating the composed evaluator.
inline TestFunction pull_back(const TestFunction& u, GroupAction action, GroupElement param,
                              double lambda = 1.0) {
    TestFunction v;
    v.fd_step = u.fd_step;
    v.fd_relative = u.fd_relative;
    auto mapped = [action, param, lambda](double t, double x1, double x2) {
        return act(action, param, lambda, GroupElement{t, x1, x2});
    };
    v.value = [u, mapped](double t, double x1, double x2) {
        const GroupElement w = mapped(t, x1, x2);
        return u.value(w.t, w.x1, w.x2);
    };
    if (!u.has_analytic()) return v;

    switch (action) {
        case GroupAction::LeftTranslateG:
            // w = (t'+t, x1'+x1, x2'+x2+t*x1'): only d w2/dt = x1' is nontrivial
            v.dt = [u, mapped, param](double t, double x1, double x2) {
                const GroupElement w = mapped(t, x1, x2);
                return u.dt(w.t, w.x1, w.x2) + param.x1 * u.dx2(w.t, w.x1, w.x2);
            };
            v.dx1 = [u, mapped](double t, double x1, double x2) {
                const GroupElement w = mapped(t, x1, x2);
                return u.dx1(w.t, w.x1, w.x2);
            };
            v.dx1x1 = [u, mapped](double t, double x1, double x2) {
                const GroupElement w = mapped(t, x1, x2);
                return u.dx1x1(w.t, w.x1, w.x2);
            };
            v.dx2 = [u, mapped](double t, double x1, double x2) {
                const GroupElement w = mapped(t, x1, x2);
                return u.dx2(w.t, w.x1, w.x2);
            };
            break;
        case GroupAction::DilateG:
            v.dt = [u, mapped, lambda](double t, double x1, double x2) {
                const GroupElement w = mapped(t, x1, x2);
                return lambda * lambda * u.dt(w.t, w.x1, w.x2);
            };
            v.dx1 = [u, mapped, lambda](double t, double x1, double x2) {
                const GroupElement w = mapped(t, x1, x2);
                return lambda * u.dx1(w.t, w.x1, w.x2);
            };
            v.dx1x1 = [u, mapped, lambda](double t, double x1, double x2) {
                const GroupElement w = mapped(t, x1, x2);
                return lambda * lambda * u.dx1x1(w.t, w.x1, w.x2);
            };
            v.dx2 = [u, mapped, lambda](double t, double x1, double x2) {
                const GroupElement w = mapped(t, x1, x2);
                return lambda * lambda * lambda * u.dx2(w.t, w.x1, w.x2);
            };
            break;
        case GroupAction::TranslateA:
            // w = (t'+t, x1'*x1, x2'+x1'*x2)
            v.dt = [u, mapped](double t, double x1, double x2) {
                const GroupElement w = mapped(t, x1, x2);
                return u.dt(w.t, w.x1, w.x2);
            };
            v.dx1 = [u, mapped, param](double t, double x1, double x2) {
                const GroupElement w = mapped(t, x1, x2);
                return param.x1 * u.dx1(w.t, w.x1, w.x2);
            };
            v.dx1x1 = [u, mapped, param](double t, double x1, double x2) {
                const GroupElement w = mapped(t, x1, x2);
                return param.x1 * param.x1 * u.dx1x1(w.t, w.x1, w.x2);
            };
            v.dx2 = [u, mapped, param](double t, double x1, double x2) {
                const GroupElement w = mapped(t, x1, x2);
                return param.x1 * u.dx2(w.t, w.x1, w.x2);
            };
            break;
    }
    return v;
}

struct InvarianceReport {
    double max_abs_deviation = 0.0;
    bool used_finite_differences = false;
    double fd_step = 0.0;
    GroupElement worst_param{};
    SpaceTimePoint worst_point{};
};

// Compares L(u after the action) against (L u) after the action at each
// sample; dilations carry the degree-two factor lambda^2 and are only
// meaningful for the geometric operator (the arithmetic one has no
// homogeneous structure).
inline InvarianceReport check_invariance(
    const OperatorTag& tag, GroupAction action, const TestFunction& u,
    const std::vector<std::pair<GroupElement, SpaceTimePoint>>& samples, double lambda = 1.0) {
    if (action == GroupAction::DilateG && tag.kind != OperatorTag::Kind::Geometric)
        throw std::invalid_argument("dilation homogeneity only applies to the geometric operator");

    InvarianceReport report;
    report.used_finite_differences = !u.has_analytic();
    report.fd_step = u.fd_step;
    for (const auto& [param, z] : samples) {
        const TestFunction pulled = pull_back(u, action, param, lambda);
        const double lhs = apply_operator(tag, pulled, z);
        const GroupElement w = act(action, param, lambda, GroupElement{z.t, z.s, z.a});
        double rhs = apply_operator(tag, u, SpaceTimePoint{w.t, w.x1, w.x2});
        if (action == GroupAction::DilateG) rhs *= lambda * lambda;
        const double dev = std::fabs(lhs - rhs);
        if (dev > report.max_abs_deviation) {
            report.max_abs_deviation = dev;
            report.worst_param = param;
            report.worst_point = z;
        }
    }
    return report;
}

struct Box3 {
    double t_lo, t_hi;
    double s_lo, s_hi;
    double a_lo, a_hi;
};

enum class HolderOrder { CAlpha, C1Alpha };

// Empirical intrinsic Hoelder seminorm: max over sampled point pairs of
// |u(z)-u(z0)| / ||z0^{-1} o z||^alpha, plus the same quotient for the
// x1-derivative sampler at first order. Monotone nondecreasing when the
// sample is enriched.
template <class Sampler, class DerivSampler>
double holder_seminorm_G(Sampler&& u, DerivSampler&& du_ds, double alpha, const Box3& region,
                         HolderOrder order, int points_per_axis = 8) {
    if (!(alpha > 0.0) || !(alpha < 1.0))
        throw std::invalid_argument("Hoelder exponent must lie in (0,1)");
    if (points_per_axis < 2) throw std::invalid_argument("region sampling needs >= 2 points per axis");

    std::vector<SpaceTimePoint> pts;
    pts.reserve(static_cast<std::size_t>(points_per_axis) * points_per_axis * points_per_axis);
    for (int k = 0; k < points_per_axis; ++k)
        for (int j = 0; j < points_per_axis; ++j)
            for (int i = 0; i < points_per_axis; ++i)
                pts.push_back({region.t_lo + (region.t_hi - region.t_lo) * k / (points_per_axis - 1),
                               region.s_lo + (region.s_hi - region.s_lo) * i / (points_per_axis - 1),
                               region.a_lo + (region.a_hi - region.a_lo) * j / (points_per_axis - 1)});

    double best = 0.0;
    std::vector<double> vals(pts.size()), dvals;
    for (std::size_t i = 0; i < pts.size(); ++i) vals[i] = u(pts[i].t, pts[i].s, pts[i].a);
    if (order == HolderOrder::C1Alpha) {
        dvals.resize(pts.size());
        for (std::size_t i = 0; i < pts.size(); ++i) dvals[i] = du_ds(pts[i].t, pts[i].s, pts[i].a);
    }
    for (std::size_t i = 0; i < pts.size(); ++i) {
        const GroupElement zi{pts[i].t, pts[i].s, pts[i].a};
        for (std::size_t j = i + 1; j < pts.size(); ++j) {
            const GroupElement zj{pts[j].t, pts[j].s, pts[j].a};
            const double dist = homogeneous_norm_G(compose_G(inverse_G(zi), zj));
            if (!(dist > 0.0)) continue;
            const double denom = std::pow(dist, alpha);
            best = std::max(best, std::fabs(vals[j] - vals[i]) / denom);
            if (order == HolderOrder::C1Alpha)
                best = std::max(best, std::fabs(dvals[j] - dvals[i]) / denom);
        }
    }
    return best;
}

template <class Sampler>
double holder_seminorm_G(Sampler&& u, double alpha, const Box3& region,
                         int points_per_axis = 8) {
    return holder_seminorm_G(std::forward<Sampler>(u),
                             [](double, double, double) { return 0.0; }, alpha, region,
                             HolderOrder::CAlpha, points_per_axis);
}

}  // namespace asianop
