#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "model.hpp"

namespace asianop {

// --- lentil domains O_n = D_n(n+1/n, 0) ∩ D_n(0, n+1/n) ---

inline double lentil_center(int n) { return n + 1.0 / n; }

// positive inside O_n, zero on its boundary
inline double lentil_margin(int n, double x, double y) {
    if (n < 1) throw std::invalid_argument("lentil index must be >= 1");
    const double c = lentil_center(n);
    const double d1 = std::hypot(x - c, y);
    const double d2 = std::hypot(x, y - c);
    return static_cast<double>(n) - std::max(d1, d2);
}

inline bool in_lentil(int n, double x, double y) { return lentil_margin(n, x, y) > 0.0; }

// diagonal extent [lo, hi]; the exact bounding box of O_n is [lo,hi]^2
// (the two circle arcs meet on the diagonal). O_1 is empty.
inline std::pair<double, double> lentil_extent(int n) {
    const double c = lentil_center(n);
    const double disc = 2.0 * n * n - c * c;
    if (disc <= 0.0) return {0.0, 0.0};
    const double root = std::sqrt(disc);
    return {0.5 * (c - root), 0.5 * (c + root)};
}

inline double smoothstep(double w) {
    w = std::clamp(w, 0.0, 1.0);
    return w * w * (3.0 - 2.0 * w);
}

// cutoff chi_n: 1 on O_{n-1}, 0 outside O_n, C^1 monotone across the shell,
// parameterized by the normalized two-disk membership margin
inline double cutoff_chi(int n, double x, double y) {
    if (n < 2) throw std::invalid_argument("cutoff needs n >= 2");
    const double outer = lentil_margin(n, x, y);
    if (outer <= 0.0) return 0.0;
    const double inner = lentil_margin(n - 1, x, y);
    if (inner >= 0.0) return 1.0;
    return smoothstep(outer / (outer - inner));
}

struct DomainSpec {
    enum class Kind { Rectangle, Lentil };

    Kind kind = Kind::Rectangle;
    double s_min = 0.0, s_max = 0.0;  // rectangle bounds
    double a_min = 0.0, a_max = 0.0;
    int lentil_n = 0;
    double epsilon = 0.0;  // time floor of the truncated problem
    double T = 0.0;

    static DomainSpec rectangle(double s_lo, double s_hi, double a_lo, double a_hi, double eps,
                                double horizon) {
        if (!(0.0 < s_lo && s_lo < s_hi) || !(0.0 < a_lo && a_lo < a_hi))
            throw ConfigError("rectangle bounds must be positive and ordered");
        if (!(0.0 < eps && eps < horizon)) throw ConfigError("need 0 < epsilon < T");
        return {Kind::Rectangle, s_lo, s_hi, a_lo, a_hi, 0, eps, horizon};
    }

    static DomainSpec lentil(int n, double eps, double horizon) {
        if (n < 1) throw ConfigError("lentil index must be >= 1");
        if (!(0.0 < eps && eps < horizon)) throw ConfigError("need 0 < epsilon < T");
        const auto [lo, hi] = lentil_extent(n);
        DomainSpec d;
        d.kind = Kind::Lentil;
        d.lentil_n = n;
        d.s_min = lo;
        d.s_max = hi;
        d.a_min = lo;
        d.a_max = hi;
        d.epsilon = eps;
        d.T = horizon;
        return d;
    }

    bool contains(double s, double a) const {
        if (kind == Kind::Rectangle)
            return s >= s_min && s <= s_max && a >= a_min && a <= a_max;
        return in_lentil(lentil_n, s, a);
    }
};

enum class NodeKind : unsigned char { Exterior = 0, Boundary = 1, Interior = 2 };

// Tensor grid over the domain's bounding box: log-uniform in s, uniform in
// a, uniform time slices from the floor epsilon up to T. A node is interior
// only when all four spatial stencil neighbors are usable; in-domain nodes
// that are not interior carry Dirichlet data.
struct Grid {
    DomainSpec domain;
    std::vector<double> log_s;  // ns+1 nodes
    std::vector<double> s;
    std::vector<double> a;      // na+1 nodes
    std::vector<double> t;      // nt+1 slices, ascending, t.front()=epsilon, t.back()=T
    std::vector<NodeKind> kind; // (ns+1)*(na+1)

    std::size_t ns() const { return s.size() - 1; }
    std::size_t na() const { return a.size() - 1; }
    std::size_t nt() const { return t.size() - 1; }
    std::size_t n_nodes() const { return s.size() * a.size(); }
    std::size_t idx(std::size_t i, std::size_t j) const { return j * s.size() + i; }

    double dxi() const { return log_s[1] - log_s[0]; }
    double da() const { return a[1] - a[0]; }
    double dt() const { return t[1] - t[0]; }

    std::size_t interior_count() const {
        return static_cast<std::size_t>(
            std::count(kind.begin(), kind.end(), NodeKind::Interior));
    }
};

inline Grid build_grid(const DomainSpec& domain, int n_s, int n_a, int n_t) {
    if (n_s < 2 || n_a < 2 || n_t < 1)
        throw std::invalid_argument("grid needs n_s, n_a >= 2 and n_t >= 1");
    if (domain.kind == DomainSpec::Kind::Lentil && !(domain.s_max > domain.s_min))
        throw NumericalError("degenerate domain: the lentil is empty");

    Grid g;
    g.domain = domain;
    g.log_s.resize(n_s + 1);
    g.s.resize(n_s + 1);
    g.a.resize(n_a + 1);
    g.t.resize(n_t + 1);
    const double xi_lo = std::log(domain.s_min);
    const double xi_hi = std::log(domain.s_max);
    for (int i = 0; i <= n_s; ++i) {
        g.log_s[i] = xi_lo + (xi_hi - xi_lo) * i / n_s;
        g.s[i] = std::exp(g.log_s[i]);
    }
    for (int j = 0; j <= n_a; ++j) g.a[j] = domain.a_min + (domain.a_max - domain.a_min) * j / n_a;
    for (int k = 0; k <= n_t; ++k)
        g.t[k] = domain.epsilon + (domain.T - domain.epsilon) * k / n_t;

    const std::size_t ns1 = g.s.size();
    const std::size_t na1 = g.a.size();
    std::vector<char> mask(ns1 * na1, 0);
    std::size_t inside = 0;
    for (std::size_t j = 0; j < na1; ++j)
        for (std::size_t i = 0; i < ns1; ++i) {
            // a rectangle grid spans its own box exactly; only lentil masks
            // need the membership test
            const bool in = domain.kind == DomainSpec::Kind::Rectangle ||
                            domain.contains(g.s[i], g.a[j]);
            mask[j * ns1 + i] = in ? 1 : 0;
            inside += in ? 1u : 0u;
        }
    if (inside == 0) throw NumericalError("degenerate domain: empty node mask");

    g.kind.assign(ns1 * na1, NodeKind::Exterior);
    for (std::size_t j = 0; j < na1; ++j) {
        for (std::size_t i = 0; i < ns1; ++i) {
            if (!mask[j * ns1 + i]) continue;
            const bool edge = i == 0 || i + 1 == ns1 || j == 0 || j + 1 == na1;
            const bool neighbors_ok = !edge && mask[j * ns1 + i - 1] && mask[j * ns1 + i + 1] &&
                                      mask[(j - 1) * ns1 + i] && mask[(j + 1) * ns1 + i];
            g.kind[j * ns1 + i] = neighbors_ok ? NodeKind::Interior : NodeKind::Boundary;
        }
    }
    return g;
}

// --- lateral data blends ---

// rectangle cutoff: 1 on the inner box, 0 on the edge, transitioning in the
// outer band (fraction of the normalized (log s, a) coordinates)
inline double cutoff_rectangle(const DomainSpec& d, double s, double a, double band = 0.1) {
    const double u = (std::log(s) - std::log(d.s_min)) / (std::log(d.s_max) - std::log(d.s_min));
    const double v = (a - d.a_min) / (d.a_max - d.a_min);
    const double inset = std::min(std::min(u, 1.0 - u), std::min(v, 1.0 - v));
    return smoothstep(inset / band);
}

// Step-construction data g_n = chi_n * payoff + (1 - chi_n) * barrier
inline double boundary_data_g(int n, const PayoffSpec& spec, const SuperSolutionParams& p,
                              const SpaceTimePoint& z) {
    const double chi = cutoff_chi(n, z.s, z.a);
    const double phi = payoff_eval(spec, z);
    if (chi >= 1.0) return phi;
    const double ubar = supersolution_eval(p, z);
    return chi * phi + (1.0 - chi) * ubar;
}

// same blend for production rectangles, with the cutoff in the outer band
inline double boundary_data_rectangle(const DomainSpec& d, const PayoffSpec& spec,
                                      const SuperSolutionParams& p, const SpaceTimePoint& z,
                                      double band = 0.1) {
    const double chi = cutoff_rectangle(d, z.s, z.a, band);
    const double phi = payoff_eval(spec, z);
    if (chi >= 1.0) return phi;
    const double ubar = supersolution_eval(p, z);
    return chi * phi + (1.0 - chi) * ubar;
}

}  // namespace asianop
