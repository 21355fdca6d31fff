#pragma once

#include <cmath>

namespace asianop {

namespace detail {

template <class F>
double simpson_rec(const F& f, double a, double m, double b, double fa, double fm, double fb,
                   double whole, double tol, int depth) {
    const double lm = 0.5 * (a + m);
    const double rm = 0.5 * (m + b);
    const double flm = f(lm);
    const double frm = f(rm);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    const double delta = left + right - whole;
    if (depth <= 0 || std::fabs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
    return simpson_rec(f, a, lm, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
           simpson_rec(f, m, rm, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

}  // namespace detail

// Adaptive Simpson with Richardson correction. The interval is pre-split
// into panels so a bump far from the midpoint cannot be missed.
template <class F>
double integrate(F&& f, double a, double b, double tol = 1e-9, int panels = 16,
                 int max_depth = 30) {
    if (panels < 1) panels = 1;
    const double w = (b - a) / panels;
    const double panel_tol = tol / panels;
    double total = 0.0;
    for (int k = 0; k < panels; ++k) {
        const double pa = a + k * w;
        const double pb = (k + 1 == panels) ? b : pa + w;
        const double pm = 0.5 * (pa + pb);
        const double fa = f(pa);
        const double fm = f(pm);
        const double fb = f(pb);
        const double whole = (pb - pa) / 6.0 * (fa + 4.0 * fm + fb);
        total += detail::simpson_rec(f, pa, pm, pb, fa, fm, fb, whole, panel_tol, max_depth);
    }
    return total;
}

// Iterated 2D integral over [ax,bx] x [ay,by]; the inner tolerance is
// tightened so the composition still meets tol.
template <class F>
double integrate2d(F&& f, double ax, double bx, double ay, double by, double tol = 1e-8,
                   int panels = 16) {
    return integrate(
        [&](double x) {
            return integrate([&, x](double y) { return f(x, y); }, ay, by, 0.05 * tol, panels);
        },
        ax, bx, tol, panels);
}

}  // namespace asianop
