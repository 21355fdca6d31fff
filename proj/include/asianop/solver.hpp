#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "errors.hpp"
#include "grid.hpp"
#include "model.hpp"
#include "operators.hpp"

namespace asianop {

struct SchemeOptions {
    enum class Method { PSOR, Penalty };

    Method method = Method::PSOR;
    double theta = 1.0;        // time weighting in [0.5, 1]
    double omega = 1.5;        // PSOR relaxation in (0, 2)
    double tol = 1e-8;         // complementarity target, relative to the field scale
    int max_iter = 20000;      // PSOR sweeps per time step
    double penalty_rho = 1e10;
    bool store_all_slices = true;
    double store_t_lo = -std::numeric_limits<double>::infinity();
    double store_t_hi = std::numeric_limits<double>::infinity();

    void validate() const {
        if (!(theta >= 0.5 && theta <= 1.0)) throw ConfigError("scheme.theta must lie in [0.5, 1]");
        if (!(omega > 0.0 && omega < 2.0)) throw ConfigError("scheme.omega must lie in (0, 2)");
        if (!(tol > 0.0)) throw ConfigError("scheme.tol must be positive");
        if (max_iter < 1) throw ConfigError("scheme.max_iter must be >= 1");
        if (!(penalty_rho > 0.0)) throw ConfigError("scheme.penalty_rho must be positive");
    }
};

struct SchemeMeta {
    SchemeOptions::Method method = SchemeOptions::Method::PSOR;
    double theta = 1.0;
    std::size_t n_s = 0, n_a = 0, n_t = 0;
    double scale = 0.0;                   // max step scale seen during the march
    double complementarity_residual = 0.0;
    double min_u_minus_obstacle = 0.0;
    long total_sweeps = 0;
    int max_sweeps_per_step = 0;
    std::vector<std::string> warnings;
};

// boundary data source g(t, s, a)
using BoundaryData = std::function<double(const SpaceTimePoint&)>;

struct SolutionField {
    Grid grid;
    ModelParams model;
    PayoffSpec payoff;
    std::vector<double> slice_times;                    // ascending
    std::vector<std::vector<double>> values;            // per stored slice
    std::vector<std::vector<unsigned char>> exercised;  // 1 where u - phi <= mask tol
    SchemeMeta meta;
    double payoff_scale = 1.0;

    std::size_t slice_index_at_or_below(double tq) const {
        if (slice_times.empty()) throw std::logic_error("empty field");
        auto it = std::upper_bound(slice_times.begin(), slice_times.end(), tq);
        if (it == slice_times.begin()) throw std::domain_error("time below stored slices");
        return static_cast<std::size_t>(it - slice_times.begin()) - 1;
    }

    // bilinear in (log s, a) within a slice, linear in t between slices
    double value_at(double tq, double sq, double aq) const {
        const double eps = 1e-12 * std::max(1.0, std::fabs(slice_times.back()));
        if (tq < slice_times.front() - eps || tq > slice_times.back() + eps)
            throw std::domain_error("probe time outside stored slices");
        tq = std::clamp(tq, slice_times.front(), slice_times.back());
        std::size_t k = slice_index_at_or_below(tq);
        if (k + 1 >= slice_times.size()) k = slice_times.size() - 2;
        if (slice_times.size() == 1) return slice_value(0, sq, aq);
        const double t0 = slice_times[k];
        const double t1 = slice_times[k + 1];
        const double w = (tq - t0) / (t1 - t0);
        return (1.0 - w) * slice_value(k, sq, aq) + w * slice_value(k + 1, sq, aq);
    }

    double slice_value(std::size_t k, double sq, double aq) const {
        const auto& u = values[k];
        const double xi = std::log(sq);
        const auto& xs = grid.log_s;
        const auto& ya = grid.a;
        const double exi = 1e-12 * std::max(1.0, std::fabs(xs.back()));
        const double ea = 1e-12 * std::max(1.0, std::fabs(ya.back()));
        if (xi < xs.front() - exi || xi > xs.back() + exi || aq < ya.front() - ea ||
            aq > ya.back() + ea)
            throw std::domain_error("probe outside the spatial grid");
        const double xic = std::clamp(xi, xs.front(), xs.back());
        const double aqc = std::clamp(aq, ya.front(), ya.back());
        std::size_t i = static_cast<std::size_t>((xic - xs.front()) / (xs[1] - xs[0]));
        std::size_t j = static_cast<std::size_t>((aqc - ya.front()) / (ya[1] - ya[0]));
        i = std::min(i, xs.size() - 2);
        j = std::min(j, ya.size() - 2);
        const double wx = (xic - xs[i]) / (xs[i + 1] - xs[i]);
        const double wy = (aqc - ya[j]) / (ya[j + 1] - ya[j]);
        const double v00 = u[grid.idx(i, j)];
        const double v10 = u[grid.idx(i + 1, j)];
        const double v01 = u[grid.idx(i, j + 1)];
        const double v11 = u[grid.idx(i + 1, j + 1)];
        return (1.0 - wx) * (1.0 - wy) * v00 + wx * (1.0 - wy) * v10 + (1.0 - wx) * wy * v01 +
               wx * wy * v11;
    }

    // one-cell central difference of the interpolant in s
    double ds_at(double tq, double sq, double aq) const {
        const double h = sq * (std::exp(grid.dxi()) - 1.0);
        return (value_at(tq, sq + h, aq) - value_at(tq, sq - h, aq)) / (2.0 * h);
    }
};

namespace detail {

// theta-weighted coefficients of one backward step: B u^m = rhs(u^{m+1}),
// B = I - theta*dt*A with A the spatial part of the pricing operator in
// (log s, a). Everything is arranged to keep B an M-matrix: the diffusion
// is central, the log-s convection switches to upwind when central would
// break monotonicity, and the averaging transport is one-sided toward the
// side the characteristic da/dt = f(s) feeds from.
struct StepCoefficients {
    double theta = 1.0;
    double dt = 0.0;
    // per s-index
    std::vector<double> a_lo, a_up, a_diag;  // spatial operator pieces in xi
    std::vector<double> f_over_da;           // |f(s_i)| / da
    std::vector<int> a_dir;                  // +1: couples to j+1, -1: couples to j-1
    double r = 0.0;

    double B_diag(std::size_t i) const {
        return 1.0 - theta * dt * (a_diag[i] - f_over_da[i] - r);
    }
    double B_lo(std::size_t i) const { return -theta * dt * a_lo[i]; }
    double B_up(std::size_t i) const { return -theta * dt * a_up[i]; }
    double B_a(std::size_t i) const { return -theta * dt * f_over_da[i]; }

    // spatial operator applied to a slice at an interior node
    double apply_A(const Grid& g, const std::vector<double>& u, std::size_t i,
                   std::size_t j) const {
        const std::size_t ns1 = g.s.size();
        const double ua_nb = a_dir[i] > 0 ? u[(j + 1) * ns1 + i] : u[(j - 1) * ns1 + i];
        return a_lo[i] * u[j * ns1 + i - 1] + a_up[i] * u[j * ns1 + i + 1] +
               (a_diag[i] - f_over_da[i] - r) * u[j * ns1 + i] + f_over_da[i] * ua_nb;
    }
};

inline StepCoefficients make_step_coefficients(const ModelParams& m, const Grid& g) {
    StepCoefficients c;
    c.theta = 1.0;
    c.dt = g.dt();
    c.r = m.r;
    const double h = g.dxi();
    const double da = g.da();
    const double diff = 0.5 * m.sigma * m.sigma / (h * h);
    const double b = m.r - 0.5 * m.sigma * m.sigma;
    const std::size_t ns1 = g.s.size();
    c.a_lo.resize(ns1);
    c.a_up.resize(ns1);
    c.a_diag.resize(ns1);
    c.f_over_da.resize(ns1);
    c.a_dir.resize(ns1);
    double lo, up, dg;
    if (diff >= std::fabs(b) / (2.0 * h)) {
        lo = diff - b / (2.0 * h);
        up = diff + b / (2.0 * h);
        dg = -2.0 * diff;
    } else if (b > 0.0) {
        lo = diff;
        up = diff + b / h;
        dg = -2.0 * diff - b / h;
    } else {
        lo = diff - b / h;
        up = diff;
        dg = -2.0 * diff + b / h;
    }
    for (std::size_t i = 0; i < ns1; ++i) {
        c.a_lo[i] = lo;
        c.a_up[i] = up;
        c.a_diag[i] = dg;
        const double f = averaging_rate(m.averaging, g.s[i]);
        c.f_over_da[i] = std::fabs(f) / da;
        c.a_dir[i] = f >= 0.0 ? +1 : -1;
    }
    return c;
}

struct InteriorNode {
    std::uint32_t i;
    std::uint32_t j;
};

// fixed sweep order: descending in a so the arithmetic transport, which
// feeds from larger a, is visited first
inline std::vector<InteriorNode> interior_nodes_sweep_order(const Grid& g) {
    std::vector<InteriorNode> nodes;
    const std::size_t ns1 = g.s.size();
    const std::size_t na1 = g.a.size();
    nodes.reserve(g.interior_count());
    for (std::size_t jj = na1; jj-- > 0;)
        for (std::size_t i = 0; i < ns1; ++i)
            if (g.kind[jj * ns1 + i] == NodeKind::Interior)
                nodes.push_back({static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(jj)});
    return nodes;
}

inline double complementarity_residual_slice(const StepCoefficients& c, const Grid& g,
                                             const std::vector<InteriorNode>& nodes,
                                             const std::vector<double>& u,
                                             const std::vector<double>& rhs,
                                             const std::vector<double>& obstacle) {
    const std::size_t ns1 = g.s.size();
    double worst = 0.0;
    for (const auto& nd : nodes) {
        const std::size_t i = nd.i, j = nd.j;
        const std::size_t id = j * ns1 + i;
        const double ua_nb = c.a_dir[i] > 0 ? u[(j + 1) * ns1 + i] : u[(j - 1) * ns1 + i];
        const double Bu = c.B_diag(i) * u[id] + c.B_lo(i) * u[id - 1] + c.B_up(i) * u[id + 1] +
                          c.B_a(i) * ua_nb;
        const double lcp_a = (Bu - rhs[id]) / c.B_diag(i);
        const double lcp_b = u[id] - obstacle[id];
        worst = std::max(worst, std::fabs(std::min(lcp_a, lcp_b)));
    }
    return worst;
}

// tridiagonal solve (Thomas); diag/upper/lower are modified in place
inline void thomas_solve(std::vector<double>& lower, std::vector<double>& diag,
                         std::vector<double>& upper, std::vector<double>& rhs) {
    const std::size_t n = diag.size();
    for (std::size_t i = 1; i < n; ++i) {
        const double w = lower[i] / diag[i - 1];
        diag[i] -= w * upper[i - 1];
        rhs[i] -= w * rhs[i - 1];
    }
    rhs[n - 1] /= diag[n - 1];
    for (std::size_t i = n - 1; i-- > 0;) rhs[i] = (rhs[i] - upper[i] * rhs[i + 1]) / diag[i];
}

}  // namespace detail

// Backward march for max{L u, phi - u} = 0 on the truncated cylinder.
// Lateral data comes from `boundary`; the terminal slice is the payoff
// unless terminal_from_boundary is set (the domain-sequence construction
// imposes its blended data on the whole parabolic boundary).
inline SolutionField solve_obstacle(const ModelParams& m, const PayoffSpec& spec, const Grid& grid,
                                    const SchemeOptions& opts, const BoundaryData& boundary,
                                    bool terminal_from_boundary = false) {
    opts.validate();
    spec.validate();
    if (grid.ns() < 8 || grid.na() < 8 || grid.nt() < 4)
        throw std::invalid_argument("obstacle solve needs n_s, n_a >= 8 and n_t >= 4");

    const std::size_t ns1 = grid.s.size();
    const std::size_t na1 = grid.a.size();
    const std::size_t nn = grid.n_nodes();

    detail::StepCoefficients coeff = detail::make_step_coefficients(m, grid);
    coeff.theta = opts.theta;
    const std::vector<detail::InteriorNode> nodes = detail::interior_nodes_sweep_order(grid);
    if (nodes.empty()) throw NumericalError("degenerate domain: no interior nodes");

    SolutionField field;
    field.grid = grid;
    field.model = m;
    field.payoff = spec;
    field.meta.method = opts.method;
    field.meta.theta = opts.theta;
    field.meta.n_s = grid.ns();
    field.meta.n_a = grid.na();
    field.meta.n_t = grid.nt();

    // transport resolution guidance for the averaging direction
    {
        double fmax = 0.0;
        for (double sv : grid.s) fmax = std::max(fmax, std::fabs(averaging_rate(m.averaging, sv)));
        if (grid.da() >= fmax * grid.dt() && fmax > 0.0) {
            std::ostringstream os;
            os << "a-transport under-resolved: da=" << grid.da() << " >= max|f|*dt="
               << fmax * grid.dt();
            field.meta.warnings.push_back(os.str());
        }
    }

    auto fill_obstacle = [&](double tq, std::vector<double>& phi) {
        for (std::size_t j = 0; j < na1; ++j)
            for (std::size_t i = 0; i < ns1; ++i) {
                const std::size_t id = j * ns1 + i;
                phi[id] = grid.kind[id] == NodeKind::Exterior
                              ? 0.0
                              : payoff_eval(spec, {tq, grid.s[i], grid.a[j]});
            }
    };

    std::vector<double> u(nn, 0.0), u_prev(nn, 0.0), rhs(nn, 0.0), phi(nn, 0.0);

    // terminal slice
    fill_obstacle(grid.t.back(), phi);
    for (std::size_t j = 0; j < na1; ++j)
        for (std::size_t i = 0; i < ns1; ++i) {
            const std::size_t id = j * ns1 + i;
            if (grid.kind[id] == NodeKind::Exterior) {
                u[id] = 0.0;
            } else if (terminal_from_boundary) {
                u[id] = boundary({grid.t.back(), grid.s[i], grid.a[j]});
            } else {
                u[id] = phi[id];
            }
        }

    double payoff_scale = 1e-12;
    for (std::size_t id = 0; id < nn; ++id) payoff_scale = std::max(payoff_scale, std::fabs(phi[id]));
    field.payoff_scale = std::max(payoff_scale, 1e-12);
    const double mask_tol = 1e-8 * field.payoff_scale;

    auto should_store = [&](std::size_t k) {
        if (opts.store_all_slices) return true;
        if (k == grid.nt() || k == 0) return true;
        const double tq = grid.t[k];
        const double pad = 2.0 * grid.dt();
        return tq >= opts.store_t_lo - pad && tq <= opts.store_t_hi + pad;
    };
    auto store_slice = [&](std::size_t k, const std::vector<double>& uu,
                           const std::vector<double>& ph) {
        if (!should_store(k)) return;
        field.slice_times.push_back(grid.t[k]);
        field.values.push_back(uu);
        std::vector<unsigned char> mask(nn, 0);
        for (std::size_t id = 0; id < nn; ++id)
            mask[id] = (grid.kind[id] != NodeKind::Exterior && uu[id] - ph[id] <= mask_tol) ? 1 : 0;
        field.exercised.push_back(std::move(mask));
    };
    store_slice(grid.nt(), u, phi);

    double worst_residual = 0.0;
    double worst_violation = 0.0;
    double field_scale = field.payoff_scale;
    bool relaxation_reduced = false;

    for (std::size_t k = grid.nt(); k-- > 0;) {
        const double tq = grid.t[k];
        u_prev.swap(u);
        fill_obstacle(tq, phi);

        // rhs from the previous slice; explicit part only when theta < 1
        for (const auto& nd : nodes) {
            const std::size_t id = nd.j * ns1 + nd.i;
            double v = u_prev[id];
            if (opts.theta < 1.0)
                v += (1.0 - opts.theta) * coeff.dt * coeff.apply_A(grid, u_prev, nd.i, nd.j);
            rhs[id] = v;
        }

        // Dirichlet data and initial guess
        double step_scale = 1e-12;
        for (std::size_t j = 0; j < na1; ++j)
            for (std::size_t i = 0; i < ns1; ++i) {
                const std::size_t id = j * ns1 + i;
                switch (grid.kind[id]) {
                    case NodeKind::Exterior: u[id] = 0.0; break;
                    case NodeKind::Boundary:
                        u[id] = boundary({tq, grid.s[i], grid.a[j]});
                        step_scale = std::max(step_scale, std::fabs(u[id]));
                        break;
                    case NodeKind::Interior:
                        u[id] = std::max(u_prev[id], phi[id]);
                        step_scale = std::max(step_scale, std::fabs(phi[id]));
                        break;
                }
            }
        field_scale = std::max(field_scale, step_scale);
        // the stopping target sits well below tol so that solution-level
        // differences (conditioning times residual) still fit within
        // tol * scale
        const double target = 0.02 * opts.tol * step_scale;

        if (opts.method == SchemeOptions::Method::PSOR) {
            int sweeps = 0;
            double residual = std::numeric_limits<double>::infinity();
            // over-relaxation can leave the SOR stability region when the
            // transport terms dominate; back off toward plain projected
            // Gauss-Seidel (always convergent for this M-matrix) on stall
            double omega = opts.omega;
            double checkpoint = std::numeric_limits<double>::infinity();
            while (sweeps < opts.max_iter) {
                for (const auto& nd : nodes) {
                    const std::size_t i = nd.i, j = nd.j;
                    const std::size_t id = j * ns1 + i;
                    const double ua_nb =
                        coeff.a_dir[i] > 0 ? u[(j + 1) * ns1 + i] : u[(j - 1) * ns1 + i];
                    const double off = coeff.B_lo(i) * u[id - 1] + coeff.B_up(i) * u[id + 1] +
                                       coeff.B_a(i) * ua_nb;
                    const double cand = (rhs[id] - off) / coeff.B_diag(i);
                    const double relaxed = u[id] + omega * (cand - u[id]);
                    u[id] = std::max(relaxed, phi[id]);
                }
                ++sweeps;
                residual = detail::complementarity_residual_slice(coeff, grid, nodes, u, rhs, phi);
                if (residual <= target) break;
                if (sweeps % 25 == 0) {
                    if (omega > 1.0 && residual > 0.25 * checkpoint) {
                        omega = 1.0 + 0.5 * (omega - 1.0);
                        if (omega < 1.01) omega = 1.0;
                        if (!relaxation_reduced) {
                            relaxation_reduced = true;
                            field.meta.warnings.push_back(
                                "relaxation reduced toward 1 on PSOR stall");
                        }
                    }
                    checkpoint = residual;
                }
            }
            field.meta.total_sweeps += sweeps;
            field.meta.max_sweeps_per_step = std::max(field.meta.max_sweeps_per_step, sweeps);
            if (residual > target) {
                std::ostringstream os;
                os << "PSOR did not converge at t=" << tq << ": residual " << residual
                   << " > target " << target << " after " << opts.max_iter << " sweeps";
                throw NumericalError(os.str());
            }
            worst_residual = std::max(worst_residual, residual);
        } else {
            // penalty: active-set iteration; each linear solve is exact when
            // the transport couples upward only (rows solved in descending a
            // are block-triangular), otherwise finished by SOR sweeps
            const double rho = opts.penalty_rho;
            std::vector<unsigned char> active(nn, 0);
            bool all_up = true;
            for (std::size_t i = 0; i < ns1; ++i)
                if (coeff.a_dir[i] < 0) all_up = false;

            std::vector<double> td_lo, td_di, td_up, td_rhs;
            std::vector<std::size_t> td_ids;
            int outer = 0;
            for (; outer < 100; ++outer) {
                bool changed = false;
                for (const auto& nd : nodes) {
                    const std::size_t id = nd.j * ns1 + nd.i;
                    const unsigned char want = u[id] < phi[id] ? 1 : 0;
                    if (want != active[id]) {
                        active[id] = want;
                        changed = true;
                    }
                }
                if (outer > 0 && !changed) break;

                if (all_up) {
                    for (std::size_t jj = na1; jj-- > 0;) {
                        td_lo.clear(); td_di.clear(); td_up.clear(); td_rhs.clear(); td_ids.clear();
                        for (std::size_t i = 0; i < ns1; ++i) {
                            const std::size_t id = jj * ns1 + i;
                            if (grid.kind[id] != NodeKind::Interior) {
                                if (!td_ids.empty()) {
                                    detail::thomas_solve(td_lo, td_di, td_up, td_rhs);
                                    for (std::size_t kk = 0; kk < td_ids.size(); ++kk)
                                        u[td_ids[kk]] = td_rhs[kk];
                                    td_lo.clear(); td_di.clear(); td_up.clear(); td_rhs.clear();
                                    td_ids.clear();
                                }
                                continue;
                            }
                            const double pen = active[id] ? rho : 0.0;
                            double rr = rhs[id] + pen * phi[id] -
                                        coeff.B_a(i) * u[(jj + 1) * ns1 + i];
                            double dd = coeff.B_diag(i) + pen;
                            double ll = coeff.B_lo(i);
                            double uu_ = coeff.B_up(i);
                            // absorb Dirichlet neighbors
                            if (grid.kind[id - 1] != NodeKind::Interior) {
                                rr -= ll * u[id - 1];
                                ll = 0.0;
                            }
                            if (grid.kind[id + 1] != NodeKind::Interior) {
                                rr -= uu_ * u[id + 1];
                                uu_ = 0.0;
                            }
                            td_lo.push_back(ll);
                            td_di.push_back(dd);
                            td_up.push_back(uu_);
                            td_rhs.push_back(rr);
                            td_ids.push_back(id);
                        }
                        if (!td_ids.empty()) {
                            detail::thomas_solve(td_lo, td_di, td_up, td_rhs);
                            for (std::size_t kk = 0; kk < td_ids.size(); ++kk)
                                u[td_ids[kk]] = td_rhs[kk];
                        }
                    }
                } else {
                    // mixed transport direction: SOR on the penalized system
                    for (int sweep = 0; sweep < opts.max_iter; ++sweep) {
                        double delta = 0.0;
                        for (const auto& nd : nodes) {
                            const std::size_t i = nd.i, j = nd.j;
                            const std::size_t id = j * ns1 + i;
                            const double pen = active[id] ? rho : 0.0;
                            const double ua_nb =
                                coeff.a_dir[i] > 0 ? u[(j + 1) * ns1 + i] : u[(j - 1) * ns1 + i];
                            const double off = coeff.B_lo(i) * u[id - 1] +
                                               coeff.B_up(i) * u[id + 1] + coeff.B_a(i) * ua_nb;
                            const double cand =
                                (rhs[id] + pen * phi[id] - off) / (coeff.B_diag(i) + pen);
                            delta = std::max(delta, std::fabs(cand - u[id]));
                            u[id] = cand;
                        }
                        ++field.meta.total_sweeps;
                        if (delta <= 1e-3 * target) break;
                    }
                }
                ++field.meta.total_sweeps;
            }
            if (outer >= 100)
                throw NumericalError("penalty active-set iteration did not settle");
            const double residual =
                detail::complementarity_residual_slice(coeff, grid, nodes, u, rhs, phi);
            worst_residual = std::max(worst_residual, residual);
        }

        for (const auto& nd : nodes) {
            const std::size_t id = nd.j * ns1 + nd.i;
            worst_violation = std::min(worst_violation, u[id] - phi[id]);
        }
        store_slice(k, u, phi);
    }

    std::reverse(field.slice_times.begin(), field.slice_times.end());
    std::reverse(field.values.begin(), field.values.end());
    std::reverse(field.exercised.begin(), field.exercised.end());
    field.meta.scale = field_scale;
    field.meta.complementarity_residual = worst_residual;
    field.meta.min_u_minus_obstacle = worst_violation;
    return field;
}

// Recomputes the discrete complementarity conditions from the stored
// slices, independent of the path the solver took to produce them.
// Requires consecutive stored slices (store_all_slices).
inline double verify_complementarity(const SolutionField& field) {
    const Grid& grid = field.grid;
    if (field.slice_times.size() != grid.t.size())
        throw std::invalid_argument("complementarity verification needs all slices stored");
    detail::StepCoefficients coeff = detail::make_step_coefficients(field.model, grid);
    coeff.theta = field.meta.theta;
    const auto nodes = detail::interior_nodes_sweep_order(grid);
    const std::size_t ns1 = grid.s.size();
    const std::size_t na1 = grid.a.size();
    std::vector<double> rhs(grid.n_nodes(), 0.0), phi(grid.n_nodes(), 0.0);
    double worst = 0.0;
    for (std::size_t k = 0; k + 1 < field.slice_times.size(); ++k) {
        const auto& u = field.values[k];
        const auto& u_prev = field.values[k + 1];
        for (std::size_t j = 0; j < na1; ++j)
            for (std::size_t i = 0; i < ns1; ++i) {
                const std::size_t id = j * ns1 + i;
                phi[id] = grid.kind[id] == NodeKind::Exterior
                              ? 0.0
                              : payoff_eval(field.payoff, {field.slice_times[k], grid.s[i], grid.a[j]});
            }
        for (const auto& nd : nodes) {
            const std::size_t id = nd.j * ns1 + nd.i;
            double v = u_prev[id];
            if (coeff.theta < 1.0)
                v += (1.0 - coeff.theta) * coeff.dt * coeff.apply_A(grid, u_prev, nd.i, nd.j);
            rhs[id] = v;
        }
        worst = std::max(worst,
                         detail::complementarity_residual_slice(coeff, grid, nodes, u, rhs, phi));
    }
    return worst;
}

// --- exercise region extraction and smooth pasting ---

struct ExerciseBoundary {
    struct Row {
        double t;
        double a;
        double s_low;
        double s_high;
    };
    std::vector<Row> rows;
};

inline ExerciseBoundary extract_exercise_boundary(const SolutionField& field, double tol = 1e-8) {
    ExerciseBoundary out;
    const Grid& g = field.grid;
    const std::size_t ns1 = g.s.size();
    const std::size_t na1 = g.a.size();
    const double cut = tol * field.payoff_scale;
    for (std::size_t k = 0; k < field.slice_times.size(); ++k) {
        const double tq = field.slice_times[k];
        const auto& u = field.values[k];
        for (std::size_t j = 0; j < na1; ++j) {
            long run_start = -1;
            for (std::size_t i = 0; i <= ns1; ++i) {
                bool ex = false;
                if (i < ns1) {
                    const std::size_t id = j * ns1 + i;
                    if (g.kind[id] != NodeKind::Exterior) {
                        const double phi = payoff_eval(field.payoff, {tq, g.s[i], g.a[j]});
                        ex = u[id] - phi <= cut;
                    }
                }
                if (ex && run_start < 0) run_start = static_cast<long>(i);
                if (!ex && run_start >= 0) {
                    out.rows.push_back({tq, g.a[j], g.s[static_cast<std::size_t>(run_start)],
                                        g.s[i - 1]});
                    run_start = -1;
                }
            }
        }
    }
    return out;
}

struct SmoothPastingReport {
    double max_jump = 0.0;
    std::size_t n_points = 0;
    std::size_t n_skipped = 0;
};

// One-sided first derivatives in s on both sides of each exercise/continuation
// transition; the mismatch should shrink under mesh refinement. Transitions
// lacking three usable nodes on either side are skipped. The terminal slice
// is excluded (u = phi there makes the question empty).
inline SmoothPastingReport smooth_pasting_check(const SolutionField& field, double tol = 1e-8) {
    SmoothPastingReport rep;
    const Grid& g = field.grid;
    const std::size_t ns1 = g.s.size();
    const std::size_t na1 = g.a.size();
    const double cut = tol * field.payoff_scale;
    const double h = g.dxi();
    for (std::size_t k = 0; k < field.slice_times.size(); ++k) {
        const double tq = field.slice_times[k];
        if (std::fabs(tq - g.t.back()) < 1e-14) continue;
        const auto& u = field.values[k];
        std::vector<char> ex(ns1, 0), usable(ns1, 0);
        for (std::size_t j = 0; j < na1; ++j) {
            for (std::size_t i = 0; i < ns1; ++i) {
                const std::size_t id = j * ns1 + i;
                usable[i] = g.kind[id] != NodeKind::Exterior ? 1 : 0;
                ex[i] = 0;
                if (usable[i]) {
                    const double phi = payoff_eval(field.payoff, {tq, g.s[i], g.a[j]});
                    ex[i] = u[id] - phi <= cut ? 1 : 0;
                }
            }
            for (std::size_t i = 0; i + 1 < ns1; ++i) {
                if (!usable[i] || !usable[i + 1]) continue;
                if (ex[i] == ex[i + 1]) continue;
                // b: last node on the exercise side; dir: +1 if exercise is left
                const bool ex_left = ex[i] == 1;
                const std::size_t b = ex_left ? i : i + 1;
                const int into_ex = ex_left ? -1 : +1;
                const long b2 = static_cast<long>(b) + 2 * into_ex;
                const long c2 = static_cast<long>(b) - 2 * into_ex;
                auto ok = [&](long q) {
                    return q >= 0 && q < static_cast<long>(ns1) && usable[static_cast<std::size_t>(q)];
                };
                if (!ok(b2) || !ok(c2)) {
                    ++rep.n_skipped;
                    continue;
                }
                const auto val = [&](long q) { return u[j * ns1 + static_cast<std::size_t>(q)]; };
                const long bb = static_cast<long>(b);
                // one-sided second-order derivatives in xi at node b, then /s
                const double d_ex = into_ex *
                                    (3.0 * val(bb) - 4.0 * val(bb + into_ex) + val(bb + 2 * into_ex)) /
                                    (-2.0 * h) / g.s[b];
                const double d_cont = -into_ex *
                                      (3.0 * val(bb) - 4.0 * val(bb - into_ex) + val(bb - 2 * into_ex)) /
                                      (-2.0 * h) / g.s[b];
                rep.max_jump = std::max(rep.max_jump, std::fabs(d_ex - d_cont));
                ++rep.n_points;
            }
        }
    }
    if (rep.n_points == 0 && rep.n_skipped > 0)
        throw NumericalError("exercise boundary sits too close to the domain edge");
    return rep;
}

// --- growth bound ---

struct GrowthBoundReport {
    bool pass = false;
    double worst_ratio = 0.0;
    SpaceTimePoint worst{};
};

// |u(t,s,a)| <= (C/t)(1 + s^q + a^q) at every stored node
inline GrowthBoundReport growth_bound_check(const SolutionField& field, double C, double q,
                                            double rel_tol = 1e-9) {
    GrowthBoundReport rep;
    const Grid& g = field.grid;
    const std::size_t ns1 = g.s.size();
    const std::size_t na1 = g.a.size();
    for (std::size_t k = 0; k < field.slice_times.size(); ++k) {
        const double tq = field.slice_times[k];
        const auto& u = field.values[k];
        for (std::size_t j = 0; j < na1; ++j)
            for (std::size_t i = 0; i < ns1; ++i) {
                const std::size_t id = j * ns1 + i;
                if (g.kind[id] == NodeKind::Exterior) continue;
                const double bound = C / tq * (1.0 + std::pow(g.s[i], q) + std::pow(g.a[j], q));
                const double ratio = bound > 0.0
                                         ? std::fabs(u[id]) / bound
                                         : (u[id] == 0.0 ? 0.0
                                                         : std::numeric_limits<double>::infinity());
                if (ratio > rep.worst_ratio) {
                    rep.worst_ratio = ratio;
                    rep.worst = {tq, g.s[i], g.a[j]};
                }
            }
    }
    rep.pass = rep.worst_ratio <= 1.0 + rel_tol;
    return rep;
}

// --- exhausting-domain construction ---

struct SequencePolicy {
    double cells_per_unit_logs = 48.0;
    double cells_per_unit_a = 48.0;
    int n_t = 96;
    SchemeOptions scheme{};
};

struct CompactProbes {
    Box3 box{};
    int n_t = 3;
    int n_s = 5;
    int n_a = 5;

    std::vector<SpaceTimePoint> points() const {
        return sample_box(box.s_lo, box.s_hi, n_s, box.a_lo, box.a_hi, n_a, box.t_lo, box.t_hi,
                          n_t);
    }
};

struct SequenceReport {
    std::vector<int> n_list;
    std::vector<SpaceTimePoint> probes;
    std::vector<std::vector<double>> probe_values;  // one vector per n
    std::vector<double> probe_payoff;
    std::vector<double> probe_barrier;
    std::vector<double> min_increment;  // per consecutive pair, min(u_{next} - u_prev)
    std::vector<double> sup_increment;  // per consecutive pair, sup |u_{next} - u_prev|
    double min_over_payoff = 0.0;       // min over n, probes of (u_n - phi)
    double max_over_barrier = 0.0;      // max over n, probes of (u_n - ubar)
    bool monotone_flagged = false;      // set when an increment dips below -tol_mono
    double tol_mono = 0.0;
    SolutionField final_field;

    bool chain_within(double tol) const {
        for (double v : min_increment)
            if (v < -tol) return false;
        return min_over_payoff >= -tol && max_over_barrier <= tol;
    }
    bool cauchy_decreasing() const {
        for (std::size_t i = 1; i < sup_increment.size(); ++i)
            if (!(sup_increment[i] < sup_increment[i - 1])) return false;
        return true;
    }
};

// Solves on each lentil with the blended data of the exhausting-domain
// construction and compares consecutive solutions on a shared compact.
inline SequenceReport domain_sequence_solve(const ModelParams& m, const PayoffSpec& spec,
                                            const SuperSolutionParams& barrier,
                                            const std::vector<int>& n_list,
                                            const SequencePolicy& policy,
                                            const CompactProbes& compact,
                                            double tol_mono = 1e-3) {
    if (n_list.size() < 2) throw std::invalid_argument("need at least two lentil indices");
    for (std::size_t i = 1; i < n_list.size(); ++i)
        if (n_list[i] <= n_list[i - 1])
            throw std::invalid_argument("lentil indices must be increasing");

    SequenceReport rep;
    rep.n_list = n_list;
    rep.probes = compact.points();
    rep.tol_mono = tol_mono;
    rep.probe_payoff.reserve(rep.probes.size());
    rep.probe_barrier.reserve(rep.probes.size());
    for (const auto& z : rep.probes) {
        rep.probe_payoff.push_back(payoff_eval(spec, z));
        rep.probe_barrier.push_back(supersolution_eval(barrier, z));
    }

    bool first = true;
    for (std::size_t q = 0; q < n_list.size(); ++q) {
        const int n = n_list[q];
        DomainSpec dom = DomainSpec::lentil(n, compact.box.t_lo * 0.5, m.T);
        const int n_s =
            std::max(16, static_cast<int>(std::ceil(policy.cells_per_unit_logs *
                                                    std::log(dom.s_max / dom.s_min))));
        const int n_a = std::max(
            16, static_cast<int>(std::ceil(policy.cells_per_unit_a * (dom.a_max - dom.a_min))));
        Grid grid = build_grid(dom, n_s, n_a, policy.n_t);
        SchemeOptions opts = policy.scheme;
        opts.store_all_slices = false;
        opts.store_t_lo = compact.box.t_lo;
        opts.store_t_hi = compact.box.t_hi;
        BoundaryData g = [n, &spec, &barrier](const SpaceTimePoint& z) {
            return boundary_data_g(n, spec, barrier, z);
        };
        SolutionField field = solve_obstacle(m, spec, grid, opts, g, /*terminal_from_boundary=*/true);

        std::vector<double> vals(rep.probes.size());
        for (std::size_t p = 0; p < rep.probes.size(); ++p)
            vals[p] = field.value_at(rep.probes[p].t, rep.probes[p].s, rep.probes[p].a);

        for (std::size_t p = 0; p < vals.size(); ++p) {
            const double over_phi = vals[p] - rep.probe_payoff[p];
            const double over_bar = vals[p] - rep.probe_barrier[p];
            if (first && p == 0) {
                rep.min_over_payoff = over_phi;
                rep.max_over_barrier = over_bar;
            }
            rep.min_over_payoff = std::min(rep.min_over_payoff, over_phi);
            rep.max_over_barrier = std::max(rep.max_over_barrier, over_bar);
        }
        if (!rep.probe_values.empty()) {
            const auto& prev = rep.probe_values.back();
            double mn = vals[0] - prev[0];
            double sup = std::fabs(vals[0] - prev[0]);
            for (std::size_t p = 1; p < vals.size(); ++p) {
                mn = std::min(mn, vals[p] - prev[p]);
                sup = std::max(sup, std::fabs(vals[p] - prev[p]));
            }
            rep.min_increment.push_back(mn);
            rep.sup_increment.push_back(sup);
            if (mn < -tol_mono) rep.monotone_flagged = true;
        }
        rep.probe_values.push_back(std::move(vals));
        if (q + 1 == n_list.size()) rep.final_field = std::move(field);
        first = false;
    }
    return rep;
}

// --- floating-strike reduction to one spatial dimension ---

struct Reduced1DOptions {
    double y_max = 6.0;
    int n_y = 256;
    int n_t = 128;
    double epsilon = 1e-4;
    double theta = 1.0;
    double omega = 1.5;
    double tol = 1e-8;
    int max_iter = 20000;
};

struct Reduced1DField {
    ModelParams model;
    std::vector<double> y;
    std::vector<double> t;  // ascending
    std::vector<std::vector<double>> values;
    double complementarity_residual = 0.0;

    double value_at(double tq, double yq) const {
        const double eps = 1e-12 * std::max(1.0, t.back());
        if (tq < t.front() - eps || tq > t.back() + eps)
            throw std::domain_error("time outside the reduced field");
        tq = std::clamp(tq, t.front(), t.back());
        const double obstacle_tail = yq / tq - 1.0;
        if (yq >= y.back()) return std::max(obstacle_tail, 0.0);  // deep in the money
        const double dtq = t[1] - t[0];
        std::size_t k = std::min<std::size_t>(static_cast<std::size_t>((tq - t.front()) / dtq),
                                              t.size() - 2);
        const double w = (tq - t[k]) / (t[k + 1] - t[k]);
        auto at = [&](std::size_t kk) {
            const double dy = y[1] - y[0];
            std::size_t j = std::min<std::size_t>(static_cast<std::size_t>((yq - y.front()) / dy),
                                                  y.size() - 2);
            const double wy = (yq - y[j]) / (y[j + 1] - y[j]);
            return (1.0 - wy) * values[kk][j] + wy * values[kk][j + 1];
        };
        return (1.0 - w) * at(k) + w * at(k + 1);
    }

    // u(t, s, a) = s * v(t, a/s); exactly degree-one homogeneous in (s, a)
    double lift(double tq, double s, double a) const {
        if (!(s > 0.0)) throw std::domain_error("lift needs s > 0");
        return s * value_at(tq, a / s);
    }
};

// The degree-one homogeneity of the floating-strike payoff admits the
// substitution u = s v(t, a/s), which turns the pricing operator into
//   (sigma^2/2) y^2 v_yy + (1 - r y) v_y + v_t
// with obstacle (y/t - 1)^+. The fixed strike has no such reduction.
inline Reduced1DField solve_floating_reduced(const ModelParams& m, const PayoffSpec& spec,
                                             const Reduced1DOptions& opts) {
    if (spec.kind != PayoffKind::FloatingStrike)
        throw ReductionError("reduction only for floating strike");
    if (m.averaging != Averaging::Arithmetic)
        throw ReductionError("reduction defined for arithmetic averaging");
    if (opts.n_y < 8 || opts.n_t < 4) throw std::invalid_argument("reduced grid too coarse");
    if (!(opts.epsilon > 0.0 && opts.epsilon < m.T)) throw ConfigError("need 0 < epsilon < T");

    Reduced1DField f;
    f.model = m;
    f.y.resize(opts.n_y + 1);
    f.t.resize(opts.n_t + 1);
    for (int j = 0; j <= opts.n_y; ++j) f.y[j] = opts.y_max * j / opts.n_y;
    for (int k = 0; k <= opts.n_t; ++k)
        f.t[k] = opts.epsilon + (m.T - opts.epsilon) * k / opts.n_t;
    const double dy = f.y[1] - f.y[0];
    const double dt = f.t[1] - f.t[0];

    auto psi = [&](double tq, double yq) { return std::max(yq / tq - 1.0, 0.0); };

    const std::size_t ny1 = f.y.size();
    std::vector<double> alo(ny1), aup(ny1), adia(ny1);
    for (std::size_t j = 0; j < ny1; ++j) {
        const double yj = f.y[j];
        const double diff = 0.5 * m.sigma * m.sigma * yj * yj / (dy * dy);
        const double b = 1.0 - m.r * yj;
        if (j > 0 && diff >= std::fabs(b) / (2.0 * dy)) {
            alo[j] = diff - b / (2.0 * dy);
            aup[j] = diff + b / (2.0 * dy);
            adia[j] = -2.0 * diff;
        } else if (b >= 0.0) {
            alo[j] = diff;
            aup[j] = diff + b / dy;
            adia[j] = -2.0 * diff - b / dy;
        } else {
            alo[j] = diff - b / dy;
            aup[j] = diff;
            adia[j] = -2.0 * diff + b / dy;
        }
    }

    std::vector<double> u(ny1), u_prev(ny1), rhs(ny1), phi(ny1);
    for (std::size_t j = 0; j < ny1; ++j) u[j] = psi(f.t.back(), f.y[j]);
    f.values.assign(opts.n_t + 1, {});
    f.values[opts.n_t] = u;

    auto applyA = [&](const std::vector<double>& v, std::size_t j) {
        const double left = j > 0 ? v[j - 1] : 0.0;
        return alo[j] * left + adia[j] * v[j] + aup[j] * v[j + 1];
    };

    for (int k = opts.n_t; k-- > 0;) {
        const double tq = f.t[k];
        u_prev = u;
        double scale = 1e-12;
        for (std::size_t j = 0; j < ny1; ++j) {
            phi[j] = psi(tq, f.y[j]);
            scale = std::max(scale, std::fabs(phi[j]));
        }
        for (std::size_t j = 0; j + 1 < ny1; ++j) {
            rhs[j] = u_prev[j];
            if (opts.theta < 1.0) rhs[j] += (1.0 - opts.theta) * dt * applyA(u_prev, j);
        }
        u[ny1 - 1] = phi[ny1 - 1];  // Dirichlet at y_max
        for (std::size_t j = 0; j + 1 < ny1; ++j) u[j] = std::max(u_prev[j], phi[j]);

        const double target = 0.02 * opts.tol * scale;
        double residual = std::numeric_limits<double>::infinity();
        double omega = opts.omega;
        double checkpoint = std::numeric_limits<double>::infinity();
        int sweeps = 0;
        while (sweeps < opts.max_iter) {
            for (std::size_t j = 0; j + 1 < ny1; ++j) {
                const double Bd = 1.0 - opts.theta * dt * adia[j];
                const double Bl = -opts.theta * dt * alo[j];
                const double Bu_ = -opts.theta * dt * aup[j];
                const double off = (j > 0 ? Bl * u[j - 1] : 0.0) + Bu_ * u[j + 1];
                const double cand = (rhs[j] - off) / Bd;
                u[j] = std::max(u[j] + omega * (cand - u[j]), phi[j]);
            }
            ++sweeps;
            residual = 0.0;
            for (std::size_t j = 0; j + 1 < ny1; ++j) {
                const double Bd = 1.0 - opts.theta * dt * adia[j];
                const double Bl = -opts.theta * dt * alo[j];
                const double Bu_ = -opts.theta * dt * aup[j];
                const double Bu_val = Bd * u[j] + (j > 0 ? Bl * u[j - 1] : 0.0) + Bu_ * u[j + 1];
                residual = std::max(residual, std::fabs(std::min((Bu_val - rhs[j]) / Bd, u[j] - phi[j])));
            }
            if (residual <= target) break;
            if (sweeps % 25 == 0) {
                if (omega > 1.0 && residual > 0.25 * checkpoint)
                    omega = omega < 1.02 ? 1.0 : 1.0 + 0.5 * (omega - 1.0);
                checkpoint = residual;
            }
        }
        if (residual > target)
            throw NumericalError("reduced-problem PSOR did not converge");
        f.complementarity_residual = std::max(f.complementarity_residual, residual);
        f.values[k] = u;
    }
    return f;
}

}  // namespace asianop
