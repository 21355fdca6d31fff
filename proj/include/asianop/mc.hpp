#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "errors.hpp"
#include "model.hpp"
#include "parallel.hpp"
#include "rng.hpp"

namespace asianop {

namespace detail {

struct PathParams {
    double t0, dt, drift, vol;
    int M;
    std::uint64_t seed;
    bool antithetic;
};

// one risk-neutral path on the schedule; the exponential step is exact and
// the accumulator uses the trapezoid rule on f(S)
template <class Visitor>
void walk_path(const ModelParams& m, const SpaceTimePoint& start, const PathParams& pp,
               std::size_t p, Visitor&& visit) {
    const std::uint64_t stream = pp.antithetic ? (p >> 1) : p;
    const double sign = (pp.antithetic && (p & 1)) ? -1.0 : 1.0;
    double S = start.s;
    double A = start.a;
    double fprev = averaging_rate(m.averaging, S);
    visit(0, pp.t0, S, A);
    for (int k = 0; k < pp.M; ++k) {
        const double z = sign * counter_gaussian(pp.seed, stream, static_cast<std::uint32_t>(k));
        S *= std::exp(pp.drift + pp.vol * z);
        const double fcur = averaging_rate(m.averaging, S);
        A += 0.5 * pp.dt * (fprev + fcur);
        fprev = fcur;
        visit(k + 1, pp.t0 + (k + 1) * pp.dt, S, A);
    }
}

inline PathParams make_path_params(const ModelParams& m, const SpaceTimePoint& start, int M,
                                   std::uint64_t seed, bool antithetic) {
    if (!(start.s > 0.0) || !(start.a > 0.0))
        throw std::invalid_argument("simulation needs positive start values");
    if (!(start.t < m.T)) throw std::invalid_argument("start time must precede maturity");
    if (M < 1) throw std::invalid_argument("schedule needs at least one step");
    PathParams pp;
    pp.t0 = start.t;
    pp.dt = (m.T - start.t) / M;
    pp.drift = (m.r - 0.5 * m.sigma * m.sigma) * pp.dt;
    pp.vol = m.sigma * std::sqrt(pp.dt);
    pp.M = M;
    pp.seed = seed;
    pp.antithetic = antithetic;
    return pp;
}

}  // namespace detail

struct PathBatch {
    std::vector<double> schedule;  // M+1 times
    std::vector<double> S;         // path-major, [p * (M+1) + k]
    std::vector<double> A;
    std::size_t N = 0;
    std::uint64_t seed = 0;
    bool antithetic = false;

    double s_at(std::size_t p, std::size_t k) const { return S[p * schedule.size() + k]; }
    double a_at(std::size_t p, std::size_t k) const { return A[p * schedule.size() + k]; }
};

inline PathBatch simulate_paths(const ModelParams& m, const SpaceTimePoint& start, int M,
                                std::size_t N, std::uint64_t seed, bool antithetic = false) {
    if (N < 2) throw std::invalid_argument("need at least two paths");
    if (antithetic && (N % 2) != 0) throw std::invalid_argument("antithetic batches need even N");
    const detail::PathParams pp = detail::make_path_params(m, start, M, seed, antithetic);
    PathBatch batch;
    batch.schedule.resize(M + 1);
    for (int k = 0; k <= M; ++k) batch.schedule[k] = pp.t0 + k * pp.dt;
    batch.schedule[M] = m.T;
    batch.S.assign(N * (M + 1), 0.0);
    batch.A.assign(N * (M + 1), 0.0);
    batch.N = N;
    batch.seed = seed;
    batch.antithetic = antithetic;
    for_each_block(N, [&](std::size_t, std::size_t lo, std::size_t hi) {
        for (std::size_t p = lo; p < hi; ++p) {
            detail::walk_path(m, start, pp, p, [&](int k, double, double S, double A) {
                batch.S[p * (M + 1) + k] = S;
                batch.A[p * (M + 1) + k] = A;
            });
        }
    });
    // pathwise sanity asserted on every batch
    for (std::size_t p = 0; p < N; ++p)
        for (int k = 0; k <= M; ++k) {
            if (!(batch.s_at(p, k) > 0.0)) throw NumericalError("path left the positive half-line");
            if (m.averaging == Averaging::Arithmetic && k > 0 &&
                !(batch.a_at(p, k) > batch.a_at(p, k - 1)))
                throw NumericalError("arithmetic accumulator failed to increase");
        }
    return batch;
}

struct PriceEstimate {
    double price = 0.0;
    double std_error = 0.0;
};

// discounted terminal payoff, no early exercise
inline PriceEstimate european_price_mc(const ModelParams& m, const PayoffSpec& spec,
                                       const SpaceTimePoint& start, int M, std::size_t N,
                                       std::uint64_t seed, bool antithetic = false) {
    if (N < 2) throw std::invalid_argument("need at least two paths");
    if (antithetic && (N % 2) != 0) throw std::invalid_argument("antithetic batches need even N");
    const detail::PathParams pp = detail::make_path_params(m, start, M, seed, antithetic);
    const double disc = std::exp(-m.r * (m.T - start.t));
    const std::size_t groups = antithetic ? N / 2 : N;
    const std::size_t per_group = antithetic ? 2 : 1;
    std::vector<double> sum(block_count(groups), 0.0), sumsq(block_count(groups), 0.0);
    for_each_block(groups, [&](std::size_t b, std::size_t lo, std::size_t hi) {
        double s1 = 0.0, s2 = 0.0;
        for (std::size_t gp = lo; gp < hi; ++gp) {
            double v = 0.0;
            for (std::size_t q = 0; q < per_group; ++q) {
                const std::size_t p = gp * per_group + q;
                double last_S = 0.0, last_A = 0.0;
                detail::walk_path(m, start, pp, p, [&](int, double, double S, double A) {
                    last_S = S;
                    last_A = A;
                });
                v += disc * payoff_eval(spec, {m.T, last_S, last_A});
            }
            v /= static_cast<double>(per_group);
            s1 += v;
            s2 += v * v;
        }
        sum[b] = s1;
        sumsq[b] = s2;
    });
    double s1 = 0.0, s2 = 0.0;
    for (std::size_t b = 0; b < sum.size(); ++b) {
        s1 += sum[b];
        s2 += sumsq[b];
    }
    PriceEstimate est;
    const double n = static_cast<double>(groups);
    est.price = s1 / n;
    const double var = std::max(0.0, (s2 - n * est.price * est.price) / std::max(1.0, n - 1.0));
    est.std_error = std::sqrt(var / n);
    return est;
}

// All stopping rules are deterministic once the noise is switched off: the
// best exercise time is a scan over the schedule along the single path,
// with the accumulator integrated in closed form.
inline double deterministic_oracle_price(const ModelParams& m, const PayoffSpec& spec,
                                         const SpaceTimePoint& start, int M) {
    if (m.sigma != 0.0)
        throw std::invalid_argument("the deterministic oracle requires sigma = 0");
    if (!(start.s > 0.0) || !(start.a > 0.0))
        throw std::invalid_argument("oracle needs positive start values");
    if (!(start.t < m.T)) throw std::invalid_argument("start time must precede maturity");
    if (M < 1) throw std::invalid_argument("schedule needs at least one step");
    const double t0 = start.t;
    double best = 0.0;
    for (int k = 0; k <= M; ++k) {
        const double tau = t0 + (m.T - t0) * k / M;
        const double dtau = tau - t0;
        const double S = start.s * std::exp(m.r * dtau);
        double A;
        if (m.averaging == Averaging::Arithmetic) {
            A = m.r > 0.0 ? start.a + start.s * (std::exp(m.r * dtau) - 1.0) / m.r
                          : start.a + start.s * dtau;
        } else {
            A = start.a + std::log(start.s) * dtau + 0.5 * m.r * dtau * dtau;
        }
        best = std::max(best, std::exp(-m.r * dtau) * payoff_eval(spec, {tau, S, A}));
    }
    return best;
}

struct StoppingEstimate {
    double price = 0.0;
    double std_error = 0.0;
    double in_sample = 0.0;              // diagnostic backward-induction value
    bool exercised_at_start = false;
    bool basis_truncated = false;
    std::string basis;
    std::vector<std::size_t> exercises_per_step;  // out-of-sample stop counts
};

namespace detail {

// monomials in (S/s_ref, (A/t)/y_ref) up to total degree d, ordered by
// total degree so truncation keeps a complete lower-degree basis
struct StoppingBasis {
    int degree;
    double s_ref;
    double y_ref;
    std::vector<std::pair<int, int>> terms;

    StoppingBasis(int d, const SpaceTimePoint& start) : degree(d), s_ref(start.s) {
        y_ref = std::max(start.a / start.t, start.s);
        for (int total = 0; total <= d; ++total)
            for (int i = 0; i <= total; ++i) terms.emplace_back(i, total - i);
    }

    std::size_t size() const { return terms.size(); }

    void eval(double S, double avg, double* out, std::size_t p) const {
        const double x = S / s_ref;
        const double y = avg / y_ref;
        double xp[16], yp[16];
        xp[0] = 1.0;
        yp[0] = 1.0;
        for (int k = 1; k <= degree; ++k) {
            xp[k] = xp[k - 1] * x;
            yp[k] = yp[k - 1] * y;
        }
        for (std::size_t q = 0; q < p; ++q) out[q] = xp[terms[q].first] * yp[terms[q].second];
    }

    std::string describe() const {
        std::ostringstream os;
        os << "monomials in (S/" << s_ref << ", avg/" << y_ref << ") up to total degree "
           << degree;
        return os.str();
    }
};

// least squares through the Gram system; falls back to the largest
// complete lower-degree prefix that is numerically positive definite
inline std::optional<Eigen::VectorXd> solve_gram(const Eigen::MatrixXd& G,
                                                 const Eigen::VectorXd& b, int degree,
                                                 bool& truncated) {
    int p = static_cast<int>(G.rows());
    int d = degree;
    while (d >= 0) {
        const int q = (d + 1) * (d + 2) / 2;
        if (q > p) {
            --d;
            continue;
        }
        Eigen::MatrixXd Gq = G.topLeftCorner(q, q);
        // relative jitter keeps the decision scale-free
        const double floor_ = 1e-12 * Gq.trace() / q;
        Eigen::LLT<Eigen::MatrixXd> llt(Gq);
        bool ok = llt.info() == Eigen::Success;
        if (ok) {
            const Eigen::MatrixXd L = llt.matrixL();
            for (int i = 0; i < q; ++i)
                if (!(L(i, i) * L(i, i) > floor_)) ok = false;
        }
        if (ok) {
            Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
            beta.head(q) = llt.solve(b.head(q));
            if (q < p) truncated = true;
            return beta;
        }
        truncated = true;
        --d;
    }
    return std::nullopt;
}

}  // namespace detail

// Least-squares optimal stopping: backward induction with continuation
// regression on in-the-money paths, then a fresh out-of-sample batch
// re-run under the fitted policy. Only the re-run is reported as the
// price; the in-sample value is diagnostic.
inline StoppingEstimate lsmc_price(const ModelParams& m, const PayoffSpec& spec,
                                   const SpaceTimePoint& start, int M, std::size_t N, int degree,
                                   std::uint64_t seed, bool antithetic = false) {
    if (degree < 2) throw std::invalid_argument("basis degree must be >= 2");
    if (degree > 15) throw std::invalid_argument("basis degree too large");
    if (N < 4) throw std::invalid_argument("need at least four paths");
    if (antithetic && (N % 2) != 0) throw std::invalid_argument("antithetic batches need even N");
    if (!(start.t > 0.0)) throw std::domain_error("start time must be positive");

    const detail::PathParams pp = detail::make_path_params(m, start, M, seed, antithetic);
    const detail::StoppingBasis basis(degree, start);
    const std::size_t nb = basis.size();

    StoppingEstimate est;
    est.basis = basis.describe();

    // fit batch: spot stored as float32, accumulator reconstructed backward
    std::vector<float> Sfit(N * static_cast<std::size_t>(M + 1));
    std::vector<double> Acur(N);  // accumulator at the current step, walked backward
    for_each_block(N, [&](std::size_t, std::size_t lo, std::size_t hi) {
        for (std::size_t p = lo; p < hi; ++p) {
            detail::walk_path(m, start, pp, p, [&](int k, double, double S, double) {
                Sfit[p * (M + 1) + k] = static_cast<float>(S);
            });
            double A = start.a;
            double fprev = averaging_rate(m.averaging, Sfit[p * (M + 1)]);
            for (int k = 1; k <= M; ++k) {
                const double fcur = averaging_rate(m.averaging, Sfit[p * (M + 1) + k]);
                A += 0.5 * pp.dt * (fprev + fcur);
                fprev = fcur;
            }
            Acur[p] = A;
        }
    });

    std::vector<double> cash(N);
    std::vector<int> stop_k(N, M);
    for (std::size_t p = 0; p < N; ++p)
        cash[p] = payoff_eval(spec, {m.T, Sfit[p * (M + 1) + M], Acur[p]});

    std::vector<std::vector<double>> policy(static_cast<std::size_t>(M));  // index k in [1, M-1]
    std::vector<double> feat(nb);
    Eigen::MatrixXd G(nb, nb);
    Eigen::VectorXd bvec(nb);

    for (int k = M - 1; k >= 1; --k) {
        const double tk = pp.t0 + k * pp.dt;
        // roll the accumulator back one step
        for (std::size_t p = 0; p < N; ++p) {
            const double f0 = averaging_rate(m.averaging, Sfit[p * (M + 1) + k]);
            const double f1 = averaging_rate(m.averaging, Sfit[p * (M + 1) + k + 1]);
            Acur[p] -= 0.5 * pp.dt * (f0 + f1);
        }
        G.setZero();
        bvec.setZero();
        std::size_t n_itm = 0;
        for (std::size_t p = 0; p < N; ++p) {
            const double S = Sfit[p * (M + 1) + k];
            const double avg = Acur[p] / tk;
            const double phi = payoff_eval(spec, {tk, S, Acur[p]});
            if (!(phi > 0.0)) continue;
            ++n_itm;
            basis.eval(S, avg, feat.data(), nb);
            const double y = std::exp(-m.r * (pp.t0 + stop_k[p] * pp.dt - tk)) * cash[p];
            for (std::size_t i = 0; i < nb; ++i) {
                bvec(i) += feat[i] * y;
                for (std::size_t j = 0; j <= i; ++j) G(i, j) += feat[i] * feat[j];
            }
        }
        if (n_itm < 2 * nb) continue;  // too few in-the-money paths to fit
        for (std::size_t i = 0; i < nb; ++i)
            for (std::size_t j = i + 1; j < nb; ++j) G(i, j) = G(j, i);
        bool truncated = false;
        const auto beta = detail::solve_gram(G, bvec, degree, truncated);
        if (truncated) est.basis_truncated = true;
        if (!beta) continue;
        policy[k].assign(beta->data(), beta->data() + nb);
        for (std::size_t p = 0; p < N; ++p) {
            const double S = Sfit[p * (M + 1) + k];
            const double phi = payoff_eval(spec, {tk, S, Acur[p]});
            if (!(phi > 0.0)) continue;
            basis.eval(S, Acur[p] / tk, feat.data(), nb);
            double cont = 0.0;
            for (std::size_t i = 0; i < nb; ++i) cont += policy[k][i] * feat[i];
            if (phi >= cont) {
                cash[p] = phi;
                stop_k[p] = k;
            }
        }
    }
    double fit_cont = 0.0;
    for (std::size_t p = 0; p < N; ++p)
        fit_cont += std::exp(-m.r * (stop_k[p] * pp.dt)) * cash[p];
    fit_cont /= static_cast<double>(N);
    const double immediate = payoff_eval(spec, start);
    est.in_sample = std::max(immediate, fit_cont);
    Sfit.clear();
    Sfit.shrink_to_fit();

    // out-of-sample policy re-run on an independent stream
    const std::uint64_t seed2 = derive_seed(seed, 0x0CEA11);
    const detail::PathParams pp2 = detail::make_path_params(m, start, M, seed2, antithetic);
    const std::size_t groups = antithetic ? N / 2 : N;
    const std::size_t per_group = antithetic ? 2 : 1;
    const std::size_t nblocks = block_count(groups);
    std::vector<double> bsum(nblocks, 0.0), bsumsq(nblocks, 0.0);
    std::vector<std::vector<std::size_t>> bstops(nblocks);
    for_each_block(groups, [&](std::size_t b, std::size_t lo, std::size_t hi) {
        std::vector<double> f(nb);
        std::vector<std::size_t> stops(M + 1, 0);
        double s1 = 0.0, s2 = 0.0;
        for (std::size_t gp = lo; gp < hi; ++gp) {
            double v = 0.0;
            for (std::size_t q = 0; q < per_group; ++q) {
                const std::size_t p = gp * per_group + q;
                double disc_payoff = 0.0;
                bool stopped = false;
                detail::walk_path(m, start, pp2, p, [&](int k, double tk, double S, double A) {
                    if (stopped || k == 0) return;
                    const double phi = payoff_eval(spec, {tk, S, A});
                    if (k == pp2.M) {
                        disc_payoff = std::exp(-m.r * (tk - pp2.t0)) * phi;
                        stops[k] += phi > 0.0 ? 1 : 0;
                        stopped = true;
                        return;
                    }
                    if (!(phi > 0.0) || policy[k].empty()) return;
                    basis.eval(S, A / tk, f.data(), nb);
                    double cont = 0.0;
                    for (std::size_t i = 0; i < nb; ++i) cont += policy[k][i] * f[i];
                    if (phi >= cont) {
                        disc_payoff = std::exp(-m.r * (tk - pp2.t0)) * phi;
                        ++stops[k];
                        stopped = true;
                    }
                });
                v += disc_payoff;
            }
            v /= static_cast<double>(per_group);
            s1 += v;
            s2 += v * v;
        }
        bsum[b] = s1;
        bsumsq[b] = s2;
        bstops[b] = std::move(stops);
    });
    double s1 = 0.0, s2 = 0.0;
    est.exercises_per_step.assign(M + 1, 0);
    for (std::size_t b = 0; b < nblocks; ++b) {
        s1 += bsum[b];
        s2 += bsumsq[b];
        if (!bstops[b].empty())
            for (int k = 0; k <= M; ++k) est.exercises_per_step[k] += bstops[b][k];
    }
    const double n = static_cast<double>(groups);
    const double out_mean = s1 / n;
    const double var = std::max(0.0, (s2 - n * out_mean * out_mean) / std::max(1.0, n - 1.0));
    const double out_se = std::sqrt(var / n);
    if (immediate >= out_mean) {
        est.price = immediate;
        est.std_error = 0.0;
        est.exercised_at_start = true;
    } else {
        est.price = out_mean;
        est.std_error = out_se;
    }
    return est;
}

}  // namespace asianop
