#pragma once

#include <cmath>
#include <cstddef>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "errors.hpp"

namespace asianop {

enum class Averaging { Arithmetic, Geometric };

// rate f(s) driving the accumulator dA = f(S) dt
inline double averaging_rate(Averaging kind, double s) {
    return kind == Averaging::Arithmetic ? s : std::log(s);
}

struct ModelParams {
    double sigma = 0.4;        // volatility, per sqrt-year
    double r = 0.05;           // risk-free rate, per year
    double T = 1.0;            // maturity, years
    Averaging averaging = Averaging::Arithmetic;
    double sigma_floor = 1e-8; // admissibility floor sigma_0 for the volatility

    // admission checks: bounded volatility away from zero, positive horizon
    void validate() const {
        if (!(sigma_floor > 0.0))
            throw ConfigError("model.sigma_floor must be positive ((H1) needs sigma >= sigma_0 > 0)");
        if (!(sigma >= sigma_floor)) {
            std::ostringstream os;
            os << "model.sigma violates (H1): need sigma >= sigma_floor > 0, got sigma=" << sigma
               << ", sigma_floor=" << sigma_floor;
            throw ConfigError(os.str());
        }
        if (!(T > 0.0)) throw ConfigError("model.T must be positive");
        if (!(r >= 0.0)) throw ConfigError("model.r must be nonnegative");
    }
};

enum class PayoffKind { FixedStrike, FloatingStrike };

struct PayoffSpec {
    PayoffKind kind = PayoffKind::FixedStrike;
    double strike = 1.0;  // used by the fixed-strike payoff only

    void validate() const {
        if (kind == PayoffKind::FixedStrike && !(strike >= 0.0))
            throw ConfigError("payoff.strike must be nonnegative");
    }
};

// a point (t, s, a): time, asset level x1, accumulated average integral x2
struct SpaceTimePoint {
    double t = 0.0;
    double s = 0.0;
    double a = 0.0;
};

inline std::string to_string(const SpaceTimePoint& z) {
    std::ostringstream os;
    os << "(t=" << z.t << ", s=" << z.s << ", a=" << z.a << ")";
    return os.str();
}

// (a/t - K)^+ for the fixed strike, (a/t - s)^+ for the floating strike
inline double payoff_eval(const PayoffSpec& spec, const SpaceTimePoint& z) {
    if (!(z.t > 0.0)) throw std::domain_error("payoff is singular at t <= 0");
    const double avg = z.a / z.t;
    const double intrinsic =
        spec.kind == PayoffKind::FixedStrike ? avg - spec.strike : avg - z.s;
    return intrinsic > 0.0 ? intrinsic : 0.0;
}

struct SuperSolutionParams {
    double alpha = 1.0;  // scale
    double beta = 1.0;   // decay rate
};

// barrier (alpha/t)(1 + e^{-beta t} sqrt(s^2 + a^2))
inline double supersolution_eval(const SuperSolutionParams& p, const SpaceTimePoint& z) {
    if (!(z.t > 0.0)) throw std::domain_error("barrier is singular at t <= 0");
    const double radial = std::hypot(z.s, z.a);
    return p.alpha / z.t * (1.0 + std::exp(-p.beta * z.t) * radial);
}

namespace detail {

// L applied to the barrier through its closed-form partials; the averaging
// rate is switchable so the calibration can serve both payoff families.
inline double supersolution_residual_impl(const ModelParams& m, const SuperSolutionParams& p,
                                          const SpaceTimePoint& z) {
    const double t = z.t;
    const double s = z.s;
    const double a = z.a;
    const double radial = std::hypot(s, a);
    const double decay = std::exp(-p.beta * t);
    const double alpha = p.alpha;
    const double u = alpha / t * (1.0 + decay * radial);
    const double ut = -alpha / (t * t) - alpha * decay * radial * (1.0 / (t * t) + p.beta / t);
    const double us = alpha / t * decay * s / radial;
    const double uss = alpha / t * decay * a * a / (radial * radial * radial);
    const double ua = alpha / t * decay * a / radial;
    const double fs = averaging_rate(m.averaging, s);
    return 0.5 * m.sigma * m.sigma * s * s * uss + m.r * s * us + fs * ua + ut - m.r * u;
}

}  // namespace detail

// L ubar at an interior point, exact up to rounding (no finite differences)
inline double supersolution_residual(const ModelParams& m, const SuperSolutionParams& p,
                                     const SpaceTimePoint& z) {
    if (m.averaging != Averaging::Arithmetic)
        throw std::invalid_argument(
            "closed-form barrier residual is defined for arithmetic averaging");
    if (!(z.t > 0.0) || !(z.s > 0.0) || !(z.a > 0.0))
        throw std::domain_error("barrier residual needs an interior point (t, s, a > 0)");
    return detail::supersolution_residual_impl(m, p, z);
}

struct SuperSolutionCertificate {
    double min_dominance = 0.0;   // min of (ubar - payoff) over the sample
    double max_residual = 0.0;    // max of L ubar over the sample
    SpaceTimePoint worst_dominance;
    SpaceTimePoint worst_residual;

    bool ok() const { return min_dominance >= 0.0 && max_residual <= 0.0; }
};

// Re-verification pass, independent of how the parameters were found.
inline SuperSolutionCertificate verify_supersolution(const ModelParams& m, const PayoffSpec& spec,
                                                     const SuperSolutionParams& p,
                                                     const std::vector<SpaceTimePoint>& sample) {
    if (sample.empty()) throw std::invalid_argument("verification sample must be nonempty");
    SuperSolutionCertificate cert;
    bool first = true;
    for (const SpaceTimePoint& z : sample) {
        const double dom = supersolution_eval(p, z) - payoff_eval(spec, z);
        const double res = detail::supersolution_residual_impl(m, p, z);
        if (first || dom < cert.min_dominance) {
            cert.min_dominance = dom;
            cert.worst_dominance = z;
        }
        if (first || res > cert.max_residual) {
            cert.max_residual = res;
            cert.worst_residual = z;
        }
        first = false;
    }
    return cert;
}

struct CalibrationLadder {
    double beta_start = 1.0;
    double beta_max = 4096.0;  // doubling ladder; beta_max < beta_start means empty
    int alpha_log2_min = -30;  // alpha ladder 2^k, minimal k first
    int alpha_log2_max = 64;
};

struct CalibrationError : NumericalError {
    SpaceTimePoint worst;
    double violation;

    CalibrationError(const std::string& what, const SpaceTimePoint& w, double v)
        : NumericalError(what + " (worst sample " + asianop::to_string(w) +
                         ", violation=" + std::to_string(v) + ")"),
          worst(w),
          violation(v) {}
};

// Finds (alpha, beta) with ubar >= payoff and L ubar <= 0 at every sample
// point: beta walks a doubling ladder, alpha is the smallest power of two
// that restores dominance. L ubar is linear in alpha, so the residual sign
// is decided by beta alone.
inline SuperSolutionParams calibrate_supersolution(const ModelParams& m, const PayoffSpec& spec,
                                                   const std::vector<SpaceTimePoint>& sample,
                                                   const CalibrationLadder& ladder = {}) {
    if (sample.empty()) throw std::invalid_argument("calibration sample must be nonempty");

    SpaceTimePoint worst{};
    double worst_violation = 0.0;
    bool have_worst = false;

    for (double beta = ladder.beta_start; beta <= ladder.beta_max; beta *= 2.0) {
        const SuperSolutionParams probe{1.0, beta};
        double max_res = 0.0;
        SpaceTimePoint res_point{};
        bool first = true;
        for (const SpaceTimePoint& z : sample) {
            const double res = detail::supersolution_residual_impl(m, probe, z);
            if (first || res > max_res) {
                max_res = res;
                res_point = z;
                first = false;
            }
        }
        if (max_res > 0.0) {
            if (!have_worst || max_res > worst_violation) {
                worst = res_point;
                worst_violation = max_res;
                have_worst = true;
            }
            continue;
        }

        for (int k = ladder.alpha_log2_min; k <= ladder.alpha_log2_max; ++k) {
            const SuperSolutionParams cand{std::ldexp(1.0, k), beta};
            double min_dom = 0.0;
            SpaceTimePoint dom_point{};
            bool dom_first = true;
            for (const SpaceTimePoint& z : sample) {
                const double dom = supersolution_eval(cand, z) - payoff_eval(spec, z);
                if (dom_first || dom < min_dom) {
                    min_dom = dom;
                    dom_point = z;
                    dom_first = false;
                }
            }
            if (min_dom >= 0.0) {
                const SuperSolutionCertificate cert = verify_supersolution(m, spec, cand, sample);
                if (cert.ok()) return cand;
                break;  // should not happen; fall through to next beta
            }
            if (!have_worst || -min_dom > worst_violation) {
                worst = dom_point;
                worst_violation = -min_dom;
                have_worst = true;
            }
        }
    }
    if (!have_worst && !sample.empty()) worst = sample.front();
    throw CalibrationError("barrier calibration failed within the configured ladders", worst,
                           worst_violation);
}

// regular sample box used by calibration and the validation battery
inline std::vector<SpaceTimePoint> sample_box(double s_lo, double s_hi, int n_s, double a_lo,
                                              double a_hi, int n_a, double t_lo, double t_hi,
                                              int n_t) {
    if (n_s < 1 || n_a < 1 || n_t < 1) throw std::invalid_argument("sample counts must be >= 1");
    std::vector<SpaceTimePoint> out;
    out.reserve(static_cast<std::size_t>(n_s) * n_a * n_t);
    for (int k = 0; k < n_t; ++k) {
        const double t = n_t == 1 ? t_hi : t_lo + (t_hi - t_lo) * k / (n_t - 1);
        for (int j = 0; j < n_a; ++j) {
            const double a = n_a == 1 ? a_hi : a_lo + (a_hi - a_lo) * j / (n_a - 1);
            for (int i = 0; i < n_s; ++i) {
                const double s = n_s == 1 ? s_hi : s_lo + (s_hi - s_lo) * i / (n_s - 1);
                out.push_back({t, s, a});
            }
        }
    }
    return out;
}

}  // namespace asianop
