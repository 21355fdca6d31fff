#pragma once

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "config.hpp"
#include "csv.hpp"
#include "errors.hpp"
#include "green.hpp"
#include "grid.hpp"
#include "mc.hpp"
#include "model.hpp"
#include "operators.hpp"
#include "quadrature.hpp"
#include "rng.hpp"
#include "solver.hpp"

namespace asianop {

using Json = nlohmann::ordered_json;

enum class Command { Price, Boundary, Validate, Compare, Density };

inline const char* command_name(Command c) {
    switch (c) {
        case Command::Price: return "price";
        case Command::Boundary: return "boundary";
        case Command::Validate: return "validate";
        case Command::Compare: return "compare";
        case Command::Density: return "density";
    }
    return "?";
}

inline std::optional<Command> command_from_name(const std::string& s) {
    if (s == "price") return Command::Price;
    if (s == "boundary") return Command::Boundary;
    if (s == "validate") return Command::Validate;
    if (s == "compare") return Command::Compare;
    if (s == "density") return Command::Density;
    return std::nullopt;
}

struct RunResult {
    Json doc;
    int exit_code = 0;  // 0 ok, 3 when a validation/comparison verdict failed
    std::vector<std::string> artifact_paths;
};

struct DispatchOptions {
    bool use_cache = true;
    std::string cache_dir;       // empty: resolved from ASIANOP_CACHE_DIR or output dir
    std::string output_override; // empty: config's output directory
};

namespace detail {

struct PhaseTimer {
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
    double ms() const {
        return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
            .count();
    }
};

inline std::vector<SpaceTimePoint> calibration_sample(const RunConfig& cfg) {
    const DomainSpec dom = cfg.domain();
    return sample_box(dom.s_min, dom.s_max, 30, dom.a_min, dom.a_max, 30, cfg.epsilon, cfg.model.T,
                      16);
}

inline BoundaryData make_boundary(const RunConfig& cfg, const SuperSolutionParams& barrier) {
    const DomainSpec dom = cfg.domain();
    if (cfg.domain_kind == DomainSpec::Kind::Lentil) {
        const int n = cfg.lentil_n;
        const PayoffSpec spec = cfg.payoff;
        return [n, spec, barrier](const SpaceTimePoint& z) {
            return boundary_data_g(n, spec, barrier, z);
        };
    }
    const PayoffSpec spec = cfg.payoff;
    return [dom, spec, barrier](const SpaceTimePoint& z) {
        return boundary_data_rectangle(dom, spec, barrier, z);
    };
}

inline SolutionField solve_from_config(const RunConfig& cfg, const SuperSolutionParams& barrier,
                                       int n_s, int n_a, int n_t) {
    const Grid grid = build_grid(cfg.domain(), n_s, n_a, n_t);
    return solve_obstacle(cfg.model, cfg.payoff, grid, cfg.scheme, make_boundary(cfg, barrier));
}

inline Json probe_json(const ProbePoint& p) {
    return Json{{"t", p.t}, {"s", p.s}, {"a", p.a}};
}

}  // namespace detail

// --- validation battery (invariances, kernels, barrier) ---

struct ValidationCheck {
    std::string name;
    bool pass = false;
    double measured = 0.0;
    double threshold = 0.0;
    std::string details;
};

inline std::vector<std::pair<GroupElement, SpaceTimePoint>> invariance_samples(std::uint64_t seed,
                                                                               std::size_t count,
                                                                               bool positive_x1) {
    std::vector<std::pair<GroupElement, SpaceTimePoint>> samples;
    samples.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        const UniformPair a = counter_uniforms(seed, i, 0, 0);
        const UniformPair b = counter_uniforms(seed, i, 1, 0);
        const UniformPair c = counter_uniforms(seed, i, 2, 0);
        GroupElement zp{2.0 * a.u0 - 1.0, 2.0 * a.u1 - 1.0, 2.0 * b.u0 - 1.0};
        SpaceTimePoint z{2.0 * b.u1 - 1.0, 2.0 * c.u0 - 1.0, 2.0 * c.u1 - 1.0};
        if (positive_x1) {
            zp.x1 = 0.25 + a.u1;
            z.s = 0.25 + c.u0;
        }
        samples.push_back({zp, z});
    }
    return samples;
}

inline TestFunction cubic_test_function() {
    TestFunction u;
    u.value = [](double t, double x1, double x2) {
        return 0.7 * x1 * x1 * x1 - 1.3 * x1 * x1 * x2 + 0.4 * x2 * t + 2.0 * x1 * t - 0.5 * t * t +
               x2 * x2 * 0.0 + 1.1 * x1 - 0.3 * x2 + 0.2;
    };
    u.dt = [](double t, double x1, double x2) { return 0.4 * x2 + 2.0 * x1 - 1.0 * t; };
    u.dx1 = [](double t, double x1, double x2) {
        return 2.1 * x1 * x1 - 2.6 * x1 * x2 + 2.0 * t + 1.1;
    };
    u.dx1x1 = [](double, double x1, double x2) { return 4.2 * x1 - 2.6 * x2; };
    u.dx2 = [](double t, double x1, double) { return -1.3 * x1 * x1 + 0.4 * t - 0.3; };
    return u;
}

inline TestFunction smooth_rational_test_function(double fd_step = 1e-4) {
    TestFunction u;
    u.value = [](double t, double x1, double x2) {
        return x1 * x2 / (1.0 + t * t) + std::sin(0.5 * x2) + x1 / (1.0 + x1 * x1);
    };
    u.fd_step = fd_step;
    return u;
}

inline std::vector<ValidationCheck> run_validation_battery(const RunConfig& cfg) {
    std::vector<ValidationCheck> checks;
    const std::uint64_t seed = cfg.mc_seed;

    {  // exact group algebra on random elements
        ValidationCheck c{"group_laws", false, 0.0, 1e-12, "1e4 random elements"};
        double worst = 0.0;
        for (std::size_t i = 0; i < 10000; ++i) {
            const UniformPair a = counter_uniforms(seed, i, 10, 0);
            const UniformPair b = counter_uniforms(seed, i, 11, 0);
            const UniformPair d = counter_uniforms(seed, i, 12, 0);
            const GroupElement x{4.0 * a.u0 - 2.0, 4.0 * a.u1 - 2.0, 4.0 * b.u0 - 2.0};
            const GroupElement y{4.0 * b.u1 - 2.0, 4.0 * d.u0 - 2.0, 4.0 * d.u1 - 2.0};
            const GroupElement z{2.0 * a.u0 - 1.0, 2.0 * d.u1 - 1.0, 2.0 * b.u0 - 1.0};
            const GroupElement assoc_l = compose_G(compose_G(x, y), z);
            const GroupElement assoc_r = compose_G(x, compose_G(y, z));
            worst = std::max({worst, std::fabs(assoc_l.t - assoc_r.t),
                              std::fabs(assoc_l.x1 - assoc_r.x1),
                              std::fabs(assoc_l.x2 - assoc_r.x2)});
            const GroupElement e = compose_G(inverse_G(x), x);
            worst = std::max({worst, std::fabs(e.t), std::fabs(e.x1), std::fabs(e.x2)});
            const double lam = 0.5 + a.u0, mu = 0.5 + a.u1;
            const GroupElement d1 = dilate_G(lam, dilate_G(mu, x));
            const GroupElement d2 = dilate_G(lam * mu, x);
            worst = std::max({worst, std::fabs(d1.t - d2.t), std::fabs(d1.x1 - d2.x1),
                              std::fabs(d1.x2 - d2.x2)});
            const GroupElement w{z.t, 0.5 + b.u1, z.x2};
            const GroupElement idw = translate_A(GroupElement{0.0, 1.0, 0.0}, w);
            worst = std::max({worst, std::fabs(idw.t - w.t), std::fabs(idw.x1 - w.x1),
                              std::fabs(idw.x2 - w.x2)});
        }
        c.measured = worst;
        c.pass = worst <= c.threshold;
        checks.push_back(c);
    }

    const TestFunction cubic = cubic_test_function();
    {
        ValidationCheck c{"invariance_geometric_translation", false, 0.0, 1e-10,
                          "cubic with analytic partials"};
        const auto samples = invariance_samples(seed, 200, false);
        c.measured = check_invariance(OperatorTag::geometric(), GroupAction::LeftTranslateG, cubic,
                                      samples)
                         .max_abs_deviation;
        c.pass = c.measured <= c.threshold;
        checks.push_back(c);
    }
    {
        ValidationCheck c{"invariance_geometric_dilation", false, 0.0, 1e-10,
                          "lambda=2, degree-two factor applied"};
        const auto samples = invariance_samples(seed, 200, false);
        c.measured = check_invariance(OperatorTag::geometric(), GroupAction::DilateG, cubic,
                                      samples, 2.0)
                         .max_abs_deviation;
        c.pass = c.measured <= c.threshold;
        checks.push_back(c);
    }
    {
        ValidationCheck c{"invariance_arithmetic_translation", false, 0.0, 1e-6,
                          "finite differences, refinement observed"};
        const auto samples = invariance_samples(seed, 100, true);
        const double dev_coarse =
            check_invariance(OperatorTag::canonical_arithmetic(), GroupAction::TranslateA,
                             smooth_rational_test_function(4e-3), samples)
                .max_abs_deviation;
        const double dev_fine =
            check_invariance(OperatorTag::canonical_arithmetic(), GroupAction::TranslateA,
                             smooth_rational_test_function(1e-3), samples)
                .max_abs_deviation;
        c.measured = dev_fine;
        c.pass = dev_fine <= c.threshold && dev_fine < dev_coarse;
        std::ostringstream os;
        os << "step 4e-3 -> " << dev_coarse << ", step 1e-3 -> " << dev_fine;
        c.details = os.str();
        checks.push_back(c);
    }
    {
        ValidationCheck c{"gamma_G_normalization", false, 0.0, 1e-6, "quadrature over the plane"};
        const GroupElement z0{0.0, 0.0, 0.0};
        const double mass = integrate2d(
            [&](double X1, double X2) { return gamma_G(z0, GroupElement{1.0, X1, X2}); }, -20.0,
            20.0, -60.0, 60.0, 1e-8, 24);
        c.measured = std::fabs(mass - 1.0);
        c.pass = c.measured <= c.threshold;
        checks.push_back(c);
    }
    {
        ValidationCheck c{"gamma_G_chapman_kolmogorov", false, 0.0, 1e-4,
                          "two half-horizon kernels composed"};
        const GroupElement z0{0.0, 0.1, -0.2};
        const GroupElement z2{1.0, 0.4, 0.3};
        const double direct = gamma_G(z0, z2);
        const double composed = integrate2d(
            [&](double m1, double m2) {
                return gamma_G(z0, GroupElement{0.5, m1, m2}) *
                       gamma_G(GroupElement{0.5, m1, m2}, z2);
            },
            -12.0, 12.0, -12.0, 12.0, 1e-8, 24);
        c.measured = std::fabs(direct - composed);
        c.pass = c.measured <= c.threshold;
        checks.push_back(c);
    }
    {
        ValidationCheck c{"gamma_G_residual_decay", false, 0.0, 3.0,
                          "second-order decay under step refinement (ratio >= 3)"};
        std::vector<GroupElement> pts;
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 4; ++j)
                pts.push_back({0.1, -0.9 + 0.6 * i, -0.9 + 0.6 * j});
        const GroupElement end{1.0, 0.0, 0.0};
        const double r1 = gamma_G_pde_residual(pts, end, 0.5, 2e-3);
        const double r2 = gamma_G_pde_residual(pts, end, 0.5, 1e-3);
        c.measured = r1 / std::max(r2, 1e-300);
        c.pass = c.measured >= 3.0;
        std::ostringstream os;
        os << "residual " << r1 << " -> " << r2;
        c.details = os.str();
        checks.push_back(c);
    }
    {
        ValidationCheck c{"supersolution_certificate", false, 0.0, 0.0,
                          "dominance and residual reverified on the sample"};
        RunConfig tmp = cfg;
        tmp.model.averaging = Averaging::Arithmetic;
        const auto sample = detail::calibration_sample(tmp);
        const SuperSolutionParams p = calibrate_supersolution(tmp.model, tmp.payoff, sample);
        const SuperSolutionCertificate cert = verify_supersolution(tmp.model, tmp.payoff, p, sample);
        c.measured = std::max(cert.max_residual, -cert.min_dominance);
        c.pass = cert.ok();
        std::ostringstream os;
        os << "alpha=" << p.alpha << ", beta=" << p.beta << ", min dominance "
           << cert.min_dominance << ", max residual " << cert.max_residual;
        c.details = os.str();
        checks.push_back(c);
    }
    {
        ValidationCheck c{"gamma_A_scaling", false, 0.0, 3.0,
                          "scale X1=2 against independent reference run"};
        ScalingCheckConfig sc;
        sc.n_paths = std::min<std::size_t>(cfg.mc_paths, 200000);
        sc.seed = seed;
        const ScalingCheckReport rep = check_gamma_A_scaling(sc);
        c.measured = rep.noise_floor > 0.0
                         ? std::min(rep.discrepancy_as_printed, rep.discrepancy_flipped) /
                               rep.noise_floor
                         : 0.0;
        c.pass = rep.pass;
        std::ostringstream os;
        os << "orientation "
           << (rep.matched == ScalingCheckReport::Orientation::AsPrinted ? "as printed"
                                                                         : "flipped")
           << ", discrepancy " << rep.discrepancy_as_printed << " (flipped "
           << rep.discrepancy_flipped << "), noise floor " << rep.noise_floor;
        c.details = os.str();
        checks.push_back(c);
    }
    return checks;
}

// --- command dispatch ---

inline RunResult dispatch(Command cmd, const RunConfig& cfg_in, const DispatchOptions& opt = {}) {
    RunConfig cfg = cfg_in;
    if (!opt.output_override.empty()) cfg.output_directory = opt.output_override;

    detail::PhaseTimer total;
    RunResult res;
    Json& doc = res.doc;
    doc["schema_version"] = 1;
    doc["command"] = command_name(cmd);
    doc["config_hash"] = config_hash(cfg);
    doc["canonical_config"] = canonical_config_text(cfg);
    doc["cached"] = false;
    Json timings;

    std::filesystem::create_directories(cfg.output_directory);
    const std::string stem =
        cfg.output_directory + "/" + std::string(command_name(cmd)) + "-" + config_hash(cfg);

    switch (cmd) {
        case Command::Price:
        case Command::Boundary: {
            cfg.validate_probes();
            if (cmd == Command::Price && !cfg.reduction && cfg.probes.empty())
                throw ConfigError("price needs at least one probe");

            detail::PhaseTimer calib;
            SuperSolutionParams barrier{1.0, 1.0};
            const auto sample = detail::calibration_sample(cfg);
            if (cfg.model.averaging == Averaging::Arithmetic) {
                barrier = calibrate_supersolution(cfg.model, cfg.payoff, sample);
            } else {
                // geometric runs reuse the same barrier family; dominance and
                // residual are checked numerically on the same sample
                ModelParams m2 = cfg.model;
                barrier = calibrate_supersolution(m2, cfg.payoff, sample);
            }
            timings["calibration_ms"] = calib.ms();
            doc["barrier"] = Json{{"alpha", barrier.alpha}, {"beta", barrier.beta}};

            if (cmd == Command::Price && cfg.reduction) {
                detail::PhaseTimer solve_t;
                Reduced1DOptions ropts;
                ropts.epsilon = cfg.epsilon;
                ropts.n_y = cfg.n_s;
                ropts.n_t = cfg.n_t;
                ropts.theta = cfg.scheme.theta;
                ropts.omega = cfg.scheme.omega;
                ropts.tol = cfg.scheme.tol;
                ropts.max_iter = cfg.scheme.max_iter;
                const Reduced1DField red = solve_floating_reduced(cfg.model, cfg.payoff, ropts);
                timings["solve_ms"] = solve_t.ms();
                Json probes = Json::array();
                for (const auto& p : cfg.probes) {
                    Json row = detail::probe_json(p);
                    row["pde_price"] = red.lift(p.t, p.s, p.a);
                    row["immediate_payoff"] = payoff_eval(cfg.payoff, {p.t, p.s, p.a});
                    probes.push_back(row);
                }
                doc["probes"] = probes;
                doc["diagnostics"] =
                    Json{{"complementarity_residual", red.complementarity_residual},
                         {"reduced", true}};
                break;
            }

            detail::PhaseTimer solve_t;
            const SolutionField field =
                detail::solve_from_config(cfg, barrier, cfg.n_s, cfg.n_a, cfg.n_t);
            timings["solve_ms"] = solve_t.ms();

            Json probes = Json::array();
            for (const auto& p : cfg.probes) {
                Json row = detail::probe_json(p);
                row["pde_price"] = field.value_at(p.t, p.s, p.a);
                row["immediate_payoff"] = payoff_eval(cfg.payoff, {p.t, p.s, p.a});
                probes.push_back(row);
            }
            doc["probes"] = probes;

            const GrowthBoundReport growth = growth_bound_check(field, barrier.alpha, 1.0);
            Json diag;
            diag["complementarity_residual"] = field.meta.complementarity_residual;
            diag["field_scale"] = field.meta.scale;
            diag["min_u_minus_obstacle"] = field.meta.min_u_minus_obstacle;
            diag["psor_total_sweeps"] = field.meta.total_sweeps;
            diag["growth_bound"] = Json{{"pass", growth.pass},
                                        {"worst_ratio", growth.worst_ratio},
                                        {"C", barrier.alpha},
                                        {"q", 1.0}};
            diag["warnings"] = field.meta.warnings;
            doc["diagnostics"] = diag;

            if (cmd == Command::Boundary || cfg.write_boundary_csv) {
                const ExerciseBoundary bd = extract_exercise_boundary(field);
                const std::string path = stem + "-boundary.csv";
                write_boundary_csv(bd, path);
                res.artifact_paths.push_back(path);
            }
            if (cfg.write_field_csv) {
                const std::string path = stem + "-field.csv";
                write_field_csv(field, path);
                res.artifact_paths.push_back(path);
            }
            break;
        }
        case Command::Validate: {
            const auto checks = run_validation_battery(cfg);
            Json arr = Json::array();
            bool all_pass = true;
            for (const auto& c : checks) {
                arr.push_back(Json{{"name", c.name},
                                   {"pass", c.pass},
                                   {"measured", c.measured},
                                   {"threshold", c.threshold},
                                   {"details", c.details}});
                all_pass = all_pass && c.pass;
            }
            doc["checks"] = arr;
            doc["all_pass"] = all_pass;
            if (!all_pass) res.exit_code = 3;
            break;
        }
        case Command::Compare: {
            cfg.validate_probes();
            if (cfg.probes.empty()) throw ConfigError("compare needs at least one probe");
            const auto sample = detail::calibration_sample(cfg);
            const SuperSolutionParams barrier =
                calibrate_supersolution(cfg.model, cfg.payoff, sample);

            detail::PhaseTimer solve_t;
            const SolutionField fine =
                detail::solve_from_config(cfg, barrier, cfg.n_s, cfg.n_a, cfg.n_t);
            const SolutionField coarse = detail::solve_from_config(
                cfg, barrier, std::max(8, cfg.n_s / 2), std::max(8, cfg.n_a / 2),
                std::max(4, cfg.n_t / 2));
            timings["solve_ms"] = solve_t.ms();

            detail::PhaseTimer mc_t;
            Json rows = Json::array();
            bool any_disagree = false;
            for (const auto& p : cfg.probes) {
                const double pde = fine.value_at(p.t, p.s, p.a);
                const double allowance =
                    std::max(std::fabs(pde - coarse.value_at(p.t, p.s, p.a)), 1e-6);
                const StoppingEstimate mc =
                    lsmc_price(cfg.model, cfg.payoff, {p.t, p.s, p.a}, cfg.mc_steps, cfg.mc_paths,
                               cfg.basis_degree, cfg.mc_seed, cfg.antithetic);
                const double diff = std::fabs(pde - mc.price);
                const double band = 3.0 * mc.std_error + allowance;
                std::string verdict;
                if (diff > band) {
                    verdict = "disagree";
                    any_disagree = true;
                } else if (3.0 * mc.std_error > allowance) {
                    verdict = "inconclusive";
                } else {
                    verdict = "agree";
                }
                Json row = detail::probe_json(p);
                row["pde_price"] = pde;
                row["mc_price"] = mc.price;
                row["mc_stderr"] = mc.std_error;
                row["mc_in_sample"] = mc.in_sample;
                row["allowance"] = allowance;
                row["abs_diff"] = diff;
                row["band"] = band;
                row["verdict"] = verdict;
                row["basis_truncated"] = mc.basis_truncated;
                rows.push_back(row);
            }
            timings["mc_ms"] = mc_t.ms();
            doc["comparisons"] = rows;
            if (any_disagree) res.exit_code = 3;
            break;
        }
        case Command::Density: {
            if (cfg.probes.empty())
                throw ConfigError("density needs a probe as the start point (t,s,a)");
            const ProbePoint p = cfg.probes.front();
            const double horizon = cfg.model.T - p.t;
            if (!(horizon > 0.0)) throw ConfigError("density probe must have t < T");
            const DensityEstimate est =
                estimate_gamma_A({p.t, p.s, p.a}, horizon, cfg.mc_paths,
                                 cfg.density_bandwidth_factor, cfg.mc_seed, cfg.density_grid_n);
            const std::string path = stem + "-density.csv";
            write_density_csv(est, path);
            res.artifact_paths.push_back(path);
            doc["density"] = Json{{"n_paths", est.n_paths},
                                  {"bandwidth_x1", est.bandwidth_x1},
                                  {"bandwidth_x2", est.bandwidth_x2},
                                  {"grid_mass", est.integral_on_grid()},
                                  {"seed", est.seed}};
            break;
        }
    }

    Json artifacts = Json::array();
    for (const auto& a : res.artifact_paths) artifacts.push_back(a);
    doc["artifacts"] = artifacts;
    timings["total_ms"] = total.ms();
    doc["timings"] = timings;
    return res;
}

// --- persistence and caching ---

inline std::string resolve_cache_dir(const RunConfig& cfg, const DispatchOptions& opt) {
    if (!opt.cache_dir.empty()) return opt.cache_dir;
    if (const char* env = std::getenv("ASIANOP_CACHE_DIR")) return env;
    const std::string out = opt.output_override.empty() ? cfg.output_directory : opt.output_override;
    return out + "/cache";
}

inline std::string cache_entry_path(const std::string& cache_dir, Command cmd,
                                    const RunConfig& cfg) {
    return cache_dir + "/" + std::string(command_name(cmd)) + "-" + config_hash(cfg) + ".json";
}

// atomic write: temp file in the same directory, then rename
inline void write_json_atomic(const Json& doc, const std::string& path) {
    std::filesystem::path target(path);
    std::filesystem::create_directories(target.parent_path());
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp);
        if (!out) throw ConfigError("cannot write " + tmp);
        out << doc.dump(2) << "\n";
    }
    std::filesystem::rename(tmp, target);
}

inline std::string persist_result(const RunResult& res, const std::string& cache_dir, Command cmd,
                                  const RunConfig& cfg) {
    const std::string path = cache_entry_path(cache_dir, cmd, cfg);
    write_json_atomic(res.doc, path);
    return path;
}

// cache lookup guarded by comparing the stored canonical config; a hash
// collision or a corrupted entry falls through to recomputation
inline std::optional<RunResult> load_cached(const std::string& cache_dir, Command cmd,
                                            const RunConfig& cfg, std::string* warning) {
    const std::string path = cache_entry_path(cache_dir, cmd, cfg);
    std::ifstream in(path);
    if (!in) return std::nullopt;
    Json doc;
    try {
        in >> doc;
    } catch (const std::exception& e) {
        if (warning) *warning = "corrupted cache entry " + path + " (" + e.what() + "); recomputing";
        return std::nullopt;
    }
    if (!doc.contains("canonical_config") ||
        doc["canonical_config"].get<std::string>() != canonical_config_text(cfg) ||
        !doc.contains("command") || doc["command"].get<std::string>() != command_name(cmd)) {
        if (warning)
            *warning = "cache entry " + path + " rejected by full-config comparison; recomputing";
        return std::nullopt;
    }
    RunResult res;
    doc["cached"] = true;
    res.doc = std::move(doc);
    if (res.doc.contains("all_pass") && !res.doc["all_pass"].get<bool>()) res.exit_code = 3;
    if (res.doc.contains("comparisons"))
        for (const auto& row : res.doc["comparisons"])
            if (row.contains("verdict") && row["verdict"] == "disagree") res.exit_code = 3;
    if (res.doc.contains("artifacts"))
        for (const auto& a : res.doc["artifacts"]) res.artifact_paths.push_back(a.get<std::string>());
    return res;
}

// full run: cache lookup, dispatch, persistence. The output override is
// folded into the configuration up front so that hashing, cache lookup and
// artifact naming all see the same document.
inline RunResult run_command(Command cmd, const RunConfig& cfg_in,
                             const DispatchOptions& opt_in = {}) {
    RunConfig cfg = cfg_in;
    DispatchOptions opt = opt_in;
    if (!opt.output_override.empty()) {
        cfg.output_directory = opt.output_override;
        opt.output_override.clear();
    }
    const std::string cache_dir = resolve_cache_dir(cfg, opt);
    if (opt.use_cache) {
        std::string warning;
        if (auto cached = load_cached(cache_dir, cmd, cfg, &warning)) return *cached;
        if (!warning.empty()) std::cerr << "warning: " << warning << "\n";
    }
    RunResult res = dispatch(cmd, cfg, opt);
    if (opt.use_cache) persist_result(res, cache_dir, cmd, cfg);
    return res;
}

// exit-code contract: 1 config, 2 numerical, 3 validation failure
inline int exit_code_for(const std::exception& e) {
    if (dynamic_cast<const ConfigError*>(&e)) return 1;
    if (dynamic_cast<const ValidationError*>(&e)) return 3;
    if (dynamic_cast<const NumericalError*>(&e)) return 2;
    if (dynamic_cast<const std::domain_error*>(&e)) return 2;
    if (dynamic_cast<const std::invalid_argument*>(&e)) return 2;
    return 2;
}

}  // namespace asianop
