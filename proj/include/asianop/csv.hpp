#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <zlib.h>

#include "errors.hpp"
#include "green.hpp"
#include "mc.hpp"
#include "solver.hpp"

namespace asianop {

namespace detail {

// full-precision formatting so re-reading reproduces the doubles exactly
inline std::string fmt_full(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline std::ofstream open_out(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot open for writing: " + path);
    return out;
}

}  // namespace detail

// columns: t, s, a, u, payoff, exercised; row order t outer, a middle, s inner
inline void write_field_csv(const SolutionField& field, const std::string& path) {
    std::ofstream out = detail::open_out(path);
    out << "t,s,a,u,payoff,exercised\n";
    const Grid& g = field.grid;
    for (std::size_t k = 0; k < field.slice_times.size(); ++k) {
        const double tq = field.slice_times[k];
        for (std::size_t j = 0; j < g.a.size(); ++j)
            for (std::size_t i = 0; i < g.s.size(); ++i) {
                const std::size_t id = g.idx(i, j);
                if (g.kind[id] == NodeKind::Exterior) continue;
                const double phi = payoff_eval(field.payoff, {tq, g.s[i], g.a[j]});
                out << detail::fmt_full(tq) << ',' << detail::fmt_full(g.s[i]) << ','
                    << detail::fmt_full(g.a[j]) << ',' << detail::fmt_full(field.values[k][id])
                    << ',' << detail::fmt_full(phi) << ','
                    << static_cast<int>(field.exercised[k][id]) << '\n';
            }
    }
}

// columns: t, a, s_boundary_low, s_boundary_high
inline void write_boundary_csv(const ExerciseBoundary& boundary, const std::string& path) {
    std::ofstream out = detail::open_out(path);
    out << "t,a,s_boundary_low,s_boundary_high\n";
    for (const auto& row : boundary.rows)
        out << detail::fmt_full(row.t) << ',' << detail::fmt_full(row.a) << ','
            << detail::fmt_full(row.s_low) << ',' << detail::fmt_full(row.s_high) << '\n';
}

// columns: X1, X2, density
inline void write_density_csv(const DensityEstimate& est, const std::string& path) {
    std::ofstream out = detail::open_out(path);
    out << "X1,X2,density\n";
    for (std::size_t j = 0; j < est.x2_nodes.size(); ++j)
        for (std::size_t i = 0; i < est.x1_nodes.size(); ++i)
            out << detail::fmt_full(est.x1_nodes[i]) << ',' << detail::fmt_full(est.x2_nodes[j])
                << ',' << detail::fmt_full(est.at(i, j)) << '\n';
}

// columns: path_id, t, S, A (gzip-compressed)
inline void write_paths_csv_gz(const PathBatch& batch, const std::string& path) {
    gzFile gz = gzopen(path.c_str(), "wb");
    if (!gz) throw ConfigError("cannot open for writing: " + path);
    gzprintf(gz, "path_id,t,S,A\n");
    for (std::size_t p = 0; p < batch.N; ++p)
        for (std::size_t k = 0; k < batch.schedule.size(); ++k)
            gzprintf(gz, "%zu,%.17g,%.17g,%.17g\n", p, batch.schedule[k], batch.s_at(p, k),
                     batch.a_at(p, k));
    gzclose(gz);
}

// generic read-back of a numeric CSV (header skipped)
inline std::vector<std::vector<double>> read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open for reading: " + path);
    std::vector<std::vector<double>> rows;
    std::string line;
    bool header = true;
    while (std::getline(in, line)) {
        if (header) {
            header = false;
            continue;
        }
        if (line.empty()) continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace asianop
