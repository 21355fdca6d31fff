#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "errors.hpp"
#include "grid.hpp"
#include "model.hpp"
#include "solver.hpp"

namespace asianop {

struct ProbePoint {
    double t, s, a;
};

// Fully resolved run configuration: a nested key-value document with
// defaults filled in and all admission checks applied.
struct RunConfig {
    ModelParams model{};
    PayoffSpec payoff{};

    DomainSpec::Kind domain_kind = DomainSpec::Kind::Rectangle;
    double s_min = 0.2, s_max = 5.0;
    double a_min = 0.05, a_max = 5.0;
    int lentil_n = 4;
    double epsilon = -1.0;  // resolved to 1e-4 * T when unset

    int n_s = 128, n_a = 96, n_t = 128;

    SchemeOptions scheme{};
    bool reduction = false;

    int mc_steps = 256;
    std::size_t mc_paths = 200000;
    std::uint64_t mc_seed = 12345;
    int basis_degree = 2;
    bool antithetic = true;

    std::vector<ProbePoint> probes;

    std::string output_directory = "out";
    bool write_field_csv = false;
    bool write_boundary_csv = false;

    double density_bandwidth_factor = 1.0;
    int density_grid_n = 64;

    DomainSpec domain() const {
        if (domain_kind == DomainSpec::Kind::Rectangle)
            return DomainSpec::rectangle(s_min, s_max, a_min, a_max, epsilon, model.T);
        return DomainSpec::lentil(lentil_n, epsilon, model.T);
    }

    void validate() {
        model.validate();
        payoff.validate();
        if (epsilon < 0.0) epsilon = 1e-4 * model.T;
        if (!(epsilon > 0.0 && epsilon < model.T))
            throw ConfigError("domain.epsilon must satisfy 0 < epsilon < T");
        if (domain_kind == DomainSpec::Kind::Rectangle) {
            if (!(0.0 < s_min && s_min < s_max) || !(0.0 < a_min && a_min < a_max))
                throw ConfigError("domain bounds must be positive and ordered");
        } else if (lentil_n < 1) {
            throw ConfigError("domain.lentil_n must be >= 1");
        }
        if (n_s < 8 || n_a < 8 || n_t < 4)
            throw ConfigError("grid needs n_s, n_a >= 8 and n_t >= 4");
        scheme.validate();
        if (reduction && payoff.kind != PayoffKind::FloatingStrike)
            throw ConfigError("reduction only for floating strike");
        if (mc_steps < 1) throw ConfigError("mc.M must be >= 1");
        if (mc_paths < 4) throw ConfigError("mc.N must be >= 4");
        if (basis_degree < 2) throw ConfigError("mc.basis_degree must be >= 2");
        if (!(density_bandwidth_factor > 0.0))
            throw ConfigError("density.bandwidth_factor must be positive");
        if (density_grid_n < 8) throw ConfigError("density.grid_n must be >= 8");
    }

    // probes must land inside the truncated domain
    void validate_probes() const {
        const DomainSpec dom = domain();
        for (const auto& p : probes) {
            std::ostringstream os;
            os << "probe (t=" << p.t << ", s=" << p.s << ", a=" << p.a << ")";
            if (!(p.t >= epsilon && p.t <= model.T))
                throw ConfigError(os.str() + " outside the time window [epsilon, T]");
            if (!dom.contains(p.s, p.a)) throw ConfigError(os.str() + " outside the domain");
        }
    }
};

namespace detail {

inline std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

struct ConfigEntry {
    std::string value;
    int line;
};

struct RawConfig {
    std::map<std::string, ConfigEntry> kv;  // "section.key" -> value
    std::vector<std::pair<std::string, int>> probes;
    std::string source;

    [[noreturn]] void fail(int line, const std::string& msg) const {
        std::ostringstream os;
        os << source << ":" << line << ": " << msg;
        throw ConfigError(os.str());
    }
};

inline RawConfig parse_raw(std::istream& in, const std::string& source) {
    RawConfig raw;
    raw.source = source;
    std::string line;
    std::string section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') raw.fail(lineno, "unterminated section header");
            section = lower(trim(line.substr(1, line.size() - 2)));
            if (section.empty()) raw.fail(lineno, "empty section name");
            continue;
        }
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos) raw.fail(lineno, "expected key = value");
        const std::string key = lower(trim(line.substr(0, eq)));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) raw.fail(lineno, "empty key");
        if (section.empty()) raw.fail(lineno, "key '" + key + "' outside any section");
        if (section == "probes") {
            if (key != "probe") raw.fail(lineno, "unknown key '" + key + "' in [probes]");
            raw.probes.emplace_back(value, lineno);
            continue;
        }
        const std::string full = section + "." + key;
        if (raw.kv.count(full)) raw.fail(lineno, "duplicate key '" + full + "'");
        raw.kv[full] = {value, lineno};
    }
    return raw;
}

struct ConfigReader {
    RawConfig raw;
    std::vector<std::string> consumed;

    bool has(const std::string& key) const { return raw.kv.count(key) > 0; }

    const ConfigEntry* take(const std::string& key) {
        auto it = raw.kv.find(key);
        if (it == raw.kv.end()) return nullptr;
        consumed.push_back(key);
        return &it->second;
    }

    double number(const std::string& key, double fallback) {
        const ConfigEntry* e = take(key);
        if (!e) return fallback;
        try {
            std::size_t pos = 0;
            const double v = std::stod(e->value, &pos);
            if (pos != e->value.size()) throw std::invalid_argument("trailing characters");
            return v;
        } catch (const std::exception&) {
            raw.fail(e->line, "key '" + key + "': not a number: '" + e->value + "'");
        }
    }

    long long integer(const std::string& key, long long fallback) {
        const ConfigEntry* e = take(key);
        if (!e) return fallback;
        try {
            std::size_t pos = 0;
            const long long v = std::stoll(e->value, &pos);
            if (pos != e->value.size()) throw std::invalid_argument("trailing characters");
            return v;
        } catch (const std::exception&) {
            raw.fail(e->line, "key '" + key + "': not an integer: '" + e->value + "'");
        }
    }

    bool boolean(const std::string& key, bool fallback) {
        const ConfigEntry* e = take(key);
        if (!e) return fallback;
        const std::string v = lower(e->value);
        if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
        if (v == "false" || v == "0" || v == "no" || v == "off") return false;
        raw.fail(e->line, "key '" + key + "': not a boolean: '" + e->value + "'");
    }

    std::string text(const std::string& key, const std::string& fallback) {
        const ConfigEntry* e = take(key);
        return e ? e->value : fallback;
    }

    void reject_unknown() {
        for (const auto& [key, entry] : raw.kv) {
            if (std::find(consumed.begin(), consumed.end(), key) == consumed.end())
                raw.fail(entry.line, "unknown key '" + key + "'");
        }
    }
};

inline ProbePoint parse_probe(const std::string& text, const RawConfig& raw, int line) {
    std::stringstream ss(text);
    std::string cell;
    std::vector<double> vals;
    while (std::getline(ss, cell, ',')) {
        try {
            vals.push_back(std::stod(trim(cell)));
        } catch (const std::exception&) {
            raw.fail(line, "probe: not a number: '" + cell + "'");
        }
    }
    if (vals.size() != 3) raw.fail(line, "probe needs exactly t,s,a");
    return {vals[0], vals[1], vals[2]};
}

}  // namespace detail

inline RunConfig parse_config_stream(std::istream& in, const std::string& source) {
    detail::ConfigReader rd{detail::parse_raw(in, source), {}};
    RunConfig cfg;

    cfg.model.sigma = rd.number("model.sigma", cfg.model.sigma);
    cfg.model.r = rd.number("model.r", cfg.model.r);
    cfg.model.T = rd.number("model.t", cfg.model.T);
    cfg.model.sigma_floor = rd.number("model.sigma_floor", cfg.model.sigma_floor);
    if (const auto* e = rd.take("model.averaging")) {
        const std::string v = detail::lower(e->value);
        if (v == "arithmetic") cfg.model.averaging = Averaging::Arithmetic;
        else if (v == "geometric") cfg.model.averaging = Averaging::Geometric;
        else rd.raw.fail(e->line, "model.averaging must be arithmetic or geometric");
    }

    if (const auto* e = rd.take("payoff.kind")) {
        const std::string v = detail::lower(e->value);
        if (v == "fixed") cfg.payoff.kind = PayoffKind::FixedStrike;
        else if (v == "floating") cfg.payoff.kind = PayoffKind::FloatingStrike;
        else rd.raw.fail(e->line, "payoff.kind must be fixed or floating");
    }
    cfg.payoff.strike = rd.number("payoff.strike", cfg.payoff.strike);

    if (const auto* e = rd.take("domain.kind")) {
        const std::string v = detail::lower(e->value);
        if (v == "rectangle") cfg.domain_kind = DomainSpec::Kind::Rectangle;
        else if (v == "lentil") cfg.domain_kind = DomainSpec::Kind::Lentil;
        else rd.raw.fail(e->line, "domain.kind must be rectangle or lentil");
    }
    cfg.s_min = rd.number("domain.s_min", cfg.s_min);
    cfg.s_max = rd.number("domain.s_max", cfg.s_max);
    cfg.a_min = rd.number("domain.a_min", cfg.a_min);
    cfg.a_max = rd.number("domain.a_max", cfg.a_max);
    cfg.lentil_n = static_cast<int>(rd.integer("domain.lentil_n", cfg.lentil_n));
    cfg.epsilon = rd.number("domain.epsilon", cfg.epsilon);

    cfg.n_s = static_cast<int>(rd.integer("grid.n_s", cfg.n_s));
    cfg.n_a = static_cast<int>(rd.integer("grid.n_a", cfg.n_a));
    cfg.n_t = static_cast<int>(rd.integer("grid.n_t", cfg.n_t));

    if (const auto* e = rd.take("scheme.method")) {
        const std::string v = detail::lower(e->value);
        if (v == "psor") cfg.scheme.method = SchemeOptions::Method::PSOR;
        else if (v == "penalty") cfg.scheme.method = SchemeOptions::Method::Penalty;
        else rd.raw.fail(e->line, "scheme.method must be psor or penalty");
    }
    cfg.scheme.theta = rd.number("scheme.theta", cfg.scheme.theta);
    cfg.scheme.omega = rd.number("scheme.omega", cfg.scheme.omega);
    cfg.scheme.tol = rd.number("scheme.tol", cfg.scheme.tol);
    cfg.scheme.max_iter = static_cast<int>(rd.integer("scheme.max_iter", cfg.scheme.max_iter));
    cfg.scheme.penalty_rho = rd.number("scheme.penalty_rho", cfg.scheme.penalty_rho);
    cfg.reduction = rd.boolean("scheme.reduction", cfg.reduction);

    cfg.mc_steps = static_cast<int>(rd.integer("mc.m", cfg.mc_steps));
    cfg.mc_paths = static_cast<std::size_t>(rd.integer("mc.n", static_cast<long long>(cfg.mc_paths)));
    cfg.mc_seed = static_cast<std::uint64_t>(rd.integer("mc.seed", static_cast<long long>(cfg.mc_seed)));
    cfg.basis_degree = static_cast<int>(rd.integer("mc.basis_degree", cfg.basis_degree));
    cfg.antithetic = rd.boolean("mc.antithetic", cfg.antithetic);

    cfg.output_directory = rd.text("output.directory", cfg.output_directory);
    if (const auto* e = rd.take("output.formats")) {
        std::stringstream ss(e->value);
        std::string item;
        while (std::getline(ss, item, ',')) {
            const std::string v = detail::lower(detail::trim(item));
            if (v == "field") cfg.write_field_csv = true;
            else if (v == "boundary") cfg.write_boundary_csv = true;
            else if (!v.empty()) rd.raw.fail(e->line, "output.formats: unknown format '" + v + "'");
        }
    }

    cfg.density_bandwidth_factor =
        rd.number("density.bandwidth_factor", cfg.density_bandwidth_factor);
    cfg.density_grid_n = static_cast<int>(rd.integer("density.grid_n", cfg.density_grid_n));

    for (const auto& [text, line] : rd.raw.probes)
        cfg.probes.push_back(detail::parse_probe(text, rd.raw, line));

    rd.reject_unknown();
    cfg.validate();
    return cfg;
}

inline RunConfig parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    return parse_config_stream(in, path);
}

inline RunConfig parse_config_text(const std::string& text) {
    std::istringstream in(text);
    return parse_config_stream(in, "<inline>");
}

// canonical form: every resolved key, sorted, full float precision
inline std::string canonical_config_text(const RunConfig& cfg) {
    auto f = [](double v) {
        char buf[40];
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        return std::string(buf);
    };
    std::map<std::string, std::string> kv;
    kv["model.sigma"] = f(cfg.model.sigma);
    kv["model.r"] = f(cfg.model.r);
    kv["model.t"] = f(cfg.model.T);
    kv["model.sigma_floor"] = f(cfg.model.sigma_floor);
    kv["model.averaging"] = cfg.model.averaging == Averaging::Arithmetic ? "arithmetic" : "geometric";
    kv["payoff.kind"] = cfg.payoff.kind == PayoffKind::FixedStrike ? "fixed" : "floating";
    kv["payoff.strike"] = f(cfg.payoff.strike);
    kv["domain.kind"] = cfg.domain_kind == DomainSpec::Kind::Rectangle ? "rectangle" : "lentil";
    kv["domain.s_min"] = f(cfg.s_min);
    kv["domain.s_max"] = f(cfg.s_max);
    kv["domain.a_min"] = f(cfg.a_min);
    kv["domain.a_max"] = f(cfg.a_max);
    kv["domain.lentil_n"] = std::to_string(cfg.lentil_n);
    kv["domain.epsilon"] = f(cfg.epsilon);
    kv["grid.n_s"] = std::to_string(cfg.n_s);
    kv["grid.n_a"] = std::to_string(cfg.n_a);
    kv["grid.n_t"] = std::to_string(cfg.n_t);
    kv["scheme.method"] = cfg.scheme.method == SchemeOptions::Method::PSOR ? "psor" : "penalty";
    kv["scheme.theta"] = f(cfg.scheme.theta);
    kv["scheme.omega"] = f(cfg.scheme.omega);
    kv["scheme.tol"] = f(cfg.scheme.tol);
    kv["scheme.max_iter"] = std::to_string(cfg.scheme.max_iter);
    kv["scheme.penalty_rho"] = f(cfg.scheme.penalty_rho);
    kv["scheme.reduction"] = cfg.reduction ? "true" : "false";
    kv["mc.m"] = std::to_string(cfg.mc_steps);
    kv["mc.n"] = std::to_string(cfg.mc_paths);
    kv["mc.seed"] = std::to_string(cfg.mc_seed);
    kv["mc.basis_degree"] = std::to_string(cfg.basis_degree);
    kv["mc.antithetic"] = cfg.antithetic ? "true" : "false";
    kv["output.directory"] = cfg.output_directory;
    kv["output.write_field"] = cfg.write_field_csv ? "true" : "false";
    kv["output.write_boundary"] = cfg.write_boundary_csv ? "true" : "false";
    kv["density.bandwidth_factor"] = f(cfg.density_bandwidth_factor);
    kv["density.grid_n"] = std::to_string(cfg.density_grid_n);
    std::ostringstream os;
    for (const auto& [k, v] : kv) os << k << "=" << v << "\n";
    for (const auto& p : cfg.probes)
        os << "probe=" << f(p.t) << "," << f(p.s) << "," << f(p.a) << "\n";
    return os.str();
}

// FNV-1a 64-bit over the canonical text; collisions are caught downstream
// by comparing the full canonical form
inline std::string config_hash(const RunConfig& cfg) {
    const std::string text = canonical_config_text(cfg);
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ull;
    }
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace asianop
