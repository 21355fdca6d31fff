#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "asianop/config.hpp"
#include "asianop/run.hpp"

namespace {

void print_summary(asianop::Command cmd, const asianop::RunResult& res) {
    using asianop::Json;
    const Json& doc = res.doc;
    std::cout << "command: " << doc["command"].get<std::string>()
              << (doc["cached"].get<bool>() ? " (cached)" : "") << "\n";
    if (doc.contains("probes"))
        for (const auto& row : doc["probes"])
            std::cout << "  probe t=" << row["t"] << " s=" << row["s"] << " a=" << row["a"]
                      << "  price=" << row["pde_price"] << "\n";
    if (doc.contains("comparisons"))
        for (const auto& row : doc["comparisons"])
            std::cout << "  probe t=" << row["t"] << " s=" << row["s"] << " a=" << row["a"]
                      << "  pde=" << row["pde_price"] << " mc=" << row["mc_price"] << " +/- "
                      << row["mc_stderr"] << "  verdict=" << row["verdict"].get<std::string>()
                      << "\n";
    if (doc.contains("checks")) {
        for (const auto& c : doc["checks"])
            std::cout << "  [" << (c["pass"].get<bool>() ? "PASS" : "FAIL") << "] "
                      << c["name"].get<std::string>() << "  measured=" << c["measured"]
                      << "\n";
        std::cout << (doc["all_pass"].get<bool>() ? "all checks passed" : "some checks FAILED")
                  << "\n";
    }
    if (cmd == asianop::Command::Density && doc.contains("density"))
        std::cout << "  grid mass=" << doc["density"]["grid_mass"] << "\n";
    for (const auto& p : res.artifact_paths) std::cout << "  artifact: " << p << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"American/Amerasian average-option pricing and validation engine"};
    app.require_subcommand(1);

    std::string config_path;
    std::string output_dir;
    bool no_cache = false;
    std::vector<std::string> probe_args;

    const std::vector<std::string> names = {"price", "boundary", "validate", "compare", "density"};
    for (const auto& name : names) {
        CLI::App* sub = app.add_subcommand(name);
        sub->add_option("--config", config_path, "run configuration file")->required();
        sub->add_option("--output", output_dir, "output directory override");
        sub->add_flag("--no-cache", no_cache, "recompute even when a cached result exists");
        sub->add_option("--probe", probe_args, "additional probe point t,s,a (repeatable)");
    }

    CLI11_PARSE(app, argc, argv);

    const std::string sub_name = app.get_subcommands().front()->get_name();
    const auto cmd = asianop::command_from_name(sub_name);

    try {
        asianop::RunConfig cfg = asianop::parse_config_file(config_path);
        for (const auto& text : probe_args) {
            std::stringstream ss(text);
            std::string cell;
            std::vector<double> vals;
            while (std::getline(ss, cell, ',')) vals.push_back(std::stod(cell));
            if (vals.size() != 3) throw asianop::ConfigError("--probe needs t,s,a");
            cfg.probes.push_back({vals[0], vals[1], vals[2]});
        }
        if (!output_dir.empty()) cfg.output_directory = output_dir;
        asianop::DispatchOptions opt;
        opt.use_cache = !no_cache;

        const asianop::RunResult res = asianop::run_command(*cmd, cfg, opt);

        const std::string out = cfg.output_directory + "/" + sub_name + "-" +
                                asianop::config_hash(cfg) + "-result.json";
        asianop::write_json_atomic(res.doc, out);
        print_summary(*cmd, res);
        std::cout << "result: " << out << "\n";
        return res.exit_code;
    } catch (const std::exception& e) {
        const int code = asianop::exit_code_for(e);
        std::cerr << "error (exit " << code << "): " << e.what() << "\n";
        return code;
    }
}
