// Command-line front end: run experiments, query the oracle, aggregate outputs,
// validate model and map files.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "bcrmdp/envs.hpp"
#include "bcrmdp/harness.hpp"
#include "bcrmdp/mdp.hpp"

namespace fs = std::filesystem;
using namespace bcrmdp;

namespace {

std::string read_text(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open " + path.string());
    std::stringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

struct LoadedEnv {
    MdpModel model;
    std::optional<GridMap> map;
};

LoadedEnv load_env(const std::string& model_path, const std::string& map_path) {
    if (!model_path.empty() == !map_path.empty()) throw ConfigError("give exactly one of --model or --map");
    if (!model_path.empty()) return {load_model(model_path), std::nullopt};
    GridMap map = load_grid_map(map_path);
    MdpModel model = build_gridworld(map.spec);
    return {std::move(model), std::move(map)};
}

std::string policy_text(const StationaryPolicy& policy, const std::optional<GridMap>& map) {
    std::string out;
    if (map) {
        static constexpr char glyphs[] = {'^', 'v', '<', '>'};
        const auto& spec = map->spec;
        for (int r = 0; r < spec.height; ++r) {
            for (int c = 0; c < spec.width; ++c) {
                const Cell cell{c, r};
                out += cell == spec.goal ? 'G' : glyphs[policy(spec.state_of(cell))];
            }
            out += '\n';
        }
        return out;
    }
    for (std::size_t x = 0; x < policy.size(); ++x) out += (x ? " " : "") + std::to_string(policy(x));
    return out + '\n';
}

int cmd_run(const std::string& config_path, const std::string& output_dir, std::size_t threads) {
    ExperimentConfig cfg = ExperimentConfig::load(config_path);
    if (!output_dir.empty()) cfg.output_dir = output_dir;
    if (threads > 0) cfg.threads = threads;
    const auto metrics = run_experiment(cfg);
    write_outputs(cfg, metrics, cfg.output_dir);
    const auto agg = aggregate(metrics, cfg.window);
    std::printf("%s: final-window mean %.6f sd %.6f over %zu runs", cfg.agent.label.c_str(), agg.final_window.mean,
                agg.final_window.sd, agg.final_window.n);
    if (agg.oracle_gain) std::printf(" (oracle %.6f)", agg.oracle_gain->mean);
    std::printf("\nwrote %s\n", cfg.output_dir.c_str());
    return 0;
}

int cmd_oracle(const std::string& model_path, const std::string& map_path) {
    const auto env = load_env(model_path, map_path);
    const auto solution = policy_iteration(env.model);
    std::printf("gain %.10g\n", solution.value.gain);
    std::printf("iterations %zu\n", solution.iterations);
    std::printf("policy\n%s", policy_text(solution.policy, env.map).c_str());
    if (env.map) {
        for (const auto& ref : env.map->reference_policies) {
            const double g = gain_of_policy(env.model, parse_arrow_policy(env.map->spec, ref.rows)).gain;
            std::printf("reference %s gain %.10g\n", ref.name.c_str(), g);
        }
    }
    return 0;
}

int cmd_table(const std::vector<std::string>& dirs, bool csv) {
    if (csv) std::printf("agent,mean,sd,runs,degenerate,oracle\n");
    else std::printf("%-24s %-22s %5s  %s\n", "agent", "final-window reward", "runs", "oracle gain");
    for (const auto& dir : dirs) {
        const auto summary = nlohmann::json::parse(read_text(fs::path(dir) / "summary.json"));
        const auto finals = final_window_from_curves(read_text(fs::path(dir) / "curves.csv"));
        const auto stats = sample_stats(finals);
        const std::string label = summary.value("agent", dir);
        std::string oracle = "-";
        if (summary.contains("oracle_gain") && !summary["oracle_gain"].is_null()) {
            char buf[64];
            std::snprintf(buf, sizeof buf, "%.4f", summary["oracle_gain"]["mean"].get<double>());
            oracle = buf;
        }
        if (csv) {
            std::printf("%s,%.10g,%.10g,%zu,%d,%s\n", label.c_str(), stats.mean, stats.sd, stats.n,
                        stats.degenerate ? 1 : 0, oracle == "-" ? "" : oracle.c_str());
        } else {
            char cell[64];
            std::snprintf(cell, sizeof cell, "%.4f +- %.4f%s", stats.mean, stats.sd, stats.degenerate ? " (n<2)" : "");
            std::printf("%-24s %-22s %5zu  %s\n", label.c_str(), cell, stats.n, oracle.c_str());
        }
    }
    return 0;
}

int cmd_validate(const std::string& model_path, const std::string& map_path) {
    const auto env = load_env(model_path, map_path);
    const auto report = check_ergodic(env.model);
    std::printf("states %zu actions %zu\n", env.model.num_states(), env.model.num_actions());
    std::printf("rows ok\n");
    std::printf("ergodic %s (mode %s, %zu policies checked)\n", report.ergodic ? "yes" : "no",
                to_string(report.mode).c_str(), report.policies_checked);
    if (!report.ergodic) {
        std::fprintf(stderr, "error: model is not ergodic under every stationary policy\n");
        return 2;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Posterior-sampling controller for average-reward MDPs: experiments and tools"};
    app.require_subcommand(1);

    std::string config_path, output_dir;
    std::size_t threads = 0;
    auto* run = app.add_subcommand("run", "Execute an experiment config");
    run->add_option("config", config_path, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
    run->add_option("-o,--output-dir", output_dir, "Override output_dir");
    run->add_option("-j,--threads", threads, "Override worker thread count");

    std::string model_path, map_path;
    auto* oracle = app.add_subcommand("oracle", "Optimal gain and policy by policy iteration");
    oracle->add_option("--model", model_path, "Model file (JSON)")->check(CLI::ExistingFile);
    oracle->add_option("--map", map_path, "Grid map file (JSON)")->check(CLI::ExistingFile);

    std::vector<std::string> dirs;
    bool csv = false;
    auto* table = app.add_subcommand("table", "Summarize run output directories");
    table->add_option("dirs", dirs, "Output directories written by `run`")->required()->check(CLI::ExistingDirectory);
    table->add_flag("--csv", csv, "Emit CSV instead of an aligned table");

    auto* validate = app.add_subcommand("validate", "Check model/map invariants and ergodicity");
    validate->add_option("--model", model_path, "Model file (JSON)")->check(CLI::ExistingFile);
    validate->add_option("--map", map_path, "Grid map file (JSON)")->check(CLI::ExistingFile);

    auto* render = app.add_subcommand("render", "Print an ASCII picture of a grid map");
    render->add_option("map", map_path, "Grid map file (JSON)")->required()->check(CLI::ExistingFile);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (*run) return cmd_run(config_path, output_dir, threads);
        if (*oracle) return cmd_oracle(model_path, map_path);
        if (*table) return cmd_table(dirs, csv);
        if (*validate) return cmd_validate(model_path, map_path);
        if (*render) {
            std::printf("%s", render_grid(load_grid_map(map_path).spec).c_str());
            return 0;
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
