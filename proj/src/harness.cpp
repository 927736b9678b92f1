#include "bcrmdp/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <memory>
#include <mutex>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

namespace bcrmdp {

namespace fs = std::filesystem;
using nlohmann::json;

std::string to_string(AgentConfig::Kind kind) {
    switch (kind) {
        case AgentConfig::Kind::Bcr: return "bcr";
        case AgentConfig::Kind::RLearning: return "rlearning";
        case AgentConfig::Kind::Oracle: return "oracle";
    }
    return "unknown";
}

// ---------------------------------------------------------------------------
// Config

void ExperimentConfig::validate() const {
    if (runs < 1) throw ConfigError("runs must be at least 1");
    if (window < 1) throw ConfigError("window must be at least 1");
    if (steps < window) throw ConfigError("steps must be at least window");
    if (record_stride < 1) throw ConfigError("record_stride must be at least 1");
    if (threads < 1) throw ConfigError("threads must be at least 1");
    if (env.kind == EnvConfig::Kind::Random && (env.num_states < 1 || env.num_actions < 1))
        throw ConfigError("random MDP needs positive num_states and num_actions");
    if (env.kind != EnvConfig::Kind::Random && env.path.empty()) throw ConfigError("environment file path missing");
    if (agent.kind == AgentConfig::Kind::Bcr) agent.bcr.validate();
    if (agent.kind == AgentConfig::Kind::RLearning) agent.rlearn.validate();
}

namespace {

void reject_unknown(const json& j, const std::set<std::string>& allowed, const std::string& where) {
    if (!j.is_object()) throw ConfigError(where + " must be an object");
    for (const auto& [key, value] : j.items())
        if (!allowed.contains(key)) throw ConfigError("unknown key '" + key + "' in " + where);
}

std::string resolve(const std::string& path, const std::string& base_dir) {
    const fs::path p(path);
    return p.is_absolute() ? path : (fs::path(base_dir) / p).lexically_normal().string();
}

}  // namespace

ExperimentConfig ExperimentConfig::from_json_text(const std::string& text, const std::string& base_dir) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    ExperimentConfig cfg;
    try {
        reject_unknown(j, {"env", "agent", "steps", "runs", "master_seed", "window", "record_stride", "threads",
                           "initial_state", "output_dir"},
                       "config");

        const auto& env = j.at("env");
        const auto env_kind = env.at("kind").get<std::string>();
        if (env_kind == "grid") {
            reject_unknown(env, {"kind", "map"}, "env");
            cfg.env.kind = EnvConfig::Kind::Grid;
            cfg.env.path = resolve(env.at("map").get<std::string>(), base_dir);
        } else if (env_kind == "random") {
            reject_unknown(env, {"kind", "num_states", "num_actions"}, "env");
            cfg.env.kind = EnvConfig::Kind::Random;
            cfg.env.num_states = env.at("num_states").get<std::size_t>();
            cfg.env.num_actions = env.at("num_actions").get<std::size_t>();
        } else if (env_kind == "model") {
            reject_unknown(env, {"kind", "path"}, "env");
            cfg.env.kind = EnvConfig::Kind::Model;
            cfg.env.path = resolve(env.at("path").get<std::string>(), base_dir);
        } else {
            throw ConfigError("env.kind must be grid, random or model");
        }

        const auto& agent = j.at("agent");
        const auto agent_kind = agent.at("kind").get<std::string>();
        cfg.agent.label = agent.value("label", agent_kind);
        if (agent_kind == "bcr") {
            reject_unknown(agent, {"kind", "label", "mu0", "lambda0", "p", "sweeps_per_step"}, "agent");
            cfg.agent.kind = AgentConfig::Kind::Bcr;
            auto& b = cfg.agent.bcr;
            b.mu0 = agent.value("mu0", b.mu0);
            b.lambda0 = agent.value("lambda0", b.lambda0);
            b.p = agent.value("p", b.p);
            b.sweeps_per_step = agent.value("sweeps_per_step", b.sweeps_per_step);
        } else if (agent_kind == "rlearning") {
            reject_unknown(agent, {"kind", "label", "alpha", "beta", "c_explore", "p_explore"}, "agent");
            cfg.agent.kind = AgentConfig::Kind::RLearning;
            auto& r = cfg.agent.rlearn;
            r.alpha = agent.value("alpha", r.alpha);
            r.beta = agent.value("beta", r.beta);
            r.c_explore = agent.value("c_explore", r.c_explore);
            r.p_explore = agent.value("p_explore", r.p_explore);
        } else if (agent_kind == "oracle") {
            reject_unknown(agent, {"kind", "label"}, "agent");
            cfg.agent.kind = AgentConfig::Kind::Oracle;
        } else {
            throw ConfigError("agent.kind must be bcr, rlearning or oracle");
        }

        cfg.steps = j.value("steps", cfg.steps);
        cfg.runs = j.value("runs", cfg.runs);
        cfg.master_seed = j.value("master_seed", cfg.master_seed);
        cfg.window = j.value("window", cfg.window);
        cfg.record_stride = j.value("record_stride", cfg.record_stride);
        cfg.threads = j.value("threads", cfg.threads);
        if (j.contains("initial_state") && !j.at("initial_state").is_null())
            cfg.initial_state = j.at("initial_state").get<State>();
        cfg.output_dir = resolve(j.value("output_dir", cfg.output_dir), base_dir);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("malformed config: ") + e.what());
    }
    cfg.validate();
    return cfg;
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    std::stringstream buffer;
    buffer << in.rdbuf();
    return from_json_text(buffer.str(), fs::path(path).parent_path().string());
}

std::string ExperimentConfig::to_json_text() const {
    json j;
    switch (env.kind) {
        case EnvConfig::Kind::Grid: j["env"] = {{"kind", "grid"}, {"map", env.path}}; break;
        case EnvConfig::Kind::Random:
            j["env"] = {{"kind", "random"}, {"num_states", env.num_states}, {"num_actions", env.num_actions}};
            break;
        case EnvConfig::Kind::Model: j["env"] = {{"kind", "model"}, {"path", env.path}}; break;
    }
    json a = {{"kind", to_string(agent.kind)}, {"label", agent.label}};
    if (agent.kind == AgentConfig::Kind::Bcr) {
        a["mu0"] = agent.bcr.mu0;
        a["lambda0"] = agent.bcr.lambda0;
        a["p"] = agent.bcr.p;
        a["sweeps_per_step"] = agent.bcr.sweeps_per_step;
    } else if (agent.kind == AgentConfig::Kind::RLearning) {
        a["alpha"] = agent.rlearn.alpha;
        a["beta"] = agent.rlearn.beta;
        a["c_explore"] = agent.rlearn.c_explore;
        a["p_explore"] = agent.rlearn.p_explore;
    }
    j["agent"] = a;
    j["steps"] = steps;
    j["runs"] = runs;
    j["master_seed"] = master_seed;
    j["window"] = window;
    j["record_stride"] = record_stride;
    j["threads"] = threads;
    j["initial_state"] = initial_state ? json(*initial_state) : json(nullptr);
    j["output_dir"] = output_dir;
    return j.dump(2);
}

// ---------------------------------------------------------------------------
// Simulation

namespace {

class Controller {
public:
    virtual ~Controller() = default;
    virtual Action act(State x) = 0;
    virtual void observe(const TransitionRecord& t) = 0;
};

class BcrController final : public Controller {
public:
    BcrController(std::size_t num_actions, const BcrConfig& cfg) : agent_(num_actions, cfg) {}
    Action act(State x) override { return agent_.act(x); }
    void observe(const TransitionRecord& t) override { agent_.observe(t); }

private:
    BcrAgent agent_;
};

class RLearnController final : public Controller {
public:
    RLearnController(std::size_t num_states, std::size_t num_actions, const RLearnConfig& cfg)
        : agent_(num_states, num_actions, cfg) {}
    Action act(State x) override { return agent_.act(x); }
    void observe(const TransitionRecord& t) override { agent_.observe(t); }

private:
    RLearnAgent agent_;
};

class PolicyController final : public Controller {
public:
    explicit PolicyController(StationaryPolicy policy) : policy_(std::move(policy)) {}
    Action act(State x) override { return policy_(x); }
    void observe(const TransitionRecord&) override {}

private:
    StationaryPolicy policy_;
};

constexpr std::size_t kOracleStateLimit = 2000;

double mean_of(std::span<const double> values) {
    double total = 0.0;
    for (double v : values) total += v;
    return total / static_cast<double>(values.size());
}

}  // namespace

std::vector<std::uint64_t> RunMetrics::state_visits(std::span<const std::uint64_t> counts) const {
    std::vector<std::uint64_t> out(num_states, 0);
    for (State x = 0; x < num_states; ++x)
        for (Action a = 0; a < num_actions; ++a) out[x] += counts[x * num_actions + a];
    return out;
}

double visitation_entropy(const RunMetrics& m, std::span<const std::uint64_t> counts) {
    const auto visits = m.state_visits(counts);
    const double total = static_cast<double>(std::accumulate(visits.begin(), visits.end(), std::uint64_t{0}));
    if (total == 0.0) return 0.0;
    double h = 0.0;
    for (auto v : visits) {
        if (v == 0) continue;
        const double pr = static_cast<double>(v) / total;
        h -= pr * std::log(pr);
    }
    return h;
}

MdpModel build_environment(const ExperimentConfig& cfg, std::size_t run_index) {
    switch (cfg.env.kind) {
        case EnvConfig::Kind::Grid: return build_gridworld(load_grid_map(cfg.env.path).spec);
        case EnvConfig::Kind::Model: return load_model(cfg.env.path);
        case EnvConfig::Kind::Random:
            return random_ergodic_mdp(cfg.env.num_states, cfg.env.num_actions,
                                      derive_seed(derive_seed(cfg.master_seed, run_index), 0));
    }
    throw ConfigError("unknown environment kind");
}

RunMetrics run_single(const ExperimentConfig& cfg, std::size_t run_index) {
    const MdpModel model = [&] {
        try {
            return build_environment(cfg, run_index);
        } catch (const std::exception& e) {
            throw ConfigError("run " + std::to_string(run_index) + ": environment construction failed: " + e.what());
        }
    }();
    const std::size_t n = model.num_states();
    const std::size_t m = model.num_actions();
    const std::uint64_t child = derive_seed(cfg.master_seed, run_index);
    Rng env_rng(derive_seed(child, 1));

    std::optional<PolicySolution> oracle;
    if (cfg.agent.kind == AgentConfig::Kind::Oracle || n <= kOracleStateLimit) oracle = policy_iteration(model);

    std::unique_ptr<Controller> controller;
    switch (cfg.agent.kind) {
        case AgentConfig::Kind::Bcr: {
            BcrConfig bcr = cfg.agent.bcr;
            bcr.seed = derive_seed(child, 2);
            controller = std::make_unique<BcrController>(m, bcr);
            break;
        }
        case AgentConfig::Kind::RLearning: {
            RLearnConfig rl = cfg.agent.rlearn;
            rl.seed = derive_seed(child, 2);
            controller = std::make_unique<RLearnController>(n, m, rl);
            break;
        }
        case AgentConfig::Kind::Oracle: controller = std::make_unique<PolicyController>(oracle->policy); break;
    }

    RunMetrics metrics;
    metrics.run_index = run_index;
    metrics.steps = cfg.steps;
    metrics.window = cfg.window;
    metrics.num_states = n;
    metrics.num_actions = m;
    metrics.action_counts.assign(n * m, 0);
    metrics.first_window_counts.assign(n * m, 0);
    metrics.last_window_counts.assign(n * m, 0);
    if (oracle) metrics.oracle_gain = oracle->value.gain;

    State x = 0;
    if (cfg.initial_state) {
        if (*cfg.initial_state >= n) throw ConfigError("initial_state out of range");
        x = *cfg.initial_state;
    } else {
        x = env_rng.uniform_index(n);
    }

    std::vector<double> rewards(cfg.steps);
    double running = 0.0;
    const std::uint64_t last_window_start = cfg.steps - cfg.window;
    for (std::uint64_t t = 0; t < cfg.steps; ++t) {
        const Action a = controller->act(x);
        const TransitionRecord rec = sim_step(model, x, a, env_rng);
        controller->observe(rec);

        const std::size_t cell = x * m + a;
        ++metrics.action_counts[cell];
        if (t < cfg.window) ++metrics.first_window_counts[cell];
        if (t >= last_window_start) ++metrics.last_window_counts[cell];
        rewards[t] = rec.r;
        running += rec.r;

        const std::uint64_t step = t + 1;
        if (step % cfg.record_stride == 0 || step == cfg.steps) {
            const std::uint64_t block = step % cfg.record_stride == 0 ? cfg.record_stride : step % cfg.record_stride;
            const std::uint64_t win = std::min<std::uint64_t>(cfg.window, step);
            const std::span<const double> all(rewards);
            metrics.curve.push_back({step, mean_of(all.subspan(step - block, block)),
                                     running / static_cast<double>(step), mean_of(all.subspan(step - win, win))});
        }
        x = rec.x_next;
    }
    metrics.final_window_avg = metrics.curve.back().win_avg;
    metrics.cumulative_avg = metrics.curve.back().cum_avg;
    return metrics;
}

std::vector<RunMetrics> run_experiment(const ExperimentConfig& cfg) {
    cfg.validate();
    std::vector<RunMetrics> results(cfg.runs);
    const std::size_t workers = std::min(cfg.threads, cfg.runs);
    if (workers <= 1) {
        for (std::size_t i = 0; i < cfg.runs; ++i) results[i] = run_single(cfg, i);
        return results;
    }

    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < cfg.runs; i = next++) {
                try {
                    results[i] = run_single(cfg, i);
                } catch (...) {
                    std::lock_guard lock(failure_mutex);
                    if (!failure) failure = std::current_exception();
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
    return results;
}

// ---------------------------------------------------------------------------
// Aggregation

SampleStats sample_stats(std::span<const double> values) {
    SampleStats s;
    s.n = values.size();
    if (s.n == 0) return s;
    s.mean = mean_of(values);
    if (s.n < 2) {
        s.degenerate = true;
        return s;
    }
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.sd = std::sqrt(ss / static_cast<double>(s.n - 1));
    return s;
}

AggregateSummary aggregate(const std::vector<RunMetrics>& metrics, std::uint64_t window) {
    if (metrics.empty()) throw AggregationError("no runs to aggregate");
    const auto& first = metrics.front();
    for (const auto& m : metrics) {
        if (m.steps != first.steps || m.curve.size() != first.curve.size())
            throw AggregationError("run " + std::to_string(m.run_index) + " has a different length");
        if (m.window != window)
            throw AggregationError("run " + std::to_string(m.run_index) + " was recorded with window " +
                                   std::to_string(m.window));
        for (std::size_t k = 0; k < m.curve.size(); ++k)
            if (m.curve[k].step != first.curve[k].step)
                throw AggregationError("run " + std::to_string(m.run_index) + " uses a different step grid");
    }

    AggregateSummary out;
    std::vector<double> finals, cumulative, oracle;
    for (const auto& m : metrics) {
        finals.push_back(m.final_window_avg);
        cumulative.push_back(m.cumulative_avg);
        if (m.oracle_gain) oracle.push_back(*m.oracle_gain);
    }
    out.final_window = sample_stats(finals);
    out.cumulative = sample_stats(cumulative);
    if (oracle.size() == metrics.size()) out.oracle_gain = sample_stats(oracle);

    std::vector<double> column(metrics.size()), win_column(metrics.size());
    for (std::size_t k = 0; k < first.curve.size(); ++k) {
        for (std::size_t r = 0; r < metrics.size(); ++r) {
            column[r] = metrics[r].curve[k].cum_avg;
            win_column[r] = metrics[r].curve[k].win_avg;
        }
        const auto s = sample_stats(column);
        out.steps.push_back(first.curve[k].step);
        out.mean_cum_avg.push_back(s.mean);
        out.sd_cum_avg.push_back(s.sd);
        out.mean_win_avg.push_back(mean_of(win_column));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Output

namespace {

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

json stats_json(const SampleStats& s) {
    return {{"mean", s.mean}, {"sd", s.sd}, {"n", s.n}, {"degenerate", s.degenerate}};
}

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write " + path.string());
    out << content;
}

}  // namespace

std::string curves_csv(const std::vector<RunMetrics>& metrics) {
    std::string out = "run,step,reward,cum_avg,win_avg\n";
    for (const auto& m : metrics)
        for (const auto& p : m.curve)
            out += std::to_string(m.run_index) + ',' + std::to_string(p.step) + ',' + fmt_double(p.reward) + ',' +
                   fmt_double(p.cum_avg) + ',' + fmt_double(p.win_avg) + '\n';
    return out;
}

std::string visitation_csv(const std::vector<RunMetrics>& metrics,
                           const std::vector<std::uint64_t> RunMetrics::*table) {
    std::string out = "run,state,visits";
    const std::size_t actions = metrics.empty() ? 0 : metrics.front().num_actions;
    for (std::size_t a = 0; a < actions; ++a) out += ",a" + std::to_string(a);
    out += '\n';
    for (const auto& m : metrics) {
        const auto& counts = m.*table;
        const auto visits = m.state_visits(counts);
        for (State x = 0; x < m.num_states; ++x) {
            out += std::to_string(m.run_index) + ',' + std::to_string(x) + ',' + std::to_string(visits[x]);
            for (Action a = 0; a < m.num_actions; ++a) out += ',' + std::to_string(counts[x * m.num_actions + a]);
            out += '\n';
        }
    }
    return out;
}

std::string summary_json(const ExperimentConfig& cfg, const std::vector<RunMetrics>& metrics) {
    const auto agg = aggregate(metrics, cfg.window);
    json j;
    j["agent"] = cfg.agent.label;
    j["agent_kind"] = to_string(cfg.agent.kind);
    j["runs"] = metrics.size();
    j["steps"] = cfg.steps;
    j["window"] = cfg.window;
    j["final_window"] = stats_json(agg.final_window);
    j["cumulative"] = stats_json(agg.cumulative);
    json per_run = json::array();
    for (const auto& m : metrics) per_run.push_back(m.final_window_avg);
    j["per_run_final_window"] = per_run;
    if (agg.oracle_gain) {
        j["oracle_gain"] = stats_json(*agg.oracle_gain);
        json gains = json::array();
        for (const auto& m : metrics) gains.push_back(*m.oracle_gain);
        j["per_run_oracle_gain"] = gains;
    } else {
        j["oracle_gain"] = nullptr;
    }
    // Execution-only settings are left out so the file depends on results alone.
    auto config = json::parse(cfg.to_json_text());
    config.erase("threads");
    config.erase("output_dir");
    j["config"] = config;
    return j.dump(2) + "\n";
}

void write_outputs(const ExperimentConfig& cfg, const std::vector<RunMetrics>& metrics, const std::string& dir) {
    fs::create_directories(dir);
    const fs::path base(dir);
    write_file(base / "curves.csv", curves_csv(metrics));
    write_file(base / "visits.csv", visitation_csv(metrics, &RunMetrics::action_counts));
    write_file(base / "visits_first.csv", visitation_csv(metrics, &RunMetrics::first_window_counts));
    write_file(base / "visits_last.csv", visitation_csv(metrics, &RunMetrics::last_window_counts));
    write_file(base / "summary.json", summary_json(cfg, metrics));
}

std::vector<double> final_window_from_curves(const std::string& csv_text) {
    std::istringstream in(csv_text);
    std::string line;
    if (!std::getline(in, line) || line != "run,step,reward,cum_avg,win_avg")
        throw AggregationError("curves file has an unexpected header");
    std::vector<std::pair<std::size_t, double>> last;  // (run, win_avg) of the latest row per run
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::stringstream ss(line);
        for (std::string f; std::getline(ss, f, ',');) fields.push_back(f);
        if (fields.size() != 5) throw AggregationError("curves line " + std::to_string(line_no) + " is malformed");
        try {
            const auto run = static_cast<std::size_t>(std::stoull(fields[0]));
            const double win = std::stod(fields[4]);
            if (last.empty() || last.back().first != run)
                last.emplace_back(run, win);
            else
                last.back().second = win;
        } catch (const std::exception&) {
            throw AggregationError("curves line " + std::to_string(line_no) + " is malformed");
        }
    }
    std::vector<double> out;
    for (const auto& [run, win] : last) out.push_back(win);
    return out;
}

}  // namespace bcrmdp
