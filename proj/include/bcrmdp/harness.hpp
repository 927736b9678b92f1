#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bcrmdp/bcr.hpp"
#include "bcrmdp/envs.hpp"
#include "bcrmdp/mdp.hpp"
#include "bcrmdp/rlearn.hpp"

namespace bcrmdp {

struct EnvConfig {
    enum class Kind { Grid, Random, Model };

    Kind kind = Kind::Random;
    std::string path;  // grid map or model file (Grid / Model)
    std::size_t num_states = 10;
    std::size_t num_actions = 5;
};

struct AgentConfig {
    enum class Kind { Bcr, RLearning, Oracle };

    Kind kind = Kind::Bcr;
    std::string label;
    BcrConfig bcr;
    RLearnConfig rlearn;
};

std::string to_string(AgentConfig::Kind kind);

/**
 * One experiment: `runs` independent simulations of one agent on one kind of
 * environment. Run i draws every seed from derive_seed(master_seed, i):
 *   stream 0  random-MDP generation (fresh model per run)
 *   stream 1  environment transitions and the initial state
 *   stream 2  agent randomness
 * so two agents sharing a master seed face identical MDPs and start states.
 */
struct ExperimentConfig {
    EnvConfig env;
    AgentConfig agent;
    std::uint64_t steps = 200'000;
    std::size_t runs = 10;
    std::uint64_t master_seed = 0;
    std::uint64_t window = 5000;
    std::uint64_t record_stride = 1000;
    std::size_t threads = 1;
    std::optional<State> initial_state;
    std::string output_dir = "out";

    void validate() const;

    /// Relative paths inside the document resolve against `base_dir`.
    static ExperimentConfig from_json_text(const std::string& text, const std::string& base_dir = ".");
    static ExperimentConfig load(const std::string& path);
    std::string to_json_text() const;
};

struct CurvePoint {
    std::uint64_t step;
    double reward;   // mean reward over the stride ending at `step`
    double cum_avg;  // mean reward over steps 1..step
    double win_avg;  // mean reward over the trailing min(window, step) steps
};

struct RunMetrics {
    std::size_t run_index = 0;
    std::uint64_t steps = 0;
    std::uint64_t window = 0;
    std::size_t num_states = 0;
    std::size_t num_actions = 0;
    std::vector<CurvePoint> curve;
    std::vector<std::uint64_t> action_counts;        // (x, a) row-major, whole run
    std::vector<std::uint64_t> first_window_counts;  // first `window` steps
    std::vector<std::uint64_t> last_window_counts;   // last `window` steps
    double final_window_avg = 0.0;
    double cumulative_avg = 0.0;
    std::optional<double> oracle_gain;

    std::vector<std::uint64_t> visits() const { return state_visits(action_counts); }
    std::vector<std::uint64_t> state_visits(std::span<const std::uint64_t> counts) const;
};

/// Shannon entropy (nats) of the state-visitation distribution in `counts` (x, a) tables.
double visitation_entropy(const RunMetrics& m, std::span<const std::uint64_t> counts);

/// Environment of run `run_index`.
MdpModel build_environment(const ExperimentConfig& cfg, std::size_t run_index);

/// Single run; deterministic in (cfg, run_index).
RunMetrics run_single(const ExperimentConfig& cfg, std::size_t run_index);

/// All runs, on cfg.threads worker threads. Results are ordered by run index and
/// do not depend on the thread count.
std::vector<RunMetrics> run_experiment(const ExperimentConfig& cfg);

struct SampleStats {
    double mean = 0.0;
    double sd = 0.0;  // sample standard deviation (n - 1); 0 when n < 2
    std::size_t n = 0;
    bool degenerate = false;  // fewer than two samples
};

SampleStats sample_stats(std::span<const double> values);

struct AggregateSummary {
    SampleStats final_window;
    SampleStats cumulative;
    std::optional<SampleStats> oracle_gain;
    std::vector<std::uint64_t> steps;
    std::vector<double> mean_cum_avg;
    std::vector<double> sd_cum_avg;
    std::vector<double> mean_win_avg;
};

/// Throws AggregationError on an empty list or runs whose step counts, curve
/// grids or window differ from `window`.
AggregateSummary aggregate(const std::vector<RunMetrics>& metrics, std::uint64_t window);

/// CSV emission. Headers are fixed:
///   curves:      run,step,reward,cum_avg,win_avg
///   visitation:  run,state,visits,a0,a1,...
std::string curves_csv(const std::vector<RunMetrics>& metrics);
std::string visitation_csv(const std::vector<RunMetrics>& metrics, const std::vector<std::uint64_t> RunMetrics::*table);
std::string summary_json(const ExperimentConfig& cfg, const std::vector<RunMetrics>& metrics);

/// Writes curves.csv, visits.csv, visits_first.csv, visits_last.csv and summary.json.
void write_outputs(const ExperimentConfig& cfg, const std::vector<RunMetrics>& metrics, const std::string& dir);

/// Per-run final win_avg values recovered from a curves.csv document.
std::vector<double> final_window_from_curves(const std::string& csv_text);

}  // namespace bcrmdp
