#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "bcrmdp/harness.hpp"

using namespace bcrmdp;
namespace fs = std::filesystem;

namespace {

std::string source_path(const std::string& rel) { return std::string(BCRMDP_SOURCE_DIR) + "/" + rel; }

ExperimentConfig small_random(AgentConfig::Kind kind) {
    ExperimentConfig cfg;
    cfg.env.kind = EnvConfig::Kind::Random;
    cfg.env.num_states = 5;
    cfg.env.num_actions = 3;
    cfg.agent.kind = kind;
    cfg.agent.rlearn.c_explore = 20.0;
    cfg.steps = 3000;
    cfg.runs = 4;
    cfg.window = 500;
    cfg.record_stride = 100;
    cfg.master_seed = 123;
    return cfg;
}

RunMetrics constant_run(std::size_t index, double c) {
    RunMetrics m;
    m.run_index = index;
    m.steps = 1000;
    m.window = 100;
    m.num_states = 1;
    m.num_actions = 1;
    for (std::uint64_t s = 100; s <= 1000; s += 100) m.curve.push_back({s, c, c, c});
    m.final_window_avg = c;
    m.cumulative_avg = c;
    return m;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("sample_stats") {
    const double two[] = {0.30, 0.40};
    const auto s = sample_stats(two);
    CHECK(s.mean == doctest::Approx(0.35));
    CHECK(s.sd == doctest::Approx(0.0707107).epsilon(1e-5));
    CHECK_FALSE(s.degenerate);

    const double one[] = {0.42};
    const auto d = sample_stats(one);
    CHECK(d.mean == doctest::Approx(0.42));
    CHECK(d.sd == 0.0);
    CHECK(d.degenerate);
}

TEST_CASE("aggregate") {
    std::vector<RunMetrics> runs;
    for (std::size_t i = 0; i < 10; ++i) runs.push_back(constant_run(i, 0.6));
    const auto agg = aggregate(runs, 100);
    CHECK(agg.final_window.mean == doctest::Approx(0.6));
    CHECK(agg.final_window.sd == doctest::Approx(0.0));
    CHECK(agg.steps.size() == 10);
    CHECK(agg.mean_cum_avg.back() == doctest::Approx(0.6));

    CHECK_THROWS_AS(aggregate({}, 100), AggregationError);
    CHECK_THROWS_AS(aggregate(runs, 200), AggregationError);
    runs[3].steps = 900;
    CHECK_THROWS_AS(aggregate(runs, 100), AggregationError);
    runs[3] = constant_run(3, 0.6);
    runs[3].curve.pop_back();
    CHECK_THROWS_AS(aggregate(runs, 100), AggregationError);
}

TEST_CASE("runs are deterministic and independent of the thread count") {
    auto cfg = small_random(AgentConfig::Kind::Bcr);
    const auto a = run_experiment(cfg);
    const auto b = run_experiment(cfg);
    cfg.threads = 3;
    const auto c = run_experiment(cfg);
    CHECK(curves_csv(a) == curves_csv(b));
    CHECK(curves_csv(a) == curves_csv(c));
    CHECK(visitation_csv(a, &RunMetrics::action_counts) == visitation_csv(c, &RunMetrics::action_counts));
    // Run i in isolation reproduces run i of the batch.
    CHECK(curves_csv({run_single(cfg, 2)}) == curves_csv({c[2]}));
}

TEST_CASE("agents sharing a master seed face the same environments") {
    const auto bcr = small_random(AgentConfig::Kind::Bcr);
    const auto rl = small_random(AgentConfig::Kind::RLearning);
    for (std::size_t i = 0; i < 3; ++i) CHECK(build_environment(bcr, i) == build_environment(rl, i));
    CHECK_FALSE(build_environment(bcr, 0) == build_environment(bcr, 1));
}

TEST_CASE("visit conservation") {
    for (auto kind : {AgentConfig::Kind::Bcr, AgentConfig::Kind::RLearning, AgentConfig::Kind::Oracle}) {
        const auto cfg = small_random(kind);
        const auto metrics = run_experiment(cfg);
        std::uint64_t total = 0, first = 0, last = 0;
        for (const auto& m : metrics) {
            for (auto v : m.visits()) total += v;
            for (auto v : m.state_visits(m.first_window_counts)) first += v;
            for (auto v : m.state_visits(m.last_window_counts)) last += v;
            CHECK(m.oracle_gain.has_value());
            CHECK(m.curve.back().step == cfg.steps);
        }
        CHECK(total == cfg.steps * cfg.runs);
        CHECK(first == cfg.window * cfg.runs);
        CHECK(last == cfg.window * cfg.runs);
    }
}

TEST_CASE("oracle rollout on the grid matches the policy gain") {
    ExperimentConfig cfg;
    cfg.env.kind = EnvConfig::Kind::Grid;
    cfg.env.path = source_path("maps/grid7x7.json");
    cfg.agent.kind = AgentConfig::Kind::Oracle;
    cfg.steps = 100'000;
    cfg.runs = 1;
    cfg.master_seed = 9;
    const auto m = run_single(cfg, 0);
    REQUIRE(m.oracle_gain);
    CHECK(std::abs(m.cumulative_avg - *m.oracle_gain) <= 0.02);
}

TEST_CASE("BCR on the bandit model reaches a high final window") {
    const auto cfg = ExperimentConfig::load(source_path("configs/bandit3_bcr.json"));
    auto one = cfg;
    one.runs = 1;
    const auto m = run_single(one, 0);
    CHECK(m.final_window_avg >= 0.85);
    CHECK(m.oracle_gain.value() == doctest::Approx(0.9));
}

TEST_CASE("visitation entropy") {
    RunMetrics m;
    m.num_states = 4;
    m.num_actions = 2;
    const std::vector<std::uint64_t> uniform{1, 1, 0, 2, 1, 1, 2, 0};
    CHECK(visitation_entropy(m, uniform) == doctest::Approx(std::log(4.0)));
    const std::vector<std::uint64_t> point{0, 0, 5, 3, 0, 0, 0, 0};
    CHECK(visitation_entropy(m, point) == doctest::Approx(0.0));
}

TEST_CASE("config parsing") {
    const std::string ok = R"({"env":{"kind":"random","num_states":4,"num_actions":2},
                               "agent":{"kind":"rlearning","c_explore":5},
                               "steps":1000,"runs":2,"window":100,"output_dir":"res"})";
    const auto cfg = ExperimentConfig::from_json_text(ok, "/tmp/base");
    CHECK(cfg.agent.kind == AgentConfig::Kind::RLearning);
    CHECK(cfg.agent.rlearn.c_explore == 5.0);
    CHECK(cfg.output_dir == "/tmp/base/res");
    CHECK(ExperimentConfig::from_json_text(cfg.to_json_text(), "/").to_json_text() == cfg.to_json_text());

    CHECK_THROWS_AS(ExperimentConfig::from_json_text(R"({"env":{"kind":"random","num_states":4,"num_actions":2},
                               "agent":{"kind":"bcr","lamda0":2}})"),
                    ConfigError);
    CHECK_THROWS_AS(ExperimentConfig::from_json_text(R"({"env":{"kind":"lattice"},"agent":{"kind":"bcr"}})"),
                    ConfigError);
    CHECK_THROWS_AS(ExperimentConfig::from_json_text(R"({"env":{"kind":"random","num_states":4,"num_actions":2},
                               "agent":{"kind":"bcr"},"steps":10,"window":100})"),
                    ConfigError);
    CHECK_THROWS_AS(ExperimentConfig::from_json_text("{"), ConfigError);

    for (const auto& entry : fs::directory_iterator(source_path("configs")))
        CHECK_NOTHROW(ExperimentConfig::load(entry.path().string()));
}

TEST_CASE("output files") {
    auto cfg = small_random(AgentConfig::Kind::RLearning);
    cfg.runs = 2;
    const auto metrics = run_experiment(cfg);
    const auto dir = fs::temp_directory_path() / "bcrmdp_test_outputs";
    fs::remove_all(dir);
    write_outputs(cfg, metrics, dir.string());
    for (const char* name : {"curves.csv", "visits.csv", "visits_first.csv", "visits_last.csv", "summary.json"})
        CHECK(fs::exists(dir / name));

    const auto curves = slurp(dir / "curves.csv");
    CHECK(curves.rfind("run,step,reward,cum_avg,win_avg\n", 0) == 0);
    CHECK(slurp(dir / "visits.csv").rfind("run,state,visits,a0,a1,a2\n", 0) == 0);
    const auto finals = final_window_from_curves(curves);
    REQUIRE(finals.size() == 2);
    CHECK(finals[0] == metrics[0].final_window_avg);
    CHECK(finals[1] == metrics[1].final_window_avg);
    CHECK_THROWS_AS(final_window_from_curves("bad,header\n"), AggregationError);
    fs::remove_all(dir);
}
