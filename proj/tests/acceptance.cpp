// Acceptance suite: one [PASS]/[FAIL] line per criterion, nonzero exit if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "bcrmdp/bcr.hpp"
#include "bcrmdp/envs.hpp"
#include "bcrmdp/harness.hpp"
#include "bcrmdp/mdp.hpp"

using namespace bcrmdp;
namespace fs = std::filesystem;

namespace {

const std::string kRoot = BCRMDP_SOURCE_DIR;

struct Outcome {
    bool pass;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

ExperimentConfig config(const std::string& name) { return ExperimentConfig::load(kRoot + "/configs/" + name); }

double mean_of(const std::vector<RunMetrics>& ms, double RunMetrics::*field) {
    double s = 0.0;
    for (const auto& m : ms) s += m.*field;
    return s / static_cast<double>(ms.size());
}

double mean_oracle(const std::vector<RunMetrics>& ms) {
    double s = 0.0;
    for (const auto& m : ms) s += m.oracle_gain.value();
    return s / static_cast<double>(ms.size());
}

Outcome posterior_equivalence() {
    std::mt19937_64 gen(2010);
    std::uniform_real_distribution<double> reward(-5.0, 5.0), mu0(-5.0, 5.0), unit(0.0, 1.0);
    std::uniform_int_distribution<int> len(1, 50);
    double worst = 0.0;
    int failures = 0;
    for (int k = 0; k < 1000; ++k) {
        BcrConfig cfg;
        cfg.mu0 = mu0(gen);
        cfg.lambda0 = 10.0 * (1.0 - unit(gen));  // (0, 10]
        cfg.p = 10.0 * (1.0 - unit(gen));
        std::vector<double> rs(len(gen));
        for (double& r : rs) r = reward(gen);

        PosteriorStore s;
        for (double r : rs) update_posterior(s, {0, 0, r, 0}, cfg);
        const double sum = std::accumulate(rs.begin(), rs.end(), 0.0);
        const double n = static_cast<double>(rs.size());
        const double mu = (cfg.lambda0 * cfg.mu0 + cfg.p * sum) / (cfg.lambda0 + cfg.p * n);
        const double lambda = cfg.lambda0 + cfg.p * n;
        const auto c = s.read(0, 0, 0, cfg);

        auto perm = rs;
        std::shuffle(perm.begin(), perm.end(), gen);
        PosteriorStore t;
        for (double r : perm) update_posterior(t, {0, 0, r, 0}, cfg);
        const auto d = t.read(0, 0, 0, cfg);

        const double err = std::max({std::abs(c.mu - mu), std::abs(c.lambda - lambda), std::abs(d.mu - c.mu),
                                     std::abs(d.lambda - c.lambda)});
        worst = std::max(worst, err);
        if (err > 1e-10 || c.n != rs.size() || d.n != rs.size()) ++failures;
    }
    return {failures == 0, fmt("1000 sequences, %d failures, max deviation %.2e", failures, worst)};
}

struct MomentTally {
    int rho_mean = 0, rho_var = 0, q_mean = 0, q_var = 0;
    int min() const { return std::min({rho_mean, rho_var, q_mean, q_var}); }
};

MomentTally gibbs_moments(std::uint64_t seed) {
    const std::size_t draws = 100'000;
    std::mt19937_64 gen(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    MomentTally tally;
    Rng rng(seed + 1);

    auto within = [&](const std::vector<double>& xs, const NormalConditional& c, int& mean_ok, int& var_ok) {
        double m = 0.0;
        for (double v : xs) m += v;
        m /= static_cast<double>(xs.size());
        double ss = 0.0;
        for (double v : xs) ss += (v - m) * (v - m);
        const double var = ss / static_cast<double>(xs.size() - 1);
        const double sigma2 = 1.0 / c.precision;
        if (std::abs(m - c.mean) <= 3.0 * std::sqrt(sigma2 / static_cast<double>(xs.size()))) ++mean_ok;
        if (std::abs(var - sigma2) <= 3.0 * sigma2 * std::sqrt(2.0 / static_cast<double>(xs.size() - 1))) ++var_ok;
    };

    for (int k = 0; k < 20; ++k) {
        const std::size_t n = 2 + gen() % 5, m = 1 + gen() % 3;
        const auto model = random_ergodic_mdp(n, m, gen());
        BcrConfig cfg;
        cfg.mu0 = 2.0 * unit(gen) - 1.0;
        cfg.lambda0 = 0.1 + 2.0 * unit(gen);
        cfg.p = 0.1 + 4.0 * unit(gen);
        PosteriorStore store;
        Rng env(gen());
        State x = 0;
        const int transitions = 1 + static_cast<int>(gen() % 60);
        for (int i = 0; i < transitions; ++i) {
            const auto t = sim_step(model, x, gen() % m, env);
            update_posterior(store, {t.x, t.a, t.r + 0.3 * (unit(gen) - 0.5), t.x_next}, cfg);
            x = t.x_next;
        }
        ThetaSample theta(m, 2.0 * unit(gen) - 1.0);
        for (State y = 0; y < n; ++y)
            for (Action a = 0; a < m; ++a)
                if (unit(gen) < 0.7) theta.set_q(y, a, 4.0 * unit(gen) - 2.0);

        const auto maxima = theta.state_maxima(n);
        const auto rho_c = rho_conditional(theta, store, maxima);
        std::vector<double> xs(draws);
        for (double& v : xs) v = sample_rho(theta, store, maxima, rng);
        within(xs, rho_c, tally.rho_mean, tally.rho_var);

        const auto& pair = store.pairs()[gen() % store.pairs().size()];
        const auto q_c = q_conditional(store, pair.sa.state, pair.sa.action, maxima, theta.rho()).value();
        for (double& v : xs) v = sample_q(store, pair.sa.state, pair.sa.action, maxima, theta.rho(), rng).value();
        within(xs, q_c, tally.q_mean, tally.q_var);
    }
    return tally;
}

Outcome gibbs_conditional_moments() {
    auto t = gibbs_moments(2010);
    std::string note;
    if (t.min() < 19) {
        note = fmt(" (first attempt min %d/20, rerun once)", t.min());
        t = gibbs_moments(2011);
    }
    return {t.min() >= 19, fmt("within 3 SE: rho mean %d/20, rho var %d/20, Q mean %d/20, Q var %d/20%s", t.rho_mean,
                               t.rho_var, t.q_mean, t.q_var, note.c_str())};
}

Outcome oracle_correctness() {
    std::mt19937_64 gen(2010);
    int agree = 0;
    double worst = 0.0;
    for (int k = 0; k < 100; ++k) {
        const std::size_t n = 1 + gen() % 4, m = 1 + gen() % 3;
        const auto model = random_ergodic_mdp(n, m, gen());
        const double pi = policy_iteration(model).value.gain;
        const double brute = enumerate_policies(model).gain;
        worst = std::max(worst, std::abs(pi - brute));
        if (std::abs(pi - brute) <= 1e-8) ++agree;
    }
    return {agree == 100, fmt("%d/100 agree, max |difference| %.2e", agree, worst)};
}

Outcome random_mdps() {
    bool pass = true;
    std::string detail;
    for (const char* size : {"random10", "random20"}) {
        const auto bcr = run_experiment(config(std::string(size) + "_bcr.json"));
        const auto rl = run_experiment(config(std::string(size) + "_rlearning.json"));
        const double b = mean_of(bcr, &RunMetrics::final_window_avg);
        const double r = mean_of(rl, &RunMetrics::final_window_avg);
        const double o = mean_oracle(bcr);
        const bool ok = b >= 0.93 * o && b > r;
        pass = pass && ok;
        detail += fmt("%s%s: oracle %.4f, BCR %.4f (%.3f of oracle), R %.4f%s", detail.empty() ? "" : "; ", size, o,
                      b, b / o, r, ok ? "" : " FAILED");
    }
    return {pass, detail};
}

struct GridResults {
    std::vector<RunMetrics> bcr, rl5, rl30;
};

Outcome grid_world(const GridResults& g) {
    const auto map = load_grid_map(kRoot + "/maps/grid7x7.json");
    const auto model = build_gridworld(map.spec);
    double best_cycle = -INFINITY;
    for (const auto& ref : map.reference_policies)
        best_cycle = std::max(best_cycle, gain_of_policy(model, parse_arrow_policy(map.spec, ref.rows)).gain);
    const double oracle = mean_oracle(g.bcr);
    const double b = mean_of(g.bcr, &RunMetrics::final_window_avg);
    const double r5 = mean_of(g.rl5, &RunMetrics::final_window_avg);
    const double r30 = mean_of(g.rl30, &RunMetrics::final_window_avg);
    const auto above = std::count_if(g.bcr.begin(), g.bcr.end(),
                                     [&](const RunMetrics& m) { return m.final_window_avg > best_cycle; });
    const bool pass = b >= 0.85 * oracle && b > r5 && b > r30 && above >= 9;
    return {pass, fmt("oracle %.4f, BCR %.4f (%.3f of oracle), R(C=5) %.4f, R(C=30) %.4f, "
                      "%td/10 runs above best cup cycle %.4f",
                      oracle, b, b / oracle, r5, r30, above, best_cycle)};
}

Outcome exploration_signature(const GridResults& g) {
    int lower = 0;
    double first = 0.0, last = 0.0;
    for (const auto& m : g.bcr) {
        const double h0 = visitation_entropy(m, m.first_window_counts);
        const double h1 = visitation_entropy(m, m.last_window_counts);
        first += h0;
        last += h1;
        if (h1 < h0) ++lower;
    }
    const double n = static_cast<double>(g.bcr.size());
    return {lower >= 9, fmt("%d/10 runs lower; mean entropy first window %.3f, last window %.3f nats", lower,
                            first / n, last / n)};
}

Outcome bandit() {
    auto cfg = config("bandit3_bcr.json");
    cfg.window = 1000;  // best-arm share is measured over the last 1000 steps
    const auto runs = run_experiment(cfg);
    int good = 0;
    double worst = 1.0;
    for (const auto& m : runs) {
        const double share = static_cast<double>(m.last_window_counts[2]) / 1000.0;
        worst = std::min(worst, share);
        if (share >= 0.95) ++good;
    }
    return {good >= 9 && runs.size() == 10,
            fmt("%d/%zu seeds pick the best arm >= 95%% of the last 1000 steps (lowest share %.3f)", good, runs.size(),
                worst)};
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Outcome determinism() {
    const auto base = fs::temp_directory_path() / "bcrmdp_acceptance";
    fs::remove_all(base);
    std::vector<ExperimentConfig> cfgs;
    auto add = [&](const char* name, std::uint64_t steps, std::size_t runs) {
        auto c = config(name);
        c.steps = steps;
        c.runs = runs;
        cfgs.push_back(c);
    };
    add("random10_bcr.json", 10'000, 6);
    add("random20_rlearning.json", 10'000, 6);
    add("grid7x7_bcr.json", 20'000, 4);
    add("grid7x7_oracle.json", 20'000, 4);
    add("bandit3_bcr.json", 10'000, 5);

    int identical = 0;
    const char* files[] = {"curves.csv", "visits.csv", "visits_first.csv", "visits_last.csv", "summary.json"};
    for (std::size_t i = 0; i < cfgs.size(); ++i) {
        auto c = cfgs[i];
        std::vector<fs::path> dirs;
        for (std::size_t threads : {1, 1, 4}) {
            c.threads = threads;
            const auto dir = base / fmt("cfg%zu_run%zu", i, dirs.size());
            write_outputs(c, run_experiment(c), dir.string());
            dirs.push_back(dir);
        }
        bool same = true;
        for (const char* f : files) {
            const auto ref = read_file(dirs[0] / f);
            same = same && !ref.empty() && read_file(dirs[1] / f) == ref && read_file(dirs[2] / f) == ref;
        }
        if (same) ++identical;
    }
    fs::remove_all(base);
    const int total = static_cast<int>(cfgs.size());
    return {identical == total,
            fmt("%d/%d configs byte-identical across two serial runs and a 4-thread run", identical, total)};
}

}  // namespace

int main() {
    std::vector<std::string> failed;
    auto report = [&](const char* id, const char* title, const std::function<Outcome()>& f) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = f();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::printf("[%s] %s %s: %s (%.1fs)\n", o.pass ? "PASS" : "FAIL", id, title, o.detail.c_str(), secs);
        std::fflush(stdout);
        if (!o.pass) failed.push_back(id);
    };

    report("P1", "posterior equivalence", posterior_equivalence);
    report("P2", "Gibbs conditional moments", gibbs_conditional_moments);
    report("P3", "oracle correctness", oracle_correctness);
    report("P4", "random MDPs, BCR vs R-learning vs oracle", random_mdps);

    GridResults grid;
    bool grid_ok = true;
    std::string grid_error;
    try {
        grid.bcr = run_experiment(config("grid7x7_bcr.json"));
        grid.rl5 = run_experiment(config("grid7x7_rlearning_c5.json"));
        grid.rl30 = run_experiment(config("grid7x7_rlearning_c30.json"));
    } catch (const std::exception& e) {
        grid_ok = false;
        grid_error = e.what();
    }
    auto on_grid = [&](Outcome (*f)(const GridResults&)) {
        return [&, f]() -> Outcome {
            if (!grid_ok) return {false, "grid experiments failed: " + grid_error};
            return f(grid);
        };
    };
    report("P5", "grid world, BCR vs R-learning vs cup cycles", on_grid(grid_world));
    report("P6", "exploration to exploitation", on_grid(exploration_signature));
    report("P7", "bandit best-arm share", bandit);
    report("P8", "determinism", determinism);

    if (failed.empty()) {
        std::printf("all acceptance criteria passed\n");
        return 0;
    }
    std::printf("%zu acceptance criteria failed\n", failed.size());
    return 1;
}
