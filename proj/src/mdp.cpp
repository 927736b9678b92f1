#include "bcrmdp/mdp.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "bcrmdp/theta.hpp"

namespace bcrmdp {

MdpModel::MdpModel(std::size_t num_states, std::size_t num_actions)
    : num_states_(num_states),
      num_actions_(num_actions),
      trans_(num_states * num_actions * num_states, 0.0),
      reward_(num_states * num_actions * num_states, 0.0) {}

std::span<const double> MdpModel::trans_row(State x, Action a) const {
    return std::span<const double>(trans_).subspan(index(x, a, 0), num_states_);
}

std::span<const double> MdpModel::reward_row(State x, Action a) const {
    return std::span<const double>(reward_).subspan(index(x, a, 0), num_states_);
}

void MdpModel::check_indices(State x, Action a) const {
    if (x >= num_states_) throw IndexError("state " + std::to_string(x) + " out of range");
    if (a >= num_actions_) throw IndexError("action " + std::to_string(a) + " out of range");
}

void MdpModel::validate() const {
    if (num_states_ == 0 || num_actions_ == 0) throw ModelError("model needs at least one state and one action");
    if (trans_.size() != num_states_ * num_actions_ * num_states_ || reward_.size() != trans_.size())
        throw ModelError("tensor sizes do not match (num_states, num_actions, num_states)");
    for (State x = 0; x < num_states_; ++x) {
        for (Action a = 0; a < num_actions_; ++a) {
            double sum = 0.0;
            for (State y = 0; y < num_states_; ++y) {
                const double pr = trans(x, a, y);
                if (!(pr >= 0.0 && pr <= 1.0))
                    throw ModelError("trans(" + std::to_string(x) + "," + std::to_string(a) + "," + std::to_string(y) +
                                     ") outside [0,1]");
                if (!std::isfinite(reward(x, a, y)))
                    throw ModelError("reward(" + std::to_string(x) + "," + std::to_string(a) + "," +
                                     std::to_string(y) + ") is not finite");
                sum += pr;
            }
            if (std::abs(sum - 1.0) > 1e-12)
                throw ModelError("row (" + std::to_string(x) + "," + std::to_string(a) + ") sums to " +
                                 std::to_string(sum));
        }
    }
}

std::string to_string(ErgodicityMode mode) {
    return mode == ErgodicityMode::AllPolicies ? "all-policies" : "uniform-policy";
}

double expected_reward(const MdpModel& model, State x, Action a) {
    model.check_indices(x, a);
    const auto p = model.trans_row(x, a);
    const auto r = model.reward_row(x, a);
    double total = 0.0;
    for (std::size_t y = 0; y < p.size(); ++y) total += p[y] * r[y];
    return total;
}

namespace {

void check_policy(const MdpModel& model, const StationaryPolicy& policy) {
    if (policy.size() != model.num_states())
        throw IndexError("policy covers " + std::to_string(policy.size()) + " states, model has " +
                         std::to_string(model.num_states()));
    for (State x = 0; x < model.num_states(); ++x) model.check_indices(x, policy.action_of[x]);
}

double row_dot(std::span<const double> row, const std::vector<double>& v) {
    double total = 0.0;
    for (std::size_t y = 0; y < row.size(); ++y) total += row[y] * v[y];
    return total;
}

}  // namespace

GainBias gain_of_policy(const MdpModel& model, const StationaryPolicy& policy, State anchor) {
    check_policy(model, policy);
    const std::size_t n = model.num_states();
    if (anchor >= n) throw IndexError("anchor state out of range");

    // Unknowns: z[anchor] = gain, z[y] = h(y) for y != anchor.
    Eigen::MatrixXd lhs = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    Eigen::VectorXd rhs(static_cast<Eigen::Index>(n));
    for (State x = 0; x < n; ++x) {
        const auto row = model.trans_row(x, policy.action_of[x]);
        const auto xi_ = static_cast<Eigen::Index>(x);
        for (State y = 0; y < n; ++y) lhs(xi_, static_cast<Eigen::Index>(y)) -= row[y];
        lhs(xi_, static_cast<Eigen::Index>(anchor)) = 1.0;
        rhs(xi_) = expected_reward(model, x, policy.action_of[x]);
    }

    Eigen::FullPivLU<Eigen::MatrixXd> lu(lhs);
    if (lu.rank() < static_cast<Eigen::Index>(n) || lu.rcond() < 1e-13)
        throw EvaluationError("evaluation system is singular; the policy does not induce a unichain");
    Eigen::VectorXd z = lu.solve(rhs);
    z += lu.solve(rhs - lhs * z);

    GainBias result;
    result.anchor_state = anchor;
    result.gain = z(static_cast<Eigen::Index>(anchor));
    result.bias.assign(n, 0.0);
    for (State y = 0; y < n; ++y)
        if (y != anchor) result.bias[y] = z(static_cast<Eigen::Index>(y));
    if (!std::isfinite(result.gain)) throw EvaluationError("evaluation produced a non-finite gain");
    return result;
}

double evaluation_residual(const MdpModel& model, const StationaryPolicy& policy, const GainBias& value) {
    check_policy(model, policy);
    double worst = 0.0;
    for (State x = 0; x < model.num_states(); ++x) {
        const Action a = policy.action_of[x];
        const double lhs = value.gain + value.bias[x];
        const double rhs = expected_reward(model, x, a) + row_dot(model.trans_row(x, a), value.bias);
        worst = std::max(worst, std::abs(lhs - rhs));
    }
    return worst;
}

PolicySolution policy_iteration(const MdpModel& model, std::size_t max_iterations) {
    const std::size_t n = model.num_states();
    const std::size_t m = model.num_actions();

    StationaryPolicy policy{std::vector<Action>(n, 0)};
    for (State x = 0; x < n; ++x) {
        double best = -std::numeric_limits<double>::infinity();
        for (Action a = 0; a < m; ++a) {
            const double r = expected_reward(model, x, a);
            if (r > best) {
                best = r;
                policy.action_of[x] = a;
            }
        }
    }

    for (std::size_t iter = 1; iter <= max_iterations; ++iter) {
        GainBias value = gain_of_policy(model, policy);
        bool changed = false;
        for (State x = 0; x < n; ++x) {
            const Action incumbent = policy.action_of[x];
            auto score = [&](Action a) {
                return expected_reward(model, x, a) + row_dot(model.trans_row(x, a), value.bias);
            };
            Action best = incumbent;
            double best_score = score(incumbent);
            const double tol = 1e-12 * std::max(1.0, std::abs(best_score));
            for (Action a = 0; a < m; ++a) {
                if (a == incumbent) continue;
                const double s = score(a);
                if (s > best_score + tol) {
                    best = a;
                    best_score = s;
                }
            }
            if (best != incumbent) {
                policy.action_of[x] = best;
                changed = true;
            }
        }
        if (!changed) return {policy, std::move(value), iter};
    }
    throw DiagnosticsError("policy iteration did not converge within " + std::to_string(max_iterations) +
                           " iterations");
}

std::size_t policy_count(const MdpModel& model) {
    std::size_t count = 1;
    for (State x = 0; x < model.num_states(); ++x) {
        if (count > std::numeric_limits<std::size_t>::max() / model.num_actions())
            return std::numeric_limits<std::size_t>::max();
        count *= model.num_actions();
    }
    return count;
}

namespace {

// Mixed-radix counter over all deterministic policies. Returns false after the last one.
bool next_policy(StationaryPolicy& policy, std::size_t num_actions) {
    for (auto& a : policy.action_of) {
        if (++a < num_actions) return true;
        a = 0;
    }
    return false;
}

bool strongly_connected(const std::vector<std::vector<State>>& forward) {
    const std::size_t n = forward.size();
    std::vector<std::vector<State>> backward(n);
    for (State x = 0; x < n; ++x)
        for (State y : forward[x]) backward[y].push_back(x);

    auto reaches_all = [n](const std::vector<std::vector<State>>& adj) {
        std::vector<bool> seen(n, false);
        std::vector<State> stack{0};
        seen[0] = true;
        std::size_t count = 1;
        while (!stack.empty()) {
            const State x = stack.back();
            stack.pop_back();
            for (State y : adj[x]) {
                if (!seen[y]) {
                    seen[y] = true;
                    ++count;
                    stack.push_back(y);
                }
            }
        }
        return count == n;
    };
    return reaches_all(forward) && reaches_all(backward);
}

}  // namespace

EnumerationResult enumerate_policies(const MdpModel& model) {
    const std::size_t count = policy_count(model);
    if (count > kEnumerationGuard)
        throw RefusalError("refusing to enumerate " +
                           (count == std::numeric_limits<std::size_t>::max() ? std::string("more than 2^64")
                                                                             : std::to_string(count)) +
                           " policies (guard " + std::to_string(kEnumerationGuard) + ")");

    EnumerationResult best;
    best.gain = -std::numeric_limits<double>::infinity();
    StationaryPolicy policy{std::vector<Action>(model.num_states(), 0)};
    do {
        double g = 0.0;
        try {
            g = gain_of_policy(model, policy).gain;
        } catch (const EvaluationError&) {
            ++best.policies_skipped;
            continue;
        }
        ++best.policies_evaluated;
        if (g > best.gain) {
            best.gain = g;
            best.policy = policy;
        }
    } while (next_policy(policy, model.num_actions()));
    if (best.policies_evaluated == 0) throw EvaluationError("no policy of this model is unichain");
    return best;
}

bool is_irreducible(const MdpModel& model, const StationaryPolicy& policy) {
    check_policy(model, policy);
    const std::size_t n = model.num_states();
    std::vector<std::vector<State>> adj(n);
    for (State x = 0; x < n; ++x) {
        const auto row = model.trans_row(x, policy.action_of[x]);
        for (State y = 0; y < n; ++y)
            if (row[y] > 0.0) adj[x].push_back(y);
    }
    return strongly_connected(adj);
}

ErgodicityReport check_ergodic(const MdpModel& model) {
    ErgodicityReport report;
    const std::size_t n = model.num_states();
    if (policy_count(model) <= kEnumerationGuard) {
        report.mode = ErgodicityMode::AllPolicies;
        StationaryPolicy policy{std::vector<Action>(n, 0)};
        do {
            ++report.policies_checked;
            if (!is_irreducible(model, policy)) {
                report.ergodic = false;
                return report;
            }
        } while (next_policy(policy, model.num_actions()));
        report.ergodic = true;
        return report;
    }

    // Uniform-random policy: an edge exists when any action reaches y.
    report.mode = ErgodicityMode::UniformPolicy;
    report.policies_checked = 1;
    std::vector<std::vector<State>> adj(n);
    for (State x = 0; x < n; ++x) {
        for (State y = 0; y < n; ++y) {
            for (Action a = 0; a < model.num_actions(); ++a) {
                if (model.trans(x, a, y) > 0.0) {
                    adj[x].push_back(y);
                    break;
                }
            }
        }
    }
    report.ergodic = strongly_connected(adj);
    return report;
}

double bellman_residual(const MdpModel& model, const ThetaSample& theta) {
    const std::size_t n = model.num_states();
    std::vector<double> maxima(n);
    for (State y = 0; y < n; ++y) {
        double best = -std::numeric_limits<double>::infinity();
        for (Action b = 0; b < model.num_actions(); ++b) best = std::max(best, theta.q(y, b));
        maxima[y] = best;
    }
    double worst = 0.0;
    for (State x = 0; x < n; ++x) {
        for (Action a = 0; a < model.num_actions(); ++a) {
            const double lhs = theta.q(x, a) + theta.rho();
            const double rhs = expected_reward(model, x, a) + row_dot(model.trans_row(x, a), maxima);
            worst = std::max(worst, std::abs(lhs - rhs));
        }
    }
    return worst;
}

ThetaSample theta_from_solution(const MdpModel& model, const GainBias& value) {
    ThetaSample theta(model.num_actions(), value.gain);
    for (State x = 0; x < model.num_states(); ++x)
        for (Action a = 0; a < model.num_actions(); ++a)
            theta.set_q(x, a, expected_reward(model, x, a) + row_dot(model.trans_row(x, a), value.bias) - value.gain);
    return theta;
}

MdpModel model_from_json_text(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ModelError(std::string("model file is not valid JSON: ") + e.what());
    }
    try {
        const auto n = j.at("num_states").get<std::size_t>();
        const auto m = j.at("num_actions").get<std::size_t>();
        MdpModel model(n, m);
        const auto& trans = j.at("trans");
        const auto& reward = j.at("reward");
        if (trans.size() != n || reward.size() != n) throw ModelError("trans/reward must have num_states rows");
        for (State x = 0; x < n; ++x) {
            if (trans[x].size() != m || reward[x].size() != m)
                throw ModelError("state " + std::to_string(x) + " must list num_actions rows");
            for (Action a = 0; a < m; ++a) {
                if (trans[x][a].size() != n || reward[x][a].size() != n)
                    throw ModelError("row (" + std::to_string(x) + "," + std::to_string(a) +
                                     ") must have num_states entries");
                for (State y = 0; y < n; ++y) {
                    model.trans(x, a, y) = trans[x][a][y].get<double>();
                    model.reward(x, a, y) = reward[x][a][y].get<double>();
                }
            }
        }
        model.validate();
        return model;
    } catch (const nlohmann::json::exception& e) {
        throw ModelError(std::string("malformed model file: ") + e.what());
    }
}

MdpModel load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ModelError("cannot open model file " + path);
    std::stringstream buffer;
    buffer << in.rdbuf();
    return model_from_json_text(buffer.str());
}

std::string model_to_json_text(const MdpModel& model) {
    nlohmann::json j;
    j["num_states"] = model.num_states();
    j["num_actions"] = model.num_actions();
    auto tensor = [&](auto get) {
        nlohmann::json t = nlohmann::json::array();
        for (State x = 0; x < model.num_states(); ++x) {
            nlohmann::json per_action = nlohmann::json::array();
            for (Action a = 0; a < model.num_actions(); ++a) {
                nlohmann::json row = nlohmann::json::array();
                for (State y = 0; y < model.num_states(); ++y) row.push_back(get(x, a, y));
                per_action.push_back(std::move(row));
            }
            t.push_back(std::move(per_action));
        }
        return t;
    };
    j["trans"] = tensor([&](State x, Action a, State y) { return model.trans(x, a, y); });
    j["reward"] = tensor([&](State x, Action a, State y) { return model.reward(x, a, y); });
    return j.dump();
}

void save_model(const MdpModel& model, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ModelError("cannot write model file " + path);
    out << model_to_json_text(model) << '\n';
}

}  // namespace bcrmdp
