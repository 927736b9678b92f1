#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "bcrmdp/types.hpp"

namespace bcrmdp {

class ThetaSample;

/**
 * Full tabular MDP with transition-conditional rewards.
 *
 * Both tensors are stored row-major over (x, a, x'). A freshly constructed
 * model is all zeros; builders fill it and call validate() before handing it
 * out. The expected reward r(x,a) of the classical formulation is
 * expected_reward(model, x, a).
 */
class MdpModel {
public:
    MdpModel() = default;
    MdpModel(std::size_t num_states, std::size_t num_actions);

    std::size_t num_states() const { return num_states_; }
    std::size_t num_actions() const { return num_actions_; }

    double& trans(State x, Action a, State y) { return trans_[index(x, a, y)]; }
    double trans(State x, Action a, State y) const { return trans_[index(x, a, y)]; }
    double& reward(State x, Action a, State y) { return reward_[index(x, a, y)]; }
    double reward(State x, Action a, State y) const { return reward_[index(x, a, y)]; }

    std::span<const double> trans_row(State x, Action a) const;
    std::span<const double> reward_row(State x, Action a) const;

    const std::vector<double>& trans_data() const { return trans_; }
    const std::vector<double>& reward_data() const { return reward_; }

    /// Throws ModelError if any probability is outside [0,1], any row does not
    /// sum to 1 within 1e-12, or any reward is non-finite.
    void validate() const;

    /// Throws IndexError unless x < num_states and a < num_actions.
    void check_indices(State x, Action a) const;

    friend bool operator==(const MdpModel&, const MdpModel&) = default;

private:
    std::size_t index(State x, Action a, State y) const { return (x * num_actions_ + a) * num_states_ + y; }

    std::size_t num_states_ = 0;
    std::size_t num_actions_ = 0;
    std::vector<double> trans_;
    std::vector<double> reward_;
};

struct StationaryPolicy {
    std::vector<Action> action_of;

    Action operator()(State x) const { return action_of.at(x); }
    std::size_t size() const { return action_of.size(); }

    friend bool operator==(const StationaryPolicy&, const StationaryPolicy&) = default;
};

/// Gain and bias of a fixed policy; bias[anchor_state] is exactly 0.
struct GainBias {
    double gain = 0.0;
    std::vector<double> bias;
    State anchor_state = 0;
};

struct PolicySolution {
    StationaryPolicy policy;
    GainBias value;
    std::size_t iterations = 0;
};

struct EnumerationResult {
    StationaryPolicy policy;
    double gain = 0.0;
    std::size_t policies_evaluated = 0;
    std::size_t policies_skipped = 0;  // not unichain; evaluation undefined
};

enum class ErgodicityMode { AllPolicies, UniformPolicy };

struct ErgodicityReport {
    bool ergodic = false;
    ErgodicityMode mode = ErgodicityMode::AllPolicies;
    std::size_t policies_checked = 0;

    explicit operator bool() const { return ergodic; }
};

std::string to_string(ErgodicityMode mode);

/// Largest number of deterministic policies enumerate_policies / check_ergodic will visit.
inline constexpr std::size_t kEnumerationGuard = 1'000'000;

double expected_reward(const MdpModel& model, State x, Action a);

/// Solves gain + h(x) = r(x,pi(x)) + sum_y P(y|x,pi(x)) h(y) with h(anchor) = 0.
/// Throws EvaluationError when the system is singular (policy not unichain).
GainBias gain_of_policy(const MdpModel& model, const StationaryPolicy& policy, State anchor = 0);

/// Max-norm residual of the evaluation equations for (policy, value).
double evaluation_residual(const MdpModel& model, const StationaryPolicy& policy, const GainBias& value);

/// Howard policy iteration for the average-reward criterion. Improvement keeps the
/// incumbent action unless another action is better by more than a relative 1e-12.
PolicySolution policy_iteration(const MdpModel& model, std::size_t max_iterations = 1000);

/// Brute force over all num_actions^num_states deterministic policies.
/// Policies whose evaluation system is singular are skipped and counted.
/// Throws RefusalError when the policy count exceeds kEnumerationGuard.
EnumerationResult enumerate_policies(const MdpModel& model);

/// Number of deterministic stationary policies, saturating at SIZE_MAX.
std::size_t policy_count(const MdpModel& model);

ErgodicityReport check_ergodic(const MdpModel& model);

/// True iff the chain induced by `policy` is irreducible.
bool is_irreducible(const MdpModel& model, const StationaryPolicy& policy);

/// max_{x,a} |Q(x,a) + rho - r(x,a) - sum_y P(y|x,a) max_b Q(y,b)|; missing Q read as 0.
double bellman_residual(const MdpModel& model, const ThetaSample& theta);

/// The (rho, Q) pair equivalent to an evaluated optimal policy:
/// Q(x,a) = r(x,a) + sum_y P(y|x,a) h(y) - gain.
ThetaSample theta_from_solution(const MdpModel& model, const GainBias& value);

/// Model file IO (JSON: num_states, num_actions, trans[x][a][y], reward[x][a][y]).
MdpModel load_model(const std::string& path);
MdpModel model_from_json_text(const std::string& text);
std::string model_to_json_text(const MdpModel& model);
void save_model(const MdpModel& model, const std::string& path);

}  // namespace bcrmdp
