#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "bcrmdp/random.hpp"
#include "bcrmdp/types.hpp"

namespace bcrmdp {

struct RLearnConfig {
    double alpha = 0.5;
    double beta = 0.001;
    double c_explore = 0.0;
    double p_explore = 0.1;
    std::uint64_t seed = 0;

    void validate() const;
};

struct RLearnState {
    RLearnState(std::size_t num_states, std::size_t num_actions);

    std::size_t num_states;
    std::size_t num_actions;
    std::vector<double> q;
    double rho = 0.0;
    std::vector<std::uint64_t> f;

    double& q_at(State x, Action a) { return q[x * num_actions + a]; }
    double q_at(State x, Action a) const { return q[x * num_actions + a]; }
    std::uint64_t& f_at(State x, Action a) { return f[x * num_actions + a]; }
    std::uint64_t f_at(State x, Action a) const { return f[x * num_actions + a]; }
    double max_q(State x) const;
};

/// Q(x,a) <- (1-alpha) Q(x,a) + alpha (r - rho + max Q(x',.))
/// rho    <- (1-beta) rho + beta (r + max Q(x',.) - Q(x,a))
/// Both right-hand sides use pre-update values. F(x,a) is incremented.
void rlearn_update(RLearnState& state, const TransitionRecord& t, const RLearnConfig& cfg);

/// Uncertainty exploration: with probability p_explore pick argmax Q + C/F
/// (untried actions first), otherwise greedy. One draw for the branch, plus one
/// when the chosen maximum is tied.
Action ue_select(const RLearnState& state, State x, const RLearnConfig& cfg, Rng& rng);

class RLearnAgent {
public:
    RLearnAgent(std::size_t num_states, std::size_t num_actions, const RLearnConfig& cfg);

    Action act(State x) { return ue_select(state_, x, cfg_, rng_); }
    void observe(const TransitionRecord& t) { rlearn_update(state_, t, cfg_); }

    const RLearnState& state() const { return state_; }
    const RLearnConfig& config() const { return cfg_; }

private:
    RLearnConfig cfg_;
    RLearnState state_;
    Rng rng_;
};

}  // namespace bcrmdp
