#include "bcrmdp/rlearn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace bcrmdp {

void RLearnConfig::validate() const {
    if (!(alpha > 0.0 && alpha <= 1.0)) throw ConfigError("alpha must lie in (0, 1]");
    if (!(beta > 0.0 && beta <= 1.0)) throw ConfigError("beta must lie in (0, 1]");
    if (!(c_explore >= 0.0) || !std::isfinite(c_explore)) throw ConfigError("c_explore must be non-negative");
    if (!(p_explore >= 0.0 && p_explore <= 1.0)) throw ConfigError("p_explore must lie in [0, 1]");
}

RLearnState::RLearnState(std::size_t num_states_, std::size_t num_actions_)
    : num_states(num_states_),
      num_actions(num_actions_),
      q(num_states_ * num_actions_, 0.0),
      f(num_states_ * num_actions_, 0) {}

double RLearnState::max_q(State x) const {
    const auto first = q.begin() + static_cast<std::ptrdiff_t>(x * num_actions);
    return *std::max_element(first, first + static_cast<std::ptrdiff_t>(num_actions));
}

void rlearn_update(RLearnState& state, const TransitionRecord& t, const RLearnConfig& cfg) {
    if (t.x >= state.num_states || t.x_next >= state.num_states || t.a >= state.num_actions)
        throw IndexError("rlearn_update: transition out of range");
    const double q_old = state.q_at(t.x, t.a);
    const double rho_old = state.rho;
    const double next_max = state.max_q(t.x_next);
    state.q_at(t.x, t.a) = (1.0 - cfg.alpha) * q_old + cfg.alpha * (t.r - rho_old + next_max);
    state.rho = (1.0 - cfg.beta) * rho_old + cfg.beta * (t.r + next_max - q_old);
    ++state.f_at(t.x, t.a);
}

namespace {

template <typename Score>
Action argmax_uniform_ties(std::size_t num_actions, Score score, Rng& rng) {
    double best = -std::numeric_limits<double>::infinity();
    std::vector<Action> tied;
    for (Action a = 0; a < num_actions; ++a) {
        const double v = score(a);
        if (v > best) {
            best = v;
            tied.assign(1, a);
        } else if (v == best) {
            tied.push_back(a);
        }
    }
    return tied.size() == 1 ? tied.front() : tied[rng.uniform_index(tied.size())];
}

}  // namespace

Action ue_select(const RLearnState& state, State x, const RLearnConfig& cfg, Rng& rng) {
    if (x >= state.num_states) throw IndexError("ue_select: state out of range");
    const bool explore = rng.uniform() < cfg.p_explore;
    if (explore && cfg.c_explore > 0.0) {
        return argmax_uniform_ties(
            state.num_actions,
            [&](Action a) {
                const auto f = state.f_at(x, a);
                if (f == 0) return std::numeric_limits<double>::infinity();
                return state.q_at(x, a) + cfg.c_explore / static_cast<double>(f);
            },
            rng);
    }
    return argmax_uniform_ties(state.num_actions, [&](Action a) { return state.q_at(x, a); }, rng);
}

RLearnAgent::RLearnAgent(std::size_t num_states, std::size_t num_actions, const RLearnConfig& cfg)
    : cfg_(cfg), state_(num_states, num_actions), rng_(cfg.seed) {
    cfg_.validate();
}

}  // namespace bcrmdp
