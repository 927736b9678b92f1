#pragma once

#include <cstddef>
#include <unordered_map>
#include <vector>

#include "bcrmdp/types.hpp"

namespace bcrmdp {

/**
 * One draw of the controller parameter: the average reward rho and relative
 * Q-values. Only explicitly set pairs are stored; every other Q(x,a) reads 0.
 * State maxima M(x) range over all num_actions actions, so an untouched action
 * contributes its default 0.
 */
class ThetaSample {
public:
    explicit ThetaSample(std::size_t num_actions = 1, double rho = 0.0);

    std::size_t num_actions() const { return num_actions_; }

    double rho() const { return rho_; }
    void set_rho(double rho) { rho_ = rho; }

    double q(State x, Action a) const;
    void set_q(State x, Action a, double value);
    bool has_q(State x, Action a) const { return q_.contains({x, a}); }

    /// max_a Q(x, a) over all actions.
    double max_q(State x) const;

    /// max_q for every state below `num_states`.
    std::vector<double> state_maxima(std::size_t num_states) const;

    /// Stored entries in insertion order.
    const std::vector<StateAction>& entries() const { return order_; }

    bool all_finite() const;

    friend bool operator==(const ThetaSample&, const ThetaSample&);

private:
    std::size_t num_actions_;
    double rho_;
    std::unordered_map<StateAction, double, StateActionHash> q_;
    std::vector<StateAction> order_;
};

/// Mean instantaneous reward xi(x,a,x') = Q(x,a) + rho - max_b Q(x',b).
double xi(const ThetaSample& theta, State x, Action a, State x_next);

}  // namespace bcrmdp
