#include "bcrmdp/theta.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace bcrmdp {

ThetaSample::ThetaSample(std::size_t num_actions, double rho) : num_actions_(num_actions), rho_(rho) {}

double ThetaSample::q(State x, Action a) const {
    auto it = q_.find({x, a});
    return it == q_.end() ? 0.0 : it->second;
}

void ThetaSample::set_q(State x, Action a, double value) {
    auto [it, inserted] = q_.try_emplace({x, a}, value);
    if (inserted)
        order_.push_back({x, a});
    else
        it->second = value;
}

double ThetaSample::max_q(State x) const {
    double best = -std::numeric_limits<double>::infinity();
    for (Action a = 0; a < num_actions_; ++a) best = std::max(best, q(x, a));
    return best;
}

std::vector<double> ThetaSample::state_maxima(std::size_t num_states) const {
    std::vector<double> best(num_states, -std::numeric_limits<double>::infinity());
    std::vector<std::size_t> stored(num_states, 0);
    for (const auto& sa : order_) {
        if (sa.state >= num_states) continue;
        best[sa.state] = std::max(best[sa.state], q_.at(sa));
        ++stored[sa.state];
    }
    for (std::size_t x = 0; x < num_states; ++x)
        if (stored[x] < num_actions_) best[x] = std::max(best[x], 0.0);
    return best;
}

bool ThetaSample::all_finite() const {
    if (!std::isfinite(rho_)) return false;
    return std::all_of(q_.begin(), q_.end(), [](const auto& kv) { return std::isfinite(kv.second); });
}

bool operator==(const ThetaSample& a, const ThetaSample& b) {
    return a.num_actions_ == b.num_actions_ && a.rho_ == b.rho_ && a.order_ == b.order_ && a.q_ == b.q_;
}

double xi(const ThetaSample& theta, State x, Action a, State x_next) {
    return theta.q(x, a) + theta.rho() - theta.max_q(x_next);
}

}  // namespace bcrmdp
