#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "bcrmdp/random.hpp"
#include "bcrmdp/theta.hpp"
#include "bcrmdp/types.hpp"

namespace bcrmdp {

struct BcrConfig {
    /// How a Gibbs sweep treats actions of visited states that were never tried.
    enum class Untried {
        Prior,     // draw from the prior-implied conditional (one unobserved successor cell)
        FixedZero  // leave at the default 0
    };

    double mu0 = 1.0;
    double lambda0 = 1.0;
    double p = 1.0;
    std::size_t sweeps_per_step = 1;
    std::uint64_t seed = 0;
    Untried untried = Untried::Prior;

    void validate() const;
};

/**
 * Sufficient statistics of the normal posterior over the mean reward of every
 * observed transition (x, a, x').
 *
 * Cells are created lazily on their first observation; a missing cell reads as
 * the prior (mu0, lambda0, n = 0). Pairs and, inside a pair, successor cells
 * are kept in first-observation order, which fixes the Gibbs resampling order.
 */
class PosteriorStore {
public:
    struct Cell {
        State next;
        double mu;
        double lambda;
        std::uint64_t n;
    };

    struct Pair {
        StateAction sa;
        std::vector<Cell> cells;
        double precision;  // S(x,a) = sum of cell lambdas
        std::uint64_t n;   // observations summed over successors
    };

    struct CellView {
        double mu;
        double lambda;
        std::uint64_t n;
    };

    PosteriorStore() = default;

    bool empty() const { return pairs_.empty(); }
    std::size_t cell_count() const { return cell_count_; }
    std::uint64_t observation_count() const { return observations_; }

    /// Sum of lambda over every stored cell.
    double total_precision() const { return total_precision_; }

    /// Stored cell or the prior when absent.
    CellView read(State x, Action a, State x_next, const BcrConfig& cfg) const;
    const Cell* find(State x, Action a, State x_next) const;
    const Pair* find_pair(State x, Action a) const;

    std::span<const Pair> pairs() const { return pairs_; }

    /// States seen as either a source or a successor, in first-seen order.
    const std::vector<State>& visited_states() const { return visited_states_; }

    /// One past the largest state index seen.
    std::size_t state_bound() const { return state_bound_; }

    /// Restores a cell verbatim (checkpoint loading).
    void restore_cell(State x, Action a, const Cell& cell, const BcrConfig& cfg);

private:
    friend void update_posterior(PosteriorStore&, const TransitionRecord&, const BcrConfig&);

    Pair& pair_for(State x, Action a);
    void note_state(State s);

    std::vector<Pair> pairs_;
    std::unordered_map<StateAction, std::size_t, StateActionHash> pair_index_;
    std::vector<State> visited_states_;
    std::vector<bool> state_seen_;
    std::size_t state_bound_ = 0;
    std::size_t cell_count_ = 0;
    std::uint64_t observations_ = 0;
    double total_precision_ = 0.0;
};

/// mu <- (lambda mu + p r)/(lambda + p), n <- n + 1, lambda <- lambda0 + p n.
/// Throws std::invalid_argument on a non-finite reward.
void update_posterior(PosteriorStore& store, const TransitionRecord& t, const BcrConfig& cfg);

/// Gaussian conditional with the given mean and precision (variance 1/precision).
struct NormalConditional {
    double mean;
    double precision;
};

/// Conditional of rho given Q: precision S = sum lambda, mean = (1/S) sum lambda (mu - Q(x,a) + M(x')).
/// Throws NoDataError on an empty store.
NormalConditional rho_conditional(const ThetaSample& theta, const PosteriorStore& store,
                                  std::span<const double> maxima);

/// Conditional of Q(x,a) with M frozen: precision S(x,a), mean = (1/S(x,a)) sum lambda (mu - rho + M(x')).
/// Empty optional when (x,a) has no stored cell.
std::optional<NormalConditional> q_conditional(const PosteriorStore& store, State x, Action a,
                                               std::span<const double> frozen_max, double rho);

double sample_rho(const ThetaSample& theta, const PosteriorStore& store, Rng& rng);
double sample_rho(const ThetaSample& theta, const PosteriorStore& store, std::span<const double> maxima,
                  Rng& rng);

/// One draw of Q(x,a), or nullopt (no draw consumed) when S(x,a) = 0.
std::optional<double> sample_q(const PosteriorStore& store, State x, Action a, std::span<const double> frozen_max,
                               double rho, Rng& rng);

/// Conditional of an untried Q(x,a): a single prior cell (mu0, lambda0) whose
/// successor is unknown, valued at the mean of the frozen maxima over visited states.
NormalConditional untried_q_conditional(const PosteriorStore& store, std::span<const double> frozen_max, double rho,
                                        const BcrConfig& cfg);

/// rho first, then every stored pair in insertion order against maxima frozen
/// once per sweep, then (Untried::Prior) every untried action of each visited
/// state, states in first-seen order and actions ascending. An empty store
/// leaves theta untouched.
void gibbs_sweep(ThetaSample& theta, const PosteriorStore& store, const BcrConfig& cfg, Rng& rng);

/// argmax_a Q(x,a) with exact ties broken uniformly (one draw, only when tied).
Action select_action(const ThetaSample& theta, State x, std::size_t num_actions, Rng& rng);

/// Posterior-sampling controller. Not thread-safe; independent instances share nothing.
class BcrAgent {
public:
    using EnvStep = std::function<TransitionRecord(State, Action)>;

    BcrAgent(std::size_t num_actions, const BcrConfig& cfg);

    Action act(State x);
    /// Posterior update followed by sweeps_per_step Gibbs sweeps.
    void observe(const TransitionRecord& t);
    /// act + environment + observe.
    TransitionRecord step(State x, const EnvStep& env);

    const BcrConfig& config() const { return cfg_; }
    const PosteriorStore& store() const { return store_; }
    const ThetaSample& theta() const { return theta_; }
    std::uint64_t steps() const { return steps_; }
    std::size_t num_actions() const { return num_actions_; }

    std::string checkpoint() const;
    static BcrAgent restore(const std::string& checkpoint_text);

    friend bool operator==(const BcrAgent&, const BcrAgent&);

private:
    std::size_t num_actions_;
    BcrConfig cfg_;
    PosteriorStore store_;
    ThetaSample theta_;
    Rng rng_;
    std::uint64_t steps_ = 0;
};

}  // namespace bcrmdp
