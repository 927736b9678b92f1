#include "bcrmdp/bcr.hpp"

#include <cmath>
#include <stdexcept>

#include <json.hpp>

namespace bcrmdp {

void BcrConfig::validate() const {
    if (!(lambda0 > 0.0) || !std::isfinite(lambda0)) throw ConfigError("lambda0 must be positive");
    if (!(p > 0.0) || !std::isfinite(p)) throw ConfigError("p must be positive");
    if (!std::isfinite(mu0)) throw ConfigError("mu0 must be finite");
    if (sweeps_per_step < 1) throw ConfigError("sweeps_per_step must be at least 1");
}

// ---------------------------------------------------------------------------
// PosteriorStore

PosteriorStore::CellView PosteriorStore::read(State x, Action a, State x_next, const BcrConfig& cfg) const {
    if (const Cell* c = find(x, a, x_next)) return {c->mu, c->lambda, c->n};
    return {cfg.mu0, cfg.lambda0, 0};
}

const PosteriorStore::Pair* PosteriorStore::find_pair(State x, Action a) const {
    auto it = pair_index_.find({x, a});
    return it == pair_index_.end() ? nullptr : &pairs_[it->second];
}

const PosteriorStore::Cell* PosteriorStore::find(State x, Action a, State x_next) const {
    const Pair* pair = find_pair(x, a);
    if (!pair) return nullptr;
    for (const auto& c : pair->cells)
        if (c.next == x_next) return &c;
    return nullptr;
}

PosteriorStore::Pair& PosteriorStore::pair_for(State x, Action a) {
    auto [it, inserted] = pair_index_.try_emplace({x, a}, pairs_.size());
    if (inserted) pairs_.push_back({{x, a}, {}, 0.0, 0});
    return pairs_[it->second];
}

void PosteriorStore::note_state(State s) {
    if (s >= state_seen_.size()) state_seen_.resize(s + 1, false);
    if (!state_seen_[s]) {
        state_seen_[s] = true;
        visited_states_.push_back(s);
    }
    if (s + 1 > state_bound_) state_bound_ = s + 1;
}

void PosteriorStore::restore_cell(State x, Action a, const Cell& cell, const BcrConfig& cfg) {
    if (cell.n == 0) throw std::invalid_argument("stored cells need at least one observation");
    note_state(x);
    note_state(cell.next);
    Pair& pair = pair_for(x, a);
    for (const auto& c : pair.cells)
        if (c.next == cell.next) throw std::invalid_argument("duplicate cell in checkpoint");
    pair.cells.push_back(cell);
    pair.n += cell.n;
    pair.precision = static_cast<double>(pair.cells.size()) * cfg.lambda0 + cfg.p * static_cast<double>(pair.n);
    ++cell_count_;
    observations_ += cell.n;
    total_precision_ = static_cast<double>(cell_count_) * cfg.lambda0 + cfg.p * static_cast<double>(observations_);
}

void update_posterior(PosteriorStore& store, const TransitionRecord& t, const BcrConfig& cfg) {
    if (!std::isfinite(t.r)) throw std::invalid_argument("update_posterior: non-finite reward");
    store.note_state(t.x);
    store.note_state(t.x_next);
    auto& pair = store.pair_for(t.x, t.a);

    PosteriorStore::Cell* cell = nullptr;
    for (auto& c : pair.cells)
        if (c.next == t.x_next) {
            cell = &c;
            break;
        }
    if (!cell) {
        pair.cells.push_back({t.x_next, cfg.mu0, cfg.lambda0, 0});
        cell = &pair.cells.back();
        ++store.cell_count_;
    }

    cell->mu = (cell->lambda * cell->mu + cfg.p * t.r) / (cell->lambda + cfg.p);
    ++cell->n;
    cell->lambda = cfg.lambda0 + cfg.p * static_cast<double>(cell->n);

    ++pair.n;
    pair.precision = static_cast<double>(pair.cells.size()) * cfg.lambda0 + cfg.p * static_cast<double>(pair.n);
    ++store.observations_;
    store.total_precision_ =
        static_cast<double>(store.cell_count_) * cfg.lambda0 + cfg.p * static_cast<double>(store.observations_);
}

// ---------------------------------------------------------------------------
// Gibbs conditionals

NormalConditional rho_conditional(const ThetaSample& theta, const PosteriorStore& store,
                                  std::span<const double> maxima) {
    if (store.empty()) throw NoDataError("rho conditional needs at least one observed transition");
    double weighted = 0.0;
    double precision = 0.0;
    for (const auto& pair : store.pairs()) {
        const double q = theta.q(pair.sa.state, pair.sa.action);
        for (const auto& c : pair.cells) {
            weighted += c.lambda * (c.mu - q + maxima[c.next]);
            precision += c.lambda;
        }
    }
    return {weighted / precision, precision};
}

std::optional<NormalConditional> q_conditional(const PosteriorStore& store, State x, Action a,
                                               std::span<const double> frozen_max, double rho) {
    const auto* pair = store.find_pair(x, a);
    if (!pair || pair->cells.empty()) return std::nullopt;
    double weighted = 0.0;
    double precision = 0.0;
    for (const auto& c : pair->cells) {
        weighted += c.lambda * (c.mu - rho + frozen_max[c.next]);
        precision += c.lambda;
    }
    return NormalConditional{weighted / precision, precision};
}

double sample_rho(const ThetaSample& theta, const PosteriorStore& store, std::span<const double> maxima,
                  Rng& rng) {
    const auto cond = rho_conditional(theta, store, maxima);
    return rng.normal(cond.mean, 1.0 / cond.precision);
}

double sample_rho(const ThetaSample& theta, const PosteriorStore& store, Rng& rng) {
    if (store.empty()) throw NoDataError("rho conditional needs at least one observed transition");
    const auto maxima = theta.state_maxima(store.state_bound());
    return sample_rho(theta, store, maxima, rng);
}

std::optional<double> sample_q(const PosteriorStore& store, State x, Action a, std::span<const double> frozen_max,
                               double rho, Rng& rng) {
    const auto cond = q_conditional(store, x, a, frozen_max, rho);
    if (!cond) return std::nullopt;
    return rng.normal(cond->mean, 1.0 / cond->precision);
}

NormalConditional untried_q_conditional(const PosteriorStore& store, std::span<const double> frozen_max, double rho,
                                        const BcrConfig& cfg) {
    double total = 0.0;
    for (State s : store.visited_states()) total += frozen_max[s];
    const double successor = store.visited_states().empty()
                                 ? 0.0
                                 : total / static_cast<double>(store.visited_states().size());
    return {cfg.mu0 - rho + successor, cfg.lambda0};
}

void gibbs_sweep(ThetaSample& theta, const PosteriorStore& store, const BcrConfig& cfg, Rng& rng) {
    if (store.empty()) return;
    // Resampling rho does not touch Q, so these maxima serve both the rho draw
    // and, frozen, every Q draw of this sweep.
    const auto maxima = theta.state_maxima(store.state_bound());
    theta.set_rho(sample_rho(theta, store, maxima, rng));
    for (const auto& pair : store.pairs()) {
        if (auto q = sample_q(store, pair.sa.state, pair.sa.action, maxima, theta.rho(), rng))
            theta.set_q(pair.sa.state, pair.sa.action, *q);
    }
    if (cfg.untried == BcrConfig::Untried::FixedZero) return;
    const auto prior = untried_q_conditional(store, maxima, theta.rho(), cfg);
    for (State s : store.visited_states()) {
        for (Action a = 0; a < theta.num_actions(); ++a) {
            if (store.find_pair(s, a)) continue;
            theta.set_q(s, a, rng.normal(prior.mean, 1.0 / prior.precision));
        }
    }
}

Action select_action(const ThetaSample& theta, State x, std::size_t num_actions, Rng& rng) {
    if (num_actions == 0) throw std::invalid_argument("select_action: no actions");
    double best = theta.q(x, 0);
    std::size_t ties = 1;
    Action chosen = 0;
    for (Action a = 1; a < num_actions; ++a) {
        const double v = theta.q(x, a);
        if (v > best) {
            best = v;
            chosen = a;
            ties = 1;
        } else if (v == best) {
            ++ties;
        }
    }
    if (ties == 1) return chosen;
    std::size_t pick = rng.uniform_index(ties);
    for (Action a = 0; a < num_actions; ++a) {
        if (theta.q(x, a) == best) {
            if (pick == 0) return a;
            --pick;
        }
    }
    return chosen;
}

// ---------------------------------------------------------------------------
// BcrAgent

BcrAgent::BcrAgent(std::size_t num_actions, const BcrConfig& cfg)
    : num_actions_(num_actions), cfg_(cfg), theta_(num_actions), rng_(cfg.seed) {
    if (num_actions == 0) throw ConfigError("agent needs at least one action");
    cfg_.validate();
}

Action BcrAgent::act(State x) { return select_action(theta_, x, num_actions_, rng_); }

void BcrAgent::observe(const TransitionRecord& t) {
    update_posterior(store_, t, cfg_);
    for (std::size_t i = 0; i < cfg_.sweeps_per_step; ++i) gibbs_sweep(theta_, store_, cfg_, rng_);
    ++steps_;
}

TransitionRecord BcrAgent::step(State x, const EnvStep& env) {
    const Action a = act(x);
    const TransitionRecord t = env(x, a);
    observe(t);
    return t;
}

std::string BcrAgent::checkpoint() const {
    nlohmann::json j;
    j["config"] = {{"mu0", cfg_.mu0},
                   {"lambda0", cfg_.lambda0},
                   {"p", cfg_.p},
                   {"sweeps_per_step", cfg_.sweeps_per_step},
                   {"seed", cfg_.seed}};
    j["num_actions"] = num_actions_;
    j["steps"] = steps_;
    j["rng"] = rng_.serialize();
    nlohmann::json q = nlohmann::json::array();
    for (const auto& sa : theta_.entries()) q.push_back({sa.state, sa.action, theta_.q(sa.state, sa.action)});
    j["theta"] = {{"rho", theta_.rho()}, {"q", q}};
    nlohmann::json pairs = nlohmann::json::array();
    for (const auto& pair : store_.pairs()) {
        nlohmann::json cells = nlohmann::json::array();
        for (const auto& c : pair.cells) cells.push_back({c.next, c.mu, c.lambda, c.n});
        pairs.push_back({{"x", pair.sa.state}, {"a", pair.sa.action}, {"cells", cells}});
    }
    j["store"] = pairs;
    return j.dump();
}

BcrAgent BcrAgent::restore(const std::string& checkpoint_text) {
    try {
        const auto j = nlohmann::json::parse(checkpoint_text);
        BcrConfig cfg;
        const auto& c = j.at("config");
        cfg.mu0 = c.at("mu0").get<double>();
        cfg.lambda0 = c.at("lambda0").get<double>();
        cfg.p = c.at("p").get<double>();
        cfg.sweeps_per_step = c.at("sweeps_per_step").get<std::size_t>();
        cfg.seed = c.at("seed").get<std::uint64_t>();
        BcrAgent agent(j.at("num_actions").get<std::size_t>(), cfg);
        agent.steps_ = j.at("steps").get<std::uint64_t>();
        agent.rng_ = Rng::deserialize(j.at("rng").get<std::string>());
        agent.theta_.set_rho(j.at("theta").at("rho").get<double>());
        for (const auto& e : j.at("theta").at("q"))
            agent.theta_.set_q(e.at(0).get<State>(), e.at(1).get<Action>(), e.at(2).get<double>());
        for (const auto& pair : j.at("store")) {
            const auto x = pair.at("x").get<State>();
            const auto a = pair.at("a").get<Action>();
            for (const auto& cell : pair.at("cells"))
                agent.store_.restore_cell(x, a,
                                          {cell.at(0).get<State>(), cell.at(1).get<double>(),
                                           cell.at(2).get<double>(), cell.at(3).get<std::uint64_t>()},
                                          cfg);
        }
        return agent;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed agent checkpoint: ") + e.what());
    }
}

bool operator==(const BcrAgent& a, const BcrAgent& b) { return a.checkpoint() == b.checkpoint(); }

}  // namespace bcrmdp
