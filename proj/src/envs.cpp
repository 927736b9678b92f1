#include "bcrmdp/envs.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <tuple>

#include <json.hpp>

namespace bcrmdp {

namespace {

std::string cell_text(Cell c) { return "[" + std::to_string(c.col) + "," + std::to_string(c.row) + "]"; }

std::string edge_text(const Membrane& m) { return cell_text(m.from) + "->" + cell_text(m.to); }

bool has_membrane(const GridSpec& spec, Cell from, Cell to) {
    return std::any_of(spec.membranes.begin(), spec.membranes.end(),
                       [&](const Membrane& m) { return m.from == from && m.to == to; });
}

}  // namespace

void GridSpec::validate() const {
    if (width < 1 || height < 1) throw GridSpecError("grid dimensions must be positive");
    if (!contains(goal)) throw GridSpecError("goal " + cell_text(goal) + " lies outside the grid");
    if (!(move_noise > 0.0 && move_noise <= 1.0)) throw GridSpecError("move_noise must lie in (0, 1]");
    if (!std::isfinite(membrane_reward) || !std::isfinite(goal_reward) || !std::isfinite(default_reward))
        throw GridSpecError("rewards must be finite");

    std::set<std::tuple<int, int, int, int>> seen;
    for (const auto& m : membranes) {
        if (!contains(m.from) || !contains(m.to))
            throw GridSpecError("membrane " + edge_text(m) + " has an endpoint outside the grid");
        if (std::abs(m.from.col - m.to.col) + std::abs(m.from.row - m.to.row) != 1)
            throw GridSpecError("membrane " + edge_text(m) + " does not join 4-adjacent cells");
        if (!seen.emplace(m.from.col, m.from.row, m.to.col, m.to.row).second)
            throw GridSpecError("duplicate membrane " + edge_text(m));
        if (seen.contains({m.to.col, m.to.row, m.from.col, m.from.row}))
            throw GridSpecError("membrane " + edge_text(m) + " conflicts with its reverse edge");
    }
}

Cell grid_neighbor(Cell c, Action dir) {
    switch (dir) {
        case kUp: return {c.col, c.row - 1};
        case kDown: return {c.col, c.row + 1};
        case kLeft: return {c.col - 1, c.row};
        case kRight: return {c.col + 1, c.row};
        default: throw IndexError("grid action out of range");
    }
}

bool grid_move_free(const GridSpec& spec, Cell from, Action dir) {
    const Cell to = grid_neighbor(from, dir);
    return spec.contains(to) && !has_membrane(spec, to, from);
}

MdpModel build_gridworld(const GridSpec& spec) {
    spec.validate();
    const std::size_t n = spec.num_cells();
    MdpModel model(n, kGridActions);
    const State goal = spec.state_of(spec.goal);

    for (State x = 0; x < n; ++x) {
        for (Action a = 0; a < kGridActions; ++a) {
            if (x == goal) {
                for (State y = 0; y < n; ++y) {
                    model.trans(x, a, y) = 1.0 / static_cast<double>(n);
                    model.reward(x, a, y) = spec.default_reward;
                }
                continue;
            }
            const Cell here = spec.cell_of(x);
            std::vector<State> free;
            for (Action d = 0; d < kGridActions; ++d)
                if (grid_move_free(spec, here, d)) free.push_back(spec.state_of(grid_neighbor(here, d)));

            if (grid_move_free(spec, here, a))
                model.trans(x, a, spec.state_of(grid_neighbor(here, a))) += spec.move_noise;
            else
                model.trans(x, a, x) += spec.move_noise;
            const double spread = 1.0 - spec.move_noise;
            if (free.empty()) {
                model.trans(x, a, x) += spread;
            } else {
                for (State y : free) model.trans(x, a, y) += spread / static_cast<double>(free.size());
            }

            for (State y = 0; y < n; ++y) {
                double r = spec.default_reward;
                if (y == goal)
                    r = spec.goal_reward;
                else if (y != x && has_membrane(spec, here, spec.cell_of(y)))
                    r = spec.membrane_reward;
                model.reward(x, a, y) = r;
            }
        }
    }
    model.validate();
    return model;
}

StationaryPolicy parse_arrow_policy(const GridSpec& spec, const std::vector<std::string>& rows) {
    if (rows.size() != static_cast<std::size_t>(spec.height))
        throw GridSpecError("policy must have one row per grid row");
    StationaryPolicy policy{std::vector<Action>(spec.num_cells(), kUp)};
    for (int r = 0; r < spec.height; ++r) {
        if (rows[r].size() != static_cast<std::size_t>(spec.width))
            throw GridSpecError("policy row " + std::to_string(r) + " must have one character per column");
        for (int c = 0; c < spec.width; ++c) {
            const Cell cell{c, r};
            Action a = kUp;
            switch (rows[r][c]) {
                case '^': a = kUp; break;
                case 'v': a = kDown; break;
                case '<': a = kLeft; break;
                case '>': a = kRight; break;
                default:
                    if (!(cell == spec.goal))
                        throw GridSpecError("unknown policy glyph '" + std::string(1, rows[r][c]) + "' at " +
                                            cell_text(cell));
            }
            policy.action_of[spec.state_of(cell)] = a;
        }
    }
    return policy;
}

namespace {

Cell parse_cell(const nlohmann::json& j, const std::string& what) {
    if (!j.is_array() || j.size() != 2 || !j[0].is_number_integer() || !j[1].is_number_integer())
        throw GridSpecError(what + " must be a [col,row] integer pair");
    return {j[0].get<int>(), j[1].get<int>()};
}

}  // namespace

GridMap grid_map_from_json_text(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw GridSpecError(std::string("map file is not valid JSON: ") + e.what());
    }
    GridMap map;
    try {
        map.name = j.value("name", std::string{});
        auto& spec = map.spec;
        spec.width = j.at("width").get<int>();
        spec.height = j.at("height").get<int>();
        spec.goal = parse_cell(j.at("goal"), "goal");
        spec.move_noise = j.value("move_noise", spec.move_noise);
        spec.membrane_reward = j.value("membrane_reward", spec.membrane_reward);
        spec.goal_reward = j.value("goal_reward", spec.goal_reward);
        spec.default_reward = j.value("default_reward", spec.default_reward);
        for (const auto& m : j.value("membranes", nlohmann::json::array())) {
            if (!m.is_object() || !m.contains("from") || !m.contains("to"))
                throw GridSpecError("membrane entries need 'from' and 'to'");
            spec.membranes.push_back({parse_cell(m.at("from"), "membrane 'from'"), parse_cell(m.at("to"), "membrane 'to'")});
        }
        for (const auto& p : j.value("reference_policies", nlohmann::json::array()))
            map.reference_policies.push_back({p.at("name").get<std::string>(), p.at("rows").get<std::vector<std::string>>()});
    } catch (const nlohmann::json::exception& e) {
        throw GridSpecError(std::string("malformed map file: ") + e.what());
    }
    map.spec.validate();
    for (const auto& p : map.reference_policies) parse_arrow_policy(map.spec, p.rows);
    return map;
}

GridMap load_grid_map(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw GridSpecError("cannot open map file " + path);
    std::stringstream buffer;
    buffer << in.rdbuf();
    return grid_map_from_json_text(buffer.str());
}

std::string grid_map_to_json_text(const GridMap& map) {
    const auto& s = map.spec;
    nlohmann::json j;
    j["name"] = map.name;
    j["width"] = s.width;
    j["height"] = s.height;
    j["goal"] = {s.goal.col, s.goal.row};
    j["move_noise"] = s.move_noise;
    j["membrane_reward"] = s.membrane_reward;
    j["goal_reward"] = s.goal_reward;
    j["default_reward"] = s.default_reward;
    j["membranes"] = nlohmann::json::array();
    for (const auto& m : s.membranes)
        j["membranes"].push_back({{"from", {m.from.col, m.from.row}}, {"to", {m.to.col, m.to.row}}});
    j["reference_policies"] = nlohmann::json::array();
    for (const auto& p : map.reference_policies) j["reference_policies"].push_back({{"name", p.name}, {"rows", p.rows}});
    return j.dump(2);
}

std::string render_grid(const GridSpec& spec) {
    const int rows = 2 * spec.height + 1;
    const int cols = 2 * spec.width + 1;
    std::vector<std::string> canvas(rows, std::string(cols, ' '));
    for (int c = 0; c < cols; ++c) canvas[0][c] = canvas[rows - 1][c] = '#';
    for (int r = 0; r < rows; ++r) canvas[r][0] = canvas[r][cols - 1] = '#';
    for (int r = 0; r < spec.height; ++r)
        for (int c = 0; c < spec.width; ++c) canvas[2 * r + 1][2 * c + 1] = '.';
    canvas[2 * spec.goal.row + 1][2 * spec.goal.col + 1] = 'G';
    for (const auto& m : spec.membranes) {
        const int r = m.from.row + m.to.row + 1;
        const int c = m.from.col + m.to.col + 1;
        char glyph = '?';
        if (m.to.col > m.from.col) glyph = '>';
        else if (m.to.col < m.from.col) glyph = '<';
        else if (m.to.row > m.from.row) glyph = 'v';
        else glyph = '^';
        canvas[r][c] = glyph;
    }
    std::string out;
    for (const auto& line : canvas) out += line + '\n';
    return out;
}

MdpModel random_ergodic_mdp(std::size_t num_states, std::size_t num_actions, std::uint64_t seed) {
    if (num_states == 0 || num_actions == 0) throw ModelError("random MDP needs at least one state and action");
    Rng rng(seed);
    MdpModel model(num_states, num_actions);
    std::vector<double> row(num_states);
    for (State x = 0; x < num_states; ++x) {
        for (Action a = 0; a < num_actions; ++a) {
            // Flat Dirichlet via normalized unit exponentials.
            for (;;) {
                double total = 0.0;
                for (auto& v : row) total += (v = rng.exponential());
                for (auto& v : row) v /= total;
                if (*std::min_element(row.begin(), row.end()) >= 1e-6) break;
            }
            // Absorb rounding so the row sums to 1 as tightly as possible.
            double sum = 0.0;
            for (std::size_t y = 0; y + 1 < num_states; ++y) sum += row[y];
            row.back() = 1.0 - sum;
            const double u = rng.uniform();
            for (State y = 0; y < num_states; ++y) {
                model.trans(x, a, y) = row[y];
                model.reward(x, a, y) = u;
            }
        }
    }
    model.validate();
    return model;
}

TransitionRecord sim_step(const MdpModel& model, State x, Action a, Rng& rng) {
    model.check_indices(x, a);
    const auto row = model.trans_row(x, a);
    const double u = rng.uniform();
    double cumulative = 0.0;
    State next = row.size();
    for (State y = 0; y < row.size(); ++y) {
        cumulative += row[y];
        if (u < cumulative) {
            next = y;
            break;
        }
    }
    if (next == row.size()) {
        // u fell in the rounding gap above the last cumulative value.
        for (State y = row.size(); y-- > 0;)
            if (row[y] > 0.0) {
                next = y;
                break;
            }
    }
    return {x, a, model.reward(x, a, next), next};
}

}  // namespace bcrmdp
