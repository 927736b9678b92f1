#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "bcrmdp/mdp.hpp"
#include "bcrmdp/random.hpp"
#include "bcrmdp/types.hpp"

namespace bcrmdp {

/// Grid coordinate; [0,0] is the top-left cell.
struct Cell {
    int col = 0;
    int row = 0;

    friend bool operator==(const Cell&, const Cell&) = default;
};

/// One-way membrane: passable only from `from` to `to`.
struct Membrane {
    Cell from;
    Cell to;

    friend bool operator==(const Membrane&, const Membrane&) = default;
};

enum GridAction : Action { kUp = 0, kDown = 1, kLeft = 2, kRight = 3 };
inline constexpr std::size_t kGridActions = 4;

struct GridSpec {
    int width = 0;
    int height = 0;
    Cell goal;
    std::vector<Membrane> membranes;
    double move_noise = 0.9;  // probability mass placed on the intended move
    double membrane_reward = 1.0;
    double goal_reward = 2.5;
    double default_reward = 0.0;

    State state_of(Cell c) const { return static_cast<State>(c.row) * width + c.col; }
    Cell cell_of(State s) const { return {static_cast<int>(s % width), static_cast<int>(s / width)}; }
    std::size_t num_cells() const { return static_cast<std::size_t>(width) * height; }
    bool contains(Cell c) const { return c.col >= 0 && c.row >= 0 && c.col < width && c.row < height; }

    /// Throws GridSpecError naming the offending element.
    void validate() const;
};

/// A hand-specified policy shipped with a map, written as one arrow string per row
/// (`^ v < >`); the goal cell may hold any character.
struct NamedPolicy {
    std::string name;
    std::vector<std::string> rows;
};

struct GridMap {
    std::string name;
    GridSpec spec;
    std::vector<NamedPolicy> reference_policies;
};

/// Grid-world with one-way membranes and a teleporting goal.
///
/// From a non-goal cell, the intended neighbour receives `move_noise` if it is
/// free (otherwise that mass stays on the current cell), and `1 - move_noise`
/// is spread uniformly over every free neighbour, intended one included. A
/// direction is free unless it leaves the grid or runs against a membrane.
/// Entering the goal pays goal_reward; crossing a membrane pays membrane_reward;
/// every action in the goal teleports uniformly over all cells with default_reward.
MdpModel build_gridworld(const GridSpec& spec);

/// Whether a single step from `from` in direction `dir` is allowed.
bool grid_move_free(const GridSpec& spec, Cell from, Action dir);
Cell grid_neighbor(Cell c, Action dir);

StationaryPolicy parse_arrow_policy(const GridSpec& spec, const std::vector<std::string>& rows);

GridMap load_grid_map(const std::string& path);
GridMap grid_map_from_json_text(const std::string& text);
std::string grid_map_to_json_text(const GridMap& map);

/// ASCII picture: `G` goal, `.` free cell, membranes drawn between cells as the
/// direction they let the agent pass (`>`, `<`, `^`, `v`), grid border as walls.
std::string render_grid(const GridSpec& spec);

/// Random ergodic model: every row drawn from a flat Dirichlet (redrawn while any
/// entry is below 1e-6), reward(x,a,·) = u(x,a) with u ~ Uniform[0,1].
MdpModel random_ergodic_mdp(std::size_t num_states, std::size_t num_actions, std::uint64_t seed);

/// Samples one transition, consuming exactly one uniform draw from `rng`.
TransitionRecord sim_step(const MdpModel& model, State x, Action a, Rng& rng);

}  // namespace bcrmdp
