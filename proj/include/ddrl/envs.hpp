#pragma once

// Benchmark environments: grid mazes parsed from ASCII layouts and the long
// two-ended corridor, plus deterministic rollout statistics.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ddrl/mdp.hpp"

namespace ddrl {

enum class CellKind { wall, free, good, deceptive, penalty };

/// +1 for good, +0.9 for deceptive, -1 for penalty, 0 otherwise.
double cell_reward(CellKind kind);
/// Default legend character: '#', '.', 'G', 'B', 'R'.
char cell_char(CellKind kind);

struct MazeLayout {
  int rows = 0;
  int cols = 0;
  /// Row-major cell kinds.
  std::vector<CellKind> cells;
  /// Good and deceptive cells self-loop on every action.
  bool absorbing = true;
  /// Absorbed agents keep earning the cell reward every step.
  bool absorbing_rereward = true;

  CellKind at(int r, int c) const {
    return cells[static_cast<size_t>(r) * static_cast<size_t>(cols) + static_cast<size_t>(c)];
  }
  bool operator==(const MazeLayout&) const = default;
};

using LegendOverrides = std::map<char, CellKind>;

/// Parses rows of legend characters. Leading lines of the form
/// "@absorbing on|off" and "@rereward on|off" set the flags. Throws
/// std::invalid_argument on ragged rows, unknown characters, a grid without
/// free cells or a reward cell no free cell can reach.
MazeLayout parse_maze(std::string_view text, const LegendOverrides& overrides = {});
std::string serialize_maze(const MazeLayout& layout);
MazeLayout load_maze(const std::filesystem::path& path);

/// Directory holding the bundled maze files; DDRL_ASSET_DIR overrides it.
std::filesystem::path asset_dir();
/// Ids of the bundled mazes: "u_maze", "t_maze", "random_maze".
std::vector<std::string> bundled_maze_ids();
MazeLayout bundled_maze(std::string_view id);

/// Perfect maze carved by a seeded depth-first search, with a deceptive
/// dead end near the centre, the goal at the far end and one penalty cell
/// halfway along the route to it. rows and cols must be odd and >= 5.
MazeLayout random_maze_layout(int rows, int cols, std::uint64_t seed);

enum MazeAction : int { kUp = 0, kDown = 1, kLeft = 2, kRight = 3 };

struct GridMdp {
  TabularMdp mdp;
  /// (row, col) of each state; states enumerate non-wall cells row-major.
  std::vector<std::pair<int, int>> cell_of_state;
  std::vector<CellKind> kind_of_state;

  std::vector<int> states_of_kind(CellKind kind) const;
};

/// One state per non-wall cell with four deterministic moves. Bumping into a
/// wall or the border keeps the agent in place with reward 0; otherwise the
/// reward is that of the cell entered. p_0 is uniform over non-wall cells.
GridMdp maze_to_mdp(const MazeLayout& layout);

enum CorridorAction : int { kCorridorLeft = 0, kCorridorRight = 1 };

struct Corridor {
  TabularMdp mdp;
  /// Left extremity, absorbing, earns the deceptive reward.
  int deceptive_state = 0;
  /// Right extremity, absorbing, earns the good reward.
  int good_state = 0;
  /// Inclusive penalty band; empty when band_lo > band_hi.
  int band_lo = 1;
  int band_hi = 0;
};

/// Corridor of n_states cells with left/right moves. Entering a cell earns
/// its reward (the extremities also re-earn it while absorbed). An empty band
/// is given as std::nullopt.
Corridor build_corridor(int n_states, double good_reward = 1.0,
                        double deceptive_reward = 0.9, double penalty = -1.0,
                        std::optional<std::pair<int, int>> penalty_band =
                            std::pair<int, int>{990, 1010});

/// Random MDP for property checks: rewards uniform in [-1, 1], p_0 and each
/// transition row drawn from normalized uniform weights over a random subset
/// of successors. With `deterministic`, each row has a single successor.
TabularMdp random_tabular_mdp(int n_states, int n_actions, std::uint64_t seed,
                              bool deterministic = false);

enum class TieBreak { reject, most_probable };

struct SuccessOptions {
  /// Count starts that are already absorbing. They cannot change outcome, so
  /// by default the rate is taken over the remaining start states.
  bool include_absorbing_starts = false;
  TieBreak tie_break = TieBreak::reject;
};

/// Absorbing state reached within max_steps of a deterministic rollout, or
/// nullopt if none is reached. MDP dynamics must be deterministic.
std::optional<int> rollout_absorbing_state(const TabularMdp& mdp,
                                           const NonStationaryPolicy& policy,
                                           int start, int max_steps);

/// Fraction of start states whose rollout absorbs in one of `targets` within
/// S + head_length steps.
double reach_rate(const TabularMdp& mdp, const NonStationaryPolicy& policy,
                  const std::vector<int>& targets,
                  const SuccessOptions& options = {});

double success_rate(const Corridor& corridor, const NonStationaryPolicy& policy,
                    const SuccessOptions& options = {});
/// Stochastic policies are rejected unless options.tie_break picks the most
/// probable action.
double success_rate(const Corridor& corridor, const StationaryPolicy& policy,
                    const SuccessOptions& options = {});

}  // namespace ddrl
