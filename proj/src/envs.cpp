#include "ddrl/envs.hpp"

#include <algorithm>
#include <cstdlib>
#include <deque>
#include <fstream>
#include <sstream>
#include <stdexcept>

#ifndef DDRL_DEFAULT_ASSET_DIR
#define DDRL_DEFAULT_ASSET_DIR "assets/mazes"
#endif

namespace ddrl {

namespace {

constexpr int kDr[4] = {-1, 1, 0, 0};
constexpr int kDc[4] = {0, 0, -1, 1};

bool is_absorbing_kind(CellKind kind) {
  return kind == CellKind::good || kind == CellKind::deceptive;
}

std::optional<CellKind> default_legend(char ch) {
  switch (ch) {
    case '#': return CellKind::wall;
    case '.': return CellKind::free;
    case 'G': return CellKind::good;
    case 'B': return CellKind::deceptive;
    case 'R': return CellKind::penalty;
    default: return std::nullopt;
  }
}

bool parse_switch(const std::string& value, int line_no) {
  if (value == "on") return true;
  if (value == "off") return false;
  throw std::invalid_argument("maze line " + std::to_string(line_no) +
                              ": expected 'on' or 'off', got '" + value + "'");
}

// BFS from every free cell through traversable cells; absorbing reward cells
// are entered but not left.
std::vector<bool> reachable_from_free(const MazeLayout& m) {
  std::vector<bool> seen(m.cells.size(), false);
  std::deque<std::pair<int, int>> queue;
  for (int r = 0; r < m.rows; ++r) {
    for (int c = 0; c < m.cols; ++c) {
      if (m.at(r, c) == CellKind::free) {
        seen[static_cast<size_t>(r * m.cols + c)] = true;
        queue.emplace_back(r, c);
      }
    }
  }
  while (!queue.empty()) {
    auto [r, c] = queue.front();
    queue.pop_front();
    if (m.absorbing && is_absorbing_kind(m.at(r, c))) continue;
    for (int a = 0; a < 4; ++a) {
      const int nr = r + kDr[a], nc = c + kDc[a];
      if (nr < 0 || nr >= m.rows || nc < 0 || nc >= m.cols) continue;
      const auto idx = static_cast<size_t>(nr * m.cols + nc);
      if (seen[idx] || m.at(nr, nc) == CellKind::wall) continue;
      seen[idx] = true;
      queue.emplace_back(nr, nc);
    }
  }
  return seen;
}

}  // namespace

double cell_reward(CellKind kind) {
  switch (kind) {
    case CellKind::good: return 1.0;
    case CellKind::deceptive: return 0.9;
    case CellKind::penalty: return -1.0;
    default: return 0.0;
  }
}

char cell_char(CellKind kind) {
  switch (kind) {
    case CellKind::wall: return '#';
    case CellKind::free: return '.';
    case CellKind::good: return 'G';
    case CellKind::deceptive: return 'B';
    case CellKind::penalty: return 'R';
  }
  return '?';
}

MazeLayout parse_maze(std::string_view text, const LegendOverrides& overrides) {
  std::vector<std::string> lines;
  {
    std::string current;
    for (char ch : text) {
      if (ch == '\n') {
        lines.push_back(std::move(current));
        current.clear();
      } else if (ch != '\r') {
        current.push_back(ch);
      }
    }
    if (!current.empty()) lines.push_back(std::move(current));
  }
  while (!lines.empty() && lines.back().empty()) lines.pop_back();

  MazeLayout layout;
  size_t first = 0;
  for (; first < lines.size() && !lines[first].empty() && lines[first][0] == '@'; ++first) {
    std::istringstream fields(lines[first].substr(1));
    std::string key, value;
    fields >> key >> value;
    const int line_no = static_cast<int>(first) + 1;
    if (key == "absorbing") {
      layout.absorbing = parse_switch(value, line_no);
    } else if (key == "rereward") {
      layout.absorbing_rereward = parse_switch(value, line_no);
    } else {
      throw std::invalid_argument("maze line " + std::to_string(line_no) +
                                  ": unknown directive '@" + key + "'");
    }
  }
  if (first == lines.size()) throw std::invalid_argument("maze text has no grid rows");

  layout.rows = static_cast<int>(lines.size() - first);
  layout.cols = static_cast<int>(lines[first].size());
  if (layout.cols == 0) throw std::invalid_argument("maze row 0 is empty");
  layout.cells.reserve(static_cast<size_t>(layout.rows) * static_cast<size_t>(layout.cols));
  bool has_free = false;
  for (int r = 0; r < layout.rows; ++r) {
    const std::string& line = lines[first + static_cast<size_t>(r)];
    if (static_cast<int>(line.size()) != layout.cols) {
      throw std::invalid_argument("maze row " + std::to_string(r) + " has length " +
                                  std::to_string(line.size()) + ", expected " +
                                  std::to_string(layout.cols));
    }
    for (int c = 0; c < layout.cols; ++c) {
      const char ch = line[static_cast<size_t>(c)];
      std::optional<CellKind> kind;
      if (auto it = overrides.find(ch); it != overrides.end()) {
        kind = it->second;
      } else {
        kind = default_legend(ch);
      }
      if (!kind) {
        throw std::invalid_argument(std::string("unknown maze character '") + ch +
                                    "' at row " + std::to_string(r) + ", col " +
                                    std::to_string(c));
      }
      has_free = has_free || *kind == CellKind::free;
      layout.cells.push_back(*kind);
    }
  }
  if (!has_free) throw std::invalid_argument("maze has no free cell");

  const auto seen = reachable_from_free(layout);
  for (int r = 0; r < layout.rows; ++r) {
    for (int c = 0; c < layout.cols; ++c) {
      const CellKind kind = layout.at(r, c);
      if (kind != CellKind::wall && kind != CellKind::free &&
          !seen[static_cast<size_t>(r * layout.cols + c)]) {
        throw std::invalid_argument("reward cell at row " + std::to_string(r) + ", col " +
                                    std::to_string(c) + " is unreachable");
      }
    }
  }
  return layout;
}

std::string serialize_maze(const MazeLayout& layout) {
  std::string out;
  if (!layout.absorbing) out += "@absorbing off\n";
  if (!layout.absorbing_rereward) out += "@rereward off\n";
  for (int r = 0; r < layout.rows; ++r) {
    for (int c = 0; c < layout.cols; ++c) out.push_back(cell_char(layout.at(r, c)));
    out.push_back('\n');
  }
  return out;
}

MazeLayout load_maze(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read maze file " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_maze(text.str());
}

std::filesystem::path asset_dir() {
  if (const char* env = std::getenv("DDRL_ASSET_DIR"); env && *env) return env;
  return DDRL_DEFAULT_ASSET_DIR;
}

std::vector<std::string> bundled_maze_ids() { return {"u_maze", "t_maze", "random_maze"}; }

MazeLayout bundled_maze(std::string_view id) {
  const auto ids = bundled_maze_ids();
  if (std::find(ids.begin(), ids.end(), id) == ids.end()) {
    throw std::invalid_argument("unknown bundled maze '" + std::string(id) + "'");
  }
  return load_maze(asset_dir() / (std::string(id) + ".txt"));
}

MazeLayout random_maze_layout(int rows, int cols, std::uint64_t seed) {
  if (rows < 5 || cols < 5 || rows % 2 == 0 || cols % 2 == 0) {
    throw std::invalid_argument("random maze needs odd dimensions >= 5");
  }
  MazeLayout m;
  m.rows = rows;
  m.cols = cols;
  m.cells.assign(static_cast<size_t>(rows) * static_cast<size_t>(cols), CellKind::wall);
  auto cell = [&](int r, int c) -> CellKind& {
    return m.cells[static_cast<size_t>(r * cols + c)];
  };

  Rng rng(seed);
  std::vector<std::pair<int, int>> stack{{1, 1}};
  cell(1, 1) = CellKind::free;
  while (!stack.empty()) {
    auto [r, c] = stack.back();
    int options[4];
    int n = 0;
    for (int a = 0; a < 4; ++a) {
      const int nr = r + 2 * kDr[a], nc = c + 2 * kDc[a];
      if (nr > 0 && nr < rows - 1 && nc > 0 && nc < cols - 1 && cell(nr, nc) == CellKind::wall) {
        options[n++] = a;
      }
    }
    if (n == 0) {
      stack.pop_back();
      continue;
    }
    const int a = options[rng.below(n)];
    cell(r + kDr[a], c + kDc[a]) = CellKind::free;
    cell(r + 2 * kDr[a], c + 2 * kDc[a]) = CellKind::free;
    stack.emplace_back(r + 2 * kDr[a], c + 2 * kDc[a]);
  }

  int cr = rows / 2, cc = cols / 2;
  if (cr % 2 == 0) --cr;
  if (cc % 2 == 0) --cc;
  const int centre = cr * cols + cc;
  std::vector<int> dist(m.cells.size(), -1);
  std::vector<int> parent(m.cells.size(), -1);
  std::deque<int> queue{centre};
  dist[static_cast<size_t>(centre)] = 0;
  while (!queue.empty()) {
    const int idx = queue.front();
    queue.pop_front();
    for (int a = 0; a < 4; ++a) {
      const int nr = idx / cols + kDr[a], nc = idx % cols + kDc[a];
      const int nidx = nr * cols + nc;
      if (m.cells[static_cast<size_t>(nidx)] == CellKind::wall || dist[static_cast<size_t>(nidx)] >= 0) continue;
      dist[static_cast<size_t>(nidx)] = dist[static_cast<size_t>(idx)] + 1;
      parent[static_cast<size_t>(nidx)] = idx;
      queue.push_back(nidx);
    }
  }
  int goal = centre;
  for (int i = 0; i < static_cast<int>(m.cells.size()); ++i) {
    if (dist[static_cast<size_t>(i)] > dist[static_cast<size_t>(goal)]) goal = i;
  }
  int deceptive = -1;
  for (int i = 0; i < static_cast<int>(m.cells.size()); ++i) {
    if (i == goal || i == centre || m.cells[static_cast<size_t>(i)] == CellKind::wall) continue;
    int open = 0;
    for (int a = 0; a < 4; ++a) {
      open += m.cells[static_cast<size_t>((i / cols + kDr[a]) * cols + i % cols + kDc[a])] != CellKind::wall;
    }
    if (open != 1) continue;
    if (deceptive < 0 || dist[static_cast<size_t>(i)] < dist[static_cast<size_t>(deceptive)]) deceptive = i;
  }
  std::vector<int> path;
  for (int i = parent[static_cast<size_t>(goal)]; i >= 0 && i != centre; i = parent[static_cast<size_t>(i)]) {
    path.push_back(i);
  }
  m.cells[static_cast<size_t>(goal)] = CellKind::good;
  if (deceptive >= 0) m.cells[static_cast<size_t>(deceptive)] = CellKind::deceptive;
  if (path.size() >= 2) m.cells[static_cast<size_t>(path[path.size() / 2])] = CellKind::penalty;
  return m;
}

std::vector<int> GridMdp::states_of_kind(CellKind kind) const {
  std::vector<int> out;
  for (size_t s = 0; s < kind_of_state.size(); ++s) {
    if (kind_of_state[s] == kind) out.push_back(static_cast<int>(s));
  }
  return out;
}

GridMdp maze_to_mdp(const MazeLayout& layout) {
  std::vector<int> state_of_cell(layout.cells.size(), -1);
  std::vector<std::pair<int, int>> cell_of_state;
  std::vector<CellKind> kind_of_state;
  for (int r = 0; r < layout.rows; ++r) {
    for (int c = 0; c < layout.cols; ++c) {
      if (layout.at(r, c) == CellKind::wall) continue;
      state_of_cell[static_cast<size_t>(r * layout.cols + c)] = static_cast<int>(cell_of_state.size());
      cell_of_state.emplace_back(r, c);
      kind_of_state.push_back(layout.at(r, c));
    }
  }
  const int n = static_cast<int>(cell_of_state.size());
  std::vector<TransitionEntry> transitions;
  transitions.reserve(static_cast<size_t>(n) * 4);
  Eigen::MatrixXd rewards = Eigen::MatrixXd::Zero(n, 4);
  for (int s = 0; s < n; ++s) {
    const auto [r, c] = cell_of_state[static_cast<size_t>(s)];
    const CellKind kind = kind_of_state[static_cast<size_t>(s)];
    for (int a = 0; a < 4; ++a) {
      if (layout.absorbing && is_absorbing_kind(kind)) {
        transitions.push_back({s, a, s, 1.0});
        rewards(s, a) = layout.absorbing_rereward ? cell_reward(kind) : 0.0;
        continue;
      }
      const int nr = r + kDr[a], nc = c + kDc[a];
      const bool blocked = nr < 0 || nr >= layout.rows || nc < 0 || nc >= layout.cols ||
                           layout.at(nr, nc) == CellKind::wall;
      if (blocked) {
        transitions.push_back({s, a, s, 1.0});
        continue;
      }
      transitions.push_back({s, a, state_of_cell[static_cast<size_t>(nr * layout.cols + nc)], 1.0});
      rewards(s, a) = cell_reward(layout.at(nr, nc));
    }
  }
  return GridMdp{TabularMdp(n, 4, transitions, std::move(rewards), uniform_distribution(n)),
                 std::move(cell_of_state), std::move(kind_of_state)};
}

Corridor build_corridor(int n_states, double good_reward, double deceptive_reward,
                        double penalty, std::optional<std::pair<int, int>> penalty_band) {
  if (n_states < 3) throw std::invalid_argument("corridor needs at least 3 states");
  Corridor out{TabularMdp(1, 1, {}, Eigen::MatrixXd::Zero(1, 1), Eigen::VectorXd::Ones(1))};
  out.deceptive_state = 0;
  out.good_state = n_states - 1;
  if (penalty_band) {
    auto [lo, hi] = *penalty_band;
    if (lo > hi || lo < 1 || hi > n_states - 2) {
      throw std::invalid_argument("penalty band [" + std::to_string(lo) + "," +
                                  std::to_string(hi) + "] must lie inside the corridor interior");
    }
    out.band_lo = lo;
    out.band_hi = hi;
  }
  auto entry_reward = [&](int s) {
    if (s == out.deceptive_state) return deceptive_reward;
    if (s == out.good_state) return good_reward;
    if (s >= out.band_lo && s <= out.band_hi) return penalty;
    return 0.0;
  };
  std::vector<TransitionEntry> transitions;
  transitions.reserve(static_cast<size_t>(n_states) * 2);
  Eigen::MatrixXd rewards = Eigen::MatrixXd::Zero(n_states, 2);
  for (int s = 0; s < n_states; ++s) {
    for (int a : {kCorridorLeft, kCorridorRight}) {
      if (s == out.deceptive_state || s == out.good_state) {
        transitions.push_back({s, a, s, 1.0});
        rewards(s, a) = entry_reward(s);
        continue;
      }
      const int next = a == kCorridorLeft ? s - 1 : s + 1;
      transitions.push_back({s, a, next, 1.0});
      rewards(s, a) = entry_reward(next);
    }
  }
  out.mdp = TabularMdp(n_states, 2, transitions, std::move(rewards), uniform_distribution(n_states));
  return out;
}

TabularMdp random_tabular_mdp(int n_states, int n_actions, std::uint64_t seed,
                              bool deterministic) {
  if (n_states < 1 || n_actions < 1) throw std::invalid_argument("MDP needs states and actions");
  Rng rng(seed);
  std::vector<TransitionEntry> transitions;
  Eigen::MatrixXd rewards(n_states, n_actions);
  for (int s = 0; s < n_states; ++s) {
    for (int a = 0; a < n_actions; ++a) {
      rewards(s, a) = 2.0 * rng.uniform() - 1.0;
      if (deterministic) {
        transitions.push_back({s, a, rng.below(n_states), 1.0});
        continue;
      }
      std::vector<double> weights(static_cast<size_t>(n_states), 0.0);
      double total = 0.0;
      for (int k = 0; k < n_states; ++k) {
        if (rng.uniform() < 0.6) {
          weights[static_cast<size_t>(k)] = rng.uniform() + 0.05;
          total += weights[static_cast<size_t>(k)];
        }
      }
      if (total == 0.0) {
        weights[static_cast<size_t>(rng.below(n_states))] = 1.0;
        total = 1.0;
      }
      for (int k = 0; k < n_states; ++k) {
        if (weights[static_cast<size_t>(k)] > 0.0) {
          transitions.push_back({s, a, k, weights[static_cast<size_t>(k)] / total});
        }
      }
    }
  }
  Eigen::VectorXd initial(n_states);
  for (int s = 0; s < n_states; ++s) initial(s) = rng.uniform() + 0.1;
  initial /= initial.sum();
  return TabularMdp(n_states, n_actions, transitions, std::move(rewards), std::move(initial));
}

namespace {

std::optional<int> rollout_with(const TabularMdp& mdp, const std::vector<bool>& absorbing,
                                const NonStationaryPolicy& policy, int start, int max_steps) {
  int s = start;
  for (int t = 0; t <= max_steps; ++t) {
    if (absorbing[static_cast<size_t>(s)]) return s;
    if (t == max_steps) break;
    s = mdp.next_state(s, policy.action(s, t));
  }
  return std::nullopt;
}

}  // namespace

std::optional<int> rollout_absorbing_state(const TabularMdp& mdp,
                                           const NonStationaryPolicy& policy,
                                           int start, int max_steps) {
  if (policy.n_states() != mdp.n_states()) {
    throw std::invalid_argument("policy does not match the MDP");
  }
  return rollout_with(mdp, mdp.absorbing_states(), policy, start, max_steps);
}

double reach_rate(const TabularMdp& mdp, const NonStationaryPolicy& policy,
                  const std::vector<int>& targets, const SuccessOptions& options) {
  if (policy.n_states() != mdp.n_states()) {
    throw std::invalid_argument("policy does not match the MDP");
  }
  if (!mdp.is_deterministic()) {
    throw std::invalid_argument("reach rate needs deterministic dynamics");
  }
  const auto absorbing = mdp.absorbing_states();
  const int max_steps = mdp.n_states() + policy.head_length();
  int starts = 0;
  int hits = 0;
  for (int s = 0; s < mdp.n_states(); ++s) {
    if (mdp.initial_distribution()(s) <= 0.0) continue;
    if (absorbing[static_cast<size_t>(s)] && !options.include_absorbing_starts) continue;
    ++starts;
    const auto end = rollout_with(mdp, absorbing, policy, s, max_steps);
    if (end && std::find(targets.begin(), targets.end(), *end) != targets.end()) ++hits;
  }
  if (starts == 0) throw std::invalid_argument("no start states to evaluate");
  return static_cast<double>(hits) / starts;
}

double success_rate(const Corridor& corridor, const NonStationaryPolicy& policy,
                    const SuccessOptions& options) {
  return reach_rate(corridor.mdp, policy, {corridor.good_state}, options);
}

double success_rate(const Corridor& corridor, const StationaryPolicy& policy,
                    const SuccessOptions& options) {
  if (!policy.is_deterministic() && options.tie_break == TieBreak::reject) {
    throw std::invalid_argument("success rate of a stochastic policy needs a tie-break mode");
  }
  return success_rate(corridor, NonStationaryPolicy(policy.greedy_actions()), options);
}

}  // namespace ddrl
