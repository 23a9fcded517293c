#include <doctest.h>

#include <algorithm>

#include "ddrl/envs.hpp"

using namespace ddrl;

TEST_CASE("maze parse and serialize round trip") {
  const char* text =
      "@absorbing on\n"
      "#####\n"
      "#B.G#\n"
      "#.R.#\n"
      "#####\n";
  const auto layout = parse_maze(text);
  CHECK(layout.rows == 4);
  CHECK(layout.cols == 5);
  CHECK(layout.at(1, 1) == CellKind::deceptive);
  CHECK(layout.at(2, 2) == CellKind::penalty);
  CHECK(parse_maze(serialize_maze(layout)) == layout);
  for (const auto& id : bundled_maze_ids()) {
    const auto m = bundled_maze(id);
    CHECK(parse_maze(serialize_maze(m)) == m);
  }
}

TEST_CASE("maze parse errors name the location") {
  CHECK_THROWS_WITH_AS(parse_maze("###\n#.\n###\n"), doctest::Contains("row 1"),
                       std::invalid_argument);
  CHECK_THROWS_WITH_AS(parse_maze("###\n#x#\n###\n"), doctest::Contains("col 1"),
                       std::invalid_argument);
  CHECK_THROWS_AS(parse_maze("###\n###\n"), std::invalid_argument);
  CHECK_THROWS_AS(parse_maze("#####\n#.#G#\n#####\n"), std::invalid_argument);
  const auto custom = parse_maze("###\n#o#\n###\n", {{'o', CellKind::free}});
  CHECK(custom.at(1, 1) == CellKind::free);
}

TEST_CASE("maze to mdp") {
  const auto layout = parse_maze("#####\n#B.G#\n#####\n");
  const auto grid = maze_to_mdp(layout);
  CHECK(grid.mdp.n_states() == 3);
  CHECK(grid.mdp.n_actions() == 4);
  CHECK(validate(grid.mdp).ok());
  CHECK(grid.mdp.is_deterministic());
  const int mid = grid.states_of_kind(CellKind::free).front();
  const int good = grid.states_of_kind(CellKind::good).front();
  CHECK(grid.mdp.next_state(mid, kRight) == good);
  CHECK(grid.mdp.reward(mid, kRight) == doctest::Approx(1.0));
  CHECK(grid.mdp.next_state(mid, kUp) == mid);
  CHECK(grid.mdp.reward(mid, kUp) == 0.0);
  CHECK(grid.mdp.absorbing_states()[static_cast<size_t>(good)]);
  CHECK(grid.mdp.reward(good, kLeft) == doctest::Approx(1.0));
}

TEST_CASE("bundled mazes") {
  const auto ids = bundled_maze_ids();
  CHECK(ids == std::vector<std::string>{"u_maze", "t_maze", "random_maze"});
  for (const auto& id : ids) {
    const auto grid = maze_to_mdp(bundled_maze(id));
    CHECK(grid.states_of_kind(CellKind::good).size() == 1);
    CHECK(grid.states_of_kind(CellKind::deceptive).size() == 1);
    CHECK_FALSE(grid.states_of_kind(CellKind::penalty).empty());
  }
  CHECK_THROWS(bundled_maze("no_such_maze"));
}

TEST_CASE("random maze generator") {
  const auto a = random_maze_layout(15, 15, 3);
  CHECK(a == random_maze_layout(15, 15, 3));
  CHECK_FALSE(a == random_maze_layout(15, 15, 4));
  CHECK(a == bundled_maze("random_maze"));
  CHECK_THROWS(random_maze_layout(14, 15, 0));
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    CHECK_NOTHROW(parse_maze(serialize_maze(random_maze_layout(11, 13, seed))));
  }
}

TEST_CASE("corridor") {
  const auto c = build_corridor(10, 1.0, 0.9, -1.0, std::pair<int, int>{4, 5});
  CHECK(c.mdp.n_states() == 10);
  CHECK(validate(c.mdp).ok());
  CHECK(c.deceptive_state == 0);
  CHECK(c.good_state == 9);
  const auto absorbing = c.mdp.absorbing_states();
  CHECK(absorbing[0]);
  CHECK(absorbing[9]);
  CHECK_FALSE(absorbing[5]);

  const NonStationaryPolicy right(std::vector<int>(10, 1));
  CHECK(success_rate(c, right) == doctest::Approx(1.0));
  const NonStationaryPolicy left(std::vector<int>(10, 0));
  CHECK(success_rate(c, left) == doctest::Approx(0.0));
  CHECK(success_rate(c, left, {true, TieBreak::reject}) == doctest::Approx(0.1));
  CHECK(rollout_absorbing_state(c.mdp, right, 3, 100) == 9);
  CHECK_THROWS(success_rate(c, StationaryPolicy::uniform(10, 2)));
  CHECK_NOTHROW(success_rate(c, StationaryPolicy::uniform(10, 2), {false, TieBreak::most_probable}));
}

TEST_CASE("reach rate on a stochastic mdp is rejected") {
  const auto m = random_tabular_mdp(5, 2, 1);
  CHECK_THROWS(reach_rate(m, NonStationaryPolicy(std::vector<int>(5, 0)), {0}));
}
