#include <doctest.h>

#include "ddrl/envs.hpp"
#include "ddrl/oracle.hpp"
#include "ddrl/solvers.hpp"

using namespace ddrl;

TEST_CASE("budgets are enforced") {
  oracle::OracleBudget tiny{10};
  CHECK_THROWS_AS(oracle::phi_bruteforce(DiscountSchedule::linear(4), 4, 10, tiny),
                  oracle::BudgetExceeded);
  const auto m = random_tabular_mdp(8, 4, 0);
  CHECK_THROWS_AS(oracle::brute_force_stationary_optimum(m, DiscountSchedule({0.9}),
                                                         EtaWeights{1.0}, tiny),
                  oracle::BudgetExceeded);
}

TEST_CASE("stationary optimum enumerates every policy") {
  const auto m = random_tabular_mdp(3, 2, 5);
  const auto best = oracle::brute_force_stationary_optimum(m, DiscountSchedule({0.9}), EtaWeights{1.0});
  CHECK(best.enumerated == 8);
  const auto pi = geometric_policy_iteration(m, 0.9);
  CHECK(best.eta_return == doctest::Approx(m.initial_distribution().dot(pi.value)).epsilon(1e-12));
}

TEST_CASE("prefix oracle on a hand-sized chain") {
  // 0 -a0-> 0 (r=0), 0 -a1-> 1 (r=1); 1 absorbing with r=0.
  const std::vector<TransitionEntry> tr{{0, 0, 0, 1.0}, {0, 1, 1, 1.0}, {1, 0, 1, 1.0}, {1, 1, 1, 1.0}};
  Eigen::MatrixXd r(2, 2);
  r << 0.0, 1.0, 0.0, 0.0;
  const TabularMdp m(2, 2, tr, r, Eigen::Vector2d(1.0, 0.0));
  const DiscountSchedule s({0.5, 0.9});
  const EtaWeights w{0.0, 1.0};
  // c_0 = 1, c_1 = 1.4, c_2 = 1.26 + 0.25 = 1.51 ... waiting pays while c_t grows.
  const auto c = oracle::dense_stage_coefficients(s, w, 3);
  CHECK(c[0] == doctest::Approx(1.0));
  CHECK(c[1] == doctest::Approx(1.4));
  const auto best = oracle::brute_force_prefix_optimum(m, s, w, 3, Eigen::Vector2d::Zero());
  CHECK(best.values(0) == doctest::Approx(*std::max_element(c.begin(), c.end())));
  CHECK(best.values(1) == 0.0);
  CHECK_THROWS(oracle::brute_force_prefix_optimum(random_tabular_mdp(3, 2, 1), s, w, 2,
                                                  Eigen::Vector3d::Zero()));
}

TEST_CASE("optimal non-stationary values dominate every plan") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto m = random_tabular_mdp(4, 2, seed, true);
    const auto s = DiscountSchedule({0.7, 0.6});
    const EtaWeights w{0.0, 1.0};
    const int T = 200;
    const double slack = eta_tail_bound(build_phi_table(s, T), w, T, 1.0);
    const Eigen::VectorXd best = oracle::truncated_optimal_values(m, s, w, T);
    for (int H : {0, 2, 6}) {
      const auto plan = h_close_control(m, s, w, H);
      const double value = evaluate_plan(m, plan, s, w).eta_return;
      CHECK(value <= m.initial_distribution().dot(best) + slack + 1e-9);
    }
  }
}

TEST_CASE("truncated return oracle start override") {
  const auto m = random_tabular_mdp(3, 2, 2);
  const auto s = DiscountSchedule({0.5});
  const auto pi = StationaryPolicy::uniform(3, 2);
  Eigen::VectorXd e1 = Eigen::VectorXd::Zero(3);
  e1(1) = 1.0;
  const double from1 = oracle::truncated_return_oracle(m, pi, s, EtaWeights{1.0}, 0, e1);
  CHECK(from1 == doctest::Approx(0.5 * (m.reward(1, 0) + m.reward(1, 1))));
}
