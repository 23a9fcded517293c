#include <doctest.h>

#include <cmath>

#include "ddrl/envs.hpp"
#include "ddrl/oracle.hpp"
#include "ddrl/solvers.hpp"

using namespace ddrl;

namespace {

std::vector<int> random_actions(Rng& rng, int S, int A) {
  std::vector<int> out;
  for (int s = 0; s < S; ++s) out.push_back(rng.below(A));
  return out;
}

double sup_diff(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return (a - b).cwiseAbs().maxCoeff();
}

}  // namespace

TEST_CASE("greedy tie break and boltzmann") {
  Eigen::MatrixXd q(2, 3);
  q << 1.0, 3.0, 3.0, 5.0, 5.0 - 1e-14, 2.0;
  CHECK(greedy_actions(q) == std::vector<int>{1, 0});
  const auto soft = boltzmann_policy(q, 1.0);
  CHECK(soft.matrix().row(0).sum() == doctest::Approx(1.0));
  CHECK(soft.prob(0, 1) == doctest::Approx(soft.prob(0, 2)));
  CHECK(soft.prob(0, 0) < soft.prob(0, 1));
  Eigen::MatrixXd huge(1, 2);
  huge << 1e6, 0.0;
  CHECK(boltzmann_policy(huge, 1e-3).prob(0, 0) == doctest::Approx(1.0));
  CHECK_THROWS(boltzmann_policy(q, 0.0));
  CHECK(policy_hash(std::vector<int>{0, 1}) != policy_hash(std::vector<int>{1, 0}));
}

TEST_CASE("depth evaluation matches the dense oracle and satisfies the decomposition") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed + 100);
    const int S = 2 + rng.below(7);
    const int A = 1 + rng.below(4);
    const int D = rng.below(4);
    const auto m = random_tabular_mdp(S, A, seed);
    const auto s = DiscountSchedule::linear(D, 0.95, 0.05);
    const auto acts = random_actions(rng, S, A);
    const auto pi = StationaryPolicy::deterministic(acts, A);
    const auto dense = oracle::dense_depth_values(m, acts, s);
    for (auto method : {EvalMethod::direct, EvalMethod::iterative}) {
      const auto stack = d_deep_policy_evaluation(m, pi, s, {method, 1e-13, 1'000'000});
      CHECK(decomposition_residual(m, pi, stack) <= 1e-10);
      for (int d = 0; d <= D; ++d) {
        const double scale = std::max(1.0, dense[static_cast<size_t>(d)].cwiseAbs().maxCoeff());
        CHECK(sup_diff(stack.v[static_cast<size_t>(d)], dense[static_cast<size_t>(d)]) / scale <
              1e-9);
      }
    }
  }
}

TEST_CASE("depth operator fixed point and contraction") {
  const auto m = random_tabular_mdp(5, 3, 8);
  const auto s = DiscountSchedule({0.9, 0.7, 0.6});
  Rng rng(1);
  const auto pi = StationaryPolicy::deterministic(random_actions(rng, 5, 3), 3);
  const auto stack = d_deep_policy_evaluation(m, pi, s);
  for (int d = 0; d <= 2; ++d) {
    const auto& q = stack.q[static_cast<size_t>(d)];
    CHECK((apply_depth_operator(m, pi, stack, d, q) - q).cwiseAbs().maxCoeff() < 1e-9);
    const Eigen::MatrixXd x = Eigen::MatrixXd::Random(5, 3) * 10.0;
    const Eigen::MatrixXd y = Eigen::MatrixXd::Random(5, 3) * 10.0;
    const double before = (x - y).cwiseAbs().maxCoeff();
    const double after =
        (apply_depth_operator(m, pi, stack, d, x) - apply_depth_operator(m, pi, stack, d, y))
            .cwiseAbs()
            .maxCoeff();
    CHECK(after <= s.gamma(d) * before + 1e-12);
  }
}

TEST_CASE("one-step bellman identity for the eta value") {
  // Q_eta(w) = r <1,w> + P V_eta(Gamma w)
  const auto m = random_tabular_mdp(6, 2, 3);
  const auto s = DiscountSchedule({0.9, 0.8, 0.5});
  const EtaWeights w{0.3, -1.0, 2.0};
  Rng rng(2);
  const auto acts = random_actions(rng, 6, 2);
  const auto pi = StationaryPolicy::deterministic(acts, 2);
  const auto stack = d_deep_policy_evaluation(m, pi, s);
  const Eigen::MatrixXd lhs = stack.eta_q(w);
  const Eigen::VectorXd v_next = stack.eta_v(apply_f(w, gamma_matrix(s), 1));
  const Eigen::VectorXd pv = m.transitions() * v_next;
  for (int st = 0; st < 6; ++st) {
    for (int a = 0; a < 2; ++a) {
      CHECK(lhs(st, a) == doctest::Approx(m.reward(st, a) * w.sum() + pv(m.row(st, a))).epsilon(1e-10));
    }
  }
}

TEST_CASE("large deterministic corridor evaluation uses the fast paths consistently") {
  const auto c = build_corridor(2000);
  const std::vector<int> acts(2000, 1);
  const auto pi = StationaryPolicy::deterministic(acts, 2);
  const auto s = DiscountSchedule::constant(2, 0.999);
  const auto direct = d_deep_policy_evaluation(c.mdp, pi, s, {EvalMethod::direct, 1e-12, 1'000'000});
  const auto iter = d_deep_policy_evaluation(c.mdp, pi, s, {EvalMethod::iterative, 1e-12, 1'000'000});
  for (int d = 0; d <= 2; ++d) {
    const auto& a = direct.v[static_cast<size_t>(d)];
    CHECK(sup_diff(a, iter.v[static_cast<size_t>(d)]) / a.cwiseAbs().maxCoeff() < 1e-8);
  }
  CHECK(decomposition_residual(c.mdp, pi, direct) < 1e-10);
}

TEST_CASE("geometric policy iteration") {
  const std::vector<TransitionEntry> tr{{0, 0, 0, 1.0}};
  const TabularMdp one(1, 1, tr, Eigen::MatrixXd::Ones(1, 1), Eigen::VectorXd::Ones(1));
  CHECK(geometric_policy_iteration(one, 0.99).value(0) == doctest::Approx(100.0));
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto m = random_tabular_mdp(5, 3, seed);
    const auto sol = geometric_policy_iteration(m, 0.9);
    CHECK(sol.residual <= 1e-10 * std::max(1.0, sol.value.cwiseAbs().maxCoeff()));
    CHECK(bellman_optimality_residual(m, 0.9, sol.value) == doctest::Approx(sol.residual));
    CHECK(sup_diff(sol.value, oracle::brute_force_geometric_values(m, 0.9)) < 1e-9);
  }
}

TEST_CASE("gsac at depth zero is policy iteration") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto m = random_tabular_mdp(6, 3, seed);
    const auto pi = geometric_policy_iteration(m, 0.9);
    GpiOptions opt;
    opt.init = GpiInit::random;
    opt.seed = seed;
    const auto rep = generalized_policy_iteration(m, DiscountSchedule({0.9}), EtaWeights{1.0}, opt);
    CHECK(rep.outcome == GpiOutcome::converged);
    CHECK(rep.final_policy == pi.policy);
    CHECK(sup_diff(rep.final_stack.v[0], pi.value) <= 1e-10);
  }
}

TEST_CASE("gsac reaches the brute-force stationary optimum on small mdps") {
  int agree = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto m = random_tabular_mdp(4, 2, seed);
    const auto s = DiscountSchedule({0.9, 0.85});
    const EtaWeights w{1.0, 0.5};
    const auto best = oracle::brute_force_stationary_optimum(m, s, w);
    const auto rep = generalized_policy_iteration(m, s, w);
    CHECK(rep.eta_trace.back() <= best.eta_return + 1e-9 * std::abs(best.eta_return));
    agree += std::abs(rep.eta_trace.back() - best.eta_return) <= 1e-9 * std::abs(best.eta_return);
  }
  CHECK(agree >= 5);
}

TEST_CASE("gsac outcomes and traces") {
  const auto m = random_tabular_mdp(6, 3, 2);
  const auto s = DiscountSchedule::linear(3);
  const auto w = EtaWeights::unit(3, 3);
  GpiOptions opt;
  opt.avg_trace_length = 50;
  const auto rep = generalized_policy_iteration(m, s, w, opt);
  CHECK(rep.eta_trace.size() == static_cast<size_t>(rep.iterations));
  CHECK(rep.avg_trace.size() == rep.eta_trace.size());
  opt.max_iters = 1;
  opt.init = GpiInit::random;
  const auto capped = generalized_policy_iteration(m, s, w, opt);
  CHECK(capped.iterations == 1);
  opt.initial_actions = std::vector<int>(6, 0);
  opt.max_iters = 100;
  const auto fixed = generalized_policy_iteration(m, s, w, opt);
  CHECK(fixed.outcome != GpiOutcome::iteration_cap);
  CHECK(parse_gpi_init("random") == GpiInit::random);
  CHECK_THROWS(parse_gpi_init("greedy"));
  CHECK(to_string(GpiOutcome::cycle_detected) == "cycle_detected");
}

TEST_CASE("h-close plan matches prefix enumeration") {
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    const auto m = random_tabular_mdp(3, 2, seed, true);
    const auto s = DiscountSchedule({0.9, 0.7, 0.6});
    const EtaWeights w{0.2, 0.0, 1.0};
    for (int H : {0, 2, 3}) {
      const auto plan = h_close_control(m, s, w, H);
      const auto brute = oracle::brute_force_prefix_optimum(m, s, w, H, plan.tail_value);
      CHECK(sup_diff(plan.head_values[0], brute.values) <= 1e-9 * std::max(1.0, brute.values.cwiseAbs().maxCoeff()));
    }
  }
}

TEST_CASE("h-close plan structure") {
  const auto m = random_tabular_mdp(5, 2, 4);
  const auto s = DiscountSchedule::linear(2);
  const auto w = EtaWeights::unit(2, 2);
  const HCloseSolver solver(m, s, w);
  const auto plan = solver.plan(4);
  CHECK(plan.head_policies.size() == 5);
  CHECK(plan.head_values.size() == 6);
  CHECK(plan.stage_coefficients == horizon_coefficients(w, gamma_matrix(s), 4));
  CHECK(plan.tail_scale == doctest::Approx(oracle::dense_tail_scale(s, w, 4)).epsilon(1e-12));
  CHECK(plan.policy().head_length() == 5);
  const auto a = solver.evaluate(plan, 100);
  const auto b = evaluate_plan(m, plan, s, w, 100);
  CHECK(a.eta_return == doctest::Approx(b.eta_return).epsilon(1e-10));
  CHECK(a.average_return == doctest::Approx(b.average_return).epsilon(1e-12));
  CHECK(a.eta_normalized == doctest::Approx(a.eta_return / eta_total_mass(s, w)));
  const auto direct = h_close_control(m, s, w, 4);
  CHECK(direct.head_policies == plan.head_policies);
}

TEST_CASE("plan evaluation agrees with truncated enumeration") {
  const auto m = random_tabular_mdp(4, 2, 12);
  const auto s = DiscountSchedule({0.8, 0.6});
  const EtaWeights w{0.0, 1.0};
  const auto plan = h_close_control(m, s, w, 3);
  const double exact = evaluate_plan(m, plan, s, w).eta_return;
  const double truncated = oracle::truncated_return_oracle(m, plan.policy(), s, w, 300);
  CHECK(exact == doctest::Approx(truncated).epsilon(1e-10));
}

TEST_CASE("degenerate depth: h-close value is the geometric optimum") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto m = random_tabular_mdp(6, 3, seed);
    const auto vstar = geometric_policy_iteration(m, 0.9).value;
    for (int H : {0, 1, 5, 20}) {
      const auto plan = h_close_control(m, DiscountSchedule({0.9}), EtaWeights{1.0}, H);
      CHECK(sup_diff(plan.head_values[0], vstar) <= 1e-10);
    }
  }
}
