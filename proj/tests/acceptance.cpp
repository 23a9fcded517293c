// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <sstream>
#include <string>

#include "ddrl/harness.hpp"
#include "ddrl/oracle.hpp"

using namespace ddrl;

namespace {

struct Outcome {
  bool passed = false;
  std::string detail;
};

double rel_err(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

double sup_diff(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return (a - b).cwiseAbs().maxCoeff();
}

std::string fmt(double v) {
  std::ostringstream out;
  out << v;
  return out.str();
}

DiscountSchedule random_schedule(Rng& rng, int depth, double lo, double hi) {
  std::vector<double> g;
  for (int d = 0; d <= depth; ++d) g.push_back(lo + (hi - lo) * rng.uniform());
  return DiscountSchedule(g);
}

std::vector<int> random_actions(Rng& rng, int S, int A) {
  std::vector<int> out;
  for (int s = 0; s < S; ++s) out.push_back(rng.below(A));
  return out;
}

Outcome weight_family() {
  Rng rng(2024);
  double worst_oracle = 0.0, worst_identity = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const auto s = random_schedule(rng, 4, 0.05, 0.999);
    const auto table = build_phi_table(s, 16);
    const Eigen::MatrixXd depth_sum = oracle::phi_by_depth_sum(s, 16);
    for (int d = 0; d <= 4; ++d) {
      for (int t = 0; t <= 16; ++t) {
        const double phi = table.phi(d, t);
        worst_oracle = std::max(worst_oracle, rel_err(phi, oracle::phi_bruteforce(s, d, t)));
        worst_identity = std::max(worst_identity, rel_err(phi, depth_sum(d, t)));
        if (d > 0 && t > 0) {
          worst_identity = std::max(
              worst_identity, rel_err(phi, table.phi(d - 1, t) + s.gamma(d) * table.phi(d, t - 1)));
        }
        if (d > 0 && d <= 3 && t <= 12) {
          double conv = 0.0;
          for (int k = 0; k <= t; ++k) conv += std::pow(s.gamma(d), k) * table.phi(d - 1, t - k);
          worst_identity = std::max(worst_identity, rel_err(phi, conv));
        }
      }
    }
  }
  return {worst_oracle <= 1e-12 && worst_identity <= 1e-12,
          "max rel err vs compositions " + fmt(worst_oracle) + ", identities " +
              fmt(worst_identity)};
}

Outcome contraction_and_decomposition() {
  double worst_residual = 0.0, worst_excess = -1e300;
  for (std::uint64_t trial = 0; trial < 20; ++trial) {
    Rng rng(derive_seed(77, trial));
    const int S = 2 + rng.below(7);
    const int A = 1 + rng.below(4);
    const int D = rng.below(4);
    const auto m = random_tabular_mdp(S, A, derive_seed(78, trial));
    const auto s = random_schedule(rng, D, 0.3, 0.9);
    const auto pi = StationaryPolicy::deterministic(random_actions(rng, S, A), A);
    const auto stack = d_deep_policy_evaluation(m, pi, s);
    worst_residual = std::max(worst_residual, decomposition_residual(m, pi, stack));
    const int T = 300;
    const auto table = build_phi_table(s, T);
    const double rmax = m.rewards().cwiseAbs().maxCoeff();
    for (int d = 0; d <= D; ++d) {
      const auto w = EtaWeights::unit(D, d);
      const double truncated = oracle::truncated_return_oracle(m, pi, s, w, T);
      const double exact = m.initial_distribution().dot(stack.v[static_cast<size_t>(d)]);
      const double bound = eta_tail_bound(table, w, T, rmax);
      worst_excess = std::max(worst_excess, std::abs(exact - truncated) - bound - 1e-10);
    }
  }
  return {worst_residual <= 1e-10 && worst_excess <= 0.0,
          "max residual " + fmt(worst_residual) + ", max excess over tail bound " +
              fmt(std::max(worst_excess, 0.0))};
}

Outcome degenerate_reduction() {
  bool same_policy = true;
  double worst_value = 0.0, worst_plan = 0.0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto m = random_tabular_mdp(8, 3, derive_seed(5, seed));
    const auto pi = geometric_policy_iteration(m, 0.95);
    for (auto init : {GpiInit::random, GpiInit::geometric}) {
      GpiOptions opt;
      opt.init = init;
      opt.seed = seed;
      const auto rep = generalized_policy_iteration(m, DiscountSchedule({0.95}), EtaWeights{1.0}, opt);
      same_policy = same_policy && rep.final_policy == pi.policy;
      worst_value = std::max(worst_value, sup_diff(rep.final_stack.v[0], pi.value));
    }
    for (int H : {0, 1, 5, 20}) {
      const auto plan = h_close_control(m, DiscountSchedule({0.95}), EtaWeights{1.0}, H);
      worst_plan = std::max(worst_plan, sup_diff(plan.head_values[0], pi.value));
    }
  }
  return {same_policy && worst_value <= 1e-10 && worst_plan <= 1e-10,
          std::string(same_policy ? "same policies" : "policies differ") + ", value sup-diff " +
              fmt(worst_value) + ", plan sup-diff " + fmt(worst_plan)};
}

Outcome hclose_oracle() {
  double worst = 0.0;
  for (std::uint64_t trial = 0; trial < 10; ++trial) {
    Rng rng(derive_seed(31, trial));
    const int S = 2 + rng.below(3);
    const int A = 1 + rng.below(2);
    const int D = rng.below(3);
    const int H = rng.below(5);
    const auto m = random_tabular_mdp(S, A, derive_seed(32, trial), true);
    const auto s = random_schedule(rng, D, 0.5, 0.95);
    Eigen::VectorXd w(D + 1);
    for (int d = 0; d <= D; ++d) w(d) = rng.uniform();
    const EtaWeights weights(w);
    const auto plan = h_close_control(m, s, weights, H);
    const auto brute = oracle::brute_force_prefix_optimum(m, s, weights, H, plan.tail_value);
    worst = std::max(worst, sup_diff(plan.head_values[0], brute.values) /
                                std::max(1.0, brute.values.cwiseAbs().maxCoeff()));
  }
  return {worst <= 1e-9, "max rel diff " + fmt(worst)};
}

Outcome corridor_blackwell() {
  const Environment env = load_environment("corridor");
  const auto geo = geometric_policy_iteration(env.mdp, 0.99);
  const double geo_success = success_rate(*env.corridor, geo.policy);

  ExperimentConfig c;
  c.env = "corridor";
  c.depths = {0, 1, 2, 4, 8};
  c.one_minus_gamma = {1e-1, 1e-2, 1e-3, 1e-4, 1e-6, 1e-8};
  c.heatmap_runs = 10;
  const CsvTable table = run_corridor_heatmap(c);
  const int d_col = table.column("D"), eps_col = table.column("one_minus_gamma"),
            best_col = table.column("best_success");
  std::string found;
  for (const auto& row : table.rows) {
    const int D = std::stoi(row[static_cast<size_t>(d_col)]);
    const double eps = std::stod(row[static_cast<size_t>(eps_col)]);
    if (D >= 1 && eps <= 1e-4 && std::stod(row[static_cast<size_t>(best_col)]) == 1.0) {
      found = "D=" + std::to_string(D) + " 1-gamma=" + fmt(eps);
      break;
    }
  }
  const bool ok = geo_success >= 0.45 && geo_success <= 0.55 && !found.empty();
  return {ok, "geometric success " + fmt(geo_success) + ", best-of-10 = 1 at " +
                  (found.empty() ? "none" : found)};
}

Outcome umaze_deceptive() {
  const Environment env = load_environment("u_maze");
  const GridMdp& grid = *env.grid;
  const int S = env.mdp.n_states();
  const int good = grid.states_of_kind(CellKind::good).front();
  const int deceptive = grid.states_of_kind(CellKind::deceptive).front();
  const auto absorbing = env.mdp.absorbing_states();

  const auto geo = geometric_policy_iteration(env.mdp, 0.99);
  const NonStationaryPolicy geo_policy(geo.policy.greedy_actions());
  int deceptive_starts = 0;
  for (int s = 0; s < S; ++s) {
    if (!absorbing[static_cast<size_t>(s)] &&
        rollout_absorbing_state(env.mdp, geo_policy, s, S) == deceptive) {
      ++deceptive_starts;
    }
  }

  const HCloseSolver solver(env.mdp, DiscountSchedule::linear(5), EtaWeights::unit(5, 5));
  auto all_good = [&](int H) {
    const auto policy = solver.plan(H).policy();
    for (int s = 0; s < S; ++s) {
      if (absorbing[static_cast<size_t>(s)]) continue;
      if (rollout_absorbing_state(env.mdp, policy, s, S + H + 1) != good) return false;
    }
    return true;
  };
  int first = -1;
  for (int H = 0; H <= 3 * S && first < 0; ++H) {
    if (all_good(H)) first = H;
  }
  const bool ok = deceptive_starts > 0 && first >= 0 && all_good(3 * S);
  return {ok, std::to_string(deceptive_starts) + " geometric starts absorb at +0.9; plan reaches +1 from every start for H >= " +
                  (first >= 0 ? std::to_string(first) : "none") + " (3S = " +
                  std::to_string(3 * S) + ")"};
}

Outcome horizon_plateau() {
  int ordered = 0;
  bool all_plateau = true;
  std::string detail;
  for (const auto& id : bundled_maze_ids()) {
    ExperimentConfig c;
    c.env = id;
    c.depths = {5, 10, 15};
    // Every shortest route in a maze is shorter than its state count.
    c.horizon_max = load_environment(id).mdp.n_states();
    const CsvTable table = run_horizon_sweep(c);
    const int d_col = table.column("D"), kind_col = table.column("kind"),
              v_col = table.column("L_eta_normalized");
    std::map<int, std::vector<double>> series;
    for (const auto& row : table.rows) {
      if (row[static_cast<size_t>(kind_col)] != "plan") continue;
      series[std::stoi(row[static_cast<size_t>(d_col)])].push_back(
          std::stod(row[static_cast<size_t>(v_col)]));
    }
    std::map<int, int> onset;
    detail += id + " onsets";
    for (const auto& [D, values] : series) {
      const auto o = plateau_onset(values, 1e-9);
      all_plateau = all_plateau && o.has_value();
      onset[D] = o ? *o : -1;
      detail += " D" + std::to_string(D) + "=" + (o ? std::to_string(*o) : "none");
    }
    detail += "; ";
    if (onset[15] >= 0 && onset[5] >= 0 && onset[15] <= onset[5]) ++ordered;
  }
  return {all_plateau && ordered >= 2, detail + "ordered on " + std::to_string(ordered) + "/3"};
}

Outcome power_limit() {
  double worst_dist = 0.0, worst_norm = 0.0;
  for (int D : {1, 5, 9}) {
    const auto trace = power_trace(EtaWeights::unit(D, D), gamma_matrix(DiscountSchedule::linear(D)),
                                   100000);
    Eigen::VectorXd e0 = Eigen::VectorXd::Zero(D + 1);
    e0(0) = 1.0;
    double best = 1e300;
    for (const auto& v : trace.normalized_vectors) best = std::min(best, (v - e0).norm());
    worst_dist = std::max(worst_dist, best);
    worst_norm = std::max(worst_norm, std::abs(trace.step_norms.back() - 0.99));
  }
  return {worst_dist < 1e-6 && worst_norm <= 1e-6,
          "min |v_n - e_0| " + fmt(worst_dist) + ", |step norm - 0.99| " + fmt(worst_norm)};
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    double budget_seconds;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria{
      {"weight family", 5, weight_family},
      {"contraction and decomposition", 10, contraction_and_decomposition},
      {"degenerate reduction", 5, degenerate_reduction},
      {"h-close oracle equivalence", 30, hclose_oracle},
      {"corridor blackwell", 600, corridor_blackwell},
      {"u-maze deceptive reward", 120, umaze_deceptive},
      {"horizon plateau", 600, horizon_plateau},
      {"power-iteration limit", 1, power_limit},
  };
  int failures = 0;
  for (size_t i = 0; i < criteria.size(); ++i) {
    const auto start = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = criteria[i].run();
    } catch (const std::exception& e) {
      out = {false, std::string("exception: ") + e.what()};
    }
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = seconds <= criteria[i].budget_seconds;
    const bool passed = out.passed && in_time;
    failures += passed ? 0 : 1;
    std::printf("%s %zu %s: %s [%.2fs of %.0fs]\n", passed ? "PASS" : "FAIL", i + 1,
                criteria[i].name, out.detail.c_str(), seconds, criteria[i].budget_seconds);
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
