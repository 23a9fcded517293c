#pragma once

// Geometric policy iteration, D-deep policy evaluation, the tabular
// generalized policy iteration loop and H-close non-stationary control.

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "ddrl/discount.hpp"
#include "ddrl/mdp.hpp"

namespace ddrl {

enum class EvalMethod { automatic, direct, iterative };

struct EvalOptions {
  /// automatic picks direct solves up to 2e5 state-action pairs.
  EvalMethod method = EvalMethod::automatic;
  /// Sup-norm stopping tolerance for Gauss-Seidel sweeps.
  double tol = 1e-10;
  int max_sweeps = 1'000'000;
};

/// Q_d and V_d for d = 0..D, each the fixed point of the depth-d operator
/// given the shallower depths.
ValueStack d_deep_policy_evaluation(const TabularMdp& mdp, const StationaryPolicy& policy,
                                    const DiscountSchedule& schedule,
                                    const EvalOptions& options = {});

/// One application of the depth-d operator to q:
///   (T q)(s,a) = r(s,a) + E_{s',a'}[sum_{i<d} gamma_i Q_i(s',a') + gamma_d q(s',a')]
/// where Q_i are taken from `lower` (only depths < d are read).
Eigen::MatrixXd apply_depth_operator(const TabularMdp& mdp, const StationaryPolicy& policy,
                                     const ValueStack& lower, int d,
                                     const Eigen::MatrixXd& q);

/// max_d sup |Q_d - r - P sum_{i<=d} gamma_i V_i| / max(1, sup |Q_d|), together
/// with the consistency of V_d with Q_d under the policy.
double decomposition_residual(const TabularMdp& mdp, const StationaryPolicy& policy,
                              const ValueStack& stack);

/// Smallest action index whose value is within 1e-12 (relative) of the row max.
std::vector<int> greedy_actions(const Eigen::MatrixXd& q);
/// pi(a|s) proportional to exp(q(s,a) / alpha).
StationaryPolicy boltzmann_policy(const Eigen::MatrixXd& q, double alpha);
/// FNV-1a over the action indices.
std::uint64_t policy_hash(std::span<const int> actions);

struct GeometricSolution {
  StationaryPolicy policy;
  Eigen::VectorXd value;
  Eigen::MatrixXd q;
  int iterations = 0;
  /// sup |max_a (r + gamma P V) - V| at the returned value.
  double residual = 0.0;
};

GeometricSolution geometric_policy_iteration(const TabularMdp& mdp, double gamma,
                                             double tol = 1e-10,
                                             const EvalOptions& eval = {});

double bellman_optimality_residual(const TabularMdp& mdp, double gamma,
                                   const Eigen::VectorXd& value);

enum class GpiInit { random, geometric };
enum class GpiOutcome { converged, cycle_detected, iteration_cap };

std::string_view to_string(GpiInit init);
std::string_view to_string(GpiOutcome outcome);
GpiInit parse_gpi_init(std::string_view text);

struct GpiOptions {
  GpiInit init = GpiInit::geometric;
  std::uint64_t seed = 0;
  /// 0 gives the hard greedy update, > 0 the Boltzmann update.
  double alpha = 0.0;
  int max_iters = 5000;
  EvalOptions eval;
  /// When > 0, each iterate's exact average return over this many steps is
  /// recorded in avg_trace.
  int avg_trace_length = 0;
  /// Overrides `init` with an explicit deterministic starting policy.
  std::optional<std::vector<int>> initial_actions;
};

struct GpiReport {
  StationaryPolicy final_policy;
  ValueStack final_stack;
  /// Number of policy evaluations performed.
  int iterations = 0;
  GpiOutcome outcome = GpiOutcome::iteration_cap;
  /// Hashes of the policies on the detected cycle, in visiting order.
  std::vector<std::uint64_t> cycle;
  /// L_eta at p_0 of every evaluated policy.
  std::vector<double> eta_trace;
  std::vector<double> avg_trace;
};

GpiReport generalized_policy_iteration(const TabularMdp& mdp, const DiscountSchedule& schedule,
                                       const EtaWeights& weights,
                                       const GpiOptions& options = {});

struct HClosePlan {
  int horizon = 0;
  /// head_policies[t][s] for t = 0..H.
  std::vector<std::vector<int>> head_policies;
  /// head_values[t] = V_t for t = 0..H+1; the last entry is the scaled tail.
  std::vector<Eigen::VectorXd> head_values;
  std::vector<int> tail_policy;
  Eigen::VectorXd v_star;
  /// prod_{k<=H} ||Gamma v_k|| with v_0 = w, i.e. ||Gamma^{H+1} w||_2.
  double tail_scale = 0.0;
  Eigen::VectorXd tail_value;
  /// <1, Gamma^t w> for t = 0..H.
  std::vector<double> stage_coefficients;

  NonStationaryPolicy policy() const;
  /// Proxy value p_0 . V_0.
  double value(const Eigen::VectorXd& initial) const;
};

struct PlanEvaluation {
  /// Exact L_eta of the executed plan at p_0.
  double eta_return = 0.0;
  /// eta_return divided by the total eta mass sum_d w_d prod_{i<=d} 1/(1-gamma_i).
  double eta_normalized = 0.0;
  /// Exact expected (1/T) sum_{t<T} r_t.
  double average_return = 0.0;
};

/// Caches the geometric solution, and the per-depth values of its policy, so
/// a sweep over H only pays for the backward recursion.
class HCloseSolver {
 public:
  HCloseSolver(TabularMdp mdp, DiscountSchedule schedule, EtaWeights weights,
               double tol = 1e-10, const EvalOptions& eval = {});

  const TabularMdp& mdp() const { return mdp_; }
  const DiscountSchedule& schedule() const { return schedule_; }
  const EtaWeights& weights() const { return weights_; }
  const GeometricSolution& geometric() const { return geometric_; }

  HClosePlan plan(int H) const;
  /// avg_length is the trajectory length of the average return.
  PlanEvaluation evaluate(const HClosePlan& plan, int avg_length = 4000) const;

 private:
  const ValueStack& tail_stack() const;

  TabularMdp mdp_;
  DiscountSchedule schedule_;
  EtaWeights weights_;
  EvalOptions eval_;
  GeometricSolution geometric_;
  mutable std::optional<ValueStack> tail_stack_;
};

HClosePlan h_close_control(const TabularMdp& mdp, const DiscountSchedule& schedule,
                           const EtaWeights& weights, int H, double tol = 1e-10);

PlanEvaluation evaluate_plan(const TabularMdp& mdp, const HClosePlan& plan,
                             const DiscountSchedule& schedule, const EtaWeights& weights,
                             int avg_length = 4000);

/// sum_d w_d prod_{i<=d} 1/(1-gamma_i).
double eta_total_mass(const DiscountSchedule& schedule, const EtaWeights& weights);

}  // namespace ddrl
