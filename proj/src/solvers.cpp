#include "ddrl/solvers.hpp"

#include <cmath>
#include <stdexcept>
#include <string>
#include <unordered_map>

#include "policy_system.hpp"

namespace ddrl {

namespace {

using RowMajorMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// r(s,a) + scale * sum_s' P(s'|s,a) v(s') as an S x A matrix.
Eigen::MatrixXd backup(const TabularMdp& mdp, const Eigen::VectorXd& v, double reward_scale = 1.0) {
  const Eigen::VectorXd flat = mdp.transitions() * v;
  Eigen::MatrixXd q = Eigen::Map<const RowMajorMatrix>(flat.data(), mdp.n_states(), mdp.n_actions());
  q += reward_scale * mdp.rewards();
  return q;
}

double stationary_average(const SparseRows& P, const Eigen::VectorXd& r_pi,
                          Eigen::VectorXd mu, int length) {
  double total = 0.0;
  for (int t = 0; t < length; ++t) {
    total += mu.dot(r_pi);
    mu = P.transpose() * mu;
  }
  return total / length;
}

}  // namespace

ValueStack d_deep_policy_evaluation(const TabularMdp& mdp, const StationaryPolicy& policy,
                                    const DiscountSchedule& schedule,
                                    const EvalOptions& options) {
  detail::PolicySystem system(policy_transition(mdp, policy), options, mdp.n_actions());
  const Eigen::VectorXd r_pi = policy_reward(mdp, policy);
  ValueStack stack{schedule, {}, {}};
  Eigen::VectorXd shallower = Eigen::VectorXd::Zero(mdp.n_states());
  for (int d = 0; d <= schedule.depth(); ++d) {
    const Eigen::VectorXd b = r_pi + system.matrix() * shallower;
    Eigen::VectorXd v = system.solve(schedule.gamma(d), b);
    shallower += schedule.gamma(d) * v;
    stack.q.push_back(backup(mdp, shallower));
    stack.v.push_back(std::move(v));
  }
  return stack;
}

Eigen::MatrixXd apply_depth_operator(const TabularMdp& mdp, const StationaryPolicy& policy,
                                     const ValueStack& lower, int d,
                                     const Eigen::MatrixXd& q) {
  if (d < 0 || d > lower.depth()) throw std::out_of_range("depth out of range");
  if (q.rows() != mdp.n_states() || q.cols() != mdp.n_actions()) {
    throw std::invalid_argument("q table shape does not match the MDP");
  }
  Eigen::VectorXd next = lower.schedule.gamma(d) *
                         (policy.matrix().array() * q.array()).rowwise().sum().matrix();
  for (int i = 0; i < d; ++i) next += lower.schedule.gamma(i) * lower.v[static_cast<size_t>(i)];
  return backup(mdp, next);
}

double decomposition_residual(const TabularMdp& mdp, const StationaryPolicy& policy,
                              const ValueStack& stack) {
  double worst = 0.0;
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(mdp.n_states());
  for (int d = 0; d <= stack.depth(); ++d) {
    const auto& q = stack.q[static_cast<size_t>(d)];
    const auto& v = stack.v[static_cast<size_t>(d)];
    acc += stack.schedule.gamma(d) * v;
    const double scale = std::max(1.0, q.cwiseAbs().maxCoeff());
    const double q_err = (q - backup(mdp, acc)).cwiseAbs().maxCoeff();
    const Eigen::VectorXd v_from_q = (policy.matrix().array() * q.array()).rowwise().sum();
    const double v_err = (v - v_from_q).cwiseAbs().maxCoeff();
    worst = std::max(worst, std::max(q_err, v_err) / scale);
  }
  return worst;
}

std::vector<int> greedy_actions(const Eigen::MatrixXd& q) {
  std::vector<int> out(static_cast<size_t>(q.rows()));
  for (int s = 0; s < q.rows(); ++s) {
    const double best = q.row(s).maxCoeff();
    const double threshold = best - 1e-12 * std::max(1.0, std::abs(best));
    int a = 0;
    while (q(s, a) < threshold) ++a;
    out[static_cast<size_t>(s)] = a;
  }
  return out;
}

StationaryPolicy boltzmann_policy(const Eigen::MatrixXd& q, double alpha) {
  if (!(alpha > 0.0)) throw std::invalid_argument("Boltzmann temperature must be positive");
  Eigen::MatrixXd probs(q.rows(), q.cols());
  for (int s = 0; s < q.rows(); ++s) {
    const double best = q.row(s).maxCoeff();
    probs.row(s) = ((q.row(s).array() - best) / alpha).exp();
    probs.row(s) /= probs.row(s).sum();
  }
  return StationaryPolicy(std::move(probs));
}

std::uint64_t policy_hash(std::span<const int> actions) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (int a : actions) {
    h ^= static_cast<std::uint64_t>(static_cast<std::uint32_t>(a));
    h *= 0x100000001b3ULL;
  }
  return h;
}

double bellman_optimality_residual(const TabularMdp& mdp, double gamma,
                                   const Eigen::VectorXd& value) {
  const Eigen::MatrixXd q = backup(mdp, gamma * value);
  return (q.rowwise().maxCoeff() - value).cwiseAbs().maxCoeff();
}

GeometricSolution geometric_policy_iteration(const TabularMdp& mdp, double gamma, double tol,
                                             const EvalOptions& eval) {
  if (!(gamma > 0.0 && gamma < 1.0)) throw std::invalid_argument("gamma must lie in (0,1)");
  std::vector<int> actions = greedy_actions(mdp.rewards());
  std::vector<std::vector<int>> seen;
  Eigen::VectorXd v;
  Eigen::MatrixXd q;
  int iterations = 0;
  while (true) {
    ++iterations;
    detail::PolicySystem system(policy_transition(mdp, actions), eval, mdp.n_actions());
    Eigen::VectorXd r_pi(mdp.n_states());
    for (int s = 0; s < mdp.n_states(); ++s) r_pi(s) = mdp.reward(s, actions[static_cast<size_t>(s)]);
    v = system.solve(gamma, r_pi);
    q = backup(mdp, gamma * v);
    auto next = greedy_actions(q);
    if (next == actions) break;
    // Rounding can make two equally good policies alternate; stop at the
    // first repeat.
    bool repeated = false;
    for (const auto& old : seen) repeated = repeated || old == next;
    if (repeated || iterations > 100'000) break;
    seen.push_back(actions);
    actions = std::move(next);
  }
  GeometricSolution out{StationaryPolicy::deterministic(actions, mdp.n_actions()), v, q,
                        iterations, bellman_optimality_residual(mdp, gamma, v)};
  if (out.residual > tol * std::max(1.0, v.cwiseAbs().maxCoeff())) {
    throw std::runtime_error("policy iteration stopped with Bellman residual " +
                             std::to_string(out.residual));
  }
  return out;
}

std::string_view to_string(GpiInit init) {
  return init == GpiInit::random ? "random" : "geometric";
}

std::string_view to_string(GpiOutcome outcome) {
  switch (outcome) {
    case GpiOutcome::converged: return "converged";
    case GpiOutcome::cycle_detected: return "cycle_detected";
    case GpiOutcome::iteration_cap: return "iteration_cap";
  }
  return "?";
}

GpiInit parse_gpi_init(std::string_view text) {
  if (text == "random") return GpiInit::random;
  if (text == "geometric") return GpiInit::geometric;
  throw std::invalid_argument("unknown init mode '" + std::string(text) +
                              "' (expected random or geometric)");
}

GpiReport generalized_policy_iteration(const TabularMdp& mdp, const DiscountSchedule& schedule,
                                       const EtaWeights& weights, const GpiOptions& options) {
  if (weights.depth() != schedule.depth()) {
    throw std::invalid_argument("weight vector and schedule depths differ");
  }
  if (options.max_iters < 1) throw std::invalid_argument("max_iters must be >= 1");
  if (options.alpha < 0.0) throw std::invalid_argument("alpha must be >= 0");

  const int S = mdp.n_states();
  const int A = mdp.n_actions();
  std::vector<int> actions;
  if (options.initial_actions) {
    actions = *options.initial_actions;
    if (static_cast<int>(actions.size()) != S) {
      throw std::invalid_argument("initial policy must cover every state");
    }
  } else if (options.init == GpiInit::random) {
    Rng rng(derive_seed(options.seed, 0));
    actions.resize(static_cast<size_t>(S));
    for (int& a : actions) a = rng.below(A);
  } else {
    actions = geometric_policy_iteration(mdp, schedule.gamma(0), 1e-8, options.eval)
                  .policy.greedy_actions();
  }

  StationaryPolicy policy = StationaryPolicy::deterministic(actions, A);
  std::vector<std::vector<int>> history{actions};
  std::unordered_multimap<std::uint64_t, size_t> index{{policy_hash(actions), 0}};

  GpiReport report{policy, ValueStack{schedule, {}, {}}, 0, GpiOutcome::iteration_cap, {}, {}, {}};
  for (int it = 0; it < options.max_iters; ++it) {
    ValueStack stack = d_deep_policy_evaluation(mdp, policy, schedule, options.eval);
    report.eta_trace.push_back(mdp.initial_distribution().dot(stack.eta_v(weights)));
    if (options.avg_trace_length > 0) {
      report.avg_trace.push_back(stationary_average(policy_transition(mdp, policy),
                                                    policy_reward(mdp, policy),
                                                    mdp.initial_distribution(),
                                                    options.avg_trace_length));
    }
    report.iterations = it + 1;
    const Eigen::MatrixXd q = stack.eta_q(weights);
    report.final_policy = policy;
    report.final_stack = std::move(stack);

    if (options.alpha > 0.0) {
      StationaryPolicy next = boltzmann_policy(q, options.alpha);
      const double change = (next.matrix() - policy.matrix()).cwiseAbs().maxCoeff();
      if (change < 1e-9) {
        report.outcome = GpiOutcome::converged;
        return report;
      }
      policy = std::move(next);
      continue;
    }

    auto next = greedy_actions(q);
    if (next == history.back()) {
      report.outcome = GpiOutcome::converged;
      return report;
    }
    const std::uint64_t h = policy_hash(next);
    auto [lo, hi] = index.equal_range(h);
    for (auto found = lo; found != hi; ++found) {
      if (history[found->second] != next) continue;
      report.outcome = GpiOutcome::cycle_detected;
      for (size_t k = found->second; k < history.size(); ++k) {
        report.cycle.push_back(policy_hash(history[k]));
      }
      return report;
    }
    index.emplace(h, history.size());
    policy = StationaryPolicy::deterministic(next, A);
    history.push_back(std::move(next));
  }
  report.outcome = GpiOutcome::iteration_cap;
  return report;
}

NonStationaryPolicy HClosePlan::policy() const {
  return NonStationaryPolicy(head_policies, tail_policy);
}

double HClosePlan::value(const Eigen::VectorXd& initial) const {
  return initial.dot(head_values.front());
}

double eta_total_mass(const DiscountSchedule& schedule, const EtaWeights& weights) {
  if (weights.depth() != schedule.depth()) {
    throw std::invalid_argument("weight vector and schedule depths differ");
  }
  double total = 0.0;
  for (int d = 0; d <= schedule.depth(); ++d) total += weights[d] * schedule.total_mass(d);
  return total;
}

HCloseSolver::HCloseSolver(TabularMdp mdp, DiscountSchedule schedule, EtaWeights weights,
                           double tol, const EvalOptions& eval)
    : mdp_(std::move(mdp)),
      schedule_(std::move(schedule)),
      weights_(std::move(weights)),
      eval_(eval),
      geometric_(geometric_policy_iteration(mdp_, schedule_.gamma(0), tol, eval)) {
  if (weights_.depth() != schedule_.depth()) {
    throw std::invalid_argument("weight vector and schedule depths differ");
  }
}

HClosePlan HCloseSolver::plan(int H) const {
  if (H < 0) throw std::invalid_argument("horizon must be >= 0");
  const GammaMatrix gamma = gamma_matrix(schedule_);
  const PowerTrace trace = power_trace(weights_, gamma, H);

  HClosePlan plan;
  plan.horizon = H;
  plan.stage_coefficients = horizon_coefficients(weights_, gamma, H);
  plan.tail_policy = geometric_.policy.greedy_actions();
  plan.v_star = geometric_.value;
  plan.tail_scale = trace.initial_norm * trace.cumulative_products.back();
  plan.tail_value = plan.tail_scale * plan.v_star;
  plan.head_policies.resize(static_cast<size_t>(H) + 1);
  plan.head_values.resize(static_cast<size_t>(H) + 2);
  plan.head_values.back() = plan.tail_value;
  for (int t = H; t >= 0; --t) {
    const Eigen::MatrixXd q =
        backup(mdp_, plan.head_values[static_cast<size_t>(t) + 1],
               plan.stage_coefficients[static_cast<size_t>(t)]);
    auto actions = greedy_actions(q);
    Eigen::VectorXd v(mdp_.n_states());
    for (int s = 0; s < mdp_.n_states(); ++s) v(s) = q(s, actions[static_cast<size_t>(s)]);
    plan.head_policies[static_cast<size_t>(t)] = std::move(actions);
    plan.head_values[static_cast<size_t>(t)] = std::move(v);
  }
  return plan;
}

const ValueStack& HCloseSolver::tail_stack() const {
  if (!tail_stack_) {
    tail_stack_ = d_deep_policy_evaluation(mdp_, geometric_.policy, schedule_, eval_);
  }
  return *tail_stack_;
}

namespace {

PlanEvaluation evaluate_with_tail(const TabularMdp& mdp, const HClosePlan& plan,
                                  const DiscountSchedule& schedule, const EtaWeights& weights,
                                  const ValueStack& tail, int avg_length) {
  if (weights.depth() != schedule.depth() || tail.depth() != schedule.depth()) {
    throw std::invalid_argument("weight vector and schedule depths differ");
  }
  const int H = plan.horizon;
  const PhiTable table = build_phi_table(schedule, H);
  const auto& P = mdp.transitions();
  Eigen::VectorXd mu = mdp.initial_distribution();
  PlanEvaluation out;
  for (int t = 0; t <= H; ++t) {
    const auto& actions = plan.head_policies[static_cast<size_t>(t)];
    Eigen::VectorXd next = Eigen::VectorXd::Zero(mdp.n_states());
    double expected_reward = 0.0;
    for (int s = 0; s < mdp.n_states(); ++s) {
      if (mu(s) == 0.0) continue;
      const int a = actions[static_cast<size_t>(s)];
      expected_reward += mu(s) * mdp.reward(s, a);
      for (SparseRows::InnerIterator it(P, mdp.row(s, a)); it; ++it) {
        next(it.col()) += mu(s) * it.value();
      }
    }
    out.eta_return += table.eta(weights.vector(), t) * expected_reward;
    mu = std::move(next);
  }
  // From step H+1 on the tail policy sees the weights Gamma^{H+1} w.
  const EtaWeights shifted = apply_f(weights, gamma_matrix(schedule), H + 1);
  for (int d = 0; d <= schedule.depth(); ++d) {
    out.eta_return += shifted[d] * mu.dot(tail.v[static_cast<size_t>(d)]);
  }
  out.eta_normalized = out.eta_return / eta_total_mass(schedule, weights);
  out.average_return = occupancy_average_return(mdp, plan.policy(), avg_length);
  return out;
}

}  // namespace

PlanEvaluation HCloseSolver::evaluate(const HClosePlan& plan, int avg_length) const {
  if (plan.tail_policy != geometric_.policy.greedy_actions()) {
    return evaluate_plan(mdp_, plan, schedule_, weights_, avg_length);
  }
  return evaluate_with_tail(mdp_, plan, schedule_, weights_, tail_stack(), avg_length);
}

HClosePlan h_close_control(const TabularMdp& mdp, const DiscountSchedule& schedule,
                           const EtaWeights& weights, int H, double tol) {
  return HCloseSolver(mdp, schedule, weights, tol).plan(H);
}

PlanEvaluation evaluate_plan(const TabularMdp& mdp, const HClosePlan& plan,
                             const DiscountSchedule& schedule, const EtaWeights& weights,
                             int avg_length) {
  const ValueStack tail = d_deep_policy_evaluation(
      mdp, StationaryPolicy::deterministic(plan.tail_policy, mdp.n_actions()), schedule);
  return evaluate_with_tail(mdp, plan, schedule, weights, tail, avg_length);
}

}  // namespace ddrl
