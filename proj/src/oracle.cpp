#include "ddrl/oracle.hpp"

#include <cmath>
#include <limits>
#include <string>

#include <Eigen/LU>

namespace ddrl::oracle {

namespace {

constexpr std::uint64_t kSaturated = std::numeric_limits<std::uint64_t>::max();

std::uint64_t saturating_power(std::uint64_t base, std::uint64_t exponent) {
  std::uint64_t out = 1;
  for (std::uint64_t i = 0; i < exponent; ++i) {
    if (base != 0 && out > kSaturated / base) return kSaturated;
    out *= base;
  }
  return out;
}

void require_budget(std::uint64_t count, const OracleBudget& budget, const std::string& what) {
  if (count > budget.max_enumeration) {
    throw BudgetExceeded(what + " needs " +
                         (count == kSaturated ? std::string("more than 2^64")
                                              : std::to_string(count)) +
                         " items, budget is " + std::to_string(budget.max_enumeration));
  }
}

double composition_sum(const DiscountSchedule& schedule, int i, int d, int remaining,
                       double prod) {
  if (i == d) return prod * std::pow(schedule.gamma(d), remaining);
  double total = 0.0;
  double factor = 1.0;
  for (int a = 0; a <= remaining; ++a) {
    total += composition_sum(schedule, i + 1, d, remaining - a, prod * factor);
    factor *= schedule.gamma(i);
  }
  return total;
}

Eigen::MatrixXd dense_gamma(const DiscountSchedule& schedule) {
  const int n = schedule.depth() + 1;
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(n, n);
  for (int r = 0; r < n; ++r) {
    for (int c = r; c < n; ++c) g(r, c) = schedule.gamma(r);
  }
  return g;
}

Eigen::MatrixXd dense_policy_matrix(const TabularMdp& mdp, const std::vector<int>& actions) {
  const int S = mdp.n_states();
  Eigen::MatrixXd P = Eigen::MatrixXd::Zero(S, S);
  for (int s = 0; s < S; ++s) {
    for (SparseRows::InnerIterator it(mdp.transitions(), mdp.row(s, actions[static_cast<size_t>(s)])); it; ++it) {
      P(s, it.col()) += it.value();
    }
  }
  return P;
}

// Calls visit(actions) for every deterministic policy, odometer order with
// state 0 the fastest digit.
template <typename Visit>
std::uint64_t for_each_policy(const TabularMdp& mdp, const OracleBudget& budget, Visit visit) {
  const auto count = saturating_power(static_cast<std::uint64_t>(mdp.n_actions()),
                                      static_cast<std::uint64_t>(mdp.n_states()));
  require_budget(count, budget, "stationary policy enumeration");
  std::vector<int> actions(static_cast<size_t>(mdp.n_states()), 0);
  for (std::uint64_t k = 0; k < count; ++k) {
    visit(actions);
    for (auto& a : actions) {
      if (++a < mdp.n_actions()) break;
      a = 0;
    }
  }
  return count;
}

void require_deterministic(const TabularMdp& mdp) {
  const auto& P = mdp.transitions();
  for (int row = 0; row < P.rows(); ++row) {
    int count = 0;
    bool one = false;
    for (SparseRows::InnerIterator it(P, row); it; ++it) {
      ++count;
      one = it.value() == 1.0;
    }
    if (count != 1 || !one) {
      throw std::invalid_argument("prefix enumeration needs deterministic dynamics");
    }
  }
}

Eigen::VectorXd eta_sequence(const DiscountSchedule& schedule, const EtaWeights& weights, int T) {
  if (weights.depth() != schedule.depth()) {
    throw std::invalid_argument("weight vector and schedule depths differ");
  }
  return phi_by_depth_sum(schedule, T).transpose() * weights.vector();
}

}  // namespace

std::uint64_t composition_count(int d, int t) {
  // binom(t+d, d) built incrementally; each partial product is itself a
  // binomial coefficient so the division is exact.
  std::uint64_t c = 1;
  for (int i = 1; i <= d; ++i) {
    const auto num = static_cast<std::uint64_t>(t + i);
    if (c > kSaturated / num) return kSaturated;
    c = c * num / static_cast<std::uint64_t>(i);
  }
  return c;
}

double phi_bruteforce(const DiscountSchedule& schedule, int d, int t, const OracleBudget& budget) {
  if (d < 0 || d > schedule.depth()) throw std::out_of_range("depth out of range");
  if (t < 0) throw std::invalid_argument("t must be >= 0");
  require_budget(composition_count(d, t), budget, "composition enumeration");
  return composition_sum(schedule, 0, d, t, 1.0);
}

Eigen::MatrixXd phi_by_depth_sum(const DiscountSchedule& schedule, int horizon) {
  const int n = schedule.depth() + 1;
  Eigen::MatrixXd phi(n, horizon + 1);
  phi.col(0).setOnes();
  for (int t = 1; t <= horizon; ++t) {
    for (int d = 0; d < n; ++d) {
      double s = 0.0;
      for (int i = 0; i <= d; ++i) s += schedule.gamma(i) * phi(i, t - 1);
      phi(d, t) = s;
    }
  }
  return phi;
}

std::vector<Eigen::VectorXd> dense_depth_values(const TabularMdp& mdp,
                                                const std::vector<int>& actions,
                                                const DiscountSchedule& schedule) {
  const int S = mdp.n_states();
  const Eigen::MatrixXd P = dense_policy_matrix(mdp, actions);
  Eigen::VectorXd r(S);
  for (int s = 0; s < S; ++s) r(s) = mdp.reward(s, actions[static_cast<size_t>(s)]);
  std::vector<Eigen::VectorXd> values;
  Eigen::VectorXd shallower = Eigen::VectorXd::Zero(S);
  for (int d = 0; d <= schedule.depth(); ++d) {
    const Eigen::MatrixXd A = Eigen::MatrixXd::Identity(S, S) - schedule.gamma(d) * P;
    Eigen::VectorXd v = A.partialPivLu().solve(r + P * shallower);
    shallower += schedule.gamma(d) * v;
    values.push_back(std::move(v));
  }
  return values;
}

StationaryOptimum brute_force_stationary_optimum(const TabularMdp& mdp,
                                                 const DiscountSchedule& schedule,
                                                 const EtaWeights& weights,
                                                 const OracleBudget& budget) {
  if (weights.depth() != schedule.depth()) {
    throw std::invalid_argument("weight vector and schedule depths differ");
  }
  StationaryOptimum best;
  best.eta_return = -std::numeric_limits<double>::infinity();
  best.enumerated = for_each_policy(mdp, budget, [&](const std::vector<int>& actions) {
    const auto values = dense_depth_values(mdp, actions, schedule);
    double L = 0.0;
    for (int d = 0; d <= schedule.depth(); ++d) {
      L += weights[d] * mdp.initial_distribution().dot(values[static_cast<size_t>(d)]);
    }
    if (L > best.eta_return) {
      best.eta_return = L;
      best.actions = actions;
    }
  });
  return best;
}

Eigen::VectorXd brute_force_geometric_values(const TabularMdp& mdp, double gamma,
                                             const OracleBudget& budget) {
  const DiscountSchedule schedule({gamma});
  Eigen::VectorXd best = Eigen::VectorXd::Constant(mdp.n_states(),
                                                   -std::numeric_limits<double>::infinity());
  for_each_policy(mdp, budget, [&](const std::vector<int>& actions) {
    best = best.cwiseMax(dense_depth_values(mdp, actions, schedule).front());
  });
  return best;
}

double dense_tail_scale(const DiscountSchedule& schedule, const EtaWeights& weights, int H) {
  const Eigen::MatrixXd G = dense_gamma(schedule);
  Eigen::MatrixXd M = Eigen::MatrixXd::Identity(G.rows(), G.cols());
  for (int k = 0; k <= H; ++k) M = G * M;
  return (M * weights.vector()).norm();
}

std::vector<double> dense_stage_coefficients(const DiscountSchedule& schedule,
                                             const EtaWeights& weights, int H) {
  const Eigen::MatrixXd G = dense_gamma(schedule);
  Eigen::MatrixXd M = Eigen::MatrixXd::Identity(G.rows(), G.cols());
  std::vector<double> c;
  for (int t = 0; t <= H; ++t) {
    c.push_back((M * weights.vector()).sum());
    M = G * M;
  }
  return c;
}

PrefixOptimum brute_force_prefix_optimum(const TabularMdp& mdp, const DiscountSchedule& schedule,
                                         const EtaWeights& weights, int H,
                                         const Eigen::VectorXd& tail_value,
                                         const OracleBudget& budget) {
  if (H < 0) throw std::invalid_argument("horizon must be >= 0");
  if (tail_value.size() != mdp.n_states()) {
    throw std::invalid_argument("tail value must cover every state");
  }
  const auto per_state = saturating_power(static_cast<std::uint64_t>(mdp.n_actions()),
                                          static_cast<std::uint64_t>(H) + 1);
  const auto total = per_state > kSaturated / static_cast<std::uint64_t>(mdp.n_states())
                         ? kSaturated
                         : per_state * static_cast<std::uint64_t>(mdp.n_states());
  require_budget(total, budget, "prefix enumeration");
  require_deterministic(mdp);

  const auto c = dense_stage_coefficients(schedule, weights, H);
  const int A = mdp.n_actions();
  const int steps = H + 1;
  PrefixOptimum out;
  out.values.resize(mdp.n_states());
  std::vector<int> seq(static_cast<size_t>(steps), 0);
  for (int start = 0; start < mdp.n_states(); ++start) {
    double best = -std::numeric_limits<double>::infinity();
    std::fill(seq.begin(), seq.end(), 0);
    for (std::uint64_t k = 0; k < per_state; ++k) {
      int s = start;
      double total_value = 0.0;
      for (int t = 0; t < steps; ++t) {
        const int a = seq[static_cast<size_t>(t)];
        total_value += c[static_cast<size_t>(t)] * mdp.reward(s, a);
        SparseRows::InnerIterator it(mdp.transitions(), mdp.row(s, a));
        s = static_cast<int>(it.col());
      }
      total_value += tail_value(s);
      best = std::max(best, total_value);
      for (auto& a : seq) {
        if (++a < A) break;
        a = 0;
      }
    }
    out.values(start) = best;
  }
  out.value = mdp.initial_distribution().dot(out.values);
  return out;
}

double truncated_return_oracle(const TabularMdp& mdp, const StationaryPolicy& policy,
                               const DiscountSchedule& schedule, const EtaWeights& weights,
                               int T, std::optional<Eigen::VectorXd> start) {
  if (T < 0) throw std::invalid_argument("T must be >= 0");
  const Eigen::VectorXd eta = eta_sequence(schedule, weights, T);
  const int S = mdp.n_states();
  std::vector<double> mu(static_cast<size_t>(S));
  const Eigen::VectorXd p0 = start ? *start : mdp.initial_distribution();
  for (int s = 0; s < S; ++s) mu[static_cast<size_t>(s)] = p0(s);
  double total = 0.0;
  for (int t = 0; t <= T; ++t) {
    std::vector<double> next(static_cast<size_t>(S), 0.0);
    double expected = 0.0;
    for (int s = 0; s < S; ++s) {
      const double m = mu[static_cast<size_t>(s)];
      if (m == 0.0) continue;
      for (int a = 0; a < mdp.n_actions(); ++a) {
        const double pa = policy.prob(s, a);
        if (pa == 0.0) continue;
        expected += m * pa * mdp.reward(s, a);
        for (SparseRows::InnerIterator it(mdp.transitions(), mdp.row(s, a)); it; ++it) {
          next[static_cast<size_t>(it.col())] += m * pa * it.value();
        }
      }
    }
    total += eta(t) * expected;
    mu = std::move(next);
  }
  return total;
}

double truncated_return_oracle(const TabularMdp& mdp, const NonStationaryPolicy& policy,
                               const DiscountSchedule& schedule, const EtaWeights& weights,
                               int T, std::optional<Eigen::VectorXd> start) {
  if (T < 0) throw std::invalid_argument("T must be >= 0");
  const Eigen::VectorXd eta = eta_sequence(schedule, weights, T);
  const int S = mdp.n_states();
  std::vector<double> mu(static_cast<size_t>(S));
  const Eigen::VectorXd p0 = start ? *start : mdp.initial_distribution();
  for (int s = 0; s < S; ++s) mu[static_cast<size_t>(s)] = p0(s);
  double total = 0.0;
  for (int t = 0; t <= T; ++t) {
    std::vector<double> next(static_cast<size_t>(S), 0.0);
    double expected = 0.0;
    for (int s = 0; s < S; ++s) {
      const double m = mu[static_cast<size_t>(s)];
      if (m == 0.0) continue;
      const int a = policy.action(s, t);
      expected += m * mdp.reward(s, a);
      for (SparseRows::InnerIterator it(mdp.transitions(), mdp.row(s, a)); it; ++it) {
        next[static_cast<size_t>(it.col())] += m * it.value();
      }
    }
    total += eta(t) * expected;
    mu = std::move(next);
  }
  return total;
}

Eigen::VectorXd truncated_optimal_values(const TabularMdp& mdp, const DiscountSchedule& schedule,
                                         const EtaWeights& weights, int T) {
  if (T < 0) throw std::invalid_argument("T must be >= 0");
  const Eigen::VectorXd eta = eta_sequence(schedule, weights, T);
  const int S = mdp.n_states();
  Eigen::VectorXd W = Eigen::VectorXd::Zero(S);
  for (int t = T; t >= 0; --t) {
    Eigen::VectorXd next(S);
    for (int s = 0; s < S; ++s) {
      double best = -std::numeric_limits<double>::infinity();
      for (int a = 0; a < mdp.n_actions(); ++a) {
        double v = eta(t) * mdp.reward(s, a);
        for (SparseRows::InnerIterator it(mdp.transitions(), mdp.row(s, a)); it; ++it) {
          v += it.value() * W(it.col());
        }
        best = std::max(best, v);
      }
      next(s) = best;
    }
    W = std::move(next);
  }
  return W;
}

}  // namespace ddrl::oracle
