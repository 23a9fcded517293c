#pragma once

// Finite MDPs, stationary and non-stationary policies, and exact / simulated
// return evaluation under a delayed-discount criterion.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "ddrl/discount.hpp"

namespace ddrl {

using SparseRows = Eigen::SparseMatrix<double, Eigen::RowMajor>;

struct TransitionEntry {
  int state;
  int action;
  int next;
  double prob;
};

/// Transitions are stored as an (S*A) x S row-major sparse matrix; row
/// s * A + a is the next-state distribution of (s, a). Construction only
/// checks shapes and indices; stochasticity is checked by validate().
class TabularMdp {
 public:
  TabularMdp(int n_states, int n_actions,
             std::span<const TransitionEntry> transitions,
             Eigen::MatrixXd rewards, Eigen::VectorXd initial);

  int n_states() const { return n_states_; }
  int n_actions() const { return n_actions_; }
  int row(int s, int a) const { return s * n_actions_ + a; }

  const SparseRows& transitions() const { return transitions_; }
  /// S x A reward table r(s, a).
  const Eigen::MatrixXd& rewards() const { return rewards_; }
  double reward(int s, int a) const { return rewards_(s, a); }
  /// Rewards flattened to length S*A in row order.
  Eigen::VectorXd reward_vector() const;
  const Eigen::VectorXd& initial_distribution() const { return initial_; }

  /// True when every (s, a) row has a single successor with probability 1.
  bool is_deterministic() const;
  /// Successor of (s, a); throws std::logic_error on a stochastic row.
  int next_state(int s, int a) const;
  /// States whose every action self-loops with probability 1.
  std::vector<bool> absorbing_states() const;

  TabularMdp with_initial(Eigen::VectorXd initial) const;

 private:
  int n_states_;
  int n_actions_;
  SparseRows transitions_;
  Eigen::MatrixXd rewards_;
  Eigen::VectorXd initial_;
};

struct ValidationReport {
  std::vector<std::string> violations;
  bool ok() const { return violations.empty(); }
};

ValidationReport validate(const TabularMdp& mdp);
/// Throws std::invalid_argument listing the violations when validate() fails.
void require_valid(const TabularMdp& mdp);

/// Uniform probability vector of length n.
Eigen::VectorXd uniform_distribution(int n);

class StationaryPolicy {
 public:
  /// S x A row-stochastic matrix of action probabilities.
  explicit StationaryPolicy(Eigen::MatrixXd probs);

  static StationaryPolicy deterministic(std::span<const int> actions,
                                        int n_actions);
  static StationaryPolicy uniform(int n_states, int n_actions);

  int n_states() const { return static_cast<int>(probs_.rows()); }
  int n_actions() const { return static_cast<int>(probs_.cols()); }
  double prob(int s, int a) const { return probs_(s, a); }
  const Eigen::MatrixXd& matrix() const { return probs_; }

  bool is_deterministic() const;
  /// Most probable action per state, smallest index on ties.
  std::vector<int> greedy_actions() const;
  /// Action of a deterministic policy; throws std::logic_error otherwise.
  int action(int s) const;

  bool operator==(const StationaryPolicy& other) const {
    return probs_ == other.probs_;
  }

 private:
  Eigen::MatrixXd probs_;
};

/// head[t][s] is the action at step t < head_length(); afterwards tail[s].
class NonStationaryPolicy {
 public:
  NonStationaryPolicy(std::vector<std::vector<int>> head, std::vector<int> tail);
  explicit NonStationaryPolicy(std::vector<int> stationary)
      : NonStationaryPolicy({}, std::move(stationary)) {}

  int n_states() const { return static_cast<int>(tail_.size()); }
  int head_length() const { return static_cast<int>(head_.size()); }
  int action(int s, int t) const {
    return t < head_length() ? head_[static_cast<size_t>(t)][static_cast<size_t>(s)]
                             : tail_[static_cast<size_t>(s)];
  }
  const std::vector<std::vector<int>>& head() const { return head_; }
  const std::vector<int>& tail() const { return tail_; }

 private:
  std::vector<std::vector<int>> head_;
  std::vector<int> tail_;
};

/// P_pi as an S x S sparse matrix: P_pi(s, s') = sum_a pi(a|s) P(s'|s,a).
SparseRows policy_transition(const TabularMdp& mdp, const StationaryPolicy& policy);
SparseRows policy_transition(const TabularMdp& mdp, std::span<const int> actions);
/// r_pi(s) = sum_a pi(a|s) r(s,a).
Eigen::VectorXd policy_reward(const TabularMdp& mdp, const StationaryPolicy& policy);

/// Per-depth values of one policy: q[d] is S x A, v[d] has length S.
struct ValueStack {
  DiscountSchedule schedule;
  std::vector<Eigen::MatrixXd> q;
  std::vector<Eigen::VectorXd> v;

  int depth() const { return schedule.depth(); }
  /// Q_eta = sum_d w_d Q_d; w must have depth + 1 entries.
  Eigen::MatrixXd eta_q(const EtaWeights& weights) const;
  Eigen::VectorXd eta_v(const EtaWeights& weights) const;
};

// ---------------------------------------------------------------------------
// Randomness

/// splitmix64 finalizer; used to derive independent per-run seeds.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index);

/// mt19937_64 with a platform-independent uniform draw.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  /// Uniform integer in [0, n) by rejection sampling.
  int below(int n);
  /// Index drawn from non-negative weights summing to ~1.
  template <typename Vec>
  int categorical(const Vec& probs) {
    const double u = uniform();
    double acc = 0.0;
    int last = -1;
    for (int i = 0; i < static_cast<int>(probs.size()); ++i) {
      if (probs[i] <= 0.0) continue;
      acc += probs[i];
      last = i;
      if (u < acc) return i;
    }
    return last;
  }

 private:
  std::mt19937_64 engine_;
};

// ---------------------------------------------------------------------------
// Evaluation

struct Trajectory {
  std::vector<int> states;
  std::vector<int> actions;
  std::vector<double> rewards;
};

/// Samples `length` steps. Without `start`, s_0 is drawn from p_0.
Trajectory simulate(const TabularMdp& mdp, const StationaryPolicy& policy,
                    int length, std::uint64_t seed,
                    std::optional<int> start = std::nullopt);

/// L_eta = sum_s p_0(s) sum_d w_d V_d(s) for a stack computed for `policy`.
double exact_eta_return(const TabularMdp& mdp, const StationaryPolicy& policy,
                        const ValueStack& stack, const EtaWeights& weights);

struct TruncatedReturn {
  double value = 0.0;
  /// Bound on |sum_{t>T} eta(t) r_t|, from the exact total mass of each Phi_d.
  double tail_bound = 0.0;
};

/// E[sum_{t<=T} eta(t) r_t] by forward propagation of the occupancy
/// distribution under `policy`.
TruncatedReturn truncated_eta_return(const TabularMdp& mdp,
                                     const StationaryPolicy& policy,
                                     const PhiTable& table,
                                     const EtaWeights& weights, int horizon);

/// Bound on sum_{t>T} |eta(t)| * max|r|.
double eta_tail_bound(const PhiTable& table, const EtaWeights& weights,
                      int horizon, double reward_bound);

/// Exact (1/T) sum_{t<T} E[r_t] under the non-stationary policy, by
/// occupancy propagation from p_0.
double occupancy_average_return(const TabularMdp& mdp,
                                const NonStationaryPolicy& policy, int length);

struct AverageReturn {
  double mean = 0.0;
  double std_error = 0.0;
};

/// Mean over runs of (1/length) sum_t r_t, starts drawn from p_0; run r uses
/// derive_seed(seed, r).
AverageReturn empirical_average_return(const TabularMdp& mdp,
                                       const StationaryPolicy& policy,
                                       int length, int n_runs,
                                       std::uint64_t seed);

// ---------------------------------------------------------------------------
// Serialization
//
//   states <S>
//   actions <A>
//   p0 <s> <prob>
//   t <s> <a> <s'> <prob>
//   r <s> <a> <reward>
//
// Lines starting with '#' are comments. Only nonzero entries are written;
// numbers use 17 significant digits so a round trip is exact.

void write_mdp(std::ostream& out, const TabularMdp& mdp);
TabularMdp read_mdp(std::istream& in);

}  // namespace ddrl
