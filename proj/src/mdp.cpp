#include "ddrl/mdp.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace ddrl {

namespace {

constexpr double kStochasticTol = 1e-12;

void check_state(int s, int n, const char* what) {
  if (s < 0 || s >= n) {
    throw std::out_of_range(std::string(what) + " index " + std::to_string(s) +
                            " out of range [0," + std::to_string(n) + ")");
  }
}

}  // namespace

TabularMdp::TabularMdp(int n_states, int n_actions,
                       std::span<const TransitionEntry> transitions,
                       Eigen::MatrixXd rewards, Eigen::VectorXd initial)
    : n_states_(n_states),
      n_actions_(n_actions),
      transitions_(static_cast<Eigen::Index>(n_states) * n_actions, n_states),
      rewards_(std::move(rewards)),
      initial_(std::move(initial)) {
  if (n_states <= 0 || n_actions <= 0) {
    throw std::invalid_argument("MDP needs at least one state and one action");
  }
  if (rewards_.rows() != n_states || rewards_.cols() != n_actions) {
    throw std::invalid_argument("reward table must be S x A");
  }
  if (initial_.size() != n_states) {
    throw std::invalid_argument("initial distribution must have S entries");
  }
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(transitions.size());
  for (const auto& e : transitions) {
    check_state(e.state, n_states, "state");
    check_state(e.action, n_actions, "action");
    check_state(e.next, n_states, "next state");
    if (e.prob == 0.0) continue;
    triplets.emplace_back(row(e.state, e.action), e.next, e.prob);
  }
  transitions_.setFromTriplets(triplets.begin(), triplets.end());
  transitions_.makeCompressed();
}

Eigen::VectorXd TabularMdp::reward_vector() const {
  Eigen::VectorXd r(static_cast<Eigen::Index>(n_states_) * n_actions_);
  for (int s = 0; s < n_states_; ++s) {
    for (int a = 0; a < n_actions_; ++a) r(row(s, a)) = rewards_(s, a);
  }
  return r;
}

bool TabularMdp::is_deterministic() const {
  for (Eigen::Index r = 0; r < transitions_.rows(); ++r) {
    SparseRows::InnerIterator it(transitions_, r);
    if (!it || it.value() != 1.0) return false;
    ++it;
    if (it) return false;
  }
  return true;
}

int TabularMdp::next_state(int s, int a) const {
  SparseRows::InnerIterator it(transitions_, row(s, a));
  if (!it || it.value() != 1.0) {
    throw std::logic_error("next_state called on a stochastic transition");
  }
  const int next = static_cast<int>(it.col());
  ++it;
  if (it) throw std::logic_error("next_state called on a stochastic transition");
  return next;
}

std::vector<bool> TabularMdp::absorbing_states() const {
  std::vector<bool> absorbing(static_cast<size_t>(n_states_), true);
  for (int s = 0; s < n_states_; ++s) {
    for (int a = 0; a < n_actions_ && absorbing[static_cast<size_t>(s)]; ++a) {
      SparseRows::InnerIterator it(transitions_, row(s, a));
      const bool self_loop = it && it.col() == s && it.value() == 1.0 && !(++it);
      if (!self_loop) absorbing[static_cast<size_t>(s)] = false;
    }
  }
  return absorbing;
}

TabularMdp TabularMdp::with_initial(Eigen::VectorXd initial) const {
  if (initial.size() != n_states_) {
    throw std::invalid_argument("initial distribution must have S entries");
  }
  TabularMdp copy = *this;
  copy.initial_ = std::move(initial);
  return copy;
}

ValidationReport validate(const TabularMdp& mdp) {
  ValidationReport report;
  const auto& P = mdp.transitions();
  for (int s = 0; s < mdp.n_states(); ++s) {
    for (int a = 0; a < mdp.n_actions(); ++a) {
      double sum = 0.0;
      bool negative = false;
      for (SparseRows::InnerIterator it(P, mdp.row(s, a)); it; ++it) {
        if (!(it.value() >= 0.0)) negative = true;
        sum += it.value();
      }
      const std::string where = "(s=" + std::to_string(s) + ",a=" + std::to_string(a) + ")";
      if (negative) report.violations.push_back("negative transition probability at " + where);
      if (!(std::abs(sum - 1.0) <= kStochasticTol)) {
        std::ostringstream msg;
        msg.precision(17);
        msg << "transition row " << where << " sums to " << sum;
        report.violations.push_back(msg.str());
      }
      if (!std::isfinite(mdp.reward(s, a))) {
        report.violations.push_back("non-finite reward at " + where);
      }
    }
  }
  const auto& p0 = mdp.initial_distribution();
  if ((p0.array() < 0.0).any() || !p0.allFinite()) {
    report.violations.push_back("initial distribution has negative or non-finite entries");
  }
  if (!(std::abs(p0.sum() - 1.0) <= kStochasticTol)) {
    std::ostringstream msg;
    msg.precision(17);
    msg << "initial distribution sums to " << p0.sum();
    report.violations.push_back(msg.str());
  }
  return report;
}

void require_valid(const TabularMdp& mdp) {
  const auto report = validate(mdp);
  if (report.ok()) return;
  std::string msg = "invalid MDP:";
  for (size_t i = 0; i < report.violations.size() && i < 5; ++i) {
    msg += " " + report.violations[i] + ";";
  }
  if (report.violations.size() > 5) {
    msg += " (" + std::to_string(report.violations.size() - 5) + " more)";
  }
  throw std::invalid_argument(msg);
}

Eigen::VectorXd uniform_distribution(int n) {
  if (n <= 0) throw std::invalid_argument("uniform distribution needs n > 0");
  return Eigen::VectorXd::Constant(n, 1.0 / n);
}

// ---------------------------------------------------------------------------

StationaryPolicy::StationaryPolicy(Eigen::MatrixXd probs) : probs_(std::move(probs)) {
  if (probs_.rows() == 0 || probs_.cols() == 0) {
    throw std::invalid_argument("empty policy");
  }
  for (Eigen::Index s = 0; s < probs_.rows(); ++s) {
    if (!probs_.row(s).allFinite() || (probs_.row(s).array() < 0.0).any() ||
        !(std::abs(probs_.row(s).sum() - 1.0) <= kStochasticTol)) {
      throw std::invalid_argument("policy row " + std::to_string(s) +
                                  " is not a probability distribution");
    }
  }
}

StationaryPolicy StationaryPolicy::deterministic(std::span<const int> actions,
                                                 int n_actions) {
  Eigen::MatrixXd probs =
      Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(actions.size()), n_actions);
  for (size_t s = 0; s < actions.size(); ++s) {
    check_state(actions[s], n_actions, "action");
    probs(static_cast<Eigen::Index>(s), actions[s]) = 1.0;
  }
  return StationaryPolicy(std::move(probs));
}

StationaryPolicy StationaryPolicy::uniform(int n_states, int n_actions) {
  return StationaryPolicy(Eigen::MatrixXd::Constant(n_states, n_actions, 1.0 / n_actions));
}

bool StationaryPolicy::is_deterministic() const {
  for (Eigen::Index s = 0; s < probs_.rows(); ++s) {
    if (probs_.row(s).maxCoeff() != 1.0) return false;
  }
  return true;
}

std::vector<int> StationaryPolicy::greedy_actions() const {
  std::vector<int> actions(static_cast<size_t>(probs_.rows()));
  for (Eigen::Index s = 0; s < probs_.rows(); ++s) {
    Eigen::Index best = 0;
    for (Eigen::Index a = 1; a < probs_.cols(); ++a) {
      if (probs_(s, a) > probs_(s, best)) best = a;
    }
    actions[static_cast<size_t>(s)] = static_cast<int>(best);
  }
  return actions;
}

int StationaryPolicy::action(int s) const {
  for (Eigen::Index a = 0; a < probs_.cols(); ++a) {
    if (probs_(s, a) == 1.0) return static_cast<int>(a);
  }
  throw std::logic_error("policy is not deterministic at state " + std::to_string(s));
}

NonStationaryPolicy::NonStationaryPolicy(std::vector<std::vector<int>> head,
                                         std::vector<int> tail)
    : head_(std::move(head)), tail_(std::move(tail)) {
  for (const auto& step : head_) {
    if (step.size() != tail_.size()) {
      throw std::invalid_argument("non-stationary policy steps must cover every state");
    }
  }
}

SparseRows policy_transition(const TabularMdp& mdp, const StationaryPolicy& policy) {
  if (policy.n_states() != mdp.n_states() || policy.n_actions() != mdp.n_actions()) {
    throw std::invalid_argument("policy shape does not match the MDP");
  }
  const auto& P = mdp.transitions();
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(static_cast<size_t>(P.nonZeros()));
  for (int s = 0; s < mdp.n_states(); ++s) {
    for (int a = 0; a < mdp.n_actions(); ++a) {
      const double pa = policy.prob(s, a);
      if (pa == 0.0) continue;
      for (SparseRows::InnerIterator it(P, mdp.row(s, a)); it; ++it) {
        triplets.emplace_back(s, static_cast<int>(it.col()), pa * it.value());
      }
    }
  }
  SparseRows out(mdp.n_states(), mdp.n_states());
  out.setFromTriplets(triplets.begin(), triplets.end());
  return out;
}

SparseRows policy_transition(const TabularMdp& mdp, std::span<const int> actions) {
  if (static_cast<int>(actions.size()) != mdp.n_states()) {
    throw std::invalid_argument("action vector must cover every state");
  }
  const auto& P = mdp.transitions();
  std::vector<Eigen::Triplet<double>> triplets;
  for (int s = 0; s < mdp.n_states(); ++s) {
    for (SparseRows::InnerIterator it(P, mdp.row(s, actions[static_cast<size_t>(s)])); it; ++it) {
      triplets.emplace_back(s, static_cast<int>(it.col()), it.value());
    }
  }
  SparseRows out(mdp.n_states(), mdp.n_states());
  out.setFromTriplets(triplets.begin(), triplets.end());
  return out;
}

Eigen::VectorXd policy_reward(const TabularMdp& mdp, const StationaryPolicy& policy) {
  return (mdp.rewards().array() * policy.matrix().array()).rowwise().sum();
}

Eigen::MatrixXd ValueStack::eta_q(const EtaWeights& weights) const {
  if (weights.depth() != depth()) {
    throw std::invalid_argument("weight vector and value stack depths differ");
  }
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(q.front().rows(), q.front().cols());
  for (int d = 0; d <= depth(); ++d) out += weights[d] * q[static_cast<size_t>(d)];
  return out;
}

Eigen::VectorXd ValueStack::eta_v(const EtaWeights& weights) const {
  if (weights.depth() != depth()) {
    throw std::invalid_argument("weight vector and value stack depths differ");
  }
  Eigen::VectorXd out = Eigen::VectorXd::Zero(v.front().size());
  for (int d = 0; d <= depth(); ++d) out += weights[d] * v[static_cast<size_t>(d)];
  return out;
}

// ---------------------------------------------------------------------------

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

int Rng::below(int n) {
  if (n <= 0) throw std::invalid_argument("Rng::below needs n > 0");
  const auto bound = static_cast<std::uint64_t>(n);
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t x;
  do {
    x = engine_();
  } while (x >= limit);
  return static_cast<int>(x % bound);
}

Trajectory simulate(const TabularMdp& mdp, const StationaryPolicy& policy,
                    int length, std::uint64_t seed, std::optional<int> start) {
  if (length < 1) throw std::invalid_argument("trajectory length must be >= 1");
  if (policy.n_states() != mdp.n_states() || policy.n_actions() != mdp.n_actions()) {
    throw std::invalid_argument("policy shape does not match the MDP");
  }
  Rng rng(seed);
  Trajectory traj;
  traj.states.reserve(static_cast<size_t>(length));
  traj.actions.reserve(static_cast<size_t>(length));
  traj.rewards.reserve(static_cast<size_t>(length));

  int s = start ? *start : rng.categorical(mdp.initial_distribution());
  check_state(s, mdp.n_states(), "start state");
  const auto& P = mdp.transitions();
  std::vector<double> next_probs;
  std::vector<int> next_states;
  for (int t = 0; t < length; ++t) {
    const int a = rng.categorical(policy.matrix().row(s));
    traj.states.push_back(s);
    traj.actions.push_back(a);
    traj.rewards.push_back(mdp.reward(s, a));
    next_probs.clear();
    next_states.clear();
    for (SparseRows::InnerIterator it(P, mdp.row(s, a)); it; ++it) {
      next_states.push_back(static_cast<int>(it.col()));
      next_probs.push_back(it.value());
    }
    s = next_states[static_cast<size_t>(rng.categorical(next_probs))];
  }
  return traj;
}

double exact_eta_return(const TabularMdp& mdp, const StationaryPolicy& policy,
                        const ValueStack& stack, const EtaWeights& weights) {
  if (policy.n_states() != mdp.n_states() || stack.v.front().size() != mdp.n_states()) {
    throw std::invalid_argument("value stack does not match the MDP");
  }
  return mdp.initial_distribution().dot(stack.eta_v(weights));
}

double eta_tail_bound(const PhiTable& table, const EtaWeights& weights,
                      int horizon, double reward_bound) {
  const auto& schedule = table.schedule();
  double bound = 0.0;
  for (int d = 0; d < weights.vector().size(); ++d) {
    const double mass = schedule.total_mass(d);
    double partial = 0.0;
    for (int t = 0; t <= horizon; ++t) partial += table.phi(d, t);
    // Summation error of `partial` is below (horizon + 1) ulp of the mass.
    const double slack = 4.0 * (horizon + 1) * 2.2e-16 * mass;
    bound += std::abs(weights[d]) * std::max(0.0, mass - partial + slack);
  }
  return bound * reward_bound;
}

TruncatedReturn truncated_eta_return(const TabularMdp& mdp,
                                     const StationaryPolicy& policy,
                                     const PhiTable& table,
                                     const EtaWeights& weights, int horizon) {
  if (horizon < 0 || horizon > table.horizon()) {
    throw std::invalid_argument("truncation horizon exceeds the phi table");
  }
  const SparseRows P = policy_transition(mdp, policy);
  const Eigen::VectorXd r_pi = policy_reward(mdp, policy);
  Eigen::VectorXd mu = mdp.initial_distribution();
  TruncatedReturn out;
  for (int t = 0; t <= horizon; ++t) {
    out.value += table.eta(weights.vector(), t) * mu.dot(r_pi);
    if (t < horizon) mu = P.transpose() * mu;
  }
  out.tail_bound = eta_tail_bound(table, weights, horizon, mdp.rewards().cwiseAbs().maxCoeff());
  return out;
}

double occupancy_average_return(const TabularMdp& mdp,
                                const NonStationaryPolicy& policy, int length) {
  if (length < 1) throw std::invalid_argument("length must be >= 1");
  if (policy.n_states() != mdp.n_states()) {
    throw std::invalid_argument("policy does not match the MDP");
  }
  const auto& P = mdp.transitions();
  const SparseRows tail_P = policy_transition(mdp, policy.tail());
  Eigen::VectorXd tail_r(mdp.n_states());
  for (int s = 0; s < mdp.n_states(); ++s) tail_r(s) = mdp.reward(s, policy.tail()[static_cast<size_t>(s)]);

  Eigen::VectorXd mu = mdp.initial_distribution();
  double total = 0.0;
  for (int t = 0; t < length; ++t) {
    if (t < policy.head_length()) {
      Eigen::VectorXd next = Eigen::VectorXd::Zero(mdp.n_states());
      for (int s = 0; s < mdp.n_states(); ++s) {
        if (mu(s) == 0.0) continue;
        const int a = policy.action(s, t);
        total += mu(s) * mdp.reward(s, a);
        for (SparseRows::InnerIterator it(P, mdp.row(s, a)); it; ++it) {
          next(it.col()) += mu(s) * it.value();
        }
      }
      mu = std::move(next);
    } else {
      total += mu.dot(tail_r);
      mu = tail_P.transpose() * mu;
    }
  }
  return total / length;
}

AverageReturn empirical_average_return(const TabularMdp& mdp,
                                       const StationaryPolicy& policy,
                                       int length, int n_runs,
                                       std::uint64_t seed) {
  if (length < 1 || n_runs < 1) {
    throw std::invalid_argument("length and n_runs must be >= 1");
  }
  std::vector<double> means(static_cast<size_t>(n_runs));
  for (int r = 0; r < n_runs; ++r) {
    const auto traj = simulate(mdp, policy, length, derive_seed(seed, static_cast<std::uint64_t>(r)));
    double sum = 0.0;
    for (double x : traj.rewards) sum += x;
    means[static_cast<size_t>(r)] = sum / length;
  }
  AverageReturn out;
  for (double m : means) out.mean += m;
  out.mean /= n_runs;
  if (n_runs > 1) {
    double var = 0.0;
    for (double m : means) var += (m - out.mean) * (m - out.mean);
    var /= (n_runs - 1);
    out.std_error = std::sqrt(var / n_runs);
  }
  return out;
}

}  // namespace ddrl
