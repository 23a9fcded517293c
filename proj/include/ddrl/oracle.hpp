#pragma once

// Brute-force references for small instances. Nothing here calls the solver
// or evaluation code it is used to check; it only shares the data types.

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>

#include "ddrl/discount.hpp"
#include "ddrl/mdp.hpp"

namespace ddrl::oracle {

struct OracleBudget {
  std::uint64_t max_enumeration = 10'000'000;
};

class BudgetExceeded : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Sum over all (a_0..a_d) >= 0 with sum t of prod gamma_i^{a_i}.
double phi_bruteforce(const DiscountSchedule& schedule, int d, int t,
                      const OracleBudget& budget = {});
/// binom(t + d, d), saturating at UINT64_MAX.
std::uint64_t composition_count(int d, int t);

/// Phi_d(t) filled through Phi_d(t) = sum_{i<=d} gamma_i Phi_i(t-1); row d, column t.
Eigen::MatrixXd phi_by_depth_sum(const DiscountSchedule& schedule, int horizon);

/// Per-depth values V_d of a deterministic policy by dense LU solves.
std::vector<Eigen::VectorXd> dense_depth_values(const TabularMdp& mdp,
                                                const std::vector<int>& actions,
                                                const DiscountSchedule& schedule);

struct StationaryOptimum {
  std::vector<int> actions;
  double eta_return = 0.0;
  std::uint64_t enumerated = 0;
};

/// Best deterministic stationary policy for L_eta at p_0 among all A^S;
/// the first maximizer in enumeration order wins ties.
StationaryOptimum brute_force_stationary_optimum(const TabularMdp& mdp,
                                                 const DiscountSchedule& schedule,
                                                 const EtaWeights& weights,
                                                 const OracleBudget& budget = {});

/// Optimal gamma-discounted values, the state-wise max over all A^S
/// deterministic policies.
Eigen::VectorXd brute_force_geometric_values(const TabularMdp& mdp, double gamma,
                                             const OracleBudget& budget = {});

/// ||Gamma^{H+1} w||_2 and the stage coefficients <1, Gamma^t w>, from dense
/// matrix powers.
double dense_tail_scale(const DiscountSchedule& schedule, const EtaWeights& weights, int H);
std::vector<double> dense_stage_coefficients(const DiscountSchedule& schedule,
                                             const EtaWeights& weights, int H);

struct PrefixOptimum {
  /// Best objective per start state.
  Eigen::VectorXd values;
  /// p_0 . values.
  double value = 0.0;
};

/// For every start state, enumerates all action sequences a_0..a_H and
/// maximizes sum_t <1, Gamma^t w> r_t + tail_value(s_{H+1}).
PrefixOptimum brute_force_prefix_optimum(const TabularMdp& mdp, const DiscountSchedule& schedule,
                                         const EtaWeights& weights, int H,
                                         const Eigen::VectorXd& tail_value,
                                         const OracleBudget& budget = {});

/// sum_{t<=T} eta(t) E[r_t] by explicit occupancy loops.
double truncated_return_oracle(const TabularMdp& mdp, const StationaryPolicy& policy,
                               const DiscountSchedule& schedule, const EtaWeights& weights,
                               int T, std::optional<Eigen::VectorXd> start = std::nullopt);
double truncated_return_oracle(const TabularMdp& mdp, const NonStationaryPolicy& policy,
                               const DiscountSchedule& schedule, const EtaWeights& weights,
                               int T, std::optional<Eigen::VectorXd> start = std::nullopt);

/// max over non-stationary policies of sum_{t<=T} eta(t) E[r_t], per start
/// state, by time-indexed backward induction.
Eigen::VectorXd truncated_optimal_values(const TabularMdp& mdp, const DiscountSchedule& schedule,
                                         const EtaWeights& weights, int T);

}  // namespace ddrl::oracle
