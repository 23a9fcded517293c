#pragma once

// Delayed-discount weight family Phi_d(t), the Gamma shift operator and its
// power iteration.
//
// Phi_d(t) is the sum, over all ways of writing t as a_0 + ... + a_d with
// non-negative a_i, of prod_i gamma_i^{a_i}. Phi_0(t) = gamma_0^t recovers the
// geometric discount. A criterion eta(t) = sum_d w_d Phi_d(t) is represented by
// its coefficient vector w; shifting eta by one time step maps w to Gamma * w.

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>

namespace ddrl {

class DiscountSchedule {
 public:
  /// gammas[d] is the discount of depth d; depth() == gammas.size() - 1.
  explicit DiscountSchedule(std::vector<double> gammas);

  /// gamma_i = gamma0 - i * step for i in [0, depth].
  static DiscountSchedule linear(int depth, double gamma0 = 0.99,
                                 double step = 1e-3);
  /// gamma_i = gamma for every i in [0, depth].
  static DiscountSchedule constant(int depth, double gamma);

  int depth() const { return static_cast<int>(gammas_.size()) - 1; }
  double gamma(int d) const { return gammas_.at(static_cast<size_t>(d)); }
  std::span<const double> gammas() const { return gammas_; }

  /// True iff gamma_D < ... < gamma_0. Power-iteration convergence to e_0 is
  /// only guaranteed when this holds; otherwise callers get no such promise.
  bool strictly_decreasing() const { return strictly_decreasing_; }

  /// prod_{i<=d} 1 / (1 - gamma_i), i.e. sum_t Phi_d(t).
  double total_mass(int d) const;

  bool operator==(const DiscountSchedule&) const = default;

 private:
  std::vector<double> gammas_;
  bool strictly_decreasing_ = true;
};

class PhiTable {
 public:
  const DiscountSchedule& schedule() const { return schedule_; }
  int horizon() const { return horizon_; }
  double phi(int d, int t) const {
    return values_[static_cast<size_t>(d) * stride() + static_cast<size_t>(t)];
  }
  /// Row d: Phi_d(0..horizon).
  std::span<const double> row(int d) const {
    return {values_.data() + static_cast<size_t>(d) * stride(), stride()};
  }
  /// eta(t) = sum_d w_d Phi_d(t).
  double eta(const Eigen::VectorXd& w, int t) const;

 private:
  friend PhiTable build_phi_table(const DiscountSchedule&, int);
  PhiTable(DiscountSchedule schedule, int horizon);
  size_t stride() const { return static_cast<size_t>(horizon_) + 1; }

  DiscountSchedule schedule_;
  int horizon_;
  std::vector<double> values_;
};

/// Fills Phi_d(t) for d <= D, t <= horizon with the recurrence
/// Phi_d(t) = Phi_{d-1}(t) + gamma_d Phi_d(t-1); O(D * horizon).
PhiTable build_phi_table(const DiscountSchedule& schedule, int horizon);

/// y(t) = Phi_d(t) / sum_{i<=T} Phi_d(i). Throws std::domain_error when the
/// mass beyond the table horizon exceeds 1e-6 of the total, bounded with the
/// envelope binom(t+d, d) * max_gamma^t.
std::vector<double> normalized_weight_profile(const PhiTable& table, int d);

/// Upper bound on sum_{t>horizon} binom(t+d, d) * g^t.
double envelope_tail(int d, double g, int horizon);

/// Coefficients w_d of eta(t) = sum_d w_d Phi_d(t).
class EtaWeights {
 public:
  explicit EtaWeights(Eigen::VectorXd w);
  EtaWeights(std::initializer_list<double> w);

  /// The d-th basis vector of length depth + 1.
  static EtaWeights unit(int depth, int d);

  int depth() const { return static_cast<int>(w_.size()) - 1; }
  const Eigen::VectorXd& vector() const { return w_; }
  double operator[](int d) const { return w_(d); }
  /// <1, w>.
  double sum() const { return w_.sum(); }

 private:
  Eigen::VectorXd w_;
};

/// Row d holds 0 in columns < d and gamma_d in columns >= d.
class GammaMatrix {
 public:
  explicit GammaMatrix(const DiscountSchedule& schedule);

  int size() const { return static_cast<int>(entries_.rows()); }
  double operator()(int row, int col) const { return entries_(row, col); }
  const Eigen::MatrixXd& dense() const { return entries_; }

  /// Gamma * v as a plain row-by-row matrix-vector product.
  Eigen::VectorXd apply(const Eigen::VectorXd& v) const;

 private:
  Eigen::MatrixXd entries_;
};

GammaMatrix gamma_matrix(const DiscountSchedule& schedule);

/// Gamma^n * w by n successive matrix-vector products.
EtaWeights apply_f(const EtaWeights& weights, const GammaMatrix& gamma, int n);

class DegenerateTrace : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct PowerTrace {
  /// v_0 = w / |w|, v_{k+1} = Gamma v_k / |Gamma v_k|; steps + 1 entries.
  std::vector<Eigen::VectorXd> normalized_vectors;
  /// |Gamma v_k| for k in [0, steps].
  std::vector<double> step_norms;
  /// prod_{j<=k} |Gamma v_j| = |Gamma^{k+1} w| / |w|. May underflow to zero
  /// on long traces; log_cumulative keeps the exact exponent.
  std::vector<double> cumulative_products;
  std::vector<double> log_cumulative;
  /// Euclidean norm of the (unnormalized) input w.
  double initial_norm = 0.0;
};

/// Runs the normalized power iteration for `steps` steps using the Euclidean
/// norm. Throws DegenerateTrace when a step norm drops below 1e-300.
PowerTrace power_trace(const EtaWeights& weights, const GammaMatrix& gamma,
                       int steps);

/// c_t = <1, Gamma^t w> for t in [0, H], from unnormalized iterates.
std::vector<double> horizon_coefficients(const EtaWeights& weights,
                                         const GammaMatrix& gamma, int H);

}  // namespace ddrl
