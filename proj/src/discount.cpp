#include "ddrl/discount.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace ddrl {

DiscountSchedule::DiscountSchedule(std::vector<double> gammas)
    : gammas_(std::move(gammas)) {
  if (gammas_.empty()) {
    throw std::invalid_argument("discount schedule needs at least gamma_0");
  }
  for (size_t d = 0; d < gammas_.size(); ++d) {
    const double g = gammas_[d];
    if (!(g > 0.0 && g < 1.0)) {
      throw std::invalid_argument("gamma_" + std::to_string(d) +
                                  " must lie in (0,1), got " +
                                  std::to_string(g));
    }
    if (d > 0 && !(g < gammas_[d - 1])) strictly_decreasing_ = false;
  }
}

DiscountSchedule DiscountSchedule::linear(int depth, double gamma0,
                                          double step) {
  if (depth < 0) throw std::invalid_argument("depth must be >= 0");
  std::vector<double> g(static_cast<size_t>(depth) + 1);
  for (int i = 0; i <= depth; ++i) g[static_cast<size_t>(i)] = gamma0 - i * step;
  return DiscountSchedule(std::move(g));
}

DiscountSchedule DiscountSchedule::constant(int depth, double gamma) {
  if (depth < 0) throw std::invalid_argument("depth must be >= 0");
  return DiscountSchedule(std::vector<double>(static_cast<size_t>(depth) + 1, gamma));
}

double DiscountSchedule::total_mass(int d) const {
  double m = 1.0;
  for (int i = 0; i <= d; ++i) m /= (1.0 - gamma(i));
  return m;
}

PhiTable::PhiTable(DiscountSchedule schedule, int horizon)
    : schedule_(std::move(schedule)),
      horizon_(horizon),
      values_((static_cast<size_t>(schedule_.depth()) + 1) *
              (static_cast<size_t>(horizon) + 1)) {}

double PhiTable::eta(const Eigen::VectorXd& w, int t) const {
  if (w.size() > schedule_.depth() + 1) {
    throw std::invalid_argument("weight vector deeper than the phi table");
  }
  double s = 0.0;
  for (int d = 0; d < w.size(); ++d) s += w(d) * phi(d, t);
  return s;
}

PhiTable build_phi_table(const DiscountSchedule& schedule, int horizon) {
  if (horizon < 0) throw std::invalid_argument("horizon must be >= 0");
  PhiTable table(schedule, horizon);
  const size_t stride = table.stride();
  auto at = [&](int d, int t) -> double& {
    return table.values_[static_cast<size_t>(d) * stride + static_cast<size_t>(t)];
  };
  const double g0 = schedule.gamma(0);
  at(0, 0) = 1.0;
  for (int t = 1; t <= horizon; ++t) at(0, t) = g0 * at(0, t - 1);
  for (int d = 1; d <= schedule.depth(); ++d) {
    const double gd = schedule.gamma(d);
    at(d, 0) = 1.0;
    for (int t = 1; t <= horizon; ++t) at(d, t) = at(d - 1, t) + gd * at(d, t - 1);
  }
  return table;
}

double envelope_tail(int d, double g, int horizon) {
  // term(t) = binom(t+d, d) g^t; term(t+1)/term(t) = g (t+d+1)/(t+1).
  double log_term = 0.0;
  const int t0 = horizon + 1;
  for (int i = 1; i <= d; ++i) log_term += std::log(static_cast<double>(t0 + i) / i);
  log_term += t0 * std::log(g);
  double term = std::exp(log_term);
  double sum = 0.0;
  for (long t = t0;; ++t) {
    sum += term;
    const double ratio = g * static_cast<double>(t + d + 1) / static_cast<double>(t + 1);
    term *= ratio;
    // Past the mode the ratio keeps shrinking, so the rest is bounded by a
    // geometric series with the current ratio.
    if (ratio < 1.0) {
      const double rest = term / (1.0 - ratio);
      if (rest <= 1e-3 * sum || rest == 0.0) return sum + rest;
    }
    if (t - t0 > 100'000'000L) return std::numeric_limits<double>::infinity();
  }
}

std::vector<double> normalized_weight_profile(const PhiTable& table, int d) {
  const auto& schedule = table.schedule();
  if (d < 0 || d > schedule.depth()) throw std::out_of_range("depth out of range");
  double g_max = 0.0;
  for (int i = 0; i <= d; ++i) g_max = std::max(g_max, schedule.gamma(i));

  const auto row = table.row(d);
  double total = 0.0;
  for (double v : row) total += v;
  const double tail = envelope_tail(d, g_max, table.horizon());
  if (!(tail < 1e-6 * total)) {
    throw std::domain_error("horizon " + std::to_string(table.horizon()) +
                            " too short for depth " + std::to_string(d) +
                            ": truncated tail mass exceeds 1e-6");
  }
  std::vector<double> profile(row.begin(), row.end());
  for (double& v : profile) v /= total;
  return profile;
}

EtaWeights::EtaWeights(Eigen::VectorXd w) : w_(std::move(w)) {
  if (w_.size() == 0) throw std::invalid_argument("empty weight vector");
  if (!w_.allFinite()) throw std::invalid_argument("non-finite weight");
  if ((w_.array() == 0.0).all()) throw std::invalid_argument("all-zero weight vector");
}

EtaWeights::EtaWeights(std::initializer_list<double> w)
    : EtaWeights(Eigen::Map<const Eigen::VectorXd>(w.begin(),
                                                  static_cast<Eigen::Index>(w.size()))) {}

EtaWeights EtaWeights::unit(int depth, int d) {
  if (d < 0 || d > depth) throw std::out_of_range("basis index out of range");
  Eigen::VectorXd w = Eigen::VectorXd::Zero(depth + 1);
  w(d) = 1.0;
  return EtaWeights(std::move(w));
}

GammaMatrix::GammaMatrix(const DiscountSchedule& schedule)
    : entries_(Eigen::MatrixXd::Zero(schedule.depth() + 1, schedule.depth() + 1)) {
  for (int d = 0; d <= schedule.depth(); ++d) {
    for (int j = d; j <= schedule.depth(); ++j) entries_(d, j) = schedule.gamma(d);
  }
}

Eigen::VectorXd GammaMatrix::apply(const Eigen::VectorXd& v) const {
  const int n = size();
  if (v.size() != n) throw std::invalid_argument("dimension mismatch in Gamma * v");
  Eigen::VectorXd out(n);
  for (int r = 0; r < n; ++r) {
    double s = 0.0;
    for (int c = 0; c < n; ++c) s += entries_(r, c) * v(c);
    out(r) = s;
  }
  return out;
}

GammaMatrix gamma_matrix(const DiscountSchedule& schedule) {
  return GammaMatrix(schedule);
}

EtaWeights apply_f(const EtaWeights& weights, const GammaMatrix& gamma, int n) {
  if (n < 0) throw std::invalid_argument("apply_f needs n >= 0");
  Eigen::VectorXd v = weights.vector();
  for (int k = 0; k < n; ++k) v = gamma.apply(v);
  return EtaWeights(std::move(v));
}

PowerTrace power_trace(const EtaWeights& weights, const GammaMatrix& gamma,
                       int steps) {
  if (steps < 0) throw std::invalid_argument("power_trace needs steps >= 0");
  PowerTrace trace;
  const auto n_steps = static_cast<size_t>(steps) + 1;
  trace.normalized_vectors.reserve(n_steps);
  trace.step_norms.reserve(n_steps);
  trace.cumulative_products.reserve(n_steps);
  trace.log_cumulative.reserve(n_steps);

  trace.initial_norm = weights.vector().norm();
  Eigen::VectorXd v = weights.vector() / trace.initial_norm;
  double log_prod = 0.0;
  for (int k = 0; k <= steps; ++k) {
    Eigen::VectorXd u = gamma.apply(v);
    const double norm = u.norm();
    if (!(norm >= 1e-300)) {
      throw DegenerateTrace("power trace degenerated at step " + std::to_string(k));
    }
    log_prod += std::log(norm);
    trace.normalized_vectors.push_back(std::move(v));
    trace.step_norms.push_back(norm);
    trace.log_cumulative.push_back(log_prod);
    trace.cumulative_products.push_back(
        k == 0 ? norm : trace.cumulative_products.back() * norm);
    v = u / norm;
  }
  return trace;
}

std::vector<double> horizon_coefficients(const EtaWeights& weights,
                                         const GammaMatrix& gamma, int H) {
  if (H < 0) throw std::invalid_argument("horizon_coefficients needs H >= 0");
  std::vector<double> c;
  c.reserve(static_cast<size_t>(H) + 1);
  Eigen::VectorXd v = weights.vector();
  for (int t = 0; t <= H; ++t) {
    c.push_back(v.sum());
    if (t < H) v = gamma.apply(v);
  }
  return c;
}

}  // namespace ddrl
