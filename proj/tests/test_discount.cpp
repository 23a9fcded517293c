#include <doctest.h>

#include <cmath>

#include "ddrl/discount.hpp"
#include "ddrl/mdp.hpp"
#include "ddrl/oracle.hpp"

using namespace ddrl;

namespace {

double rel_err(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

DiscountSchedule random_schedule(Rng& rng, int depth) {
  std::vector<double> g;
  for (int d = 0; d <= depth; ++d) g.push_back(0.05 + 0.9 * rng.uniform());
  return DiscountSchedule(g);
}

}  // namespace

TEST_CASE("schedule construction") {
  const auto lin = DiscountSchedule::linear(3);
  CHECK(lin.depth() == 3);
  CHECK(lin.gamma(2) == doctest::Approx(0.988));
  CHECK(lin.strictly_decreasing());
  CHECK_FALSE(DiscountSchedule::constant(2, 0.9).strictly_decreasing());
  CHECK(lin.total_mass(1) == doctest::Approx(1.0 / (0.01 * 0.011)));
  CHECK_THROWS_AS(DiscountSchedule(std::vector<double>{}), std::invalid_argument);
  CHECK_THROWS_AS(DiscountSchedule({0.9, 1.0}), std::invalid_argument);
  CHECK_THROWS_AS(DiscountSchedule({0.9, -0.1}), std::invalid_argument);
  CHECK_THROWS(DiscountSchedule::linear(200, 0.99, 0.01));
}

TEST_CASE("phi table hand values") {
  const auto t1 = build_phi_table(DiscountSchedule({0.9, 0.8}), 4);
  CHECK(t1.phi(0, 3) == doctest::Approx(0.729).epsilon(1e-14));
  CHECK(t1.phi(1, 2) == doctest::Approx(2.17).epsilon(1e-14));
  const auto t2 = build_phi_table(DiscountSchedule({0.9, 0.8, 0.7}), 2);
  CHECK(t2.phi(2, 2) == doctest::Approx(3.85).epsilon(1e-14));
  for (int d = 0; d <= 2; ++d) CHECK(t2.phi(d, 0) == 1.0);
}

TEST_CASE("phi table matches compositions and all recurrences") {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const auto s = random_schedule(rng, 4);
    const auto table = build_phi_table(s, 16);
    const Eigen::MatrixXd by_sum = oracle::phi_by_depth_sum(s, 16);
    for (int d = 0; d <= 4; ++d) {
      for (int t = 0; t <= 16; ++t) {
        const double phi = table.phi(d, t);
        CHECK(rel_err(phi, oracle::phi_bruteforce(s, d, t)) < 1e-12);
        CHECK(rel_err(phi, by_sum(d, t)) < 1e-12);
        if (d > 0 && t > 0) {
          CHECK(rel_err(phi, table.phi(d - 1, t) + s.gamma(d) * table.phi(d, t - 1)) < 1e-12);
        }
        if (d > 0 && d <= 3 && t <= 12) {
          double conv = 0.0;
          for (int k = 0; k <= t; ++k) conv += std::pow(s.gamma(d), k) * table.phi(d - 1, t - k);
          CHECK(rel_err(phi, conv) < 1e-12);
        }
      }
    }
  }
}

TEST_CASE("phi rows sum to the total mass") {
  const DiscountSchedule s({0.7, 0.6, 0.5});
  const auto table = build_phi_table(s, 400);
  for (int d = 0; d <= 2; ++d) {
    double sum = 0.0;
    for (double v : table.row(d)) sum += v;
    CHECK(sum == doctest::Approx(s.total_mass(d)).epsilon(1e-12));
  }
}

TEST_CASE("composition count") {
  CHECK(oracle::composition_count(2, 2) == 6);
  CHECK(oracle::composition_count(0, 50) == 1);
  CHECK(oracle::composition_count(4, 16) == 4845);
}

TEST_CASE("normalized weight profile") {
  const auto table = build_phi_table(DiscountSchedule::linear(4), 6000);
  for (int d : {0, 4}) {
    const auto y = normalized_weight_profile(table, d);
    double sum = 0.0;
    for (double v : y) sum += v;
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
  }
  const auto y4 = normalized_weight_profile(table, 4);
  const auto peak = std::max_element(y4.begin(), y4.end()) - y4.begin();
  CHECK(peak > 300);
  CHECK(peak < 500);
  CHECK_THROWS_AS(normalized_weight_profile(build_phi_table(DiscountSchedule::linear(4), 50), 4),
                  std::domain_error);
}

TEST_CASE("gamma matrix and f") {
  const DiscountSchedule s({0.9, 0.8});
  const auto G = gamma_matrix(s);
  CHECK(G(0, 0) == 0.9);
  CHECK(G(0, 1) == 0.9);
  CHECK(G(1, 0) == 0.0);
  CHECK(G(1, 1) == 0.8);
  const auto w1 = apply_f(EtaWeights{1.0, 1.0}, G, 1);
  CHECK(w1[0] == doctest::Approx(1.8));
  CHECK(w1[1] == doctest::Approx(0.8));
  CHECK(apply_f(EtaWeights{1.0, 1.0}, G, 0).vector() == Eigen::Vector2d(1.0, 1.0));
  const auto c = horizon_coefficients(EtaWeights{1.0, 1.0}, G, 1);
  CHECK(c[0] == doctest::Approx(2.0));
  CHECK(c[1] == doctest::Approx(2.6));
}

TEST_CASE("stage coefficients equal eta and the dense oracle") {
  Rng rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    const auto s = random_schedule(rng, 3);
    Eigen::VectorXd w(4);
    for (int d = 0; d < 4; ++d) w(d) = rng.uniform();
    const EtaWeights weights(w);
    const auto table = build_phi_table(s, 30);
    const auto c = horizon_coefficients(weights, gamma_matrix(s), 30);
    const auto dense = oracle::dense_stage_coefficients(s, weights, 30);
    for (int t = 0; t <= 30; ++t) {
      CHECK(rel_err(c[static_cast<size_t>(t)], table.eta(w, t)) < 1e-12);
      CHECK(rel_err(c[static_cast<size_t>(t)], dense[static_cast<size_t>(t)]) < 1e-12);
    }
  }
}

TEST_CASE("power trace converges to e_0 with step norm gamma_0") {
  for (int D : {1, 5, 9}) {
    const auto s = DiscountSchedule::linear(D);
    const auto trace = power_trace(EtaWeights::unit(D, D), gamma_matrix(s), 100000);
    const auto& v = trace.normalized_vectors.back();
    Eigen::VectorXd e0 = Eigen::VectorXd::Zero(D + 1);
    e0(0) = 1.0;
    CHECK((v - e0).norm() < 1e-6);
    CHECK(std::abs(trace.step_norms.back() - 0.99) < 1e-6);
    CHECK(std::isfinite(trace.log_cumulative.back()));
  }
}

TEST_CASE("power trace cumulative product matches the dense tail scale") {
  const auto s = DiscountSchedule::linear(3);
  const EtaWeights w{0.2, 0.0, 0.5, 1.0};
  const auto trace = power_trace(w, gamma_matrix(s), 40);
  for (int H : {0, 7, 39}) {
    CHECK(rel_err(trace.initial_norm * trace.cumulative_products[static_cast<size_t>(H)],
                  oracle::dense_tail_scale(s, w, H)) < 1e-12);
  }
}

TEST_CASE("weight vectors must be nonzero and finite") {
  CHECK_THROWS_AS(EtaWeights({0.0, 0.0}), std::invalid_argument);
  CHECK_THROWS_AS(EtaWeights({1.0, std::nan("")}), std::invalid_argument);
  CHECK_THROWS_AS(EtaWeights::unit(2, 3), std::out_of_range);
}
