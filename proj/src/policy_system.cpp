#include "policy_system.hpp"

#include <cmath>
#include <stdexcept>

namespace ddrl::detail {

namespace {

constexpr double kAutoDirectLimit = 2e5;

}  // namespace

PolicySystem::PolicySystem(SparseRows P, const EvalOptions& options, int n_actions)
    : P_(std::move(P)), options_(options) {
  const int n = static_cast<int>(P_.rows());
  iterative_ = options.method == EvalMethod::iterative ||
               (options.method == EvalMethod::automatic &&
                static_cast<double>(n) * n_actions > kAutoDirectLimit);

  next_.assign(static_cast<size_t>(n), -1);
  functional_ = true;
  for (int s = 0; s < n && functional_; ++s) {
    int count = 0;
    for (SparseRows::InnerIterator it(P_, s); it; ++it) {
      if (it.value() == 0.0) continue;
      ++count;
      next_[static_cast<size_t>(s)] = static_cast<int>(it.col());
      if (it.value() != 1.0) functional_ = false;
    }
    if (count != 1) functional_ = false;
  }
  if (!functional_) {
    next_.clear();
    return;
  }

  // 0 = unvisited, 1 = on the current walk, 2 = done.
  std::vector<char> state(static_cast<size_t>(n), 0);
  std::vector<int> path;
  for (int start = 0; start < n; ++start) {
    if (state[static_cast<size_t>(start)] != 0) continue;
    path.clear();
    int s = start;
    while (state[static_cast<size_t>(s)] == 0) {
      state[static_cast<size_t>(s)] = 1;
      path.push_back(s);
      s = next_[static_cast<size_t>(s)];
    }
    size_t cycle_begin = path.size();
    if (state[static_cast<size_t>(s)] == 1) {
      for (size_t i = 0; i < path.size(); ++i) {
        if (path[i] == s) {
          cycle_begin = i;
          break;
        }
      }
      cycles_.emplace_back(path.begin() + static_cast<std::ptrdiff_t>(cycle_begin), path.end());
    }
    for (size_t i = cycle_begin; i-- > 0;) tree_order_.push_back(path[i]);
    for (int v : path) state[static_cast<size_t>(v)] = 2;
  }
}

Eigen::VectorXd PolicySystem::solve(double gamma, const Eigen::VectorXd& b) {
  if (functional_) return solve_functional(gamma, b);
  if (iterative_) return solve_iterative(gamma, b);
  return solve_direct(gamma, b);
}

Eigen::VectorXd PolicySystem::solve_functional(double gamma, const Eigen::VectorXd& b) const {
  Eigen::VectorXd x(b.size());
  const double log_gamma = std::log1p(gamma - 1.0);
  for (const auto& cycle : cycles_) {
    const size_t L = cycle.size();
    double acc = b(cycle[L - 1]);
    for (size_t k = L - 1; k-- > 0;) acc = b(cycle[k]) + gamma * acc;
    const double denom = -std::expm1(static_cast<double>(L) * log_gamma);
    x(cycle[0]) = acc / denom;
    for (size_t k = L - 1; k >= 1; --k) {
      const int nxt = k + 1 == L ? cycle[0] : cycle[k + 1];
      x(cycle[k]) = b(cycle[k]) + gamma * x(nxt);
    }
  }
  for (int s : tree_order_) x(s) = b(s) + gamma * x(next_[static_cast<size_t>(s)]);
  return x;
}

Eigen::VectorXd PolicySystem::solve_direct(double gamma, const Eigen::VectorXd& b) {
  auto& lu = lu_[gamma];
  if (!lu) {
    const int n = static_cast<int>(P_.rows());
    Eigen::SparseMatrix<double> A(n, n);
    A.setIdentity();
    A -= gamma * Eigen::SparseMatrix<double>(P_);
    A.makeCompressed();
    lu = std::make_unique<Eigen::SparseLU<Eigen::SparseMatrix<double>>>();
    lu->analyzePattern(A);
    lu->factorize(A);
    if (lu->info() != Eigen::Success) {
      lu.reset();
      throw std::runtime_error("policy evaluation system is singular");
    }
  }
  Eigen::VectorXd x = lu->solve(b);
  // One step of iterative refinement.
  const Eigen::VectorXd residual = b - (x - gamma * (P_ * x));
  x += lu->solve(residual);
  return x;
}

Eigen::VectorXd PolicySystem::solve_iterative(double gamma, const Eigen::VectorXd& b) const {
  Eigen::VectorXd x = b;
  const double factor = gamma / (1.0 - gamma);
  for (int sweep = 0; sweep < options_.max_sweeps; ++sweep) {
    double delta = 0.0;
    for (int s = 0; s < x.size(); ++s) {
      double acc = 0.0;
      double self = 0.0;
      for (SparseRows::InnerIterator it(P_, s); it; ++it) {
        if (it.col() == s) {
          self += it.value();
        } else {
          acc += it.value() * x(it.col());
        }
      }
      const double updated = (b(s) + gamma * acc) / (1.0 - gamma * self);
      delta = std::max(delta, std::abs(updated - x(s)));
      x(s) = updated;
    }
    if (factor * delta <= options_.tol * std::max(1.0, x.cwiseAbs().maxCoeff())) return x;
  }
  throw std::runtime_error("Gauss-Seidel evaluation did not reach tolerance");
}

}  // namespace ddrl::detail
