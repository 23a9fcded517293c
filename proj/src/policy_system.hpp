#pragma once

// Solves (I - gamma P) x = b for a fixed policy matrix P and several gammas.

#include <map>
#include <memory>
#include <vector>

#include <Eigen/SparseCore>
#include <Eigen/SparseLU>

#include "ddrl/mdp.hpp"
#include "ddrl/solvers.hpp"

namespace ddrl::detail {

class PolicySystem {
 public:
  PolicySystem(SparseRows P, const EvalOptions& options, int n_actions);

  Eigen::VectorXd solve(double gamma, const Eigen::VectorXd& b);
  const SparseRows& matrix() const { return P_; }
  bool functional() const { return functional_; }

 private:
  Eigen::VectorXd solve_functional(double gamma, const Eigen::VectorXd& b) const;
  Eigen::VectorXd solve_direct(double gamma, const Eigen::VectorXd& b);
  Eigen::VectorXd solve_iterative(double gamma, const Eigen::VectorXd& b) const;

  SparseRows P_;
  EvalOptions options_;
  bool iterative_ = false;
  bool functional_ = false;
  // Functional graph: successor of each state, cycles, and the non-cycle
  // states ordered so that each appears after its successor.
  std::vector<int> next_;
  std::vector<std::vector<int>> cycles_;
  std::vector<int> tree_order_;
  std::map<double, std::unique_ptr<Eigen::SparseLU<Eigen::SparseMatrix<double>>>> lu_;
};

}  // namespace ddrl::detail
