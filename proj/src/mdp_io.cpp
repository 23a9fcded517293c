#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "ddrl/mdp.hpp"

namespace ddrl {

void write_mdp(std::ostream& out, const TabularMdp& mdp) {
  const auto old_precision = out.precision(17);
  out << "states " << mdp.n_states() << "\n";
  out << "actions " << mdp.n_actions() << "\n";
  const auto& p0 = mdp.initial_distribution();
  for (int s = 0; s < mdp.n_states(); ++s) {
    if (p0(s) != 0.0) out << "p0 " << s << " " << p0(s) << "\n";
  }
  const auto& P = mdp.transitions();
  for (int s = 0; s < mdp.n_states(); ++s) {
    for (int a = 0; a < mdp.n_actions(); ++a) {
      for (SparseRows::InnerIterator it(P, mdp.row(s, a)); it; ++it) {
        out << "t " << s << " " << a << " " << it.col() << " " << it.value() << "\n";
      }
    }
  }
  for (int s = 0; s < mdp.n_states(); ++s) {
    for (int a = 0; a < mdp.n_actions(); ++a) {
      if (mdp.reward(s, a) != 0.0) out << "r " << s << " " << a << " " << mdp.reward(s, a) << "\n";
    }
  }
  out.precision(old_precision);
}

TabularMdp read_mdp(std::istream& in) {
  int n_states = -1;
  int n_actions = -1;
  std::vector<std::pair<int, double>> p0;
  std::vector<TransitionEntry> transitions;
  std::vector<std::tuple<int, int, double>> rewards;

  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream fields(line);
    std::string key;
    if (!(fields >> key) || key[0] == '#') continue;
    auto fail = [&](const std::string& why) {
      throw std::invalid_argument("MDP line " + std::to_string(line_no) + ": " + why);
    };
    if (key == "states") {
      if (!(fields >> n_states)) fail("expected state count");
    } else if (key == "actions") {
      if (!(fields >> n_actions)) fail("expected action count");
    } else if (key == "p0") {
      int s;
      double p;
      if (!(fields >> s >> p)) fail("expected 'p0 <s> <prob>'");
      p0.emplace_back(s, p);
    } else if (key == "t") {
      TransitionEntry e{};
      if (!(fields >> e.state >> e.action >> e.next >> e.prob)) fail("expected 't <s> <a> <s'> <prob>'");
      transitions.push_back(e);
    } else if (key == "r") {
      int s, a;
      double r;
      if (!(fields >> s >> a >> r)) fail("expected 'r <s> <a> <reward>'");
      rewards.emplace_back(s, a, r);
    } else {
      fail("unknown record '" + key + "'");
    }
    std::string extra;
    if (fields >> extra) fail("trailing input '" + extra + "'");
  }
  if (n_states <= 0 || n_actions <= 0) {
    throw std::invalid_argument("MDP file must declare positive 'states' and 'actions'");
  }
  Eigen::VectorXd initial = Eigen::VectorXd::Zero(n_states);
  for (auto [s, p] : p0) {
    if (s < 0 || s >= n_states) throw std::invalid_argument("p0 state out of range");
    initial(s) += p;
  }
  Eigen::MatrixXd reward_table = Eigen::MatrixXd::Zero(n_states, n_actions);
  for (auto [s, a, r] : rewards) {
    if (s < 0 || s >= n_states || a < 0 || a >= n_actions) {
      throw std::invalid_argument("reward index out of range");
    }
    reward_table(s, a) = r;
  }
  return TabularMdp(n_states, n_actions, transitions, std::move(reward_table), std::move(initial));
}

}  // namespace ddrl
