#include "ddrl/harness.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "ddrl/oracle.hpp"

namespace ddrl {

namespace {

const std::string kNotApplicable = "-";

std::string weight_label(const std::string& rule) {
  std::string out = rule;
  std::replace(out.begin(), out.end(), ',', ';');
  return out;
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? std::numeric_limits<double>::quiet_NaN() : s / static_cast<double>(v.size());
}

double std_error_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
}

double parse_or_nan(const std::string& s) {
  if (s == kNotApplicable) return std::numeric_limits<double>::quiet_NaN();
  return std::stod(s);
}

}  // namespace

ReachRates reach_rates(const Environment& env, const NonStationaryPolicy& policy) {
  ReachRates out;
  if (env.grid) {
    out.good = format_double(reach_rate(env.mdp, policy, env.grid->states_of_kind(CellKind::good)));
    out.deceptive =
        format_double(reach_rate(env.mdp, policy, env.grid->states_of_kind(CellKind::deceptive)));
  } else if (env.corridor) {
    out.good = format_double(reach_rate(env.mdp, policy, {env.corridor->good_state}));
    out.deceptive = format_double(reach_rate(env.mdp, policy, {env.corridor->deceptive_state}));
  }
  return out;
}

ReachRates reach_rates(const Environment& env, const StationaryPolicy& policy) {
  if (!policy.is_deterministic()) return {};
  return reach_rates(env, NonStationaryPolicy(policy.greedy_actions()));
}

double stationary_average_return(const TabularMdp& mdp, const StationaryPolicy& policy,
                                 int length) {
  if (length < 1) throw std::invalid_argument("length must be >= 1");
  if (policy.is_deterministic()) {
    return occupancy_average_return(mdp, NonStationaryPolicy(policy.greedy_actions()), length);
  }
  const SparseRows P = policy_transition(mdp, policy);
  const Eigen::VectorXd r = policy_reward(mdp, policy);
  Eigen::VectorXd mu = mdp.initial_distribution();
  double total = 0.0;
  for (int t = 0; t < length; ++t) {
    total += mu.dot(r);
    mu = P.transpose() * mu;
  }
  return total / length;
}

CsvTable run_depth_sweep(const ExperimentConfig& c) {
  validate_config(c);
  const Environment env = load_environment(c.env);
  const std::string rule = schedule_label(c);

  struct Cell {
    int depth;
    GpiInit init;
    int seed_index;
  };
  std::vector<Cell> cells;
  for (int D : c.depths) {
    for (GpiInit init : c.inits) {
      for (int k = 0; k < c.n_seeds; ++k) cells.push_back({D, init, k});
    }
  }

  struct Outcome {
    std::uint64_t seed;
    GpiOutcome outcome;
    int iterations;
    double eta, eta_normalized, avg, sampled, sampled_se;
    ReachRates reach;
  };
  std::vector<Outcome> results(cells.size());
  run_jobs(static_cast<int>(cells.size()), [&](int i) {
    const Cell& cell = cells[static_cast<size_t>(i)];
    const DiscountSchedule schedule = schedule_for(c, cell.depth);
    const EtaWeights weights = weights_for(c.weights, cell.depth);
    GpiOptions options;
    options.init = cell.init;
    options.seed = derive_seed(c.seed, static_cast<std::uint64_t>(cell.seed_index));
    options.alpha = c.alpha;
    options.max_iters = c.max_iters;
    const GpiReport report = generalized_policy_iteration(env.mdp, schedule, weights, options);
    const AverageReturn sampled =
        empirical_average_return(env.mdp, report.final_policy, c.length, c.trajectories,
                                 derive_seed(options.seed, 1));
    results[static_cast<size_t>(i)] = Outcome{
        options.seed,
        report.outcome,
        report.iterations,
        report.eta_trace.back(),
        report.eta_trace.back() / eta_total_mass(schedule, weights),
        stationary_average_return(env.mdp, report.final_policy, c.length),
        sampled.mean,
        sampled.std_error,
        reach_rates(env, report.final_policy)};
  });

  CsvTable table;
  table.header = {"env",   "schedule",  "D",          "weights",          "init",
                  "alpha", "seed",      "outcome",    "iterations",       "L_eta",
                  "L_eta_normalized",   "avg_return", "avg_return_sampled", "avg_return_se",
                  "reach_good",         "reach_deceptive"};
  size_t i = 0;
  for (int D : c.depths) {
    for (GpiInit init : c.inits) {
      std::vector<double> eta, eta_n, avg, sampled, iters, good, deceptive;
      int counts[3] = {0, 0, 0};
      for (int k = 0; k < c.n_seeds; ++k, ++i) {
        const Outcome& r = results[i];
        table.rows.push_back({env.id, rule, std::to_string(D), weight_label(c.weights),
                              std::string(to_string(init)), format_double(c.alpha),
                              std::to_string(r.seed), std::string(to_string(r.outcome)),
                              std::to_string(r.iterations), format_double(r.eta),
                              format_double(r.eta_normalized), format_double(r.avg),
                              format_double(r.sampled), format_double(r.sampled_se),
                              r.reach.good, r.reach.deceptive});
        eta.push_back(r.eta);
        eta_n.push_back(r.eta_normalized);
        avg.push_back(r.avg);
        sampled.push_back(r.sampled);
        iters.push_back(r.iterations);
        good.push_back(parse_or_nan(r.reach.good));
        deceptive.push_back(parse_or_nan(r.reach.deceptive));
        ++counts[static_cast<int>(r.outcome)];
      }
      auto reach_cell = [](const std::vector<double>& v) {
        return std::isnan(mean_of(v)) ? kNotApplicable : format_double(mean_of(v));
      };
      table.rows.push_back(
          {env.id, rule, std::to_string(D), weight_label(c.weights), std::string(to_string(init)),
           format_double(c.alpha), "mean",
           "converged=" + std::to_string(counts[0]) + ";cycle_detected=" +
               std::to_string(counts[1]) + ";iteration_cap=" + std::to_string(counts[2]),
           format_double(mean_of(iters)), format_double(mean_of(eta)),
           format_double(mean_of(eta_n)), format_double(mean_of(avg)),
           format_double(mean_of(sampled)), format_double(std_error_of(sampled)),
           reach_cell(good), reach_cell(deceptive)});
    }
  }
  return table;
}

CsvTable run_horizon_sweep(const ExperimentConfig& c) {
  validate_config(c);
  const Environment env = load_environment(c.env);
  const std::string rule = schedule_label(c);
  std::vector<int> horizons = c.horizons;
  if (horizons.empty()) {
    for (int H = 0; H <= c.horizon_max; ++H) horizons.push_back(H);
  }

  GpiOptions reference_options;
  reference_options.max_iters = c.max_iters;
  const GpiReport reference = generalized_policy_iteration(
      env.mdp, schedule_for(c, c.reference_depth), weights_for(c.weights, c.reference_depth),
      reference_options);

  std::vector<std::vector<std::vector<std::string>>> blocks(c.depths.size());
  run_jobs(static_cast<int>(c.depths.size()), [&](int i) {
    const int D = c.depths[static_cast<size_t>(i)];
    const DiscountSchedule schedule = schedule_for(c, D);
    const EtaWeights weights = weights_for(c.weights, D);
    const double mass = eta_total_mass(schedule, weights);
    const HCloseSolver solver(env.mdp, schedule, weights);
    auto& rows = blocks[static_cast<size_t>(i)];
    auto row = [&](const std::string& kind, const std::string& H, double eta, double avg,
                   const ReachRates& reach, const std::string& proxy) {
      rows.push_back({env.id, rule, std::to_string(D), weight_label(c.weights), kind, H,
                      format_double(eta), format_double(eta / mass), format_double(avg),
                      reach.good, reach.deceptive, proxy});
    };
    auto stationary_row = [&](const std::string& kind, const StationaryPolicy& policy) {
      const ValueStack stack = d_deep_policy_evaluation(env.mdp, policy, schedule);
      row(kind, kNotApplicable, env.mdp.initial_distribution().dot(stack.eta_v(weights)),
          stationary_average_return(env.mdp, policy, c.length), reach_rates(env, policy),
          kNotApplicable);
    };
    stationary_row("geometric", solver.geometric().policy);
    stationary_row("gsac", reference.final_policy);
    for (int H : horizons) {
      const HClosePlan plan = solver.plan(H);
      const PlanEvaluation ev = solver.evaluate(plan, c.length);
      row("plan", std::to_string(H), ev.eta_return, ev.average_return,
          reach_rates(env, plan.policy()),
          format_double(plan.value(env.mdp.initial_distribution())));
    }
  });

  CsvTable table;
  table.header = {"env",        "schedule",   "D",          "weights",         "kind",
                  "H",          "L_eta",      "L_eta_normalized", "avg_return", "reach_good",
                  "reach_deceptive", "proxy_value"};
  for (auto& block : blocks) {
    for (auto& r : block) table.rows.push_back(std::move(r));
  }
  return table;
}

CsvTable run_corridor_heatmap(const ExperimentConfig& c) {
  validate_config(c);
  const Environment env = load_environment(c.env);
  if (!env.corridor) throw std::invalid_argument("heatmap needs a corridor environment");

  struct Job {
    size_t cell;
    int run;
  };
  struct Cell {
    int depth;
    double eps;
    bool computed;
  };
  std::vector<Cell> cells;
  std::vector<Job> jobs;
  for (int D : c.depths) {
    for (double eps : c.one_minus_gamma) {
      const bool computed = eps >= c.unstable_below;
      cells.push_back({D, eps, computed});
      if (!computed) continue;
      for (int r = 0; r < c.heatmap_runs; ++r) jobs.push_back({cells.size() - 1, r});
    }
  }

  struct RunResult {
    double success = 0.0;
    GpiOutcome outcome = GpiOutcome::iteration_cap;
    bool finite = true;
  };
  std::vector<RunResult> results(jobs.size());
  run_jobs(static_cast<int>(jobs.size()), [&](int i) {
    const Job& job = jobs[static_cast<size_t>(i)];
    const Cell& cell = cells[job.cell];
    const DiscountSchedule schedule = DiscountSchedule::constant(cell.depth, 1.0 - cell.eps);
    GpiOptions options;
    options.init = GpiInit::random;
    options.seed = derive_seed(c.seed, static_cast<std::uint64_t>(job.run));
    options.alpha = c.alpha;
    options.max_iters = c.max_iters;
    const GpiReport report =
        generalized_policy_iteration(env.mdp, schedule, weights_for(c.weights, cell.depth), options);
    RunResult& out = results[static_cast<size_t>(i)];
    out.outcome = report.outcome;
    out.finite = std::isfinite(report.eta_trace.back());
    out.success = report.final_policy.is_deterministic()
                      ? success_rate(*env.corridor, report.final_policy)
                      : success_rate(*env.corridor, report.final_policy,
                                     SuccessOptions{false, TieBreak::most_probable});
  });

  CsvTable table;
  table.header = {"env",  "D",            "gamma",        "one_minus_gamma", "weights",
                  "runs", "best_success", "mean_success", "converged_runs",  "cycle_runs",
                  "cap_runs", "unstable",  "seed"};
  size_t j = 0;
  for (size_t k = 0; k < cells.size(); ++k) {
    const Cell& cell = cells[k];
    std::vector<std::string> row{env.id, std::to_string(cell.depth), format_double(1.0 - cell.eps),
                                 format_double(cell.eps), weight_label(c.weights)};
    if (!cell.computed) {
      row.insert(row.end(), {"0", "nan", "nan", "0", "0", "0", "1", std::to_string(c.seed)});
      table.rows.push_back(std::move(row));
      continue;
    }
    double best = 0.0, total = 0.0;
    int counts[3] = {0, 0, 0};
    bool unstable = false;
    for (int r = 0; r < c.heatmap_runs; ++r, ++j) {
      const RunResult& res = results[j];
      best = std::max(best, res.success);
      total += res.success;
      ++counts[static_cast<int>(res.outcome)];
      unstable = unstable || !res.finite;
    }
    row.insert(row.end(), {std::to_string(c.heatmap_runs), format_double(best),
                           format_double(total / c.heatmap_runs), std::to_string(counts[0]),
                           std::to_string(counts[1]), std::to_string(counts[2]),
                           unstable ? "1" : "0", std::to_string(c.seed)});
    table.rows.push_back(std::move(row));
  }
  return table;
}

CsvTable weights_table(const DiscountSchedule& schedule, int horizon, bool normalize) {
  const PhiTable table = build_phi_table(schedule, horizon);
  CsvTable out;
  out.header = {"d", "t", "phi", "normalized"};
  for (int d = 0; d <= schedule.depth(); ++d) {
    std::vector<double> profile;
    if (normalize) profile = normalized_weight_profile(table, d);
    for (int t = 0; t <= horizon; ++t) {
      out.rows.push_back({std::to_string(d), std::to_string(t), format_double(table.phi(d, t)),
                          normalize ? format_double(profile[static_cast<size_t>(t)])
                                    : kNotApplicable});
    }
  }
  return out;
}

std::optional<int> plateau_onset(const std::vector<double>& values, double tol) {
  if (values.empty()) return std::nullopt;
  int onset = 0;
  for (size_t i = 1; i < values.size(); ++i) {
    if (!(std::abs(values[i] - values[i - 1]) <= tol)) onset = static_cast<int>(i);
  }
  if (values.size() >= 2 && onset == static_cast<int>(values.size()) - 1) return std::nullopt;
  return onset;
}

std::vector<CheckResult> run_oracle_checks(std::uint64_t seed) {
  std::vector<CheckResult> checks;
  Rng rng(seed);
  auto random_schedule = [&](int depth, double lo, double hi) {
    std::vector<double> g(static_cast<size_t>(depth) + 1);
    for (double& x : g) x = lo + (hi - lo) * rng.uniform();
    return DiscountSchedule(std::move(g));
  };
  auto relative = [](double a, double b) {
    return std::abs(a - b) / std::max(1.0, std::max(std::abs(a), std::abs(b)));
  };

  {
    double worst = 0.0;
    for (int k = 0; k < 20; ++k) {
      const DiscountSchedule sch = random_schedule(4, 0.05, 0.99);
      const PhiTable table = build_phi_table(sch, 16);
      for (int d = 0; d <= 4; ++d) {
        for (int t = 0; t <= 16; ++t) {
          const double ref = oracle::phi_bruteforce(sch, d, t);
          worst = std::max(worst, std::abs(table.phi(d, t) - ref) / ref);
        }
      }
    }
    checks.push_back({"phi table vs compositions", worst <= 1e-12,
                      "max rel err " + format_double(worst)});
  }
  {
    double worst = 0.0;
    for (int k = 0; k < 20; ++k) {
      const TabularMdp mdp = random_tabular_mdp(5, 3, rng.below(1 << 30));
      const DiscountSchedule sch = random_schedule(2, 0.5, 0.95);
      const StationaryPolicy pi = boltzmann_policy(mdp.rewards(), 0.5);
      const EtaWeights w{0.3, -0.2, 1.0};
      const PhiTable table = build_phi_table(sch, 60);
      const double a = truncated_eta_return(mdp, pi, table, w, 60).value;
      const double b = oracle::truncated_return_oracle(mdp, pi, sch, w, 60);
      worst = std::max(worst, relative(a, b));
    }
    checks.push_back({"truncated return vs oracle", worst <= 1e-12,
                      "max rel err " + format_double(worst)});
  }
  {
    double worst_excess = 0.0;
    for (int k = 0; k < 10; ++k) {
      const TabularMdp mdp = random_tabular_mdp(5, 3, rng.below(1 << 30));
      const DiscountSchedule sch = random_schedule(2, 0.5, 0.9);
      const StationaryPolicy pi = boltzmann_policy(mdp.rewards(), 1.0);
      const EtaWeights w = EtaWeights::unit(2, 2);
      const PhiTable table = build_phi_table(sch, 400);
      const double exact =
          exact_eta_return(mdp, pi, d_deep_policy_evaluation(mdp, pi, sch), w);
      const double truncated = oracle::truncated_return_oracle(mdp, pi, sch, w, 400);
      const double bound = eta_tail_bound(table, w, 400, mdp.rewards().cwiseAbs().maxCoeff());
      worst_excess = std::max(worst_excess, std::abs(exact - truncated) - bound);
    }
    checks.push_back({"exact return within tail bound", worst_excess <= 1e-9,
                      "max excess " + format_double(std::max(0.0, worst_excess))});
  }
  {
    double worst = 0.0;
    for (int k = 0; k < 10; ++k) {
      const TabularMdp mdp = random_tabular_mdp(1 + rng.below(6), 1 + rng.below(3), rng.below(1 << 30));
      const DiscountSchedule sch = random_schedule(3, 0.3, 0.95);
      const StationaryPolicy pi = boltzmann_policy(mdp.rewards(), 0.7);
      const ValueStack stack = d_deep_policy_evaluation(mdp, pi, sch);
      worst = std::max(worst, decomposition_residual(mdp, pi, stack));
      const StationaryPolicy greedy = StationaryPolicy::deterministic(
          greedy_actions(mdp.rewards()), mdp.n_actions());
      const auto dense = oracle::dense_depth_values(mdp, greedy.greedy_actions(), sch);
      const ValueStack det = d_deep_policy_evaluation(mdp, greedy, sch);
      for (int d = 0; d <= 3; ++d) {
        for (int s = 0; s < mdp.n_states(); ++s) {
          worst = std::max(worst, relative(det.v[static_cast<size_t>(d)](s),
                                           dense[static_cast<size_t>(d)](s)));
        }
      }
    }
    checks.push_back({"depth evaluation residual and dense solve", worst <= 1e-10,
                      "max residual " + format_double(worst)});
  }
  {
    double worst = 0.0;
    for (int k = 0; k < 10; ++k) {
      const TabularMdp mdp = random_tabular_mdp(2 + rng.below(4), 2, rng.below(1 << 30));
      const double gamma = 0.5 + 0.45 * rng.uniform();
      const DiscountSchedule sch({gamma});
      const auto brute = oracle::brute_force_stationary_optimum(mdp, sch, EtaWeights{1.0});
      const auto pi = geometric_policy_iteration(mdp, gamma);
      worst = std::max(worst, relative(brute.eta_return,
                                       mdp.initial_distribution().dot(pi.value)));
      const Eigen::VectorXd vstar = oracle::brute_force_geometric_values(mdp, gamma);
      for (int s = 0; s < mdp.n_states(); ++s) worst = std::max(worst, relative(vstar(s), pi.value(s)));
    }
    checks.push_back({"stationary optimum vs policy iteration", worst <= 1e-10,
                      "max rel err " + format_double(worst)});
  }
  {
    double worst = 0.0;
    for (int k = 0; k < 10; ++k) {
      const int S = 2 + rng.below(3);
      const int D = rng.below(3);
      const int H = rng.below(5);
      const TabularMdp mdp = random_tabular_mdp(S, 2, rng.below(1 << 30), true);
      const DiscountSchedule sch = DiscountSchedule::linear(D, 0.9, 0.05);
      Eigen::VectorXd w = Eigen::VectorXd::Zero(D + 1);
      for (int d = 0; d <= D; ++d) w(d) = 0.1 + rng.uniform();
      const EtaWeights weights(w);
      const HClosePlan plan = h_close_control(mdp, sch, weights, H);
      const Eigen::VectorXd vstar = oracle::brute_force_geometric_values(mdp, sch.gamma(0));
      const Eigen::VectorXd tail = oracle::dense_tail_scale(sch, weights, H) * vstar;
      const auto brute = oracle::brute_force_prefix_optimum(mdp, sch, weights, H, tail);
      worst = std::max(worst, relative(plan.value(mdp.initial_distribution()), brute.value));
    }
    checks.push_back({"H-close plan vs prefix enumeration", worst <= 1e-9,
                      "max rel err " + format_double(worst)});
  }
  return checks;
}

}  // namespace ddrl
