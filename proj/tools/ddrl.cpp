// ddrl: command-line front end for the delayed-discount solvers and sweeps.

#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "ddrl/harness.hpp"
#include "ddrl/oracle.hpp"

namespace {

using namespace ddrl;

struct ScheduleFlags {
  int depth = -1;
  std::vector<double> gammas;
  double gamma0 = 0.99;
  double gamma_step = 1e-3;
  std::string weights = "last";

  void add_to(CLI::App* cmd, bool with_weights = true) {
    cmd->add_option("--depth", depth, "Depth D (default: from --gammas, else 0)");
    cmd->add_option("--gammas", gammas, "Explicit discounts gamma_0..gamma_D")->delimiter(',');
    cmd->add_option("--gamma0", gamma0, "gamma_0 of the linear rule")->capture_default_str();
    cmd->add_option("--gamma-step", gamma_step, "Decrement of the linear rule")->capture_default_str();
    if (with_weights) {
      cmd->add_option("--weights", weights, "last | first | uniform | comma list")->capture_default_str();
    }
  }

  DiscountSchedule schedule() const {
    if (!gammas.empty()) {
      if (depth >= 0 && depth + 1 != static_cast<int>(gammas.size())) {
        throw std::invalid_argument("--gammas has " + std::to_string(gammas.size()) +
                                    " entries but --depth is " + std::to_string(depth));
      }
      return DiscountSchedule(gammas);
    }
    return DiscountSchedule::linear(std::max(depth, 0), gamma0, gamma_step);
  }

  std::string label() const {
    ExperimentConfig c;
    if (!gammas.empty()) {
      c.schedule_rule = "list";
      c.gammas = gammas;
    } else {
      c.gamma0 = gamma0;
      c.gamma_step = gamma_step;
    }
    return schedule_label(c);
  }
};

std::string weight_cell(const std::string& rule) {
  std::string out = rule;
  std::replace(out.begin(), out.end(), ',', ';');
  return out;
}

void print_row(std::ostream& out, const std::vector<std::string>& header,
               const std::vector<std::string>& row) {
  CsvTable{header, {row}}.write(out);
}

std::ofstream open_file(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  return out;
}

void emit(const CsvTable& table, const std::string& out_path) {
  if (out_path.empty()) {
    table.write(std::cout);
    return;
  }
  auto out = open_file(out_path);
  table.write(out);
}

void cmd_weights(const ScheduleFlags& flags, int horizon, bool normalize, const std::string& out) {
  emit(weights_table(flags.schedule(), horizon, normalize), out);
}

void cmd_env(const std::string& spec) {
  const Environment env = load_environment(spec);
  std::cout << "env," << env.id << '\n'
            << "states," << env.mdp.n_states() << '\n'
            << "actions," << env.mdp.n_actions() << '\n';
  if (env.corridor) {
    const Corridor& c = *env.corridor;
    std::cout << "deceptive_state," << c.deceptive_state << '\n'
              << "good_state," << c.good_state << '\n'
              << "penalty_band," << c.band_lo << ".." << c.band_hi << '\n';
    return;
  }
  const GridMdp& grid = *env.grid;
  for (size_t s = 0; s < grid.kind_of_state.size(); ++s) {
    const CellKind kind = grid.kind_of_state[s];
    if (kind == CellKind::free) continue;
    std::cout << "reward_cell," << cell_char(kind) << ',' << grid.cell_of_state[s].first << ','
              << grid.cell_of_state[s].second << ',' << format_double(cell_reward(kind)) << '\n';
  }
  int rows = 0, cols = 0;
  for (const auto& [r, c] : grid.cell_of_state) {
    rows = std::max(rows, r + 1);
    cols = std::max(cols, c + 1);
  }
  const auto ids = bundled_maze_ids();
  const bool bundled = std::find(ids.begin(), ids.end(), spec) != ids.end();
  std::cout << '\n' << serialize_maze(bundled ? bundled_maze(spec) : load_maze(spec));
}

void cmd_solve_geometric(const std::string& spec, double gamma, int length,
                         const std::string& policy_out) {
  const Environment env = load_environment(spec);
  const GeometricSolution sol = geometric_policy_iteration(env.mdp, gamma);
  const ReachRates reach = reach_rates(env, sol.policy);
  print_row(std::cout,
            {"env", "gamma", "iterations", "bellman_residual", "value_p0", "avg_return",
             "reach_good", "reach_deceptive"},
            {env.id, format_double(gamma), std::to_string(sol.iterations),
             format_double(sol.residual),
             format_double(env.mdp.initial_distribution().dot(sol.value)),
             format_double(stationary_average_return(env.mdp, sol.policy, length)), reach.good,
             reach.deceptive});
  if (!policy_out.empty()) {
    auto out = open_file(policy_out);
    out << "state,action,value\n";
    for (int s = 0; s < env.mdp.n_states(); ++s) {
      out << s << ',' << sol.policy.action(s) << ',' << format_double(sol.value(s)) << '\n';
    }
  }
}

void cmd_gsac(const std::string& spec, const ScheduleFlags& flags, const std::string& init,
              double alpha, int max_iters, std::uint64_t seed, int length,
              const std::string& trace_out) {
  const Environment env = load_environment(spec);
  const DiscountSchedule schedule = flags.schedule();
  const EtaWeights weights = weights_for(flags.weights, schedule.depth());
  GpiOptions options;
  options.init = parse_gpi_init(init);
  options.seed = seed;
  options.alpha = alpha;
  options.max_iters = max_iters;
  if (!trace_out.empty()) options.avg_trace_length = length;
  const GpiReport report = generalized_policy_iteration(env.mdp, schedule, weights, options);
  const ReachRates reach = reach_rates(env, report.final_policy);
  print_row(std::cout,
            {"env", "schedule", "D", "weights", "init", "alpha", "seed", "outcome", "iterations",
             "L_eta", "L_eta_normalized", "avg_return", "reach_good", "reach_deceptive"},
            {env.id, flags.label(), std::to_string(schedule.depth()), weight_cell(flags.weights),
             init, format_double(alpha), std::to_string(seed),
             std::string(to_string(report.outcome)), std::to_string(report.iterations),
             format_double(report.eta_trace.back()),
             format_double(report.eta_trace.back() / eta_total_mass(schedule, weights)),
             format_double(stationary_average_return(env.mdp, report.final_policy, length)),
             reach.good, reach.deceptive});
  if (!trace_out.empty()) {
    auto out = open_file(trace_out);
    out << "iteration,L_eta,avg_return\n";
    for (size_t i = 0; i < report.eta_trace.size(); ++i) {
      out << i << ',' << format_double(report.eta_trace[i]) << ','
          << format_double(report.avg_trace[i]) << '\n';
    }
  }
}

void cmd_hclose(const std::string& spec, const ScheduleFlags& flags, int horizon, int length,
                const std::string& trace_out) {
  const Environment env = load_environment(spec);
  const DiscountSchedule schedule = flags.schedule();
  const HCloseSolver solver(env.mdp, schedule, weights_for(flags.weights, schedule.depth()));
  const HClosePlan plan = solver.plan(horizon);
  const PlanEvaluation ev = solver.evaluate(plan, length);
  const ReachRates reach = reach_rates(env, plan.policy());
  const Eigen::VectorXd& p0 = env.mdp.initial_distribution();
  print_row(std::cout,
            {"env", "schedule", "D", "weights", "H", "proxy_value", "L_eta", "L_eta_normalized",
             "avg_return", "tail_scale", "reach_good", "reach_deceptive"},
            {env.id, flags.label(), std::to_string(schedule.depth()), weight_cell(flags.weights),
             std::to_string(horizon), format_double(plan.value(p0)), format_double(ev.eta_return),
             format_double(ev.eta_normalized), format_double(ev.average_return),
             format_double(plan.tail_scale), reach.good, reach.deceptive});
  if (!trace_out.empty()) {
    auto out = open_file(trace_out);
    out << "t,stage_coefficient,value_p0\n";
    for (int t = 0; t <= horizon; ++t) {
      out << t << ',' << format_double(plan.stage_coefficients[static_cast<size_t>(t)]) << ','
          << format_double(p0.dot(plan.head_values[static_cast<size_t>(t)])) << '\n';
    }
  }
}

int cmd_oracle_check(std::uint64_t seed) {
  const auto checks = run_oracle_checks(seed);
  size_t width = 5;
  for (const auto& c : checks) width = std::max(width, c.name.size());
  int failures = 0;
  std::cout << std::left << std::setw(static_cast<int>(width)) << "check" << "  status  detail\n";
  for (const auto& c : checks) {
    std::cout << std::setw(static_cast<int>(width)) << c.name << "  "
              << (c.passed ? "PASS  " : "FAIL  ") << "  " << c.detail << '\n';
    failures += c.passed ? 0 : 1;
  }
  return failures == 0 ? 0 : 1;
}

struct SweepFlags {
  std::string config_path;
  std::string out;
  std::map<std::string, std::string> overrides;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--config", config_path, "key=value configuration file");
    cmd->add_option("--out", out, "Output CSV (default: <output_dir>/<name>.csv or stdout)");
    for (const auto& key : config_keys()) {
      cmd->add_option("--" + key, overrides[key], "Overrides config key '" + key + "'");
    }
  }

  ExperimentConfig load(CLI::App* cmd) const {
    ExperimentConfig config;
    if (!config_path.empty()) load_config_file(config, config_path);
    for (const auto& [key, value] : overrides) {
      if (cmd->count("--" + key) > 0) apply_setting(config, key, value);
    }
    return config;
  }

  std::string out_path(const ExperimentConfig& config, const std::string& name) const {
    if (!out.empty()) return out;
    if (config.output_dir == ".") return "";
    std::filesystem::create_directories(config.output_dir);
    return (std::filesystem::path(config.output_dir) / (name + ".csv")).string();
  }
};

void print_plateaus(const CsvTable& table) {
  const int d_col = table.column("D");
  const int kind_col = table.column("kind");
  const int h_col = table.column("H");
  const int v_col = table.column("L_eta_normalized");
  std::map<int, std::vector<std::pair<int, double>>> series;
  for (const auto& row : table.rows) {
    if (row[static_cast<size_t>(kind_col)] != "plan") continue;
    series[std::stoi(row[static_cast<size_t>(d_col)])].push_back(
        {std::stoi(row[static_cast<size_t>(h_col)]), std::stod(row[static_cast<size_t>(v_col)])});
  }
  for (const auto& [D, points] : series) {
    std::vector<double> values;
    for (const auto& p : points) values.push_back(p.second);
    const auto onset = plateau_onset(values);
    std::cerr << "D=" << D << " plateau onset H="
              << (onset ? std::to_string(points[static_cast<size_t>(*onset)].first) : "none")
              << '\n';
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Delayed-discount reinforcement learning on tabular MDPs"};
  app.require_subcommand(1);

  ScheduleFlags weight_flags;
  int weight_horizon = 400;
  bool normalize = false;
  std::string weight_out;
  auto* weights = app.add_subcommand("weights", "Phi_d(t) table as CSV");
  weight_flags.add_to(weights, false);
  weights->add_option("--horizon", weight_horizon, "Largest t")->capture_default_str();
  weights->add_flag("--normalize", normalize, "Add the normalized profile of each depth");
  weights->add_option("--out", weight_out, "Output CSV (default stdout)");

  std::string env_spec = "u_maze";
  auto* env = app.add_subcommand("env", "Print an environment summary and layout");
  env->add_option("--env", env_spec, "Maze id, maze file or corridor[:n]")->capture_default_str();

  std::string geo_env = "u_maze", policy_out;
  double geo_gamma = 0.99;
  int geo_length = 4000;
  auto* geo = app.add_subcommand("solve-geometric", "Policy iteration for the gamma-discounted problem");
  geo->add_option("--env", geo_env)->capture_default_str();
  geo->add_option("--gamma", geo_gamma)->capture_default_str();
  geo->add_option("--length", geo_length, "Average-return horizon")->capture_default_str();
  geo->add_option("--policy-out", policy_out, "Write state,action,value CSV");

  std::string gsac_env = "u_maze", gsac_init = "geometric", gsac_trace;
  ScheduleFlags gsac_flags;
  double gsac_alpha = 0.0;
  int gsac_iters = 5000, gsac_length = 4000;
  std::uint64_t gsac_seed = 0;
  auto* gsac = app.add_subcommand("gsac", "Generalized policy iteration on Q_eta");
  gsac->add_option("--env", gsac_env)->capture_default_str();
  gsac_flags.add_to(gsac);
  gsac->add_option("--init", gsac_init, "random | geometric")->capture_default_str();
  gsac->add_option("--alpha", gsac_alpha, "Boltzmann temperature, 0 = greedy")->capture_default_str();
  gsac->add_option("--max-iters", gsac_iters)->capture_default_str();
  gsac->add_option("--seed", gsac_seed)->capture_default_str();
  gsac->add_option("--length", gsac_length, "Average-return horizon")->capture_default_str();
  gsac->add_option("--trace", gsac_trace, "Per-iteration CSV");

  std::string hc_env = "u_maze", hc_trace;
  ScheduleFlags hc_flags;
  int hc_horizon = 0, hc_length = 4000;
  auto* hclose = app.add_subcommand("hclose", "H-close non-stationary control");
  hclose->add_option("--env", hc_env)->capture_default_str();
  hc_flags.add_to(hclose);
  hclose->add_option("--horizon", hc_horizon, "Non-stationarity horizon H")->capture_default_str();
  hclose->add_option("--length", hc_length, "Average-return horizon")->capture_default_str();
  hclose->add_option("--trace", hc_trace, "Per-stage CSV");

  std::uint64_t oracle_seed = 7;
  auto* oracle_cmd = app.add_subcommand("oracle-check", "Cross-check solvers against brute force");
  oracle_cmd->add_option("--seed", oracle_seed)->capture_default_str();

  SweepFlags depth_flags, horizon_flags, heatmap_flags;
  auto* sweep_depth = app.add_subcommand("sweep-depth", "GSAC over depths, inits and seeds");
  depth_flags.add_to(sweep_depth);
  auto* sweep_horizon = app.add_subcommand("sweep-horizon", "H-close plans over horizons");
  horizon_flags.add_to(sweep_horizon);
  auto* heatmap = app.add_subcommand("heatmap", "Corridor success rate over (D, gamma)");
  heatmap_flags.add_to(heatmap);

  std::string plot_csv, plot_kind, plot_dir = ".";
  auto* plot = app.add_subcommand("plot-data", "gnuplot data files from a harness CSV");
  plot->add_option("--csv", plot_csv)->required();
  plot->add_option("--kind", plot_kind, "weights | depth_sweep | horizon_sweep | heatmap")->required();
  plot->add_option("--out-dir", plot_dir)->capture_default_str();

  std::string command = "ddrl";
  try {
    app.parse(argc, argv);
    command = app.get_subcommands().front()->get_name();
    if (weights->parsed()) {
      cmd_weights(weight_flags, weight_horizon, normalize, weight_out);
    } else if (env->parsed()) {
      cmd_env(env_spec);
    } else if (geo->parsed()) {
      cmd_solve_geometric(geo_env, geo_gamma, geo_length, policy_out);
    } else if (gsac->parsed()) {
      cmd_gsac(gsac_env, gsac_flags, gsac_init, gsac_alpha, gsac_iters, gsac_seed, gsac_length,
               gsac_trace);
    } else if (hclose->parsed()) {
      cmd_hclose(hc_env, hc_flags, hc_horizon, hc_length, hc_trace);
    } else if (oracle_cmd->parsed()) {
      return cmd_oracle_check(oracle_seed);
    } else if (sweep_depth->parsed()) {
      const auto config = depth_flags.load(sweep_depth);
      emit(run_depth_sweep(config), depth_flags.out_path(config, "depth_sweep"));
    } else if (sweep_horizon->parsed()) {
      const auto config = horizon_flags.load(sweep_horizon);
      const CsvTable table = run_horizon_sweep(config);
      emit(table, horizon_flags.out_path(config, "horizon_sweep"));
      print_plateaus(table);
    } else if (heatmap->parsed()) {
      const auto config = heatmap_flags.load(heatmap);
      emit(run_corridor_heatmap(config), heatmap_flags.out_path(config, "heatmap"));
    } else if (plot->parsed()) {
      for (const auto& path : emit_plot_data(plot_csv, parse_plot_kind(plot_kind), plot_dir)) {
        std::cout << path.string() << '\n';
      }
    }
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << nlohmann::json{{"error", e.what()}, {"command", command}, {"kind", "usage"}}.dump()
              << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << nlohmann::json{{"error", e.what()}, {"command", command}, {"kind", "runtime"}}.dump()
              << '\n';
    return 1;
  }
  return 0;
}
