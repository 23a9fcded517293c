#pragma once

// Experiment driver: configuration, environment loading, the parallel job
// runner and the depth / horizon / heatmap sweeps that write CSV tables.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ddrl/discount.hpp"
#include "ddrl/envs.hpp"
#include "ddrl/mdp.hpp"
#include "ddrl/solvers.hpp"

namespace ddrl {

struct ExperimentConfig {
  /// Bundled maze id, maze file path, or "corridor" / "corridor:<n>".
  std::string env = "u_maze";
  /// "linear": gamma_i = gamma0 - i * gamma_step; "constant": gamma_i = gamma0;
  /// "list": the explicit `gammas` (depth is then gammas.size() - 1).
  std::string schedule_rule = "linear";
  double gamma0 = 0.99;
  double gamma_step = 1e-3;
  std::vector<double> gammas;
  std::vector<int> depths{0, 1, 2, 3, 4, 5, 6, 7, 8};
  std::vector<int> horizons;
  int horizon_max = 120;
  /// "last" (e_D), "first" (e_0), "uniform", or an explicit comma list.
  std::string weights = "last";
  std::vector<GpiInit> inits{GpiInit::geometric, GpiInit::random};
  int n_seeds = 25;
  std::uint64_t seed = 0;
  int length = 4000;
  /// Sampled trajectories per evaluated policy for the empirical average.
  int trajectories = 25;
  int max_iters = 5000;
  double alpha = 0.0;
  /// Depth of the stationary GSAC reference policy in horizon sweeps.
  int reference_depth = 5;
  /// Heatmap grid: values of 1 - gamma, runs per cell, and the smallest
  /// 1 - gamma that is still computed.
  std::vector<double> one_minus_gamma{1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6,
                                      1e-7, 1e-8, 1e-9, 1e-10, 1e-11, 1e-12};
  int heatmap_runs = 10;
  double unstable_below = 1e-12;
  std::string output_dir = ".";
};

/// Applies one key=value setting; throws std::invalid_argument on an unknown
/// key or a malformed value.
void apply_setting(ExperimentConfig& config, const std::string& key, const std::string& value);
/// Reads a flat key=value file ('#' starts a comment) on top of `config`.
void load_config_file(ExperimentConfig& config, const std::filesystem::path& path);
std::vector<std::string> config_keys();
/// Checks every requested depth yields a valid schedule and counts are positive.
void validate_config(const ExperimentConfig& config);

DiscountSchedule schedule_for(const ExperimentConfig& config, int depth);
/// Human-readable schedule rule for provenance columns, e.g. "linear(0.99;0.001)".
std::string schedule_label(const ExperimentConfig& config);
EtaWeights weights_for(const std::string& rule, int depth);

struct Environment {
  std::string id;
  TabularMdp mdp;
  std::optional<GridMdp> grid;
  std::optional<Corridor> corridor;
};

Environment load_environment(const std::string& spec);

/// Formatted reach rates of the good and deceptive cells ("-" when the
/// environment has none or the policy is stochastic).
struct ReachRates {
  std::string good = "-";
  std::string deceptive = "-";
};
ReachRates reach_rates(const Environment& env, const NonStationaryPolicy& policy);
ReachRates reach_rates(const Environment& env, const StationaryPolicy& policy);

/// Exact expected (1/length) sum_{t<length} r_t from p_0.
double stationary_average_return(const TabularMdp& mdp, const StationaryPolicy& policy,
                                 int length);

/// Worker count from DDRL_THREADS, else the hardware concurrency.
int worker_count();
/// Runs job(i) for i in [0, n) on a bounded pool; results land by index so
/// the output order never depends on scheduling. The first exception thrown
/// by any job is rethrown.
void run_jobs(int n, const std::function<void(int)>& job, int workers = worker_count());

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  void write(std::ostream& out) const;
  int column(const std::string& name) const;
};

CsvTable read_csv(std::istream& in);
/// Shortest round-trip decimal form.
std::string format_double(double value);

CsvTable run_depth_sweep(const ExperimentConfig& config);
CsvTable run_horizon_sweep(const ExperimentConfig& config);
CsvTable run_corridor_heatmap(const ExperimentConfig& config);
CsvTable weights_table(const DiscountSchedule& schedule, int horizon, bool normalize);

/// First H after which every later value stays within tol of its
/// predecessor; nullopt when the last two values still differ.
std::optional<int> plateau_onset(const std::vector<double>& values, double tol = 1e-9);

enum class PlotKind { weights, depth_sweep, horizon_sweep, heatmap };
PlotKind parse_plot_kind(const std::string& text);
/// Writes <kind>.dat and <kind>.gp into out_dir; returns the written paths.
std::vector<std::filesystem::path> emit_plot_data(const std::filesystem::path& csv_path,
                                                  PlotKind kind,
                                                  const std::filesystem::path& out_dir);

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

/// Cross-validates solvers and weight tables against the brute-force oracles
/// on random small instances.
std::vector<CheckResult> run_oracle_checks(std::uint64_t seed);

}  // namespace ddrl
