#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <istream>
#include <mutex>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "ddrl/harness.hpp"

namespace ddrl {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> parts;
  std::string current;
  for (char ch : text) {
    if (ch == sep) {
      parts.push_back(trim(current));
      current.clear();
    } else {
      current.push_back(ch);
    }
  }
  parts.push_back(trim(current));
  return parts;
}

long long parse_integer(const std::string& key, const std::string& text) {
  long long value = 0;
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end || text.empty()) {
    throw std::invalid_argument(key + ": expected an integer, got '" + text + "'");
  }
  return value;
}

int parse_int(const std::string& key, const std::string& text) {
  const long long v = parse_integer(key, text);
  if (v < -2147483647LL || v > 2147483647LL) {
    throw std::invalid_argument(key + ": value out of range");
  }
  return static_cast<int>(v);
}

double parse_real(const std::string& key, const std::string& text) {
  double value = 0.0;
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end || text.empty() || !std::isfinite(value)) {
    throw std::invalid_argument(key + ": expected a number, got '" + text + "'");
  }
  return value;
}

std::vector<double> parse_reals(const std::string& key, const std::string& text) {
  std::vector<double> out;
  for (const auto& part : split(text, ',')) out.push_back(parse_real(key, part));
  return out;
}

// Comma list of integers; "a..b" expands to an inclusive range.
std::vector<int> parse_ints(const std::string& key, const std::string& text) {
  std::vector<int> out;
  for (const auto& part : split(text, ',')) {
    const auto dots = part.find("..");
    if (dots == std::string::npos) {
      out.push_back(parse_int(key, part));
      continue;
    }
    const int lo = parse_int(key, trim(part.substr(0, dots)));
    const int hi = parse_int(key, trim(part.substr(dots + 2)));
    if (lo > hi) throw std::invalid_argument(key + ": empty range '" + part + "'");
    for (int v = lo; v <= hi; ++v) out.push_back(v);
  }
  return out;
}

}  // namespace

std::vector<std::string> config_keys() {
  return {"env",        "schedule",       "gamma0",         "gamma_step",   "gammas",
          "depths",     "horizons",       "horizon_max",    "weights",      "inits",
          "n_seeds",    "seed",           "length",         "trajectories", "max_iters",
          "alpha",      "reference_depth", "one_minus_gamma", "heatmap_runs", "unstable_below",
          "output_dir"};
}

void apply_setting(ExperimentConfig& c, const std::string& key, const std::string& raw) {
  const std::string value = trim(raw);
  if (key == "env") {
    c.env = value;
  } else if (key == "schedule") {
    if (value != "linear" && value != "constant" && value != "list") {
      throw std::invalid_argument("schedule: expected linear, constant or list, got '" + value + "'");
    }
    c.schedule_rule = value;
  } else if (key == "gamma0") {
    c.gamma0 = parse_real(key, value);
  } else if (key == "gamma_step") {
    c.gamma_step = parse_real(key, value);
  } else if (key == "gammas") {
    c.gammas = parse_reals(key, value);
  } else if (key == "depths") {
    c.depths = parse_ints(key, value);
  } else if (key == "horizons") {
    c.horizons = parse_ints(key, value);
  } else if (key == "horizon_max") {
    c.horizon_max = parse_int(key, value);
  } else if (key == "weights") {
    c.weights = value;
  } else if (key == "inits") {
    c.inits.clear();
    for (const auto& part : split(value, ',')) c.inits.push_back(parse_gpi_init(part));
  } else if (key == "n_seeds") {
    c.n_seeds = parse_int(key, value);
  } else if (key == "seed") {
    const long long v = parse_integer(key, value);
    if (v < 0) throw std::invalid_argument("seed: must be non-negative");
    c.seed = static_cast<std::uint64_t>(v);
  } else if (key == "length") {
    c.length = parse_int(key, value);
  } else if (key == "trajectories") {
    c.trajectories = parse_int(key, value);
  } else if (key == "max_iters") {
    c.max_iters = parse_int(key, value);
  } else if (key == "alpha") {
    c.alpha = parse_real(key, value);
  } else if (key == "reference_depth") {
    c.reference_depth = parse_int(key, value);
  } else if (key == "one_minus_gamma") {
    c.one_minus_gamma = parse_reals(key, value);
  } else if (key == "heatmap_runs") {
    c.heatmap_runs = parse_int(key, value);
  } else if (key == "unstable_below") {
    c.unstable_below = parse_real(key, value);
  } else if (key == "output_dir") {
    c.output_dir = value;
  } else {
    throw std::invalid_argument("unknown config key '" + key + "'");
  }
}

void load_config_file(ExperimentConfig& config, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read config file " + path.string());
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument(path.string() + ":" + std::to_string(line_no) +
                                  ": expected key = value");
    }
    try {
      apply_setting(config, trim(line.substr(0, eq)), line.substr(eq + 1));
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
}

void validate_config(const ExperimentConfig& c) {
  auto positive = [](const char* name, int v) {
    if (v < 1) throw std::invalid_argument(std::string(name) + " must be >= 1");
  };
  positive("n_seeds", c.n_seeds);
  positive("length", c.length);
  positive("trajectories", c.trajectories);
  positive("max_iters", c.max_iters);
  positive("heatmap_runs", c.heatmap_runs);
  if (c.depths.empty()) throw std::invalid_argument("depths must not be empty");
  if (c.inits.empty()) throw std::invalid_argument("inits must not be empty");
  if (c.alpha < 0.0) throw std::invalid_argument("alpha must be >= 0");
  if (c.horizon_max < 0) throw std::invalid_argument("horizon_max must be >= 0");
  for (int h : c.horizons) {
    if (h < 0) throw std::invalid_argument("horizons must be >= 0");
  }
  for (int d : c.depths) {
    schedule_for(c, d);
    weights_for(c.weights, d);
  }
  for (double e : c.one_minus_gamma) {
    if (!(e > 0.0 && e < 1.0)) throw std::invalid_argument("one_minus_gamma values must lie in (0,1)");
  }
}

DiscountSchedule schedule_for(const ExperimentConfig& c, int depth) {
  if (depth < 0) throw std::invalid_argument("depth must be >= 0");
  if (c.schedule_rule == "linear") return DiscountSchedule::linear(depth, c.gamma0, c.gamma_step);
  if (c.schedule_rule == "constant") return DiscountSchedule::constant(depth, c.gamma0);
  if (static_cast<int>(c.gammas.size()) <= depth) {
    throw std::invalid_argument("gammas list has " + std::to_string(c.gammas.size()) +
                                " entries, depth " + std::to_string(depth) + " needs " +
                                std::to_string(depth + 1));
  }
  return DiscountSchedule(std::vector<double>(c.gammas.begin(), c.gammas.begin() + depth + 1));
}

std::string schedule_label(const ExperimentConfig& c) {
  if (c.schedule_rule == "linear") {
    return "linear(" + format_double(c.gamma0) + ";" + format_double(c.gamma_step) + ")";
  }
  if (c.schedule_rule == "constant") return "constant(" + format_double(c.gamma0) + ")";
  std::string out = "list(";
  for (size_t i = 0; i < c.gammas.size(); ++i) {
    out += (i ? ";" : "") + format_double(c.gammas[i]);
  }
  return out + ")";
}

EtaWeights weights_for(const std::string& rule, int depth) {
  if (rule == "last") return EtaWeights::unit(depth, depth);
  if (rule == "first") return EtaWeights::unit(depth, 0);
  if (rule == "uniform") return EtaWeights(Eigen::VectorXd::Ones(depth + 1));
  const auto values = parse_reals("weights", rule);
  if (static_cast<int>(values.size()) != depth + 1) {
    throw std::invalid_argument("weights list has " + std::to_string(values.size()) +
                                " entries, depth " + std::to_string(depth) + " needs " +
                                std::to_string(depth + 1));
  }
  return EtaWeights(Eigen::Map<const Eigen::VectorXd>(values.data(),
                                                      static_cast<Eigen::Index>(values.size())));
}

Environment load_environment(const std::string& spec) {
  if (spec == "corridor" || spec.rfind("corridor:", 0) == 0) {
    int n = 2000;
    if (spec.size() > 9) n = parse_int("corridor size", spec.substr(9));
    std::optional<std::pair<int, int>> band;
    if (n == 2000) {
      band = std::pair<int, int>{990, 1010};
    } else if (n >= 5) {
      const int lo = std::max(1, static_cast<int>(std::lround(n * 990.0 / 2000.0)));
      const int hi = std::min(n - 2, static_cast<int>(std::lround(n * 1010.0 / 2000.0)));
      if (lo <= hi) band = std::pair<int, int>{lo, hi};
    }
    Corridor corridor = build_corridor(n, 1.0, 0.9, -1.0, band);
    return Environment{"corridor:" + std::to_string(n), corridor.mdp, std::nullopt, corridor};
  }
  const auto ids = bundled_maze_ids();
  const bool bundled = std::find(ids.begin(), ids.end(), spec) != ids.end();
  GridMdp grid = maze_to_mdp(bundled ? bundled_maze(spec) : load_maze(spec));
  return Environment{spec, grid.mdp, grid, std::nullopt};
}

int worker_count() {
  if (const char* env = std::getenv("DDRL_THREADS"); env && *env) {
    const int n = parse_int("DDRL_THREADS", env);
    if (n < 1) throw std::invalid_argument("DDRL_THREADS must be >= 1");
    return n;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

void run_jobs(int n, const std::function<void(int)>& job, int workers) {
  if (n <= 0) return;
  workers = std::max(1, std::min(workers, n));
  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (int i = next++; i < n; i = next++) {
      try {
        job(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = n;
      }
    }
  };
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    for (int w = 0; w < workers; ++w) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
  }
  if (failure) std::rethrow_exception(failure);
}

void CsvTable::write(std::ostream& out) const {
  auto line = [&](const std::vector<std::string>& cells) {
    for (size_t i = 0; i < cells.size(); ++i) out << (i ? "," : "") << cells[i];
    out << '\n';
  };
  line(header);
  for (const auto& row : rows) line(row);
}

int CsvTable::column(const std::string& name) const {
  const auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) throw std::invalid_argument("CSV has no column '" + name + "'");
  return static_cast<int>(it - header.begin());
}

CsvTable read_csv(std::istream& in) {
  CsvTable table;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto cells = split(line, ',');
    if (table.header.empty()) {
      table.header = std::move(cells);
      continue;
    }
    if (cells.size() != table.header.size()) {
      throw std::invalid_argument("CSV row " + std::to_string(table.rows.size() + 1) + " has " +
                                  std::to_string(cells.size()) + " cells, header has " +
                                  std::to_string(table.header.size()));
    }
    table.rows.push_back(std::move(cells));
  }
  if (table.header.empty()) throw std::invalid_argument("CSV input is empty");
  return table;
}

std::string format_double(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  if (ec != std::errc()) return "nan";
  return std::string(buf, ptr);
}

}  // namespace ddrl
