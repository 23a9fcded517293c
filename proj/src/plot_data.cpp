#include <fstream>
#include <map>
#include <stdexcept>

#include "ddrl/harness.hpp"

namespace ddrl {

namespace {

struct Columns {
  const CsvTable& table;
  std::vector<int> index;

  Columns(const CsvTable& t, const std::vector<std::string>& names) : table(t) {
    for (const auto& n : names) {
      try {
        index.push_back(t.column(n));
      } catch (const std::invalid_argument&) {
        throw std::invalid_argument("schema mismatch: CSV lacks column '" + n + "'");
      }
    }
  }
  const std::string& get(const std::vector<std::string>& row, size_t k) const {
    return row[static_cast<size_t>(index[k])];
  }
};

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

// Groups rows by the value of `key`, keeping first-seen order, and writes one
// gnuplot data block per group.
void write_blocks(std::ostream& out, const std::string& key_name,
                  const std::vector<std::pair<std::string, std::vector<std::string>>>& lines) {
  std::vector<std::string> order;
  std::map<std::string, std::vector<std::string>> groups;
  for (const auto& [key, text] : lines) {
    if (!groups.count(key)) order.push_back(key);
    groups[key].insert(groups[key].end(), text.begin(), text.end());
  }
  bool first = true;
  for (const auto& key : order) {
    if (!first) out << "\n\n";
    first = false;
    out << "# " << key_name << " = " << key << '\n';
    for (const auto& l : groups[key]) out << l << '\n';
  }
}

}  // namespace

PlotKind parse_plot_kind(const std::string& text) {
  if (text == "weights") return PlotKind::weights;
  if (text == "depth_sweep") return PlotKind::depth_sweep;
  if (text == "horizon_sweep") return PlotKind::horizon_sweep;
  if (text == "heatmap") return PlotKind::heatmap;
  throw std::invalid_argument("unknown plot kind '" + text +
                              "' (expected weights, depth_sweep, horizon_sweep or heatmap)");
}

std::vector<std::filesystem::path> emit_plot_data(const std::filesystem::path& csv_path,
                                                  PlotKind kind,
                                                  const std::filesystem::path& out_dir) {
  std::ifstream in(csv_path);
  if (!in) throw std::runtime_error("cannot read " + csv_path.string());
  const CsvTable table = read_csv(in);
  std::filesystem::create_directories(out_dir);

  std::vector<std::pair<std::string, std::vector<std::string>>> lines;
  std::string stem, key_name, script;
  switch (kind) {
    case PlotKind::weights: {
      const Columns col(table, {"d", "t", "normalized"});
      for (const auto& r : table.rows) {
        if (col.get(r, 2) == "-") {
          throw std::invalid_argument("schema mismatch: weights CSV was written without --normalize");
        }
        lines.push_back({col.get(r, 0), {col.get(r, 1) + " " + col.get(r, 2)}});
      }
      stem = "weights";
      key_name = "d";
      script =
          "set xlabel 't'\nset ylabel 'normalized Phi_d(t)'\n"
          "plot for [i=0:*] 'weights.dat' index i using 1:2 with lines title columnheader(1)\n";
      break;
    }
    case PlotKind::depth_sweep: {
      const Columns col(table, {"D", "init", "seed", "L_eta_normalized", "avg_return"});
      for (const auto& r : table.rows) {
        if (col.get(r, 2) != "mean") continue;
        lines.push_back({col.get(r, 1),
                         {col.get(r, 0) + " " + col.get(r, 3) + " " + col.get(r, 4)}});
      }
      stem = "depth_sweep";
      key_name = "init";
      script =
          "set xlabel 'D'\n"
          "plot for [i=0:*] 'depth_sweep.dat' index i using 1:3 with linespoints title 'avg', \\\n"
          "     for [i=0:*] 'depth_sweep.dat' index i using 1:2 with lines dt 2 title 'L_eta'\n";
      break;
    }
    case PlotKind::horizon_sweep: {
      const Columns col(table, {"D", "kind", "H", "L_eta_normalized", "avg_return"});
      for (const auto& r : table.rows) {
        if (col.get(r, 1) != "plan") continue;
        lines.push_back({col.get(r, 0),
                         {col.get(r, 2) + " " + col.get(r, 3) + " " + col.get(r, 4)}});
      }
      stem = "horizon_sweep";
      key_name = "D";
      script =
          "set xlabel 'H'\n"
          "plot for [i=0:*] 'horizon_sweep.dat' index i using 1:3 with lines title 'avg', \\\n"
          "     for [i=0:*] 'horizon_sweep.dat' index i using 1:2 with lines dt 2 title 'L_eta'\n";
      break;
    }
    case PlotKind::heatmap: {
      const Columns col(table, {"D", "gamma", "one_minus_gamma", "best_success", "mean_success"});
      for (const auto& r : table.rows) {
        lines.push_back({col.get(r, 0), {col.get(r, 0) + " " + col.get(r, 2) + " " +
                                         col.get(r, 3) + " " + col.get(r, 4)}});
      }
      stem = "heatmap";
      key_name = "D";
      script =
          "set logscale y\nset xlabel 'D'\nset ylabel '1 - gamma'\nset view map\n"
          "splot 'heatmap.dat' using 1:2:3 with pm3d title 'best success'\n";
      break;
    }
  }
  if (lines.empty()) throw std::invalid_argument("schema mismatch: no plottable rows in CSV");

  const auto data_path = out_dir / (stem + ".dat");
  const auto script_path = out_dir / (stem + ".gp");
  {
    auto out = open_out(data_path);
    write_blocks(out, key_name, lines);
  }
  {
    auto out = open_out(script_path);
    out << script;
  }
  return {data_path, script_path};
}

}  // namespace ddrl
