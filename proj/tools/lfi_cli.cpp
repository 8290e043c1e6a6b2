// Command-line experiment runner: validate configs, run or resume
// experiment grids, and regenerate plots from a results directory.
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "lfi/harness.hpp"

namespace fs = std::filesystem;
using namespace lfi;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot read " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

int do_run(const std::string& config_path) {
  const harness::ExperimentConfig cfg = harness::config_from_json(slurp(config_path));
  const harness::ResultsTable table = harness::run_experiment(cfg);
  harness::emit_comparison_plot(table, cfg.output_dir);
  harness::emit_scatter_diagnostics(cfg, cfg.output_dir);
  harness::emit_timing_table(table,
                             (fs::path(cfg.output_dir) / "timing_table.txt").string());
  int failed = 0;
  for (const auto& row : table.rows)
    if (row.failed && row.round == 1) ++failed;
  std::cout << "runs: " << cfg.tasks.size() * cfg.methods.size() * cfg.seeds.size()
            << ", failed: " << failed << "\n";
  std::cout << "results: " << (fs::path(cfg.output_dir) / "results.csv").string() << "\n";
  return harness::all_runs_succeeded(table) ? 0 : 1;
}

int do_plot(const std::string& results_dir) {
  const harness::ResultsTable table =
      harness::read_results_csv((fs::path(results_dir) / "results.csv").string());
  harness::emit_comparison_plot(table, results_dir);
  std::cout << "plots written to " << results_dir << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Simulation-based inference benchmark runner"};
  app.require_subcommand(1);

  std::string config_path, results_dir;

  auto* run = app.add_subcommand("run", "Run all experiments in a config");
  run->add_option("config", config_path, "JSON config file")->required();

  auto* resume = app.add_subcommand("resume", "Resume a partially completed experiment");
  resume->add_option("config", config_path, "JSON config file")->required();

  auto* validate = app.add_subcommand("validate", "Validate a config without running");
  validate->add_option("config", config_path, "JSON config file")->required();

  auto* plot = app.add_subcommand("plot", "Regenerate plots from a results directory");
  plot->add_option("results_dir", results_dir, "Directory containing results.csv")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (app.got_subcommand(validate)) {
      const auto cfg = harness::config_from_json(slurp(config_path));
      std::cout << harness::config_to_json(cfg);
      return 0;
    }
    if (app.got_subcommand(run) || app.got_subcommand(resume)) return do_run(config_path);
    if (app.got_subcommand(plot)) return do_plot(results_dir);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
