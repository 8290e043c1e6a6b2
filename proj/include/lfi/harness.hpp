#ifndef LFI_HARNESS_HPP
#define LFI_HARNESS_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "lfi/engines.hpp"
#include "lfi/simulators.hpp"

namespace lfi::harness {

// Experiment grid: every task x method x seed combination is one run.
// Parsed from a strict JSON document; unknown keys are rejected.
struct ExperimentConfig {
  std::vector<std::string> tasks = {"gaussian_toy"};
  std::vector<std::string> methods = {"snpeb", "snl", "asnl"};
  std::vector<std::uint64_t> seeds = {1, 2, 3};
  std::uint64_t master_seed = 1;
  std::uint64_t observe_seed = 2026;  // fixes x0 per task
  std::string output_dir = "results";
  int workers = 1;  // LFI_WORKERS overrides
  engines::RoundPlan plan;
  engines::EngineConfig engine;  // pilot_seed is derived per run, ignored here

  bool operator==(const ExperimentConfig&) const = default;
};

// Throws std::invalid_argument on unknown keys, wrong types, or invalid
// values; all fields optional with the defaults above.
ExperimentConfig config_from_json(const std::string& text);
std::string config_to_json(const ExperimentConfig& cfg);  // canonical echo

// Per-run and per-(task, seed) seed derivation: names are FNV-1a hashed
// and mixed into the master seed with splitmix64 so run order is
// irrelevant.
std::uint64_t derive_run_seed(std::uint64_t master, const std::string& task,
                              const std::string& method, std::uint64_t seed);
std::uint64_t derive_pilot_seed(std::uint64_t master, const std::string& task,
                                std::uint64_t seed);

struct ResultRow {
  std::string task;
  std::string method;
  std::uint64_t seed = 0;
  int round = 0;   // 1-based
  long sims = 0;   // cumulative budgeted simulator calls
  double log_prob = 0.0;
  bool failed = false;
  engines::PhaseTimes times;
};

struct ResultsTable {
  std::vector<ResultRow> rows;
};

// Runs the full grid, streaming per-run artifacts to
// <output_dir>/<task>/<method>/seed<k>/ (written to a temp directory and
// renamed on completion). Completed runs are detected by their manifest
// and loaded from disk instead of rerun. Per-run failures are recorded
// as failed rows; other runs proceed.
ResultsTable run_experiment(const ExperimentConfig& cfg);

bool all_runs_succeeded(const ResultsTable& table);

// results.csv is free of timing data so reruns are byte-identical;
// wall-clock splits go to timings.csv.
void write_results_csv(const ResultsTable& table, const std::string& path);
void write_timings_csv(const ResultsTable& table, const std::string& path);
ResultsTable read_results_csv(const std::string& path);

// Per task: <task>_comparison.csv (one row per table row, with the
// per-(method, round) cross-seed median attached) and a matching SVG of
// median log-prob vs simulations, one series per method with a
// min-to-max seed band.
void emit_comparison_plot(const ResultsTable& table, const std::string& out_dir);

// Pairwise scatter of final-round gathered parameters, axes clamped to
// the prior box, true parameters marked.
void write_scatter_svg(const simulators::SimTask& task, const Eigen::MatrixXd& thetas,
                       const std::string& path);

// One scatter file per (task, method) from the first seed's run
// directory.
void emit_scatter_diagnostics(const ExperimentConfig& cfg, const std::string& results_dir);

// Aligned text table: per (task, method) total hours and per-phase
// breakdown, two decimals.
void emit_timing_table(const ResultsTable& table, const std::string& path);

// Final-round gathered parameters recorded by a completed run.
Eigen::MatrixXd load_final_round_thetas(const std::string& run_dir, int theta_dim);

}  // namespace lfi::harness

#endif
