#include "lfi/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <json.hpp>

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace lfi::harness {

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt_time(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << content;
}

std::string read_file(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot read " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

const std::vector<std::string> kKnownTasks = {"gaussian_toy", "lotka_volterra", "mg1"};

void require_keys(const json& obj, const std::vector<std::string>& allowed,
                  const std::string& where) {
  for (const auto& [key, value] : obj.items()) {
    (void)value;
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      throw std::invalid_argument("unknown config key " + where + key);
  }
}

template <typename T>
void read_field(const json& obj, const char* key, T& out) {
  if (obj.contains(key)) out = obj.at(key).get<T>();
}

}  // namespace

ExperimentConfig config_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string("config parse error: ") + e.what());
  }
  if (!j.is_object()) throw std::invalid_argument("config root must be an object");

  require_keys(j,
               {"tasks", "methods", "seeds", "master_seed", "observe_seed", "output_dir",
                "workers", "rounds", "sims_per_round", "hidden_units", "components",
                "mcmc_burn_in", "mcmc_thin", "eval_samples", "pilot_size", "proposal_mc",
                "weight_clip_quantile", "min_acceptance", "eval_marginalize_weights", "train",
                "acquisition"},
               "");

  ExperimentConfig cfg;
  read_field(j, "tasks", cfg.tasks);
  read_field(j, "methods", cfg.methods);
  read_field(j, "seeds", cfg.seeds);
  read_field(j, "master_seed", cfg.master_seed);
  read_field(j, "observe_seed", cfg.observe_seed);
  read_field(j, "output_dir", cfg.output_dir);
  read_field(j, "workers", cfg.workers);
  read_field(j, "rounds", cfg.plan.rounds);
  read_field(j, "sims_per_round", cfg.plan.sims_per_round);
  read_field(j, "hidden_units", cfg.engine.hidden_units);
  read_field(j, "components", cfg.engine.components);
  read_field(j, "mcmc_burn_in", cfg.engine.mcmc_burn_in);
  read_field(j, "mcmc_thin", cfg.engine.mcmc_thin);
  read_field(j, "eval_samples", cfg.engine.eval_samples);
  read_field(j, "pilot_size", cfg.engine.pilot_size);
  read_field(j, "proposal_mc", cfg.engine.proposal_mc);
  read_field(j, "weight_clip_quantile", cfg.engine.weight_clip_quantile);
  read_field(j, "min_acceptance", cfg.engine.min_acceptance);
  read_field(j, "eval_marginalize_weights", cfg.engine.eval_marginalize_weights);

  if (j.contains("train")) {
    const json& t = j.at("train");
    require_keys(t,
                 {"epochs", "batch_size", "learning_rate", "adam_beta1", "adam_beta2", "adam_eps",
                  "mc_samples_per_step", "kl_scale"},
                 "train.");
    read_field(t, "epochs", cfg.engine.train.epochs);
    read_field(t, "batch_size", cfg.engine.train.batch_size);
    read_field(t, "learning_rate", cfg.engine.train.learning_rate);
    read_field(t, "adam_beta1", cfg.engine.train.adam_beta1);
    read_field(t, "adam_beta2", cfg.engine.train.adam_beta2);
    read_field(t, "adam_eps", cfg.engine.train.adam_eps);
    read_field(t, "mc_samples_per_step", cfg.engine.train.mc_samples_per_step);
    read_field(t, "kl_scale", cfg.engine.train.kl_scale);
  }
  if (j.contains("acquisition")) {
    const json& a = j.at("acquisition");
    require_keys(a,
                 {"ensemble_size", "restarts_per_point", "max_iters", "grad_tol", "fd_step_frac",
                  "lbfgs_memory"},
                 "acquisition.");
    read_field(a, "ensemble_size", cfg.engine.acq.ensemble_size);
    read_field(a, "restarts_per_point", cfg.engine.acq.restarts_per_point);
    read_field(a, "max_iters", cfg.engine.acq.max_iters);
    read_field(a, "grad_tol", cfg.engine.acq.grad_tol);
    read_field(a, "fd_step_frac", cfg.engine.acq.fd_step_frac);
    read_field(a, "lbfgs_memory", cfg.engine.acq.lbfgs_memory);
  }

  if (cfg.tasks.empty()) throw std::invalid_argument("tasks must be nonempty");
  for (const auto& t : cfg.tasks)
    if (std::find(kKnownTasks.begin(), kKnownTasks.end(), t) == kKnownTasks.end())
      throw std::invalid_argument("unknown task: " + t);
  if (cfg.methods.empty()) throw std::invalid_argument("methods must be nonempty");
  for (const auto& m : cfg.methods) engines::method_from_name(m);  // throws if unknown
  if (cfg.seeds.empty()) throw std::invalid_argument("seeds must be nonempty");
  if (cfg.plan.rounds < 1 || cfg.plan.sims_per_round < 1)
    throw std::invalid_argument("rounds and sims_per_round must be >= 1");
  if (cfg.workers < 1) throw std::invalid_argument("workers must be >= 1");
  if (cfg.engine.train.epochs < 1 || cfg.engine.train.batch_size < 1)
    throw std::invalid_argument("train.epochs and train.batch_size must be >= 1");
  if (cfg.engine.eval_samples < 2) throw std::invalid_argument("eval_samples must be >= 2");
  if (cfg.engine.pilot_size < 2) throw std::invalid_argument("pilot_size must be >= 2");
  if (cfg.engine.hidden_units < 1 || cfg.engine.components < 1)
    throw std::invalid_argument("hidden_units and components must be >= 1");
  if (cfg.engine.acq.ensemble_size < 2)
    throw std::invalid_argument("acquisition.ensemble_size must be >= 2");
  if (cfg.output_dir.empty()) throw std::invalid_argument("output_dir must be nonempty");
  return cfg;
}

std::string config_to_json(const ExperimentConfig& cfg) {
  json j;
  j["tasks"] = cfg.tasks;
  j["methods"] = cfg.methods;
  j["seeds"] = cfg.seeds;
  j["master_seed"] = cfg.master_seed;
  j["observe_seed"] = cfg.observe_seed;
  j["output_dir"] = cfg.output_dir;
  j["workers"] = cfg.workers;
  j["rounds"] = cfg.plan.rounds;
  j["sims_per_round"] = cfg.plan.sims_per_round;
  j["hidden_units"] = cfg.engine.hidden_units;
  j["components"] = cfg.engine.components;
  j["mcmc_burn_in"] = cfg.engine.mcmc_burn_in;
  j["mcmc_thin"] = cfg.engine.mcmc_thin;
  j["eval_samples"] = cfg.engine.eval_samples;
  j["pilot_size"] = cfg.engine.pilot_size;
  j["proposal_mc"] = cfg.engine.proposal_mc;
  j["weight_clip_quantile"] = cfg.engine.weight_clip_quantile;
  j["min_acceptance"] = cfg.engine.min_acceptance;
  j["eval_marginalize_weights"] = cfg.engine.eval_marginalize_weights;
  j["train"] = {{"epochs", cfg.engine.train.epochs},
                {"batch_size", cfg.engine.train.batch_size},
                {"learning_rate", cfg.engine.train.learning_rate},
                {"adam_beta1", cfg.engine.train.adam_beta1},
                {"adam_beta2", cfg.engine.train.adam_beta2},
                {"adam_eps", cfg.engine.train.adam_eps},
                {"mc_samples_per_step", cfg.engine.train.mc_samples_per_step},
                {"kl_scale", cfg.engine.train.kl_scale}};
  j["acquisition"] = {{"ensemble_size", cfg.engine.acq.ensemble_size},
                      {"restarts_per_point", cfg.engine.acq.restarts_per_point},
                      {"max_iters", cfg.engine.acq.max_iters},
                      {"grad_tol", cfg.engine.acq.grad_tol},
                      {"fd_step_frac", cfg.engine.acq.fd_step_frac},
                      {"lbfgs_memory", cfg.engine.acq.lbfgs_memory}};
  return j.dump(2) + "\n";
}

std::uint64_t derive_run_seed(std::uint64_t master, const std::string& task,
                              const std::string& method, std::uint64_t seed) {
  std::uint64_t s = splitmix64(master);
  s = splitmix64(s ^ fnv1a(task));
  s = splitmix64(s ^ fnv1a(method));
  return splitmix64(s ^ seed);
}

std::uint64_t derive_pilot_seed(std::uint64_t master, const std::string& task,
                                std::uint64_t seed) {
  std::uint64_t s = splitmix64(master ^ 0x70696c6f74ull);  // pilot stream tag
  s = splitmix64(s ^ fnv1a(task));
  return splitmix64(s ^ seed);
}

namespace {

fs::path run_directory(const ExperimentConfig& cfg, const std::string& task,
                       const std::string& method, std::uint64_t seed) {
  return fs::path(cfg.output_dir) / task / method / ("seed" + std::to_string(seed));
}

std::string rounds_csv_text(const engines::RunResult& res, int sims_per_round) {
  std::string out = "round,sims_cum,log_prob,simulate_s,train_s,propose_s,evaluate_s,widened\n";
  long cum = 0;
  for (const auto& rec : res.rounds) {
    cum += sims_per_round;
    out += std::to_string(rec.round) + "," + std::to_string(cum) + "," + fmt(rec.log_prob) + "," +
           fmt_time(rec.times.simulate) + "," + fmt_time(rec.times.train) + "," +
           fmt_time(rec.times.propose) + "," + fmt_time(rec.times.evaluate) + "," +
           (rec.proposal_widened ? "1" : "0") + "\n";
  }
  return out;
}

std::string dataset_csv_text(const engines::RunResult& res) {
  const int td = static_cast<int>(res.rounds.front().thetas.cols());
  const int xd = static_cast<int>(res.rounds.front().xs.cols());
  std::string out = "round";
  for (int j = 0; j < td; ++j) out += ",theta_" + std::to_string(j);
  for (int j = 0; j < xd; ++j) out += ",x_" + std::to_string(j);
  out += "\n";
  for (const auto& rec : res.rounds) {
    for (int i = 0; i < rec.thetas.rows(); ++i) {
      out += std::to_string(rec.round);
      for (int j = 0; j < td; ++j) out += "," + fmt(rec.thetas(i, j));
      for (int j = 0; j < xd; ++j) out += "," + fmt(rec.xs(i, j));
      out += "\n";
    }
  }
  return out;
}

void write_vp_snapshot(const fs::path& path, const svi::VariationalPosterior& vp) {
  std::ofstream f(path, std::ios::binary);
  const std::int64_t n = vp.means.size();
  f.write(reinterpret_cast<const char*>(&n), sizeof n);
  f.write(reinterpret_cast<const char*>(vp.means.data()), n * sizeof(double));
  f.write(reinterpret_cast<const char*>(vp.log_stds.data()), n * sizeof(double));
}

std::vector<ResultRow> rows_from_rounds_csv(const std::string& text, const std::string& task,
                                            const std::string& method, std::uint64_t seed) {
  std::vector<ResultRow> rows;
  std::stringstream ss(text);
  std::string line;
  std::getline(ss, line);  // header
  while (std::getline(ss, line)) {
    if (line.empty()) continue;
    const auto f = split_csv(line);
    if (f.size() < 8) throw std::runtime_error("malformed rounds.csv line: " + line);
    ResultRow row;
    row.task = task;
    row.method = method;
    row.seed = seed;
    row.round = std::stoi(f[0]);
    row.sims = std::stol(f[1]);
    row.log_prob = std::strtod(f[2].c_str(), nullptr);
    row.times.simulate = std::strtod(f[3].c_str(), nullptr);
    row.times.train = std::strtod(f[4].c_str(), nullptr);
    row.times.propose = std::strtod(f[5].c_str(), nullptr);
    row.times.evaluate = std::strtod(f[6].c_str(), nullptr);
    rows.push_back(row);
  }
  return rows;
}

std::vector<ResultRow> failed_rows(const ExperimentConfig& cfg, const std::string& task,
                                   const std::string& method, std::uint64_t seed) {
  std::vector<ResultRow> rows;
  for (int r = 1; r <= cfg.plan.rounds; ++r) {
    ResultRow row;
    row.task = task;
    row.method = method;
    row.seed = seed;
    row.round = r;
    row.sims = static_cast<long>(r) * cfg.plan.sims_per_round;
    row.log_prob = std::numeric_limits<double>::quiet_NaN();
    row.failed = true;
    rows.push_back(row);
  }
  return rows;
}

std::vector<ResultRow> execute_run(const ExperimentConfig& cfg, const std::string& task_name,
                                   const std::string& method_name, std::uint64_t seed) {
  const fs::path dir = run_directory(cfg, task_name, method_name, seed);
  const fs::path manifest_path = dir / "manifest.json";

  if (fs::exists(manifest_path)) {
    const json manifest = json::parse(read_file(manifest_path));
    if (manifest.value("complete", false))
      return rows_from_rounds_csv(read_file(dir / "rounds.csv"), task_name, method_name, seed);
  }

  try {
    simulators::SimTask task = simulators::make_task(task_name);
    simulators::observe(task, splitmix64(cfg.observe_seed ^ fnv1a(task_name)));

    engines::EngineConfig ecfg = cfg.engine;
    ecfg.pilot_seed = derive_pilot_seed(cfg.master_seed, task_name, seed);
    const std::uint64_t run_seed = derive_run_seed(cfg.master_seed, task_name, method_name, seed);
    Rng rng(run_seed);

    const engines::RunResult res =
        engines::run_engine(engines::method_from_name(method_name), task, cfg.plan, ecfg, rng);

    const fs::path tmp = dir.string() + ".tmp";
    fs::remove_all(tmp);
    fs::create_directories(tmp);

    json manifest;
    manifest["task"] = task_name;
    manifest["method"] = method_name;
    manifest["seed"] = seed;
    manifest["run_seed"] = run_seed;
    manifest["pilot_seed"] = ecfg.pilot_seed;
    manifest["sim_calls"] = res.sim_calls;
    manifest["pilot_sims"] = res.pilot_sims;
    manifest["complete"] = true;
    manifest["config"] = json::parse(config_to_json(cfg));
    write_file(tmp / "manifest.json", manifest.dump(2) + "\n");
    write_file(tmp / "rounds.csv", rounds_csv_text(res, cfg.plan.sims_per_round));
    write_file(tmp / "dataset.csv", dataset_csv_text(res));
    for (const auto& rec : res.rounds)
      write_vp_snapshot(tmp / ("vp_round" + std::to_string(rec.round) + ".bin"), rec.vp);

    fs::remove_all(dir);
    fs::rename(tmp, dir);

    std::vector<ResultRow> rows;
    long cum = 0;
    for (const auto& rec : res.rounds) {
      cum += cfg.plan.sims_per_round;
      ResultRow row;
      row.task = task_name;
      row.method = method_name;
      row.seed = seed;
      row.round = rec.round;
      row.sims = cum;
      row.log_prob = rec.log_prob;
      row.times = rec.times;
      rows.push_back(row);
    }
    return rows;
  } catch (const std::exception& e) {
    fs::create_directories(dir.parent_path());
    write_file(dir.string() + ".error.txt", std::string(e.what()) + "\n");
    return failed_rows(cfg, task_name, method_name, seed);
  }
}

}  // namespace

ResultsTable run_experiment(const ExperimentConfig& cfg) {
  struct Job {
    std::string task, method;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (const auto& task : cfg.tasks)
    for (const auto& method : cfg.methods)
      for (const auto seed : cfg.seeds) jobs.push_back({task, method, seed});

  int workers = cfg.workers;
  if (const char* env = std::getenv("LFI_WORKERS")) {
    const int w = std::atoi(env);
    if (w >= 1) workers = w;
  }
  workers = std::min<int>(workers, static_cast<int>(jobs.size()));

  std::vector<std::vector<ResultRow>> per_job(jobs.size());
  std::atomic<size_t> next{0};
  auto work = [&] {
    for (;;) {
      const size_t i = next.fetch_add(1);
      if (i >= jobs.size()) return;
      per_job[i] = execute_run(cfg, jobs[i].task, jobs[i].method, jobs[i].seed);
    }
  };
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }

  ResultsTable table;
  for (const auto& rows : per_job)
    table.rows.insert(table.rows.end(), rows.begin(), rows.end());

  fs::create_directories(cfg.output_dir);
  write_results_csv(table, (fs::path(cfg.output_dir) / "results.csv").string());
  write_timings_csv(table, (fs::path(cfg.output_dir) / "timings.csv").string());
  return table;
}

bool all_runs_succeeded(const ResultsTable& table) {
  for (const auto& row : table.rows)
    if (row.failed) return false;
  return !table.rows.empty();
}

void write_results_csv(const ResultsTable& table, const std::string& path) {
  std::string out = "task,method,seed,round,sims,log_prob,status\n";
  for (const auto& r : table.rows)
    out += r.task + "," + r.method + "," + std::to_string(r.seed) + "," +
           std::to_string(r.round) + "," + std::to_string(r.sims) + "," + fmt(r.log_prob) + "," +
           (r.failed ? "failed" : "ok") + "\n";
  write_file(path, out);
}

void write_timings_csv(const ResultsTable& table, const std::string& path) {
  std::string out = "task,method,seed,round,simulate_s,train_s,propose_s,evaluate_s\n";
  for (const auto& r : table.rows)
    out += r.task + "," + r.method + "," + std::to_string(r.seed) + "," +
           std::to_string(r.round) + "," + fmt_time(r.times.simulate) + "," +
           fmt_time(r.times.train) + "," + fmt_time(r.times.propose) + "," +
           fmt_time(r.times.evaluate) + "\n";
  write_file(path, out);
}

ResultsTable read_results_csv(const std::string& path) {
  ResultsTable table;
  std::stringstream ss(read_file(path));
  std::string line;
  std::getline(ss, line);  // header
  while (std::getline(ss, line)) {
    if (line.empty()) continue;
    const auto f = split_csv(line);
    if (f.size() != 7) throw std::runtime_error("malformed results.csv line: " + line);
    ResultRow row;
    row.task = f[0];
    row.method = f[1];
    row.seed = std::stoull(f[2]);
    row.round = std::stoi(f[3]);
    row.sims = std::stol(f[4]);
    row.log_prob = std::strtod(f[5].c_str(), nullptr);
    row.failed = (f[6] == "failed");
    table.rows.push_back(row);
  }
  return table;
}

namespace {

double median(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const size_t n = v.size();
  return (n % 2 == 1) ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::string svg_num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

const std::map<std::string, std::string> kMethodColors = {
    {"snpeb", "#d62728"}, {"snl", "#1f77b4"}, {"asnl", "#2ca02c"}};

std::string method_color(const std::string& m) {
  const auto it = kMethodColors.find(m);
  return it == kMethodColors.end() ? "#777777" : it->second;
}

}  // namespace

void emit_comparison_plot(const ResultsTable& table, const std::string& out_dir) {
  if (table.rows.empty()) throw std::domain_error("emit_comparison_plot: empty table");
  fs::create_directories(out_dir);

  std::vector<std::string> tasks;
  for (const auto& r : table.rows)
    if (std::find(tasks.begin(), tasks.end(), r.task) == tasks.end()) tasks.push_back(r.task);

  for (const auto& task : tasks) {
    // per (method, round): values across seeds
    std::map<std::pair<std::string, int>, std::vector<double>> groups;
    std::map<std::pair<std::string, int>, long> group_sims;
    std::vector<std::string> methods;
    int max_round = 0;
    for (const auto& r : table.rows) {
      if (r.task != task) continue;
      if (std::find(methods.begin(), methods.end(), r.method) == methods.end())
        methods.push_back(r.method);
      if (!r.failed) groups[{r.method, r.round}].push_back(r.log_prob);
      group_sims[{r.method, r.round}] = r.sims;
      max_round = std::max(max_round, r.round);
    }

    // data file: one row per table row, with the cross-seed median attached
    std::string csv = "task,method,seed,round,sims,log_prob,median_log_prob\n";
    for (const auto& r : table.rows) {
      if (r.task != task) continue;
      csv += r.task + "," + r.method + "," + std::to_string(r.seed) + "," +
             std::to_string(r.round) + "," + std::to_string(r.sims) + "," + fmt(r.log_prob) +
             "," + fmt(median(groups[{r.method, r.round}])) + "\n";
    }
    write_file(fs::path(out_dir) / (task + "_comparison.csv"), csv);

    // SVG: median line per method, min-to-max seed band
    const double W = 640, H = 480, ml = 70, mr = 20, mt = 30, mb = 50;
    double ymin = 1e300, ymax = -1e300, xmax = 1;
    for (const auto& [key, vals] : groups) {
      for (double v : vals) {
        if (std::isfinite(v)) {
          ymin = std::min(ymin, v);
          ymax = std::max(ymax, v);
        }
      }
      xmax = std::max(xmax, static_cast<double>(group_sims[key]));
    }
    if (ymin > ymax) {
      ymin = -1;
      ymax = 1;
    }
    if (ymax - ymin < 1e-9) {
      ymin -= 1;
      ymax += 1;
    }
    const double pad = 0.05 * (ymax - ymin);
    ymin -= pad;
    ymax += pad;
    auto px = [&](double sims) { return ml + (W - ml - mr) * sims / xmax; };
    auto py = [&](double lp) { return H - mb - (H - mb - mt) * (lp - ymin) / (ymax - ymin); };

    std::string svg = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"480\" "
                      "viewBox=\"0 0 640 480\">\n";
    svg += "<rect x=\"" + svg_num(ml) + "\" y=\"" + svg_num(mt) + "\" width=\"" +
           svg_num(W - ml - mr) + "\" height=\"" + svg_num(H - mt - mb) +
           "\" fill=\"none\" stroke=\"#333\"/>\n";
    svg += "<text x=\"320\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" + task +
           ": log probability of true parameters</text>\n";
    svg += "<text x=\"320\" y=\"470\" text-anchor=\"middle\" font-size=\"12\">simulations" +
           std::string("</text>\n");
    svg += "<text x=\"15\" y=\"" + svg_num(py(ymin)) + "\" font-size=\"10\">" + svg_num(ymin) +
           "</text>\n";
    svg += "<text x=\"15\" y=\"" + svg_num(py(ymax)) + "\" font-size=\"10\">" + svg_num(ymax) +
           "</text>\n";
    svg += "<text x=\"" + svg_num(px(xmax) - 30) + "\" y=\"" + svg_num(H - mb + 15) +
           "\" font-size=\"10\">" + std::to_string(static_cast<long>(xmax)) + "</text>\n";

    int legend_y = 45;
    for (const auto& method : methods) {
      const std::string color = method_color(method);
      std::string band_upper, band_lower, line;
      for (int round = 1; round <= max_round; ++round) {
        const auto it = groups.find({method, round});
        if (it == groups.end() || it->second.empty()) continue;
        const double sims = static_cast<double>(group_sims[{method, round}]);
        const double med = median(it->second);
        const double lo = *std::min_element(it->second.begin(), it->second.end());
        const double hi = *std::max_element(it->second.begin(), it->second.end());
        line += svg_num(px(sims)) + "," + svg_num(py(med)) + " ";
        band_upper += svg_num(px(sims)) + "," + svg_num(py(hi)) + " ";
        band_lower = svg_num(px(sims)) + "," + svg_num(py(lo)) + " " + band_lower;
      }
      if (line.empty()) continue;
      svg += "<polygon points=\"" + band_upper + band_lower + "\" fill=\"" + color +
             "\" fill-opacity=\"0.15\" stroke=\"none\"/>\n";
      svg += "<polyline points=\"" + line + "\" fill=\"none\" stroke=\"" + color +
             "\" stroke-width=\"2\"/>\n";
      for (size_t pos = 0; pos < line.size();) {
        const size_t sp = line.find(' ', pos);
        const std::string pt = line.substr(pos, sp - pos);
        const size_t comma = pt.find(',');
        svg += "<circle cx=\"" + pt.substr(0, comma) + "\" cy=\"" + pt.substr(comma + 1) +
               "\" r=\"3\" fill=\"" + color + "\"/>\n";
        pos = sp + 1;
      }
      svg += "<text x=\"" + svg_num(W - mr - 90) + "\" y=\"" + std::to_string(legend_y) +
             "\" font-size=\"12\" fill=\"" + color + "\">" + method + "</text>\n";
      legend_y += 16;
    }
    svg += "</svg>\n";
    write_file(fs::path(out_dir) / (task + "_comparison.svg"), svg);
  }
}

void write_scatter_svg(const simulators::SimTask& task, const Eigen::MatrixXd& thetas,
                       const std::string& path) {
  const int d = task.theta_dim;
  if (d < 2) throw std::domain_error("write_scatter_svg: need >= 2 parameter dimensions");
  const double cell = 160, gap = 14, margin = 30;
  const int grid = d - 1;
  const double W = margin * 2 + grid * cell + (grid - 1) * gap;

  std::string svg = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + svg_num(W) +
                    "\" height=\"" + svg_num(W) + "\" viewBox=\"0 0 " + svg_num(W) + " " +
                    svg_num(W) + "\">\n";
  // lower-triangle grid: cell (col i, row j-1) shows dims (i, j), i < j
  for (int j = 1; j < d; ++j) {
    for (int i = 0; i < j; ++i) {
      const double x0 = margin + i * (cell + gap);
      const double y0 = margin + (j - 1) * (cell + gap);
      const double lx = task.prior.lower(i), ux = task.prior.upper(i);
      const double ly = task.prior.lower(j), uy = task.prior.upper(j);
      auto px = [&](double v) { return x0 + cell * (v - lx) / (ux - lx); };
      auto py = [&](double v) { return y0 + cell * (1.0 - (v - ly) / (uy - ly)); };

      svg += "<rect x=\"" + svg_num(x0) + "\" y=\"" + svg_num(y0) + "\" width=\"" +
             svg_num(cell) + "\" height=\"" + svg_num(cell) +
             "\" fill=\"none\" stroke=\"#333\"/>\n";
      svg += "<text x=\"" + svg_num(x0 + 3) + "\" y=\"" + svg_num(y0 + 12) +
             "\" font-size=\"9\">" + std::to_string(i) + " vs " + std::to_string(j) +
             "</text>\n";
      for (int n = 0; n < thetas.rows(); ++n) {
        const double vx = std::clamp(thetas(n, i), lx, ux);
        const double vy = std::clamp(thetas(n, j), ly, uy);
        svg += "<circle cx=\"" + svg_num(px(vx)) + "\" cy=\"" + svg_num(py(vy)) +
               "\" r=\"1.5\" fill=\"#1f77b4\" fill-opacity=\"0.5\"/>\n";
      }
      const double tx = px(task.true_theta(i)), ty = py(task.true_theta(j));
      svg += "<line x1=\"" + svg_num(tx - 5) + "\" y1=\"" + svg_num(ty) + "\" x2=\"" +
             svg_num(tx + 5) + "\" y2=\"" + svg_num(ty) +
             "\" stroke=\"#d62728\" stroke-width=\"2\"/>\n";
      svg += "<line x1=\"" + svg_num(tx) + "\" y1=\"" + svg_num(ty - 5) + "\" x2=\"" +
             svg_num(tx) + "\" y2=\"" + svg_num(ty + 5) +
             "\" stroke=\"#d62728\" stroke-width=\"2\"/>\n";
    }
  }
  svg += "</svg>\n";
  write_file(path, svg);
}

Eigen::MatrixXd load_final_round_thetas(const std::string& run_dir, int theta_dim) {
  std::stringstream ss(read_file(fs::path(run_dir) / "dataset.csv"));
  std::string line;
  std::getline(ss, line);  // header
  std::vector<std::vector<double>> rows;
  int max_round = 0;
  while (std::getline(ss, line)) {
    if (line.empty()) continue;
    const auto f = split_csv(line);
    const int round = std::stoi(f[0]);
    std::vector<double> theta(theta_dim);
    for (int j = 0; j < theta_dim; ++j) theta[j] = std::strtod(f[1 + j].c_str(), nullptr);
    if (round > max_round) {
      max_round = round;
      rows.clear();
    }
    if (round == max_round) rows.push_back(theta);
  }
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), theta_dim);
  for (size_t i = 0; i < rows.size(); ++i)
    for (int j = 0; j < theta_dim; ++j) out(static_cast<Eigen::Index>(i), j) = rows[i][j];
  return out;
}

void emit_scatter_diagnostics(const ExperimentConfig& cfg, const std::string& results_dir) {
  for (const auto& task_name : cfg.tasks) {
    const simulators::SimTask task = simulators::make_task(task_name);
    if (task.theta_dim < 2) continue;
    for (const auto& method : cfg.methods) {
      const fs::path run_dir =
          fs::path(results_dir) / task_name / method / ("seed" + std::to_string(cfg.seeds[0]));
      if (!fs::exists(run_dir / "dataset.csv")) continue;
      const Eigen::MatrixXd thetas = load_final_round_thetas(run_dir.string(), task.theta_dim);
      write_scatter_svg(task, thetas,
                        (fs::path(results_dir) / (task_name + "_" + method + "_scatter.svg"))
                            .string());
    }
  }
}

void emit_timing_table(const ResultsTable& table, const std::string& path) {
  struct Agg {
    double simulate = 0, train = 0, propose = 0, evaluate = 0;
  };
  std::vector<std::pair<std::pair<std::string, std::string>, Agg>> aggs;
  for (const auto& r : table.rows) {
    const auto key = std::make_pair(r.task, r.method);
    auto it = std::find_if(aggs.begin(), aggs.end(),
                           [&](const auto& a) { return a.first == key; });
    if (it == aggs.end()) {
      aggs.push_back({key, {}});
      it = std::prev(aggs.end());
    }
    it->second.simulate += r.times.simulate;
    it->second.train += r.times.train;
    it->second.propose += r.times.propose;
    it->second.evaluate += r.times.evaluate;
  }

  char buf[256];
  std::string out;
  std::snprintf(buf, sizeof buf, "%-16s %-8s %10s %10s %10s %10s %10s\n", "task", "method",
                "total_h", "sim_h", "train_h", "propose_h", "eval_h");
  out += buf;
  for (const auto& [key, a] : aggs) {
    const double total = a.simulate + a.train + a.propose + a.evaluate;
    std::snprintf(buf, sizeof buf, "%-16s %-8s %10.2f %10.2f %10.2f %10.2f %10.2f\n",
                  key.first.c_str(), key.second.c_str(), total / 3600.0, a.simulate / 3600.0,
                  a.train / 3600.0, a.propose / 3600.0, a.evaluate / 3600.0);
    out += buf;
  }
  write_file(path, out);
}

}  // namespace lfi::harness
