#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"
#include "lrpr/baseline_am.hpp"
#include "lrpr/dataset_io.hpp"
#include "lrpr/init.hpp"
#include "lrpr/metrics.hpp"
#include "lrpr/vem.hpp"

namespace lrpr {

// Substream keys: every consumer of a trial seed pulls from its own branch,
// so adding a consumer never shifts another's stream.
inline constexpr std::uint64_t kDataStream = 0x64617461;  // "data"
inline constexpr std::uint64_t kInitStream = 0x696e6974;  // "init"

struct TrialOptions {
  int max_iter = 300;
  double tol = 1e-6;
  double threshold = 0.1;
  bool compute_elbo = false;
};

inline const std::string kResultsHeader =
    "algo,init,seed,trial,n,m,p,r,iters,converged,re,success,runtime_ms";

inline std::string format_csv_row(const TrialRecord& rec) {
  char buf[64];
  std::string row;
  row += to_string(rec.algo);
  row += ',';
  row += to_string(rec.init);
  row += ',';
  row += std::to_string(rec.seed);
  row += ',';
  row += std::to_string(rec.trial);
  row += ',';
  row += std::to_string(rec.n) + ',' + std::to_string(rec.m) + ',' +
         std::to_string(rec.p) + ',' + std::to_string(rec.r) + ',';
  row += std::to_string(rec.iterations);
  row += ',';
  row += rec.converged ? '1' : '0';
  row += ',';
  if (rec.re) {
    std::snprintf(buf, sizeof(buf), "%.17g", *rec.re);
    row += buf;
  }
  row += ',';
  row += rec.success ? '1' : '0';
  row += ',';
  std::snprintf(buf, sizeof(buf), "%.3f", rec.runtime_ms);
  row += buf;
  return row;
}

// One algorithm run on one dataset: build the starting point from the
// trial's init substream, run, score. Numerical aborts are recorded as
// unsuccessful trials rather than propagated; they count against the
// algorithm in the success-rate statistics.
inline TrialRecord run_trial(const MeasurementSet& ms,
                             const SignalMatrix& truth, Algo algo,
                             InitKind init, std::uint64_t seed, Index r,
                             const TrialOptions& opts = {},
                             int trial_index = 0) {
  TrialRecord rec;
  rec.algo = algo;
  rec.init = init;
  rec.seed = seed;
  rec.trial = trial_index;
  rec.n = ms.n;
  rec.m = ms.m;
  rec.p = ms.p;
  rec.r = r;
  rec.threshold = opts.threshold;

  const auto t0 = std::chrono::steady_clock::now();
  try {
    InitSpec spec;
    spec.kind = init;
    spec.rank = r;
    spec.rng = SeededRng(seed).derive(kInitStream);
    const SignalMatrix x0 = make_init(spec, ms);

    SignalMatrix estimate;
    if (algo == Algo::vbl) {
      VemOptions vopts;
      vopts.max_iter = opts.max_iter;
      vopts.tol = opts.tol;
      vopts.compute_elbo = opts.compute_elbo;
      auto result = run_vem(ms, Hyperparameters::noninformative(ms.n), x0, vopts);
      estimate = std::move(result.estimate);
      rec.iterations = result.iterations;
      rec.converged = result.converged;
    } else {
      AmOptions aopts;
      aopts.max_iter = opts.max_iter;
      aopts.tol = opts.tol;
      auto result = run_am(ms, r, x0, aopts);
      estimate = std::move(result.estimate);
      rec.iterations = result.iterations;
      rec.converged = result.converged;
    }
    rec.re = relative_error(truth, estimate);
    rec.success = is_success(*rec.re, opts.threshold);
  } catch (const NotPositiveDefinite&) {
    rec.converged = false;
  } catch (const ConvergenceFailure&) {
    rec.converged = false;
  } catch (const NumericalOverflow&) {
    rec.converged = false;
  }
  rec.runtime_ms = std::chrono::duration<double, std::milli>(
                       std::chrono::steady_clock::now() - t0)
                       .count();
  return rec;
}

// Monte Carlo grid: every (rank, measurement-count) cell gets `trials`
// datasets, each shared by all (algo, init) combinations for a like-for-like
// comparison.
struct SweepConfig {
  Index n = 40, m = 40;
  std::vector<Index> r_values;
  std::vector<Index> p_values;
  int trials = 1;
  std::vector<Algo> algos{Algo::vbl, Algo::am};
  std::vector<InitKind> inits{InitKind::spectral};
  double threshold = 0.1;
  std::uint64_t master_seed = 0;
  double tol = 1e-6;
  int max_iter = 300;
  std::optional<double> beta_true;
  std::optional<std::string> out;

  void validate() const {
    if (n < 1 || m < 1) throw Error("SweepConfig: n, m must be >= 1");
    if (trials < 1) throw Error("SweepConfig: trials must be >= 1");
    if (r_values.empty() || p_values.empty())
      throw Error("SweepConfig: r and p grids must be nonempty");
    if (algos.empty() || inits.empty())
      throw Error("SweepConfig: algos and inits must be nonempty");
    for (Index r : r_values)
      if (r < 1 || r > std::min(n, m))
        throw InvalidRank("SweepConfig: rank out of range");
    for (Index p : p_values)
      if (p < 1) throw Error("SweepConfig: p must be >= 1");
  }

  static SweepConfig from_json(const nlohmann::json& j) {
    SweepConfig c;
    try {
      c.n = j.at("n").get<Index>();
      c.m = j.at("m").get<Index>();
      c.r_values = j.at("r_values").get<std::vector<Index>>();
      c.p_values = j.at("p_values").get<std::vector<Index>>();
      c.trials = j.at("trials").get<int>();
      c.master_seed = j.at("master_seed").get<std::uint64_t>();
      if (j.contains("algos")) {
        c.algos.clear();
        for (const auto& s : j["algos"]) {
          const auto name = s.get<std::string>();
          if (name == "vbl")
            c.algos.push_back(Algo::vbl);
          else if (name == "am")
            c.algos.push_back(Algo::am);
          else
            throw Error("SweepConfig: unknown algo '" + name + "'");
        }
      }
      if (j.contains("inits")) {
        c.inits.clear();
        for (const auto& s : j["inits"]) {
          const auto name = s.get<std::string>();
          if (name == "spectral")
            c.inits.push_back(InitKind::spectral);
          else if (name == "random")
            c.inits.push_back(InitKind::random);
          else
            throw Error("SweepConfig: unknown init '" + name + "'");
        }
      }
      c.threshold = j.value("threshold", 0.1);
      c.tol = j.value("tol", 1e-6);
      c.max_iter = j.value("max_iter", 300);
      if (j.contains("beta_true") && !j["beta_true"].is_null())
        c.beta_true = j["beta_true"].get<double>();
      if (j.contains("out")) c.out = j["out"].get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      throw Error(std::string("SweepConfig: bad config JSON: ") + e.what());
    }
    c.validate();
    return c;
  }

  static SweepConfig load(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open: " + path.string());
    nlohmann::json j;
    try {
      f >> j;
    } catch (const nlohmann::json::exception& e) {
      throw IoError("invalid config JSON (" + path.string() + "): " + e.what());
    }
    return from_json(j);
  }
};

namespace detail {

struct SweepCell {
  int cell_index = 0;
  Index r = 0, p = 0;
};

// One task = one dataset = one (cell, trial) pair; it yields one CSV row
// per (algo, init) combination, in config order.
struct SweepTask {
  int task_index = 0;
  SweepCell cell;
  int trial = 0;
  std::uint64_t seed = 0;
};

inline std::vector<SweepTask> sweep_tasks(const SweepConfig& cfg) {
  std::vector<SweepTask> tasks;
  const SeededRng master(cfg.master_seed);
  int cell_index = 0;
  int task_index = 0;
  for (Index r : cfg.r_values)
    for (Index p : cfg.p_values) {
      const SeededRng cell_rng = master.derive(cell_index);
      for (int t = 0; t < cfg.trials; ++t) {
        SweepTask task;
        task.task_index = task_index++;
        task.cell = SweepCell{cell_index, r, p};
        task.trial = t;
        task.seed = cell_rng.derive(static_cast<std::uint64_t>(t)).seed();
        tasks.push_back(task);
      }
      ++cell_index;
    }
  return tasks;
}

inline std::vector<TrialRecord> run_sweep_task(const SweepConfig& cfg,
                                               const SweepTask& task) {
  SeededRng data_rng = SeededRng(task.seed).derive(kDataStream);
  const SignalMatrix truth =
      gen_lowrank(data_rng, cfg.n, cfg.m, task.cell.r);
  const MeasurementSet ms =
      gen_measurements(data_rng, truth, task.cell.p, cfg.beta_true);

  TrialOptions opts;
  opts.max_iter = cfg.max_iter;
  opts.tol = cfg.tol;
  opts.threshold = cfg.threshold;

  std::vector<TrialRecord> rows;
  for (Algo algo : cfg.algos)
    for (InitKind init : cfg.inits)
      rows.push_back(run_trial(ms, truth, algo, init, task.seed, task.cell.r,
                               opts, task.trial));
  return rows;
}

// Identity of a row ignoring measured outputs; used for resume.
inline std::string row_key(const std::string& csv_row) {
  // algo,init,seed,trial,n,m,p,r — the first 8 fields.
  size_t pos = 0;
  for (int i = 0; i < 8; ++i) {
    pos = csv_row.find(',', pos);
    if (pos == std::string::npos) return csv_row;
    ++pos;
  }
  return csv_row.substr(0, pos - 1);
}

}  // namespace detail

struct SweepProgress {
  int tasks_total = 0;
  int tasks_done = 0;
  int tasks_skipped = 0;
};

// Runs the grid across a worker pool. Rows are committed to the output file
// in deterministic task order as soon as the contiguous prefix is complete,
// and flushed per task, so an interrupted sweep can resume: on restart,
// rows belonging to fully completed tasks are kept and those tasks are
// skipped.
inline std::vector<TrialRecord> run_sweep(
    const SweepConfig& cfg, const std::filesystem::path& out_path,
    int jobs = 1, SweepProgress* progress = nullptr) {
  cfg.validate();
  if (jobs < 1) jobs = 1;

  const auto tasks = detail::sweep_tasks(cfg);
  const int rows_per_task =
      static_cast<int>(cfg.algos.size() * cfg.inits.size());

  // Resume: keep rows of completed tasks, in order, and skip those tasks.
  std::vector<bool> done(tasks.size(), false);
  std::vector<std::vector<std::string>> kept(tasks.size());
  if (std::filesystem::exists(out_path)) {
    std::ifstream existing(out_path);
    std::string line;
    std::map<std::string, std::string> by_key;
    if (std::getline(existing, line) && line == kResultsHeader) {
      while (std::getline(existing, line))
        if (!line.empty()) by_key[detail::row_key(line)] = line;
    }
    for (size_t t = 0; t < tasks.size(); ++t) {
      std::vector<std::string> rows;
      for (Algo algo : cfg.algos)
        for (InitKind init : cfg.inits) {
          TrialRecord probe;
          probe.algo = algo;
          probe.init = init;
          probe.seed = tasks[t].seed;
          probe.trial = tasks[t].trial;
          probe.n = cfg.n;
          probe.m = cfg.m;
          probe.p = tasks[t].cell.p;
          probe.r = tasks[t].cell.r;
          const auto key = detail::row_key(format_csv_row(probe));
          const auto it = by_key.find(key);
          if (it == by_key.end()) break;
          rows.push_back(it->second);
        }
      if (static_cast<int>(rows.size()) == rows_per_task) {
        done[t] = true;
        kept[t] = std::move(rows);
      }
    }
  }

  std::ofstream out(out_path, std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + out_path.string());
  out << kResultsHeader << '\n';

  if (progress) {
    progress->tasks_total = static_cast<int>(tasks.size());
    progress->tasks_done = 0;
    progress->tasks_skipped = 0;
    for (size_t t = 0; t < tasks.size(); ++t)
      if (done[t]) ++progress->tasks_skipped;
  }

  std::vector<TrialRecord> all_records;
  std::mutex mu;
  std::condition_variable cv;
  std::map<int, std::vector<TrialRecord>> pending;
  std::atomic<int> next_task{0};
  std::exception_ptr failure;

  const auto worker = [&] {
    for (;;) {
      const int t = next_task.fetch_add(1);
      if (t >= static_cast<int>(tasks.size())) return;
      if (done[t]) {
        std::lock_guard<std::mutex> lock(mu);
        pending[t] = {};
        cv.notify_all();
        continue;
      }
      try {
        auto rows = detail::run_sweep_task(cfg, tasks[t]);
        std::lock_guard<std::mutex> lock(mu);
        pending[t] = std::move(rows);
        cv.notify_all();
      } catch (...) {
        std::lock_guard<std::mutex> lock(mu);
        if (!failure) failure = std::current_exception();
        pending[t] = {};
        cv.notify_all();
      }
    }
  };

  std::vector<std::thread> pool;
  const int n_workers =
      std::min<int>(jobs, static_cast<int>(tasks.size()) > 0
                              ? static_cast<int>(tasks.size())
                              : 1);
  pool.reserve(n_workers);
  for (int w = 0; w < n_workers; ++w) pool.emplace_back(worker);

  // Commit rows in task order as results become available.
  {
    std::unique_lock<std::mutex> lock(mu);
    for (size_t t = 0; t < tasks.size(); ++t) {
      cv.wait(lock, [&] { return done[t] || pending.count(t) > 0; });
      if (done[t]) {
        pending.erase(static_cast<int>(t));
        for (const auto& row : kept[t]) out << row << '\n';
      } else {
        auto rows = std::move(pending[static_cast<int>(t)]);
        pending.erase(static_cast<int>(t));
        for (const auto& rec : rows) {
          out << format_csv_row(rec) << '\n';
          all_records.push_back(rec);
        }
        if (progress) ++progress->tasks_done;
      }
      out.flush();
    }
  }
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
  return all_records;
}

}  // namespace lrpr
