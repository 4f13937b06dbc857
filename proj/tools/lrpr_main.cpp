// Command-line front end: dataset synthesis, single runs, Monte Carlo
// sweeps and result reports.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "lrpr/dataset_io.hpp"
#include "lrpr/experiment.hpp"
#include "lrpr/report.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumerical = 3;

struct SynthArgs {
  long n = 0, m = 0, p = 0, r = 0;
  std::uint64_t seed = 0;
  std::optional<double> beta;
  std::string out;
};

int cmd_synth(const SynthArgs& args) {
  lrpr::SeededRng data_rng =
      lrpr::SeededRng(args.seed).derive(lrpr::kDataStream);
  const auto truth = lrpr::gen_lowrank(data_rng, args.n, args.m, args.r);
  const auto ms =
      lrpr::gen_measurements(data_rng, truth, args.p, args.beta);
  lrpr::write_dataset(ms, truth, fs::path(args.out) / "manifest.json",
                      args.seed);
  std::cout << "wrote dataset to " << args.out << " (n=" << args.n
            << " m=" << args.m << " p=" << args.p << " r=" << args.r << ")\n";
  return kExitOk;
}

struct RunArgs {
  std::string dataset;
  std::string algo = "vbl";
  std::string init = "spectral";
  std::uint64_t seed = 0;
  double tol = 1e-6;
  int max_iter = 300;
  bool elbo = false;
  std::optional<long> rank;
  double threshold = 0.1;
  std::string out;
};

int cmd_run(const RunArgs& args) {
  fs::path manifest = args.dataset;
  if (fs::is_directory(manifest)) manifest /= "manifest.json";
  const auto ds = lrpr::read_dataset(manifest);
  if (!ds.x)
    throw lrpr::Error("dataset has no ground truth; cannot score a run");

  long rank = 0;
  if (args.rank)
    rank = *args.rank;
  else if (ds.manifest.r_true)
    rank = *ds.manifest.r_true;
  else
    throw CLI::ValidationError(
        "--rank", "dataset manifest has no r_true; pass --rank explicitly");

  const lrpr::Algo algo = args.algo == "vbl" ? lrpr::Algo::vbl : lrpr::Algo::am;
  const lrpr::InitKind init = args.init == "spectral"
                                  ? lrpr::InitKind::spectral
                                  : lrpr::InitKind::random;

  lrpr::TrialOptions opts;
  opts.tol = args.tol;
  opts.max_iter = args.max_iter;
  opts.threshold = args.threshold;

  if (args.elbo && algo == lrpr::Algo::vbl) {
    // Rerun path with the diagnostic on, printing the bound per iteration.
    lrpr::InitSpec spec;
    spec.kind = init;
    spec.rank = rank;
    spec.rng = lrpr::SeededRng(args.seed).derive(lrpr::kInitStream);
    const auto x0 = lrpr::make_init(spec, ds.ms);
    lrpr::VemOptions vopts;
    vopts.max_iter = args.max_iter;
    vopts.tol = args.tol;
    vopts.compute_elbo = true;
    const auto result = lrpr::run_vem(
        ds.ms, lrpr::Hyperparameters::noninformative(ds.ms.n), x0, vopts);
    for (const auto& stat : result.trace) {
      std::cout << "iter=" << stat.iteration
                << " change=" << stat.max_rel_change;
      if (stat.elbo)
        std::cout << " elbo=" << *stat.elbo;
      std::cout << '\n';
    }
  }

  const auto rec = lrpr::run_trial(ds.ms, *ds.x, algo, init, args.seed, rank,
                                   opts);
  std::ofstream out(args.out, std::ios::trunc);
  if (!out) throw lrpr::IoError("cannot open for writing: " + args.out);
  out << lrpr::kResultsHeader << '\n' << lrpr::format_csv_row(rec) << '\n';

  std::cout << "algo=" << lrpr::to_string(rec.algo)
            << " init=" << lrpr::to_string(rec.init)
            << " iters=" << rec.iterations
            << " converged=" << (rec.converged ? "yes" : "no");
  if (rec.re)
    std::cout << " re=" << *rec.re;
  else
    std::cout << " re=n/a";
  std::cout << " success=" << (rec.success ? "yes" : "no") << '\n';
  return rec.re ? kExitOk : kExitNumerical;
}

struct SweepArgs {
  std::string config;
  std::string out;
  int jobs = 1;
};

int cmd_sweep(const SweepArgs& args) {
  auto cfg = lrpr::SweepConfig::load(args.config);
  fs::path out = args.out;
  if (out.empty()) {
    if (!cfg.out)
      throw CLI::ValidationError("--out",
                                 "no output path in config or on command line");
    out = *cfg.out;
  }
  lrpr::SweepProgress progress;
  const auto rows = lrpr::run_sweep(cfg, out, args.jobs, &progress);
  std::cout << "sweep complete: " << progress.tasks_total << " tasks ("
            << progress.tasks_skipped << " resumed), results in "
            << out.string() << '\n';
  return kExitOk;
}

struct ReportArgs {
  std::string in;
  std::string axis = "rank";
  std::string out;
  std::string aggregate;
};

int cmd_report(const ReportArgs& args) {
  const auto axis = args.axis == "rank" ? lrpr::ReportAxis::rank
                                        : lrpr::ReportAxis::measurements;
  fs::path aggregate = args.aggregate;
  if (aggregate.empty()) {
    aggregate = args.out;
    aggregate.replace_extension(".agg.csv");
  }
  lrpr::write_report(args.in, axis, args.out, aggregate);
  std::cout << "wrote " << args.out << " and " << aggregate.string() << '\n';
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Low-rank phase retrieval: variational Bayes and alternating "
               "minimization, with a Monte Carlo experiment harness"};
  app.require_subcommand(1);

  SynthArgs synth;
  auto* synth_cmd =
      app.add_subcommand("synth", "generate a dataset and write it to disk");
  synth_cmd->add_option("--n", synth.n, "signal dimension")->required();
  synth_cmd->add_option("--m", synth.m, "number of columns")->required();
  synth_cmd->add_option("--p", synth.p, "measurements per column")->required();
  synth_cmd->add_option("--r", synth.r, "rank of the ground truth")->required();
  synth_cmd->add_option("--seed", synth.seed, "seed")->required();
  synth_cmd->add_option("--beta", synth.beta,
                        "noise precision (omit for noiseless)");
  synth_cmd->add_option("--out", synth.out, "output directory")->required();

  RunArgs run;
  auto* run_cmd = app.add_subcommand("run", "run one algorithm on a dataset");
  run_cmd->add_option("--dataset", run.dataset, "dataset directory")
      ->required();
  run_cmd->add_option("--algo", run.algo, "algorithm")
      ->check(CLI::IsMember({"vbl", "am"}))
      ->required();
  run_cmd->add_option("--init", run.init, "initialization")
      ->check(CLI::IsMember({"spectral", "random"}))
      ->required();
  run_cmd->add_option("--seed", run.seed, "trial seed")->required();
  run_cmd->add_option("--tol", run.tol, "convergence tolerance");
  run_cmd->add_option("--max-iter", run.max_iter, "iteration cap");
  run_cmd->add_flag("--elbo", run.elbo, "print the evidence bound trace");
  run_cmd->add_option("--rank", run.rank,
                      "rank for init/baseline (default: manifest r_true)");
  run_cmd->add_option("--threshold", run.threshold, "success threshold");
  run_cmd->add_option("--out", run.out, "output CSV")->required();

  SweepArgs sweep;
  auto* sweep_cmd =
      app.add_subcommand("sweep", "run a Monte Carlo grid from a JSON config");
  sweep_cmd->add_option("--config", sweep.config, "config JSON")->required();
  sweep_cmd->add_option("--out", sweep.out, "output CSV");
  sweep_cmd->add_option("--jobs", sweep.jobs, "worker threads");

  ReportArgs report;
  auto* report_cmd =
      app.add_subcommand("report", "aggregate a results CSV and plot it");
  report_cmd->add_option("--in", report.in, "results CSV")->required();
  report_cmd->add_option("--axis", report.axis, "x axis")
      ->check(CLI::IsMember({"rank", "measurements"}))
      ->required();
  report_cmd->add_option("--out", report.out, "output SVG")->required();
  report_cmd->add_option("--aggregate", report.aggregate,
                         "aggregate CSV path (default: OUT.agg.csv)");

  try {
    app.parse(argc, argv);
    if (synth_cmd->parsed()) return cmd_synth(synth);
    if (run_cmd->parsed()) return cmd_run(run);
    if (sweep_cmd->parsed()) return cmd_sweep(sweep);
    if (report_cmd->parsed()) return cmd_report(report);
    return kExitUsage;
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  } catch (const lrpr::InvalidRank& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const lrpr::NotPositiveDefinite& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const lrpr::ConvergenceFailure& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const lrpr::NumericalOverflow& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const lrpr::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  }
}
