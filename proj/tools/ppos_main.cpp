// Command-line driver: simulate synthetic trials, fit prediction-phase
// models, compute PPoS, sweep scenario grids, emit figure data.
//
// Exit codes: 0 success, 2 configuration/input error, 3 convergence failure,
// 4 replicate-validity abort.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "ppos/config.hpp"
#include "ppos/dataset.hpp"
#include "ppos/orchestrator.hpp"
#include "ppos/report.hpp"
#include "ppos/synthetic.hpp"

namespace {

namespace fs = std::filesystem;

struct CommonArgs {
  std::string config_path;
  std::string out_dir = "out";
  std::optional<std::uint64_t> seed;
  std::optional<int> k;
  std::optional<int> workers;
};

ppos::RunConfig load_run_config(const CommonArgs& args) {
  ppos::RunOverrides ov;
  ov.seed = args.seed;
  ov.k = args.k;
  ov.workers = args.workers;
  return ppos::parse_run_config(ppos::load_json_file(args.config_path), ov);
}

ppos::CompetingRiskDataset load_run_dataset(const ppos::RunConfig& rc,
                                            const std::string& config_path) {
  // dataset paths resolve relative to the config file location
  fs::path p = rc.dataset_path;
  if (p.is_relative()) {
    const fs::path base = fs::path(config_path).parent_path();
    if (fs::exists(base / p)) p = base / p;
  }
  return ppos::load_dataset(p.string(), rc.schema, rc.time_unit);
}

std::ofstream open_log(const fs::path& out_dir) {
  fs::create_directories(out_dir);
  return std::ofstream(out_dir / "run.log");
}

int cmd_simulate(const std::string& spec_path, const std::string& out_path) {
  const auto spec = ppos::parse_synthetic_spec(ppos::load_json_file(spec_path));
  const auto ds = ppos::generate_synthetic(spec);
  ppos::save_dataset(ds, out_path);
  std::printf("wrote %zu records to %s\n", ds.size(), out_path.c_str());
  return 0;
}

int cmd_fit(const CommonArgs& args, bool draws_csv) {
  const auto rc = load_run_config(args);
  const auto data = load_run_dataset(rc, args.config_path);
  auto log = open_log(args.out_dir);

  const auto started = std::chrono::steady_clock::now();
  const auto fits = ppos::fit_prediction_models(data, rc.ppos, false);
  ppos::write_fit_summary(fits, args.out_dir, draws_csv);

  bool ok = true;
  for (const auto& fit : fits) {
    const auto bad = fit.draws.flagged(rc.ppos.modeling_sampler.ess_min,
                                       rc.ppos.modeling_sampler.rhat_max);
    for (const auto& name : bad) {
      ok = false;
      log << "not converged: " << ppos::detail::stratum_label(fit.spec) << " "
          << name << "\n";
      std::fprintf(stderr, "not converged: %s %s\n",
                   ppos::detail::stratum_label(fit.spec).c_str(), name.c_str());
    }
  }
  const auto secs = std::chrono::duration<double>(
                        std::chrono::steady_clock::now() - started)
                        .count();
  log << "fit completed in " << secs << " s\n";
  std::printf("fit summary written to %s\n",
              (fs::path(args.out_dir) / "fit_summary.csv").c_str());
  if (!ok) {
    std::fprintf(stderr, "convergence diagnostics failed\n");
    return 3;
  }
  return 0;
}

int cmd_ppos(const CommonArgs& args) {
  const auto rc = load_run_config(args);
  const auto data = load_run_dataset(rc, args.config_path);
  auto log = open_log(args.out_dir);

  const auto started = std::chrono::steady_clock::now();
  const auto result = ppos::run_ppos(data, rc.ppos);
  ppos::write_ppos_report(result, rc.echo, args.out_dir);
  const auto secs = std::chrono::duration<double>(
                        std::chrono::steady_clock::now() - started)
                        .count();
  log << "ppos run: k=" << result.k << " k_effective=" << result.k_effective
      << " seed=" << result.master_seed << " workers=" << rc.ppos.workers
      << " wall=" << secs << " s\n";
  std::printf("PPoS = %.3f (MC SE = %.5f, K = %d)\n", result.ppos, result.mc_se,
              result.k);
  return 0;
}

int cmd_scenarios(const CommonArgs& args) {
  const auto rc = load_run_config(args);
  if (!rc.grid) throw ppos::ConfigError("config has no 'scenarios' block");
  const auto data = load_run_dataset(rc, args.config_path);
  auto log = open_log(args.out_dir);

  const auto started = std::chrono::steady_clock::now();
  const auto table = ppos::run_scenarios(data, rc.ppos, *rc.grid);
  ppos::write_scenario_table(table, args.out_dir);
  const auto secs = std::chrono::duration<double>(
                        std::chrono::steady_clock::now() - started)
                        .count();
  for (const auto& s : table) {
    log << s.label << ": "
        << (s.failed ? ("failed (" + s.error + ")")
                     : ppos::detail::format_double(s.result.ppos))
        << "\n";
    std::printf("%s -> %s\n", s.label.c_str(),
                s.failed ? "failed" : ppos::detail::format_double(s.result.ppos).c_str());
  }
  log << "scenario sweep wall=" << secs << " s\n";
  return 0;
}

int cmd_emit_figures(const std::string& report_path, const std::string& out_dir,
                     int bins, int curves, const std::string& curves_file,
                     std::optional<std::uint64_t> seed) {
  const auto report = ppos::load_json_file(report_path);
  fs::create_directories(out_dir);
  ppos::write_statistic_histogram(report, fs::path(out_dir) / "fig1_hist.csv",
                                  bins);
  std::printf("wrote %s\n", (fs::path(out_dir) / "fig1_hist.csv").c_str());

  fs::path curves_path = curves_file.empty()
                             ? fs::path(report_path).parent_path() / "curves.csv"
                             : fs::path(curves_file);
  if (fs::exists(curves_path)) {
    const std::uint64_t sample_seed =
        seed.value_or(report.contains("seed")
                          ? report.at("seed").get<std::uint64_t>()
                          : 0);
    ppos::write_curve_sample(curves_path, fs::path(out_dir) / "fig2_curves.csv",
                             curves, sample_seed);
    std::printf("wrote %s\n", (fs::path(out_dir) / "fig2_curves.csv").c_str());
  }
  return 0;
}

template <typename F>
int guarded(F&& f) {
  try {
    return f();
  } catch (const ppos::ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const ppos::DataError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const ppos::ConvergenceError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  } catch (const ppos::ReplicateValidityError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 4;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Predictive probability of success for competing-risks trials"};
  app.require_subcommand(1);

  // simulate
  auto* sim = app.add_subcommand("simulate", "Generate a synthetic dataset CSV");
  std::string sim_spec, sim_out = "dataset.csv";
  sim->add_option("--spec", sim_spec, "Synthetic spec JSON")->required();
  sim->add_option("--out", sim_out, "Output CSV path");

  // shared run options
  CommonArgs fit_args, ppos_args, scen_args;
  bool fit_draws_csv = false;
  const auto add_common = [](CLI::App* cmd, CommonArgs& a) {
    cmd->add_option("--config", a.config_path, "Run configuration JSON")->required();
    cmd->add_option("--out", a.out_dir, "Output directory");
    cmd->add_option("--seed", a.seed, "Master seed override");
    cmd->add_option("--k", a.k, "Replicate count override");
    cmd->add_option("--workers", a.workers, "Worker thread count");
  };

  auto* fit = app.add_subcommand("fit", "Fit prediction-phase models only");
  add_common(fit, fit_args);
  fit->add_flag("--draws-csv", fit_draws_csv, "Also write posterior draw matrices");

  auto* pp = app.add_subcommand("ppos", "Compute the predictive probability of success");
  add_common(pp, ppos_args);

  auto* sc = app.add_subcommand("scenarios", "Run the scenario grid in the config");
  add_common(sc, scen_args);

  auto* fig = app.add_subcommand("emit-figures", "Convert reports to figure-ready CSVs");
  std::string fig_report, fig_out = "figures", fig_curves_file;
  int fig_bins = 40, fig_curves = 500;
  std::optional<std::uint64_t> fig_seed;
  fig->add_option("--report", fig_report, "report.json from a ppos run")->required();
  fig->add_option("--out", fig_out, "Output directory");
  fig->add_option("--bins", fig_bins, "Histogram bin count");
  fig->add_option("--curves", fig_curves, "Number of replicate curves to sample");
  fig->add_option("--curves-file", fig_curves_file, "curves.csv path override");
  fig->add_option("--seed", fig_seed, "Curve sampling seed override");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  if (sim->parsed()) return guarded([&] { return cmd_simulate(sim_spec, sim_out); });
  if (fit->parsed()) return guarded([&] { return cmd_fit(fit_args, fit_draws_csv); });
  if (pp->parsed()) return guarded([&] { return cmd_ppos(ppos_args); });
  if (sc->parsed()) return guarded([&] { return cmd_scenarios(scen_args); });
  if (fig->parsed()) {
    return guarded([&] {
      return cmd_emit_figures(fig_report, fig_out, fig_bins, fig_curves,
                              fig_curves_file, fig_seed);
    });
  }
  return 2;
}
