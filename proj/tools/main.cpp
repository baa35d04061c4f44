#include <CLI11.hpp>

#include <string>

#include "rtls/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"UWB localization solvers and energy-aware RTLS simulator"};
  app.set_version_flag("--version", std::string("rtlsim ") +
                                        rtls::cli::kVersion);
  app.require_subcommand(1);

  // solve
  std::string measurements, solver = "lm", solve_out = "solutions.csv";
  double tolerance = 1e-2;
  auto* solve = app.add_subcommand("solve",
                                   "solve a measurement-set CSV file");
  solve->add_option("measurements", measurements, "input measurement CSV")
      ->required();
  solve->add_option("--solver", solver, "larsson | lm | tdoa")
      ->check(CLI::IsMember({"larsson", "lm", "tdoa"}));
  solve->add_option("--tolerance", tolerance, "solver tolerance")
      ->check(CLI::PositiveNumber);
  solve->add_option("--out", solve_out, "output CSV path");

  // simulate
  std::string sim_config;
  rtls::cli::SimulateOverrides overrides;
  std::uint64_t seed_value = 0;
  int days_value = 0, tags_value = 0;
  auto* simulate = app.add_subcommand("simulate",
                                      "run the discrete-time simulation");
  simulate->add_option("config", sim_config, "simulation config file")
      ->required();
  auto* seed_opt = simulate->add_option("--seed", seed_value, "seed override");
  auto* days_opt = simulate->add_option("--days", days_value,
                                        "duration override (days)");
  auto* tags_opt = simulate->add_option(
      "--tags", tags_value, "replace tags with N random placements");
  simulate->add_option("--scheduler", overrides.scheduler,
                       "aimd | bounded_aimd | constant_rate")
      ->check(CLI::IsMember({"aimd", "bounded_aimd", "constant_rate"}));
  simulate->add_option("--out", overrides.output_dir, "output directory");
  simulate->add_flag("--with-solvers", overrides.with_solvers,
                     "run position solvers on synthesized measurements");

  // tune
  std::string tune_config, grid_path;
  auto* tune = app.add_subcommand("tune", "grid-search AIMD parameters");
  tune->add_option("config", tune_config, "simulation config file")
      ->required();
  tune->add_option("grid", grid_path, "grid file with beta1/beta2/gamma lists")
      ->required();

  // report
  std::string stats_dir;
  auto* report = app.add_subcommand("report",
                                    "aggregate daily stats into summaries");
  report->add_option("stats_dir", stats_dir, "directory with stats_daily.csv")
      ->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : rtls::cli::kExitUsage;
  }

  if (solve->parsed())
    return rtls::cli::cmd_solve(measurements, solver, tolerance, solve_out);
  if (simulate->parsed()) {
    overrides.has_seed = seed_opt->count() > 0;
    overrides.seed = seed_value;
    overrides.has_days = days_opt->count() > 0;
    overrides.days = days_value;
    overrides.has_tags = tags_opt->count() > 0;
    overrides.tags = tags_value;
    return rtls::cli::cmd_simulate(sim_config, overrides);
  }
  if (tune->parsed()) return rtls::cli::cmd_tune(tune_config, grid_path);
  if (report->parsed()) return rtls::cli::cmd_report(stats_dir);
  return rtls::cli::kExitUsage;
}
