// Command-line front end: simulate, verify, sweep, rate.

#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "exptrack/commands.hpp"

int main(int argc, char** argv) {
  namespace cli = exptrack::cli;

  CLI::App app{"Exponential tracking control: simulation and certificate checks"};
  app.require_subcommand(1);

  std::string config, out, param, values, column, window, csv;

  auto* simulate = app.add_subcommand("simulate", "Run the configured loop and write a trajectory CSV");
  simulate->add_option("--config", config, "Experiment config (JSON)")->required();
  simulate->add_option("--out", out, "Output CSV path (default: output.path, else stdout)");

  auto* verify = app.add_subcommand("verify", "Run the property suite and write a JSON report");
  verify->add_option("--config", config, "Experiment config (JSON)")->required();
  verify->add_option("--out", out, "Report path (default: stdout)");

  auto* sweep = app.add_subcommand("sweep", "Closed-loop runs over a list of parameter values");
  sweep->add_option("--config", config, "Experiment config (JSON)")->required();
  sweep->add_option("--param", param, "lambda, p_scalar or dt")->required();
  sweep->add_option("--values", values, "Comma-separated values")->required();
  sweep->add_option("--window", window, "Rate-fit window t0:t1 (default 1:5)");
  sweep->add_option("--out", out, "Summary CSV path (default: stdout)");

  auto* rate = app.add_subcommand("rate", "Fit an exponential decay rate to a CSV column");
  rate->add_option("csv", csv, "Trajectory CSV to read")->required();
  rate->add_option("--column", column, "Column name")->required();
  rate->add_option("--window", window, "Fit window t0:t1 (default 1:5)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : cli::kConfigError;
  }

  if (*simulate) return cli::cmd_simulate(config, out, std::cout, std::cerr);
  if (*verify) return cli::cmd_verify(config, out, std::cout, std::cerr);
  if (*sweep) return cli::cmd_sweep(config, param, values, window, out, std::cout, std::cerr);
  if (*rate) return cli::cmd_rate(csv, column, window, std::cout, std::cerr);
  return cli::kConfigError;
}
