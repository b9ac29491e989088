#include <functional>
#include <iostream>

#include <CLI11.hpp>

#include "commands.hpp"

namespace cli = blompe::cli;

int main(int argc, char** argv) {
  CLI::App app{"Block-diagonal localized mixtures of polynomial experts"};
  app.require_subcommand(1);
  std::function<int()> run;

  cli::FitArgs fit;
  auto* fit_cmd = app.add_subcommand("fit", "Fit one model by EM");
  fit_cmd->add_option("--data", fit.data, "Data CSV (y_1..y_L,x_1..x_D)")->required()->check(CLI::ExistingFile);
  fit_cmd->add_option("-K,--K", fit.K, "Number of components")->check(CLI::PositiveNumber);
  fit_cmd->add_option("-d,--degree", fit.d, "Polynomial degree of the expert means")->check(CLI::NonNegativeNumber);
  fit_cmd->add_option("--blocks", fit.blocks, "Block structure JSON (1-based groups)")->check(CLI::ExistingFile);
  fit_cmd->add_option("--structure", fit.structure, "Block structure without --blocks")
      ->check(CLI::IsMember({"full", "singletons"}));
  fit_cmd->add_option("--config", fit.config, "JSON with fit settings and bounds")->check(CLI::ExistingFile);
  fit_cmd->add_option("--seed", fit.seed, "Random seed")->required();
  fit_cmd->add_option("--threads", fit.threads, "Worker threads");
  fit_cmd->add_option("--max-iters", fit.max_iters, "EM iteration cap");
  fit_cmd->add_option("--starts", fit.starts, "Number of EM starts");
  fit_cmd->add_option("--tol", fit.tol, "Relative log-likelihood tolerance");
  fit_cmd->add_flag("--rescale", fit.rescale, "Rescale covariates into [0,1]");
  fit_cmd->add_option("--out-model", fit.out_model, "Model JSON output");
  fit_cmd->add_option("--out-report", fit.out_report, "Fit report JSON output");
  fit_cmd->add_option("--out-forward", fit.out_forward, "Forward parameters JSON output (d = 1)");
  fit_cmd->callback([&] { run = [&] { return cli::cmd_fit(fit); }; });

  cli::SelectArgs select;
  auto* select_cmd = app.add_subcommand("select", "Build the model collection and select by slope heuristic");
  select_cmd->add_option("--data", select.data, "Data CSV")->required()->check(CLI::ExistingFile);
  select_cmd->add_option("--K-max", select.K_max, "Largest number of components")->check(CLI::PositiveNumber);
  select_cmd->add_option("--d-max", select.d_max, "Largest polynomial degree")->check(CLI::PositiveNumber);
  select_cmd->add_option("--config", select.config, "JSON with fit, detect and slope settings")
      ->check(CLI::ExistingFile);
  select_cmd->add_option("--seed", select.seed, "Random seed")->required();
  select_cmd->add_option("--threads", select.threads, "Worker threads");
  select_cmd->add_option("--kappa", select.kappa, "Fixed penalty constant (skips calibration)");
  select_cmd->add_option("--method", select.method, "Calibration: slope_fit or dimension_jump")
      ->check(CLI::IsMember({"slope_fit", "dimension_jump"}));
  select_cmd->add_flag("--rescale", select.rescale, "Rescale covariates into [0,1]");
  select_cmd->add_option("--out-selection", select.out_selection, "Selection JSON output");
  select_cmd->add_option("--out-table", select.out_table, "Selection table CSV output");
  select_cmd->add_option("--out-model", select.out_model, "Selected model JSON output");
  select_cmd->callback([&] { run = [&] { return cli::cmd_select(select); }; });

  cli::SimulateArgs sim;
  auto* sim_cmd = app.add_subcommand("simulate", "Sample a dataset from a model");
  sim_cmd->add_option("--model", sim.model, "Model JSON")->check(CLI::ExistingFile);
  sim_cmd->add_option("--spec", sim.spec, "True-model spec JSON")->check(CLI::ExistingFile);
  sim_cmd->add_option("-n,--n", sim.n, "Number of rows")->check(CLI::PositiveNumber);
  sim_cmd->add_option("--seed", sim.seed, "Random seed")->required();
  sim_cmd->add_flag("--no-enforce", sim.no_enforce, "Do not restrict covariates to [0,1]");
  sim_cmd->add_option("--out", sim.out, "Data CSV output");
  sim_cmd->add_option("--out-labels", sim.out_labels, "Latent component CSV output");
  sim_cmd->add_option("--out-model", sim.out_model, "True model JSON output");
  sim_cmd->callback([&] { run = [&] { return cli::cmd_simulate(sim); }; });

  cli::EvalArgs eval;
  auto* eval_cmd = app.add_subcommand("eval", "Monte-Carlo KL, Jensen-KL and Hellinger losses");
  eval_cmd->add_option("--true", eval.truth, "True model JSON")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--fitted", eval.fitted, "Fitted model JSON")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--data", eval.data, "Use the covariates of this CSV as design points")
      ->check(CLI::ExistingFile);
  eval_cmd->add_option("--n-designs", eval.n_designs, "Design points drawn from the true model")
      ->check(CLI::PositiveNumber);
  eval_cmd->add_option("--samples", eval.samples, "Draws per design point")->check(CLI::Range(2, 100000000));
  eval_cmd->add_option("--rho", eval.rho, "Jensen-KL mixing weight")->check(CLI::Range(0.0, 1.0));
  eval_cmd->add_option("--seed", eval.seed, "Random seed")->required();
  eval_cmd->add_option("--out", eval.out, "Evaluation JSON output");
  eval_cmd->callback([&] { run = [&] { return cli::cmd_eval(eval); }; });

  cli::SlopeArgs slope;
  auto* slope_cmd = app.add_subcommand("slope", "Slope-heuristic point clouds from a selection table");
  slope_cmd->add_option("--table", slope.table, "Selection table CSV")->required()->check(CLI::ExistingFile);
  slope_cmd->add_option("--grid", slope.grid, "Size of the kappa grid");
  slope_cmd->add_option("--method", slope.method, "Calibration for --out-json")
      ->check(CLI::IsMember({"slope_fit", "dimension_jump"}));
  slope_cmd->add_option("--fraction", slope.fraction, "Share of complex models used by slope_fit")
      ->check(CLI::Range(0.0, 1.0));
  slope_cmd->add_option("--out", slope.out, "Slope CSV output");
  slope_cmd->add_option("--out-json", slope.out_json, "Calibrated kappa JSON output");
  slope_cmd->callback([&] { run = [&] { return cli::cmd_slope(slope); }; });

  cli::OracleArgs oracle;
  auto* oracle_cmd = app.add_subcommand("oracle", "Oracle-inequality experiment over (n, seed) cells");
  oracle_cmd->add_option("--scenario", oracle.scenario, "Scenario JSON")->required()->check(CLI::ExistingFile);
  oracle_cmd->add_option("--seed", oracle.seed, "Random seed")->required();
  oracle_cmd->add_option("--threads", oracle.threads, "Worker threads");
  oracle_cmd->add_option("--out", oracle.out, "Report JSON output");
  oracle_cmd->add_option("--out-cells", oracle.out_cells, "Per-cell CSV output");
  oracle_cmd->callback([&] { run = [&] { return cli::cmd_oracle(oracle); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    return run();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return cli::exit_code_for(e);
  }
}
