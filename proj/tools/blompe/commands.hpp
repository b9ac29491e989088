#pragma once

#include <cstdint>
#include <optional>
#include <string>

namespace blompe::cli {

struct FitArgs {
  std::string data;
  std::string config;     // optional JSON with a "fit" object (or the object itself)
  std::string blocks;     // optional blocks JSON; otherwise `structure`
  std::string structure = "full";
  int K = 1;
  int d = 1;
  std::uint64_t seed = 0;
  int threads = 1;
  bool rescale = false;
  std::optional<int> max_iters;
  std::optional<int> starts;
  std::optional<double> tol;
  std::string out_model = "model.json";
  std::string out_report = "fit_report.json";
  std::string out_forward;
};

struct SelectArgs {
  std::string data;
  std::string config;  // optional JSON with "fit", "detect" and "slope" objects
  int K_max = 2;
  int d_max = 1;
  std::uint64_t seed = 0;
  int threads = 1;
  bool rescale = false;
  std::optional<double> kappa;
  std::string method;
  std::string out_selection = "selection.json";
  std::string out_table = "table.csv";
  std::string out_model;
};

struct SimulateArgs {
  std::string model;  // model JSON, or
  std::string spec;   // true-model spec JSON
  std::size_t n = 100;
  std::uint64_t seed = 0;
  bool no_enforce = false;
  std::string out = "data.csv";
  std::string out_labels;
  std::string out_model;
};

struct EvalArgs {
  std::string truth;
  std::string fitted;
  std::string data;  // optional: use its covariates as design points
  std::size_t n_designs = 200;
  std::size_t samples = 100;
  double rho = 0.5;
  std::uint64_t seed = 0;
  std::string out = "eval.json";
};

struct SlopeArgs {
  std::string table;
  int grid = 100;
  std::string method = "slope_fit";
  double fraction = 0.5;
  std::string out = "slope.csv";
  std::string out_json;
};

struct OracleArgs {
  std::string scenario;
  std::uint64_t seed = 0;
  int threads = 1;
  std::string out = "oracle.json";
  std::string out_cells = "oracle_cells.csv";
};

// Each command returns the process exit code; errors propagate as exceptions.
int cmd_fit(const FitArgs& args);
int cmd_select(const SelectArgs& args);
int cmd_simulate(const SimulateArgs& args);
int cmd_eval(const EvalArgs& args);
int cmd_slope(const SlopeArgs& args);
int cmd_oracle(const OracleArgs& args);

/// 1 for input problems, 2 for numerical or convergence failures.
int exit_code_for(const std::exception& e);

}  // namespace blompe::cli
