#include "commands.hpp"

#include <iostream>

#include "blompe/error.hpp"
#include "blompe/io.hpp"
#include "blompe/simulate.hpp"

namespace blompe::cli {

namespace {

using io::Json;

UnitBoxPolicy box_policy(bool rescale) {
  return rescale ? UnitBoxPolicy::rescale : UnitBoxPolicy::warn;
}

// A config file may hold the section object directly or under `key`.
Json section(const std::string& path, const char* key) {
  if (path.empty()) return Json::object();
  const Json root = io::read_json_file(path);
  if (root.is_object() && root.contains(key)) return root[key];
  return root;
}

void check_threads(int threads) {
  if (threads < 1) fail(Errc::input, "--threads must be >= 1");
}

}  // namespace

int exit_code_for(const std::exception& e) {
  const auto* err = dynamic_cast<const Error*>(&e);
  if (!err) return 1;
  switch (err->code()) {
    case Errc::decomposition:
    case Errc::insufficient_data:
    case Errc::component_collapse:
    case Errc::fit_failure:
    case Errc::insufficient_table:
      return 2;
    default:
      return 1;
  }
}

int cmd_fit(const FitArgs& args) {
  check_threads(args.threads);
  const Dataset data = io::read_data_csv(args.data, box_policy(args.rescale));
  FitConfig config = io::fit_config_from_json(section(args.config, "fit"));
  if (args.max_iters) config.max_iters = *args.max_iters;
  if (args.starts) config.n_starts = *args.starts;
  if (args.tol) config.rel_tol = *args.tol;
  config.seed = args.seed;
  config.threads = args.threads;
  config.validate();

  const int L = static_cast<int>(data.L());
  const int D = static_cast<int>(data.D());
  ModelIndex index;
  if (!args.blocks.empty()) {
    index = ModelIndex{args.K, args.d, L, io::blocks_from_json(io::read_json_file(args.blocks), args.K, D)};
  } else if (args.structure == "full") {
    index = ModelIndex::full_blocks(args.K, args.d, L, D);
  } else if (args.structure == "singletons") {
    index = ModelIndex::singleton_blocks(args.K, args.d, L, D);
  } else {
    fail(Errc::input, "--structure must be full or singletons");
  }
  index.validate();

  const FitResult result = fit(data, index, config);
  io::write_text_file(args.out_model, io::dump(io::to_json(result.model)));
  io::write_text_file(args.out_report, io::dump(io::fit_report(result, data)));
  if (!args.out_forward.empty()) {
    io::write_text_file(args.out_forward, io::dump(io::to_json(inverse_to_forward(result.model))));
  }
  std::cout << describe(index) << ": nll " << io::format_double(result.nll) << ", "
            << result.iterations << (result.iterations == 1 ? " iteration, " : " iterations, ")
            << (result.converged ? "converged" : "not converged") << "\n";
  return result.converged ? 0 : 2;
}

int cmd_select(const SelectArgs& args) {
  check_threads(args.threads);
  const Dataset data = io::read_data_csv(args.data, box_policy(args.rescale));
  CollectionConfig config;
  config.K_max = args.K_max;
  config.d_max = args.d_max;
  config.fit = io::fit_config_from_json(section(args.config, "fit"));
  config.detect = io::detect_config_from_json(section(args.config, "detect"));
  config.fit.seed = args.seed;
  config.fit.threads = 1;
  config.threads = args.threads;
  config.fit.validate();
  SlopeConfig slope = io::slope_config_from_json(section(args.config, "slope"));
  if (!args.method.empty()) {
    try {
      slope.method = slope_method_from_string(args.method);
    } catch (const Error& e) {
      fail(Errc::input, e.what());
    }
  }

  Collection collection = build_collection(data, config);
  FittedCollection fitted = fit_collection(data, collection, config);
  // The table is written even when calibration fails on too few complexities.
  io::write_text_file(args.out_table, io::table_csv(fitted.table));
  const SelectionRun run = calibrate_selection(std::move(collection), std::move(fitted), slope, args.kappa);
  io::write_text_file(args.out_selection, io::dump(io::selection_report(run)));
  if (!args.out_model.empty()) {
    io::write_text_file(args.out_model,
                        io::dump(io::to_json(run.fitted.models.at(run.result.selected_row))));
  }
  std::cout << "selected " << describe(run.result.selected) << " from "
            << run.fitted.table.rows.size() << " models (kappa_used "
            << io::format_double(run.result.kappa_used) << ")\n";
  return 0;
}

int cmd_simulate(const SimulateArgs& args) {
  if (args.model.empty() == args.spec.empty()) {
    fail(Errc::input, "give exactly one of --model and --spec");
  }
  BlompeModel truth = [&] {
    if (!args.model.empty()) return io::model_from_json(io::read_json_file(args.model));
    const Json spec_json = io::read_json_file(args.spec);
    TrueModelSpec spec = io::true_model_spec_from_json(spec_json);
    if (!spec_json.contains("seed")) spec.seed = derive_seed(args.seed, 0);
    return make_true_model(spec);
  }();
  const SampledData sample = sample_dataset(truth, args.n, args.seed, !args.no_enforce);
  io::write_text_file(args.out, io::data_csv(sample.data.X(), sample.data.Y()));
  if (!args.out_labels.empty()) {
    std::string labels = "z\n";
    for (int z : sample.labels) labels += std::to_string(z + 1) + "\n";
    io::write_text_file(args.out_labels, labels);
  }
  if (!args.out_model.empty()) io::write_text_file(args.out_model, io::dump(io::to_json(truth)));
  std::cout << "sampled " << args.n << " rows from " << describe(truth.index())
            << " (acceptance rate " << io::format_double(sample.acceptance_rate) << ")\n";
  return 0;
}

int cmd_eval(const EvalArgs& args) {
  const BlompeModel truth = io::model_from_json(io::read_json_file(args.truth));
  const BlompeModel fitted = io::model_from_json(io::read_json_file(args.fitted));
  if (truth.D() != fitted.D() || truth.L() != fitted.L()) {
    fail(Errc::input, "true and fitted models have different dimensions");
  }
  const Matrix designs = args.data.empty()
                             ? sample_dataset(truth, args.n_designs, derive_seed(args.seed, 1)).data.Y()
                             : io::read_data_csv(args.data).Y();
  if (designs.cols() != truth.L()) fail(Errc::input, "design covariates have the wrong dimension");
  const PairedDivergences div = mc_divergences(ModelLaw(truth), ModelLaw(fitted), designs, args.rho,
                                               args.samples, derive_seed(args.seed, 2));
  io::write_text_file(args.out, io::dump(io::divergence_report(div, static_cast<std::size_t>(designs.rows()))));
  std::cout << "KL " << io::format_double(div.kl.value) << ", JKL " << io::format_double(div.jkl.value)
            << ", Hellinger " << io::format_double(div.hellinger.value) << "\n";
  return 0;
}

int cmd_slope(const SlopeArgs& args) {
  const SelectionTable table = io::parse_table_csv(io::read_text_file(args.table), args.table);
  if (table.rows.empty()) fail(Errc::insufficient_table, "table has no rows");
  if (args.grid < 2) fail(Errc::input, "--grid must be >= 2");
  io::write_text_file(args.out, io::slope_csv(table, args.grid));
  if (!args.out_json.empty()) {
    SlopeConfig config;
    try {
      config.method = slope_method_from_string(args.method);
    } catch (const Error& e) {
      fail(Errc::input, e.what());
    }
    config.fraction = args.fraction;
    config.grid_size = args.grid;
    const SlopeEstimate est = slope_heuristic(table, config);
    const SelectionResult sel = select_model(table, est.kappa_used);
    Json j;
    j["kappa_hat"] = est.kappa_hat;
    j["kappa_used"] = est.kappa_used;
    j["method"] = std::string(to_string(est.method));
    j["selected"] = io::to_json(sel.selected);
    j["selected_row"] = sel.selected_row;
    io::write_text_file(args.out_json, io::dump(j));
  }
  std::cout << "wrote " << table.rows.size() + static_cast<std::size_t>(args.grid)
            << " slope rows\n";
  return 0;
}

int cmd_oracle(const OracleArgs& args) {
  check_threads(args.threads);
  const Json json = io::read_json_file(args.scenario);
  Scenario scenario = io::scenario_from_json(json);
  scenario.fit.seed = args.seed;
  scenario.threads = args.threads;
  const OracleReport report = oracle_experiment(scenario);
  io::write_text_file(args.out, io::dump(io::oracle_report(report, scenario)));
  if (!args.out_cells.empty()) io::write_text_file(args.out_cells, io::oracle_cells_csv(report));
  std::size_t ok = 0;
  for (const auto& cell : report.cells) ok += cell.ok ? 1 : 0;
  std::cout << ok << "/" << report.cells.size() << " cells completed, "
            << report.median_inversions << " median inversions\n";
  return ok == 0 ? 2 : 0;
}

}  // namespace blompe::cli
