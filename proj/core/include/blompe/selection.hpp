#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "blompe/em.hpp"

namespace blompe {

struct SelectionRow {
  ModelIndex index;
  double nll = 0.0;
  int dim = 0;
  double pen_shape = 0.0;
  bool converged = false;
  int iterations = 0;
};

struct SelectionTable {
  std::size_t n = 0;  // sample size the penalty shapes were computed for
  std::vector<SelectionRow> rows;
};

enum class SlopeMethod { slope_fit, dimension_jump, fixed };

std::string_view to_string(SlopeMethod method);
SlopeMethod slope_method_from_string(std::string_view name);

struct SlopeConfig {
  SlopeMethod method = SlopeMethod::slope_fit;
  double fraction = 0.5;  // share of most complex (frontier) rows used by slope_fit
  int grid_size = 100;    // κ grid for dimension_jump and the selected-dimension curve
};

struct SlopeEstimate {
  double kappa_hat = 0.0;
  double kappa_used = 0.0;  // 2 · kappa_hat
  SlopeMethod method = SlopeMethod::slope_fit;
};

struct SelectionResult {
  ModelIndex selected;
  std::size_t selected_row = 0;
  double kappa_hat = 0.0;
  double kappa_used = 0.0;
  SlopeMethod method = SlopeMethod::slope_fit;
  SelectionTable table;
};

/// dim · (1 + ln n)
double pen_shape(int dim, std::size_t n);

/// Rows not dominated by a row of strictly smaller penalty shape and no
/// larger NLL, in increasing pen_shape order.
std::vector<std::size_t> lower_frontier(const SelectionTable& table);

/// Minimal penalty constant κ̂ from the NLL–complexity relation of the
/// most complex models. Throws Errc::insufficient_table with fewer than
/// three distinct penalty shapes.
SlopeEstimate slope_heuristic(const SelectionTable& table, const SlopeConfig& config = {});

/// Dimension of the model selected at each κ of a log grid spanning the
/// table's NLL/pen_shape scale.
std::vector<std::pair<double, int>> selected_dim_curve(const SelectionTable& table, int grid_size);

/// argmin nll + κ · pen_shape; ties go to the smaller dimension, then to the
/// lexicographically smaller (K, d, B).
SelectionResult select_model(const SelectionTable& table, double kappa_used);

struct ComplexityBound {
  double bound = 0.0;  // dim (2(√C_m + √π)² + (ln(n / ((√C_m + √π)² dim)))₊)
  double cap = 0.0;    // dim (C + ln n), C = 2(√C_m + √π)²
};

ComplexityBound complexity_bound(int dim, double C_m, double n);

struct CollectionConfig {
  int K_max = 1;
  int d_max = 1;
  DetectConfig detect;
  FitConfig fit;
  int threads = 1;
};

struct Collection {
  std::vector<ModelIndex> indices;
  /// Full-block base fit at (K, d = 1) for K = 1..K_max; empty when it failed.
  std::vector<std::optional<FitResult>> base_fits;
  std::vector<std::string> warnings;
};

/// For each K, fits the full-block affine model, detects candidate block
/// structures from its residual covariances and emits (K, d, B) for every
/// d <= d_max and candidate B.
Collection build_collection(const Dataset& data, const CollectionConfig& config);

struct FittedCollection {
  SelectionTable table;
  std::vector<BlompeModel> models;  // aligned with table.rows
  std::vector<std::string> warnings;
};

/// Fits every index of the collection, warm-started from the base fit's
/// responsibilities. Failed fits are dropped with a warning.
FittedCollection fit_collection(const Dataset& data, const Collection& collection,
                                const CollectionConfig& config);

struct SelectionRun {
  Collection collection;
  FittedCollection fitted;
  SlopeEstimate slope;
  SelectionResult result;
};

/// κ calibration and selection over an already fitted collection.
/// Throws Errc::fit_failure when the table is empty.
SelectionRun calibrate_selection(Collection collection, FittedCollection fitted,
                                 const SlopeConfig& slope = {},
                                 std::optional<double> kappa_override = std::nullopt);

/// build_collection and fit_collection followed by calibrate_selection.
/// A `kappa_override` switches the method to `fixed`.
SelectionRun run_selection(const Dataset& data, const CollectionConfig& config,
                           const SlopeConfig& slope = {},
                           std::optional<double> kappa_override = std::nullopt);

}  // namespace blompe
