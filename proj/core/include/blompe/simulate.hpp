#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "blompe/divergences.hpp"
#include "blompe/selection.hpp"

namespace blompe {

struct SampledData {
  Dataset data;
  std::vector<int> labels;       // latent component of every row
  double acceptance_rate = 1.0;  // share of (Z, Y) proposals inside [0, 1]^L
};

/// Draws n rows from the generative process Z ~ π, Y | Z ~ Φ_L(c_Z, Γ_Z),
/// X | Y, Z ~ Φ_D(υ_Z(Y), Σ_Z). With `enforce_unit_box`, (Z, Y) pairs are
/// redrawn jointly until Y ∈ [0, 1]^L; Errc::scenario is thrown when more
/// than 99.9% of proposals are rejected.
SampledData sample_dataset(const BlompeModel& model, std::size_t n, std::uint64_t seed,
                           bool enforce_unit_box = true);

struct TrueModelSpec {
  int K = 2;
  int d = 1;
  int D = 2;
  int L = 1;
  BlockStructure blocks;     // empty: singletons in every cluster
  double separation = 8.0;   // gating-mean spacing in units of √A_Γ
  double noise_scale = 0.1;  // standard-deviation scale of the experts
  double coef_scale = 1.0;   // polynomial coefficients are uniform in ±coef_scale
  double corr_min = 0.6;     // within-block |correlation| range
  double corr_max = 0.8;
  Bounds bounds = default_bounds();
  std::uint64_t seed = 0;

  /// Gating covariances are A_Γ · I, so A_Γ sets the gate width.
  static Bounds default_bounds() {
    Bounds b;
    b.A_Gamma = 0.0025;
    return b;
  }
};

/// Ground-truth model: uniform weights, gating means on a centred lattice
/// in [0, 1]^L, random coefficients, equicorrelated random-sign blocks.
/// Throws Errc::scenario if the lattice does not fit or a bound fails.
BlompeModel make_true_model(const TrueModelSpec& spec);

struct Scenario {
  explicit Scenario(BlompeModel truth) : true_model(std::move(truth)) {}

  BlompeModel true_model;
  std::vector<std::size_t> n_grid;
  std::vector<std::uint64_t> seeds;
  int K_max = 2;
  int d_max = 1;
  DetectConfig detect;
  FitConfig fit;
  SlopeConfig slope;
  std::size_t n_designs = 200;  // held-out covariate points
  std::size_t mc_samples = 20;  // draws per design point
  double rho = 0.5;
  int threads = 1;

  void validate() const;
};

struct OracleCell {
  std::size_t n = 0;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  ModelIndex selected;
  double kappa_used = 0.0;
  double selected_jkl = 0.0;
  double selected_jkl_se = 0.0;
  double selected_kl = 0.0;
  double oracle = 0.0;          // min over the table of KL + 2 κ pen_shape / n
  ModelIndex oracle_index;
  bool selected_is_truth = false;
  double ratio = 0.0;           // selected_jkl / oracle
  std::size_t table_size = 0;
  std::vector<double> model_kl;  // aligned with the fitted table
  std::vector<double> model_kl_se;
};

struct OracleSummary {
  std::size_t n = 0;
  std::size_t cells = 0;
  std::size_t failures = 0;
  double median_selected_jkl = 0.0;
  double mean_selected_jkl = 0.0;
  double mean_ratio = 0.0;
  double max_ratio = 0.0;
  std::size_t ratio_le_3 = 0;
  std::size_t truth_selected = 0;
};

struct OracleReport {
  std::vector<OracleCell> cells;        // ordered by (n, seed) as in the scenario
  std::vector<OracleSummary> summaries;  // one per n
  int median_inversions = 0;            // increases of the median JKL along n_grid
};

/// For every (n, seed): sample, select, then estimate the selected model's
/// JKL and every model's KL to the truth on held-out designs. Failing
/// cells are kept with ok = false and the error message.
OracleReport oracle_experiment(const Scenario& scenario);

}  // namespace blompe
