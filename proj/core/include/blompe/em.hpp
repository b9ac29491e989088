#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "blompe/model.hpp"

namespace blompe {

enum class InitStrategy { kmeans, random_responsibilities };

struct FitConfig {
  int max_iters = 500;
  double rel_tol = 1e-8;   // on the joint log-likelihood
  int n_starts = 5;
  std::uint64_t seed = 0;
  InitStrategy init = InitStrategy::kmeans;
  Bounds bounds;
  int threads = 1;         // starts run in parallel when > 1

  void validate() const;
};

struct FitResult {
  BlompeModel model;
  double nll = 0.0;                   // conditional NLL of `model`
  int dim = 0;                        // full-convention dimension
  std::vector<double> loglik_trace;   // joint log-likelihood per E-step
  std::vector<bool> projected;        // projected[i]: M-step producing model i hit a bound
  bool converged = false;
  int iterations = 0;                 // completed E+M cycles
  int start_index = 0;
  double eta = 0.0;                   // achieved |Δloglik| / |loglik| scaled by |nll|
  std::vector<std::string> diagnostics;
};

struct EStepResult {
  Matrix responsibilities;  // n × K, rows sum to one
  double loglik = 0.0;      // Σ_i log Σ_k π_k Φ_L(y_i) Φ_D(x_i)
};

EStepResult e_step(const BlompeModel& model, const Dataset& data);

/// Closed-form weighted maximum-likelihood update of every parameter,
/// followed by projection onto the bounded parameter space. Sets
/// `*projected` when any projection changed the unconstrained update.
/// Throws Errc::component_collapse when a column of `resp` has (almost) no mass.
BlompeModel m_step(const Dataset& data, const Matrix& resp, const ModelIndex& index,
                   const Bounds& bounds, bool* projected = nullptr);

/// Initial model from hard K-means assignments on standardized (y, x) rows
/// or from Dirichlet(1) responsibilities, followed by one M-step.
BlompeModel init_params(const Dataset& data, const ModelIndex& index, std::uint64_t seed,
                        InitStrategy strategy, const Bounds& bounds = {});

/// Hard labels from K-means++ / Lloyd on the rows of `points`.
std::vector<int> kmeans_labels(const Matrix& points, int K, std::uint64_t seed,
                               int max_iters = 100);

/// Best of config.n_starts EM runs by final log-likelihood (ties: lower
/// start index). Throws Errc::fit_failure when every start fails.
FitResult fit(const Dataset& data, const ModelIndex& index, const FitConfig& config);

/// One EM run started from `start`.
FitResult fit_from(const Dataset& data, const BlompeModel& start, const FitConfig& config,
                   int start_index = 0);

/// Per-component weighted covariance of x - υ_k(y) with weights resp(:, k).
std::vector<Matrix> residual_covariances(const BlompeModel& model, const Dataset& data,
                                         const Matrix& resp);

}  // namespace blompe
