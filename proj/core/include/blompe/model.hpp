#pragma once

#include <compare>
#include <span>
#include <string>
#include <vector>

#include "blompe/blocks.hpp"
#include "blompe/linalg.hpp"
#include "blompe/monomials.hpp"

namespace blompe {

/// Compactness constants of the parameter space. The defaults are loose
/// enough to be inactive on reasonably scaled data.
struct Bounds {
  double a_pi = 1e-6;      // lower bound on mixture weights
  double A_c = 1e6;        // sup-norm bound on gating means
  double a_Gamma = 1e-6;   // eigenvalue range of gating covariances
  double A_Gamma = 1e6;
  double lambda_m = 1e-6;  // eigenvalue range of expert covariances
  double lambda_M = 1e6;
  double T_upsilon = 1e6;  // sup-norm bound on polynomial coefficients

  /// Throws Errc::bounds_violation if the constants are inconsistent for K
  /// components (a_pi must not exceed 1/K).
  void validate(int K) const;

  bool operator==(const Bounds&) const = default;
};

/// A member m = (K, d, B) of the model collection. L (covariate dimension)
/// is carried along since dimensions depend on it; D is blocks[k].dim().
struct ModelIndex {
  int K = 1;
  int d = 1;
  int L = 1;
  BlockStructure blocks;

  int D() const { return blocks.empty() ? 0 : blocks.front().dim(); }
  void validate() const;

  static ModelIndex full_blocks(int K, int d, int L, int D);
  static ModelIndex singleton_blocks(int K, int d, int L, int D);

  auto operator<=>(const ModelIndex&) const = default;
};

std::string describe(const ModelIndex& index);

struct GatingParams {
  Vector weights;                    // π, on the simplex
  std::vector<Vector> means;         // c_k ∈ R^L
  std::vector<Matrix> covariances;   // Γ_k, L × L SPD
};

struct ExpertParams {
  std::vector<Matrix> coeffs;        // α_k, D × M, grlex column order
  std::vector<Matrix> covariances;   // Σ_k(B_k), D × D SPD, block-conforming
};

/// Validated, immutable BLoMPE parameter vector with cached Cholesky
/// factors. For d = 1 the coefficient matrix is (b_k | A_k).
class BlompeModel {
 public:
  /// Throws Errc::dimension on shape mismatches, Errc::decomposition on
  /// non-SPD covariances, Errc::bounds_violation when a bound is broken.
  BlompeModel(ModelIndex index, GatingParams gating, ExpertParams experts,
              Bounds bounds = {});

  const ModelIndex& index() const { return index_; }
  const GatingParams& gating() const { return gating_; }
  const ExpertParams& experts() const { return experts_; }
  const Bounds& bounds() const { return bounds_; }
  const std::vector<MultiIndex>& monomials() const { return monomials_; }

  int K() const { return index_.K; }
  int d() const { return index_.d; }
  int L() const { return index_.L; }
  int D() const { return index_.D(); }

  const CholeskyFactor& gate_factor(int k) const { return gate_chol_[static_cast<std::size_t>(k)]; }
  const CholeskyFactor& expert_factor(int k) const { return expert_chol_[static_cast<std::size_t>(k)]; }

  /// υ_{k,d}(y)
  Vector expert_mean(int k, const Vector& y) const;

  /// Slope A_k (D × L) and intercept b_k of an affine (d = 1) expert.
  Matrix slope(int k) const;
  Vector intercept(int k) const;

 private:
  ModelIndex index_;
  GatingParams gating_;
  ExpertParams experts_;
  Bounds bounds_;
  std::vector<MultiIndex> monomials_;
  std::vector<CholeskyFactor> gate_chol_;
  std::vector<CholeskyFactor> expert_chol_;
};

/// Affine map applied to covariate columns to bring them into [0, 1].
struct CovariateScaling {
  Vector offset;  // y_scaled = (y - offset) / scale
  Vector scale;
  bool applied = false;
};

enum class UnitBoxPolicy { warn, rescale };

/// Observations (x_i, y_i): X is n × D (responses of the inverse model),
/// Y is n × L (covariates, expected in [0, 1]^L).
class Dataset {
 public:
  Dataset(Matrix X, Matrix Y, UnitBoxPolicy policy = UnitBoxPolicy::warn);

  Eigen::Index n() const { return X_.rows(); }
  Eigen::Index D() const { return X_.cols(); }
  Eigen::Index L() const { return Y_.cols(); }
  const Matrix& X() const { return X_; }
  const Matrix& Y() const { return Y_; }
  const CovariateScaling& scaling() const { return scaling_; }

  Vector x(Eigen::Index i) const { return X_.row(i).transpose(); }
  Vector y(Eigen::Index i) const { return Y_.row(i).transpose(); }

  Dataset concat(const Dataset& other) const;

 private:
  Matrix X_;
  Matrix Y_;
  CovariateScaling scaling_;
};

/// log g_k(y; ω) for every k; exponentials sum to one.
Vector log_gating(const GatingParams& gating, const Vector& y);
Vector log_gating(const BlompeModel& model, const Vector& y);

/// log s_ψ(x | y)
double log_cond_density(const BlompeModel& model, const Vector& x, const Vector& y);

/// log Σ_k π_k Φ_L(y; c_k, Γ_k) Φ_D(x; A_k y + b_k, Σ_k). Requires d = 1.
double log_joint_density(const BlompeModel& model, const Vector& x, const Vector& y);

/// log Σ_k π_k Φ_L(y; c_k, Γ_k)
double log_covariate_marginal(const BlompeModel& model, const Vector& y);

/// Σ_i -log s_ψ(x_i | y_i)
double nll(const BlompeModel& model, const Dataset& data);

/// Batched log π_k + log Φ_L(y_i; c_k, Γ_k), n × K.
Matrix log_gate_terms(const BlompeModel& model, const Matrix& Y);

/// Batched log Φ_D(x_i; υ_{k,d}(y_i), Σ_k), n × K.
Matrix log_expert_terms(const BlompeModel& model, const Matrix& X, const Matrix& Y);

/// Number of free parameters of the model indexed by `index`.
int model_dim(const ModelIndex& index, DimConvention convention = DimConvention::full);

}  // namespace blompe
