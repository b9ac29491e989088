#pragma once

#include <vector>

#include "blompe/model.hpp"

namespace blompe {

/// Parameters of the forward law Y | X of an affine (d = 1) model:
///   p(y | x) = Σ_k gate*_k(x) Φ_L(y; A*_k x + b*_k, Σ*_k),
///   gate*_k(x) ∝ π*_k Φ_D(x; c*_k, Γ*_k).
struct ForwardParams {
  Vector weights;                  // π* (equal to π)
  std::vector<Vector> means;       // c*_k ∈ R^D
  std::vector<Matrix> covariances; // Γ*_k, D × D
  std::vector<Matrix> slopes;      // A*_k, L × D
  std::vector<Vector> intercepts;  // b*_k ∈ R^L
  std::vector<Matrix> noise;       // Σ*_k, L × L

  int K() const { return static_cast<int>(weights.size()); }
  int D() const { return means.empty() ? 0 : static_cast<int>(means.front().size()); }
  int L() const { return intercepts.empty() ? 0 : static_cast<int>(intercepts.front().size()); }

  /// Checks shapes, the simplex and SPD-ness; throws on failure.
  void validate() const;
};

/// Inverse → forward parameter map of the Gaussian locally-linear model:
///   c*  = A c + b               Γ* = Σ + A Γ Aᵀ
///   Σ*  = (Γ⁻¹ + Aᵀ Σ⁻¹ A)⁻¹    A* = Σ* Aᵀ Σ⁻¹
///   b*  = Σ* (Γ⁻¹ c − Aᵀ Σ⁻¹ b) π* = π
ForwardParams inverse_to_forward(const BlompeModel& model);

/// log Σ_k π*_k Φ_D(x; c*_k, Γ*_k) Φ_L(y; A*_k x + b*_k, Σ*_k)
double log_forward_joint_density(const ForwardParams& fwd, const Vector& y, const Vector& x);

/// log p(y | x) under the forward parameterization.
double log_forward_cond_density(const ForwardParams& fwd, const Vector& y, const Vector& x);

/// Forward gate probabilities gate*_k(x).
Vector forward_gates(const ForwardParams& fwd, const Vector& x);

/// E[Y | X = x] = Σ_k gate*_k(x) (A*_k x + b*_k).
Vector predict_mean(const ForwardParams& fwd, const Vector& x);

}  // namespace blompe
