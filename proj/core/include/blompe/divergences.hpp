#pragma once

#include <cstdint>
#include <optional>

#include "blompe/model.hpp"
#include "blompe/random.hpp"

namespace blompe {

/// A conditional density x | y that can be evaluated and sampled.
class ConditionalLaw {
 public:
  virtual ~ConditionalLaw() = default;
  virtual int x_dim() const = 0;
  virtual double log_density(const Vector& x, const Vector& y) const = 0;
  virtual Vector sample(const Vector& y, Rng& rng) const = 0;

  /// log density of every row of X at the same covariate y.
  virtual Vector log_density_rows(const Matrix& X, const Vector& y) const;
};

/// BLoMPE conditional s_ψ(x | y) as a ConditionalLaw.
class ModelLaw final : public ConditionalLaw {
 public:
  explicit ModelLaw(BlompeModel model) : model_(std::move(model)) {}
  const BlompeModel& model() const { return model_; }

  int x_dim() const override { return model_.D(); }
  double log_density(const Vector& x, const Vector& y) const override;
  Vector sample(const Vector& y, Rng& rng) const override;
  Vector log_density_rows(const Matrix& X, const Vector& y) const override;

 private:
  BlompeModel model_;
};

struct DivergenceEstimate {
  double value = 0.0;      // reported value (Hellinger clipped to [0, 2])
  double raw_value = 0.0;  // unclipped Monte-Carlo mean
  double std_error = 0.0;
  std::size_t n_samples = 0;
  std::optional<double> rho;
  bool infinite = false;   // a draw had t(x|y) = 0: absolute continuity fails
};

/// KL, Jensen-KL and squared Hellinger estimated from one shared stream of
/// draws x ~ s0(· | y_i), plus standard errors of the paired differences
/// used by the bound chain C_ρ d²_H <= JKL_ρ <= KL.
struct PairedDivergences {
  DivergenceEstimate kl;
  DivergenceEstimate jkl;
  DivergenceEstimate hellinger;
  double rho = 0.5;
  double se_kl_minus_jkl = 0.0;
  double se_jkl_minus_c_hellinger = 0.0;
};

/// `designs` holds one covariate point per row; `n_samples` draws are made
/// for every design. The stream for a design is derived from the seed and
/// the design's value, so estimates are additive over design-set unions.
PairedDivergences mc_divergences(const ConditionalLaw& s0, const ConditionalLaw& t,
                                 const Matrix& designs, double rho, std::size_t n_samples,
                                 std::uint64_t seed);

DivergenceEstimate mc_kl_tensorized(const ConditionalLaw& s0, const ConditionalLaw& t,
                                    const Matrix& designs, std::size_t n_samples,
                                    std::uint64_t seed);
DivergenceEstimate mc_jkl_tensorized(const ConditionalLaw& s0, const ConditionalLaw& t,
                                     const Matrix& designs, double rho, std::size_t n_samples,
                                     std::uint64_t seed);
DivergenceEstimate mc_hellinger_tensorized(const ConditionalLaw& s0, const ConditionalLaw& t,
                                           const Matrix& designs, std::size_t n_samples,
                                           std::uint64_t seed);

/// C_ρ = (1/ρ) min((1-ρ)/ρ, 1) (ln(1 + ρ/(1-ρ)) - ρ)
double c_rho(double rho);

/// (1/ρ) ln(1/(1-ρ)), the supremum of the Jensen-KL loss.
double jkl_upper_bound(double rho);

/// Squared Hellinger distance ∫(√φ₁ - √φ₂)² between two Gaussians, in [0, 2].
double hellinger_gaussian_exact(const Vector& mu1, const Matrix& Sigma1, const Vector& mu2,
                                const Matrix& Sigma2);

struct RatioBound {
  double ratio = 0.0;  // Φ(x; μ₁, Σ₁) / Φ(x; μ₂, Σ₂)
  double bound = 0.0;  // √(|Σ₂|/|Σ₁|) exp(½ (μ₁-μ₂)ᵀ (Σ₂-Σ₁)⁻¹ (μ₁-μ₂))
  double log_ratio = 0.0;
  double log_bound = 0.0;
};

/// Density ratio of two Gaussians at x and its uniform upper bound. Throws
/// Errc::precondition unless Σ₂ - Σ₁ is positive definite.
RatioBound gaussian_ratio_bound(const Vector& mu1, const Matrix& Sigma1, const Vector& mu2,
                                const Matrix& Sigma2, const Vector& x);

}  // namespace blompe
