#include "blompe/forward.hpp"

#include <cmath>
#include <string>

#include "blompe/error.hpp"

namespace blompe {

namespace {

Vector log_forward_gate_terms(const ForwardParams& fwd, const Vector& x) {
  Vector terms(fwd.K());
  for (int k = 0; k < fwd.K(); ++k) {
    const auto ku = static_cast<std::size_t>(k);
    terms(k) = std::log(fwd.weights(k)) +
               CholeskyFactor(fwd.covariances[ku]).log_pdf(x, fwd.means[ku]);
  }
  return terms;
}

Vector log_forward_expert_terms(const ForwardParams& fwd, const Vector& y, const Vector& x) {
  Vector terms(fwd.K());
  for (int k = 0; k < fwd.K(); ++k) {
    const auto ku = static_cast<std::size_t>(k);
    terms(k) = CholeskyFactor(fwd.noise[ku])
                   .log_pdf(y, fwd.slopes[ku] * x + fwd.intercepts[ku]);
  }
  return terms;
}

void check_input(const ForwardParams& fwd, const Vector& y, const Vector& x) {
  if (x.size() != fwd.D() || y.size() != fwd.L()) {
    fail(Errc::dimension, "point does not match forward parameter shapes");
  }
}

}  // namespace

void ForwardParams::validate() const {
  const auto K = static_cast<std::size_t>(this->K());
  if (K == 0 || means.size() != K || covariances.size() != K || slopes.size() != K ||
      intercepts.size() != K || noise.size() != K) {
    fail(Errc::dimension, "forward parameter lists must have one entry per component");
  }
  if (std::abs(weights.sum() - 1.0) > 1e-12 || (weights.array() < 0.0).any()) {
    fail(Errc::bounds_violation, "forward weights must lie on the simplex");
  }
  const int D = this->D();
  const int L = this->L();
  for (std::size_t k = 0; k < K; ++k) {
    if (means[k].size() != D || covariances[k].rows() != D || covariances[k].cols() != D ||
        slopes[k].rows() != L || slopes[k].cols() != D || intercepts[k].size() != L ||
        noise[k].rows() != L || noise[k].cols() != L) {
      fail(Errc::dimension, "forward component " + std::to_string(k + 1) + " has wrong shapes");
    }
    CholeskyFactor check_gamma(covariances[k]);
    CholeskyFactor check_sigma(noise[k]);
  }
}

ForwardParams inverse_to_forward(const BlompeModel& model) {
  if (model.d() != 1) {
    fail(Errc::unsupported_degree,
         "the forward map exists only for affine experts (d = 1), got d = " +
             std::to_string(model.d()));
  }
  ForwardParams fwd;
  fwd.weights = model.gating().weights;
  for (int k = 0; k < model.K(); ++k) {
    const auto ku = static_cast<std::size_t>(k);
    const Vector& c = model.gating().means[ku];
    const Matrix& Gamma = model.gating().covariances[ku];
    const Matrix& Sigma = model.experts().covariances[ku];
    const Matrix A = model.slope(k);
    const Vector b = model.intercept(k);

    const CholeskyFactor& gamma_chol = model.gate_factor(k);
    const CholeskyFactor& sigma_chol = model.expert_factor(k);
    const Matrix sigma_inv_A = sigma_chol.solve(A);              // Σ⁻¹ A
    const Matrix gamma_inv = gamma_chol.inverse();               // Γ⁻¹

    Matrix info = gamma_inv + A.transpose() * sigma_inv_A;       // Γ⁻¹ + AᵀΣ⁻¹A
    info = 0.5 * (info + info.transpose());
    const CholeskyFactor info_chol(info);
    Matrix sigma_star = info_chol.inverse();
    sigma_star = 0.5 * (sigma_star + sigma_star.transpose());

    Matrix gamma_star = Sigma + A * Gamma * A.transpose();
    gamma_star = 0.5 * (gamma_star + gamma_star.transpose());

    fwd.means.push_back(A * c + b);
    fwd.covariances.push_back(std::move(gamma_star));
    fwd.slopes.push_back(sigma_star * sigma_inv_A.transpose());  // Σ* Aᵀ Σ⁻¹
    fwd.intercepts.push_back(sigma_star *
                             (gamma_chol.solve(c) - sigma_inv_A.transpose() * b));
    fwd.noise.push_back(std::move(sigma_star));
  }
  return fwd;
}

double log_forward_joint_density(const ForwardParams& fwd, const Vector& y, const Vector& x) {
  check_input(fwd, y, x);
  return log_sum_exp(log_forward_gate_terms(fwd, x) + log_forward_expert_terms(fwd, y, x));
}

double log_forward_cond_density(const ForwardParams& fwd, const Vector& y, const Vector& x) {
  check_input(fwd, y, x);
  const Vector gate = log_forward_gate_terms(fwd, x);
  return log_sum_exp(gate + log_forward_expert_terms(fwd, y, x)) - log_sum_exp(gate);
}

Vector forward_gates(const ForwardParams& fwd, const Vector& x) {
  if (x.size() != fwd.D()) fail(Errc::dimension, "x does not match D");
  const Vector terms = log_forward_gate_terms(fwd, x);
  return (terms.array() - log_sum_exp(terms)).exp();
}

Vector predict_mean(const ForwardParams& fwd, const Vector& x) {
  const Vector gates = forward_gates(fwd, x);
  Vector mean = Vector::Zero(fwd.L());
  for (int k = 0; k < fwd.K(); ++k) {
    const auto ku = static_cast<std::size_t>(k);
    mean += gates(k) * (fwd.slopes[ku] * x + fwd.intercepts[ku]);
  }
  return mean;
}

}  // namespace blompe
