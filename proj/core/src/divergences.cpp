#include "blompe/divergences.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <string>

#include "blompe/error.hpp"

namespace blompe {

namespace {

void check_rho(double rho) {
  if (!(rho > 0.0 && rho < 1.0)) {
    fail(Errc::domain, "rho must lie in (0, 1), got " + std::to_string(rho));
  }
}

std::uint64_t design_stream(std::uint64_t seed, const Vector& y) {
  std::uint64_t h = derive_seed(seed, static_cast<std::uint64_t>(y.size()));
  for (Eigen::Index l = 0; l < y.size(); ++l) {
    h = derive_seed(h, std::bit_cast<std::uint64_t>(y(l)));
  }
  return h;
}

// Running mean and sum of squares over a fixed summation order.
struct Moments {
  double sum = 0.0;
  double sum_sq = 0.0;
  std::size_t count = 0;

  void add(double v) {
    sum += v;
    sum_sq += v * v;
    ++count;
  }
  double mean() const { return count ? sum / static_cast<double>(count) : 0.0; }
  double std_error() const {
    if (count < 2) return 0.0;
    const double n = static_cast<double>(count);
    const double var = std::max(0.0, (sum_sq - sum * sum / n) / (n - 1.0));
    return std::sqrt(var / n);
  }
};

}  // namespace

Vector ConditionalLaw::log_density_rows(const Matrix& X, const Vector& y) const {
  Vector out(X.rows());
  for (Eigen::Index i = 0; i < X.rows(); ++i) out(i) = log_density(X.row(i).transpose(), y);
  return out;
}

double ModelLaw::log_density(const Vector& x, const Vector& y) const {
  return log_cond_density(model_, x, y);
}

Vector ModelLaw::sample(const Vector& y, Rng& rng) const {
  const Vector gates = log_gating(model_, y).array().exp();
  const auto k = static_cast<int>(
      rng.categorical(std::span<const double>(gates.data(), static_cast<std::size_t>(gates.size()))));
  return model_.expert_factor(k).transform(model_.expert_mean(k, y),
                                           rng.normal_vector(model_.D()));
}

Vector ModelLaw::log_density_rows(const Matrix& X, const Vector& y) const {
  const Matrix Y = y.transpose().replicate(X.rows(), 1);
  const Matrix gate = log_gate_terms(model_, Y);
  const Matrix joint = gate + log_expert_terms(model_, X, Y);
  const double log_norm = log_sum_exp(gate.row(0).transpose());
  Vector out(X.rows());
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    out(i) = log_sum_exp(joint.row(i).transpose()) - log_norm;
  }
  return out;
}

PairedDivergences mc_divergences(const ConditionalLaw& s0, const ConditionalLaw& t,
                                 const Matrix& designs, double rho, std::size_t n_samples,
                                 std::uint64_t seed) {
  check_rho(rho);
  if (n_samples < 1 || designs.rows() < 1) {
    fail(Errc::domain, "need at least one design point and one sample per design");
  }
  if (s0.x_dim() != t.x_dim()) fail(Errc::dimension, "densities live on different spaces");
  const double c = c_rho(rho);
  const double log_keep = std::log1p(-rho);
  const double log_rho = std::log(rho);

  Moments kl, jkl, hel, kl_jkl, jkl_hel;
  bool infinite = false;
  Matrix draws(static_cast<Eigen::Index>(n_samples), s0.x_dim());
  for (Eigen::Index i = 0; i < designs.rows(); ++i) {
    const Vector y = designs.row(i).transpose();
    Rng rng(design_stream(seed, y));
    for (Eigen::Index s = 0; s < draws.rows(); ++s) draws.row(s) = s0.sample(y, rng).transpose();
    const Vector log_s0 = s0.log_density_rows(draws, y);
    const Vector log_t = t.log_density_rows(draws, y);
    for (Eigen::Index s = 0; s < draws.rows(); ++s) {
      const double r = log_t(s) - log_s0(s);  // log t/s0
      if (std::isnan(r) || r == -std::numeric_limits<double>::infinity()) infinite = true;
      const double kl_v = -r;
      const double jkl_v = -log_add_exp(log_keep, log_rho + r) / rho;
      const double hel_v = 2.0 - 2.0 * std::exp(0.5 * r);
      kl.add(kl_v);
      jkl.add(jkl_v);
      hel.add(hel_v);
      kl_jkl.add(kl_v - jkl_v);
      jkl_hel.add(jkl_v - c * hel_v);
    }
  }

  PairedDivergences out;
  out.rho = rho;
  const std::size_t total = kl.count;
  auto pack = [&](const Moments& m) {
    DivergenceEstimate e;
    e.value = e.raw_value = m.mean();
    e.std_error = m.std_error();
    e.n_samples = total;
    return e;
  };
  out.kl = pack(kl);
  if (infinite) {
    out.kl.value = out.kl.raw_value = std::numeric_limits<double>::infinity();
    out.kl.infinite = true;
  }
  out.jkl = pack(jkl);
  out.jkl.rho = rho;
  out.hellinger = pack(hel);
  out.hellinger.value = std::clamp(out.hellinger.raw_value, 0.0, 2.0);
  out.se_kl_minus_jkl = infinite ? std::numeric_limits<double>::infinity() : kl_jkl.std_error();
  out.se_jkl_minus_c_hellinger = jkl_hel.std_error();
  return out;
}

DivergenceEstimate mc_kl_tensorized(const ConditionalLaw& s0, const ConditionalLaw& t,
                                    const Matrix& designs, std::size_t n_samples,
                                    std::uint64_t seed) {
  return mc_divergences(s0, t, designs, 0.5, n_samples, seed).kl;
}

DivergenceEstimate mc_jkl_tensorized(const ConditionalLaw& s0, const ConditionalLaw& t,
                                     const Matrix& designs, double rho, std::size_t n_samples,
                                     std::uint64_t seed) {
  return mc_divergences(s0, t, designs, rho, n_samples, seed).jkl;
}

DivergenceEstimate mc_hellinger_tensorized(const ConditionalLaw& s0, const ConditionalLaw& t,
                                           const Matrix& designs, std::size_t n_samples,
                                           std::uint64_t seed) {
  return mc_divergences(s0, t, designs, 0.5, n_samples, seed).hellinger;
}

double c_rho(double rho) {
  check_rho(rho);
  return (1.0 / rho) * std::min((1.0 - rho) / rho, 1.0) *
         (std::log1p(rho / (1.0 - rho)) - rho);
}

double jkl_upper_bound(double rho) {
  check_rho(rho);
  return -std::log1p(-rho) / rho;
}

double hellinger_gaussian_exact(const Vector& mu1, const Matrix& Sigma1, const Vector& mu2,
                                const Matrix& Sigma2) {
  const auto D = mu1.size();
  if (mu2.size() != D || Sigma1.rows() != D || Sigma2.rows() != D) {
    fail(Errc::dimension, "Gaussian parameters have mismatched dimensions");
  }
  const CholeskyFactor c1(Sigma1);
  const CholeskyFactor c2(Sigma2);
  Matrix precision_sum = c1.inverse() + c2.inverse();
  precision_sum = 0.5 * (precision_sum + precision_sum.transpose());
  const CholeskyFactor c_prec(precision_sum);
  const CholeskyFactor c_sum(Sigma1 + Sigma2);
  const double log_affinity = 0.5 * static_cast<double>(D) * std::log(2.0) -
                              0.25 * (c1.log_det() + c2.log_det()) - 0.5 * c_prec.log_det() -
                              0.25 * c_sum.mahalanobis(mu1 - mu2);
  return std::clamp(-2.0 * std::expm1(log_affinity), 0.0, 2.0);
}

RatioBound gaussian_ratio_bound(const Vector& mu1, const Matrix& Sigma1, const Vector& mu2,
                                const Matrix& Sigma2, const Vector& x) {
  const Matrix gap = Sigma2 - Sigma1;
  if (!is_positive_definite(gap)) {
    fail(Errc::precondition, "Sigma2 - Sigma1 must be positive definite");
  }
  const CholeskyFactor c1(Sigma1);
  const CholeskyFactor c2(Sigma2);
  const CholeskyFactor c_gap(gap);
  RatioBound out;
  out.log_ratio = c1.log_pdf(x, mu1) - c2.log_pdf(x, mu2);
  out.log_bound = 0.5 * (c2.log_det() - c1.log_det()) + 0.5 * c_gap.mahalanobis(mu1 - mu2);
  out.ratio = std::exp(out.log_ratio);
  out.bound = std::exp(out.log_bound);
  return out;
}

}  // namespace blompe
