#pragma once

#include <Eigen/Dense>

namespace blompe {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

inline constexpr double kLog2Pi = 1.83787706640934548356065947281123527;

/// Cholesky factorization of a symmetric positive definite matrix, with
/// the log-determinant cached. Construction throws Errc::decomposition when
/// the input is not SPD (or not finite).
class CholeskyFactor {
 public:
  CholeskyFactor() = default;
  explicit CholeskyFactor(const Matrix& spd);

  Eigen::Index dim() const { return llt_.rows(); }
  double log_det() const { return log_det_; }
  Matrix lower() const { return llt_.matrixL(); }

  Vector solve(const Vector& b) const { return llt_.solve(b); }
  Matrix solve(const Matrix& b) const { return llt_.solve(b); }
  Matrix inverse() const;

  /// diffᵀ Σ⁻¹ diff
  double mahalanobis(const Vector& diff) const;

  /// Squared Mahalanobis norm of every row of `residuals` (n × dim).
  Vector mahalanobis_rows(const Matrix& residuals) const;

  double log_pdf(const Vector& x, const Vector& mean) const;

  /// mean + L z for a standard normal vector z.
  Vector transform(const Vector& mean, const Vector& z) const;

 private:
  Eigen::LLT<Matrix> llt_;
  double log_det_ = 0.0;
};

double log_sum_exp(const Eigen::Ref<const Eigen::VectorXd>& v);

/// log(exp(a) + exp(b)) without overflow.
double log_add_exp(double a, double b);

double max_asymmetry(const Matrix& m);
bool is_positive_definite(const Matrix& m);

/// Projects the spectrum of a symmetric matrix onto [lo, hi]. Returns the
/// input untouched when no eigenvalue needs to move; `changed` reports it.
Matrix clamp_eigenvalues(const Matrix& sym, double lo, double hi,
                         bool* changed = nullptr);

/// Smallest and largest eigenvalue of a symmetric matrix.
std::pair<double, double> eigen_range(const Matrix& sym);

}  // namespace blompe
