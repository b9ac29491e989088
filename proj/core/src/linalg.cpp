#include "blompe/linalg.hpp"

#include <cmath>
#include <limits>

#include "blompe/error.hpp"

namespace blompe {

CholeskyFactor::CholeskyFactor(const Matrix& spd) {
  if (spd.rows() != spd.cols() || spd.rows() == 0) {
    fail(Errc::dimension, "Cholesky input must be a non-empty square matrix");
  }
  if (!spd.allFinite()) fail(Errc::decomposition, "matrix has non-finite entries");
  llt_.compute(spd);
  if (llt_.info() != Eigen::Success) {
    fail(Errc::decomposition, "matrix is not positive definite");
  }
  const auto diag = llt_.matrixLLT().diagonal();
  if ((diag.array() <= 0.0).any()) {
    fail(Errc::decomposition, "matrix is not positive definite");
  }
  log_det_ = 2.0 * diag.array().log().sum();
}

Matrix CholeskyFactor::inverse() const {
  return llt_.solve(Matrix::Identity(dim(), dim()));
}

double CholeskyFactor::mahalanobis(const Vector& diff) const {
  Vector z = llt_.matrixL().solve(diff);
  return z.squaredNorm();
}

Vector CholeskyFactor::mahalanobis_rows(const Matrix& residuals) const {
  Matrix z = llt_.matrixL().solve(residuals.transpose());
  return z.colwise().squaredNorm().transpose();
}

double CholeskyFactor::log_pdf(const Vector& x, const Vector& mean) const {
  return -0.5 * (static_cast<double>(dim()) * kLog2Pi + log_det_ +
                 mahalanobis(x - mean));
}

Vector CholeskyFactor::transform(const Vector& mean, const Vector& z) const {
  return mean + llt_.matrixL() * z;
}

double log_sum_exp(const Eigen::Ref<const Eigen::VectorXd>& v) {
  if (v.size() == 0) return -std::numeric_limits<double>::infinity();
  const double m = v.maxCoeff();
  if (!std::isfinite(m)) return m;
  return m + std::log((v.array() - m).exp().sum());
}

double log_add_exp(double a, double b) {
  if (a < b) std::swap(a, b);
  if (b == -std::numeric_limits<double>::infinity()) return a;
  return a + std::log1p(std::exp(b - a));
}

double max_asymmetry(const Matrix& m) {
  if (m.rows() != m.cols()) return std::numeric_limits<double>::infinity();
  return (m - m.transpose()).cwiseAbs().maxCoeff();
}

bool is_positive_definite(const Matrix& m) {
  if (m.rows() != m.cols() || m.rows() == 0 || !m.allFinite()) return false;
  Eigen::LLT<Matrix> llt(m);
  return llt.info() == Eigen::Success &&
         (llt.matrixLLT().diagonal().array() > 0.0).all();
}

std::pair<double, double> eigen_range(const Matrix& sym) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(sym, Eigen::EigenvaluesOnly);
  return {es.eigenvalues().minCoeff(), es.eigenvalues().maxCoeff()};
}

Matrix clamp_eigenvalues(const Matrix& sym, double lo, double hi, bool* changed) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(sym);
  const Vector& ev = es.eigenvalues();
  const bool inside = ev.minCoeff() >= lo && ev.maxCoeff() <= hi;
  if (changed) *changed = !inside;
  if (inside) return sym;
  const Vector clamped = ev.cwiseMax(lo).cwiseMin(hi);
  Matrix out = es.eigenvectors() * clamped.asDiagonal() * es.eigenvectors().transpose();
  return 0.5 * (out + out.transpose());
}

}  // namespace blompe
