#include "blompe/monomials.hpp"

#include <string>

#include "blompe/error.hpp"

namespace blompe {

namespace {

// Appends every exponent vector of total degree `remaining` over
// coordinates [pos, L), leading exponents descending (lex order).
void fill_degree(int remaining, std::size_t pos, MultiIndex& current,
                 std::vector<MultiIndex>& out) {
  if (pos + 1 == current.size()) {
    current[pos] = remaining;
    out.push_back(current);
    return;
  }
  for (int e = remaining; e >= 0; --e) {
    current[pos] = e;
    fill_degree(remaining - e, pos + 1, current, out);
  }
}

double power(double base, int exponent) {
  double r = 1.0;
  for (int i = 0; i < exponent; ++i) r *= base;
  return r;
}

}  // namespace

std::vector<MultiIndex> enumerate_monomials(int degree, int dim) {
  if (degree < 0 || dim < 1) {
    fail(Errc::domain, "monomials need degree >= 0 and dimension >= 1");
  }
  std::vector<MultiIndex> out;
  out.reserve(static_cast<std::size_t>(monomial_count(degree, dim)));
  MultiIndex current(static_cast<std::size_t>(dim), 0);
  for (int total = 0; total <= degree; ++total) {
    fill_degree(total, 0, current, out);
  }
  return out;
}

int monomial_count(int degree, int dim) {
  // C(d + L, L) computed incrementally; exact for the sizes used here.
  long long c = 1;
  for (int i = 1; i <= dim; ++i) c = c * (degree + i) / i;
  return static_cast<int>(c);
}

Vector monomial_features(std::span<const MultiIndex> monomials, const Vector& y) {
  Vector phi(static_cast<Eigen::Index>(monomials.size()));
  for (std::size_t m = 0; m < monomials.size(); ++m) {
    const auto& r = monomials[m];
    if (static_cast<Eigen::Index>(r.size()) != y.size()) {
      fail(Errc::dimension, "covariate has dimension " + std::to_string(y.size()) +
                                ", monomials expect " + std::to_string(r.size()));
    }
    double v = 1.0;
    for (std::size_t l = 0; l < r.size(); ++l) v *= power(y(static_cast<Eigen::Index>(l)), r[l]);
    phi(static_cast<Eigen::Index>(m)) = v;
  }
  return phi;
}

Matrix design_matrix(std::span<const MultiIndex> monomials, const Matrix& Y) {
  Matrix phi(Y.rows(), static_cast<Eigen::Index>(monomials.size()));
  for (Eigen::Index i = 0; i < Y.rows(); ++i) {
    phi.row(i) = monomial_features(monomials, Y.row(i).transpose()).transpose();
  }
  return phi;
}

Vector eval_poly_mean(const Matrix& coeffs, std::span<const MultiIndex> monomials,
                      const Vector& y) {
  if (coeffs.cols() != static_cast<Eigen::Index>(monomials.size())) {
    fail(Errc::dimension, "coefficient matrix has " + std::to_string(coeffs.cols()) +
                              " columns but the basis has " +
                              std::to_string(monomials.size()) + " monomials");
  }
  return coeffs * monomial_features(monomials, y);
}

}  // namespace blompe
