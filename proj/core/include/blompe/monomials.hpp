#pragma once

#include <span>
#include <vector>

#include "blompe/linalg.hpp"

namespace blompe {

/// Exponent vector r of the monomial y^r = y_1^{r_1} ... y_L^{r_L}.
using MultiIndex = std::vector<int>;

/// All multi-indices with |r| <= degree in graded lexicographic order,
/// intercept first: (d=1, L=2) gives (0,0), (1,0), (0,1).
std::vector<MultiIndex> enumerate_monomials(int degree, int dim);

/// C(degree + dim, dim).
int monomial_count(int degree, int dim);

/// Feature vector (y^r)_r for one covariate point.
Vector monomial_features(std::span<const MultiIndex> monomials, const Vector& y);

/// n × M design matrix, one row of monomial features per row of Y.
Matrix design_matrix(std::span<const MultiIndex> monomials, const Matrix& Y);

/// Polynomial mean Σ_r α_r y^r; coeffs is D × M in enumeration order.
Vector eval_poly_mean(const Matrix& coeffs, std::span<const MultiIndex> monomials,
                      const Vector& y);

}  // namespace blompe
