#include "blompe/model.hpp"

#include <cmath>
#include <sstream>

#include "blompe/error.hpp"

namespace blompe {

namespace {

// Relative slack for eigenvalue bounds; reconstructing a clamped matrix
// from its eigendecomposition moves the spectrum by a few ulps.
constexpr double kSpectrumSlack = 1e-9;

void check_spectrum(const Matrix& m, double lo, double hi, const std::string& what) {
  const auto [emin, emax] = eigen_range(m);
  if (emin < lo * (1.0 - kSpectrumSlack) || emax > hi * (1.0 + kSpectrumSlack)) {
    std::ostringstream os;
    os << what << " has eigenvalues in [" << emin << ", " << emax
       << "], outside [" << lo << ", " << hi << "]";
    fail(Errc::bounds_violation, os.str());
  }
}

void check_symmetric(const Matrix& m, const std::string& what) {
  if (max_asymmetry(m) > 1e-10 * std::max(1.0, m.cwiseAbs().maxCoeff())) {
    fail(Errc::decomposition, what + " is not symmetric");
  }
}

}  // namespace

void Bounds::validate(int K) const {
  if (!(a_pi > 0.0) || a_pi > 1.0 / K) {
    fail(Errc::bounds_violation, "a_pi must lie in (0, 1/K]");
  }
  if (!(A_c > 0.0)) fail(Errc::bounds_violation, "A_c must be positive");
  if (!(a_Gamma > 0.0) || a_Gamma > A_Gamma) {
    fail(Errc::bounds_violation, "need 0 < a_Gamma <= A_Gamma");
  }
  if (!(lambda_m > 0.0) || lambda_m > lambda_M) {
    fail(Errc::bounds_violation, "need 0 < lambda_m <= lambda_M");
  }
  if (!(T_upsilon > 0.0)) fail(Errc::bounds_violation, "T_upsilon must be positive");
}

void ModelIndex::validate() const {
  if (K < 1) fail(Errc::domain, "K must be >= 1");
  if (d < 0) fail(Errc::domain, "d must be >= 0");
  if (L < 1) fail(Errc::domain, "L must be >= 1");
  if (blocks.size() != static_cast<std::size_t>(K)) {
    fail(Errc::dimension, "need one block partition per component");
  }
  for (const auto& b : blocks) {
    if (b.dim() != blocks.front().dim() || b.dim() < 1) {
      fail(Errc::dimension, "block partitions must cover the same D >= 1 indices");
    }
  }
}

ModelIndex ModelIndex::full_blocks(int K, int d, int L, int D) {
  return {K, d, L, BlockStructure(static_cast<std::size_t>(K), BlockPartition::one_block(D))};
}

ModelIndex ModelIndex::singleton_blocks(int K, int d, int L, int D) {
  return {K, d, L, BlockStructure(static_cast<std::size_t>(K), BlockPartition::singletons(D))};
}

std::string describe(const ModelIndex& index) {
  std::ostringstream os;
  os << "K=" << index.K << " d=" << index.d << " B=[";
  for (std::size_t k = 0; k < index.blocks.size(); ++k) {
    if (k) os << ' ';
    os << '{';
    const auto groups = index.blocks[k].one_based_groups();
    for (std::size_t g = 0; g < groups.size(); ++g) {
      if (g) os << ';';
      os << '(';
      for (std::size_t i = 0; i < groups[g].size(); ++i) {
        if (i) os << ',';
        os << groups[g][i];
      }
      os << ')';
    }
    os << '}';
  }
  os << ']';
  return os.str();
}

BlompeModel::BlompeModel(ModelIndex index, GatingParams gating, ExpertParams experts,
                         Bounds bounds)
    : index_(std::move(index)),
      gating_(std::move(gating)),
      experts_(std::move(experts)),
      bounds_(bounds) {
  index_.validate();
  bounds_.validate(index_.K);
  const auto K = static_cast<std::size_t>(index_.K);
  const int L = index_.L;
  const int D = index_.D();
  monomials_ = enumerate_monomials(index_.d, L);
  const auto M = static_cast<Eigen::Index>(monomials_.size());

  if (gating_.weights.size() != index_.K || gating_.means.size() != K ||
      gating_.covariances.size() != K || experts_.coeffs.size() != K ||
      experts_.covariances.size() != K) {
    fail(Errc::dimension, "parameter lists must have one entry per component");
  }
  if (std::abs(gating_.weights.sum() - 1.0) > 1e-12) {
    fail(Errc::bounds_violation, "mixture weights must sum to one");
  }
  for (std::size_t k = 0; k < K; ++k) {
    const std::string tag = "component " + std::to_string(k + 1);
    const double pi_k = gating_.weights(static_cast<Eigen::Index>(k));
    if (!(pi_k >= bounds_.a_pi)) fail(Errc::bounds_violation, tag + ": weight below a_pi");

    const Vector& c = gating_.means[k];
    const Matrix& G = gating_.covariances[k];
    if (c.size() != L || G.rows() != L || G.cols() != L) {
      fail(Errc::dimension, tag + ": gating parameters do not match L");
    }
    if (!c.allFinite() || c.cwiseAbs().maxCoeff() > bounds_.A_c) {
      fail(Errc::bounds_violation, tag + ": gating mean exceeds A_c");
    }
    check_symmetric(G, tag + " gating covariance");
    gate_chol_.emplace_back(G);
    check_spectrum(G, bounds_.a_Gamma, bounds_.A_Gamma, tag + " gating covariance");

    const Matrix& alpha = experts_.coeffs[k];
    const Matrix& S = experts_.covariances[k];
    if (alpha.rows() != D || alpha.cols() != M) {
      fail(Errc::dimension, tag + ": coefficients must be " + std::to_string(D) + "x" +
                                std::to_string(M));
    }
    if (S.rows() != D || S.cols() != D) {
      fail(Errc::dimension, tag + ": expert covariance must be DxD");
    }
    if (!alpha.allFinite() || alpha.cwiseAbs().maxCoeff() > bounds_.T_upsilon) {
      fail(Errc::bounds_violation, tag + ": coefficient exceeds T_upsilon");
    }
    check_symmetric(S, tag + " expert covariance");
    if (!conforms_to_blocks(S, index_.blocks[k])) {
      fail(Errc::bounds_violation, tag + ": expert covariance has entries outside its blocks");
    }
    expert_chol_.emplace_back(S);
    check_spectrum(S, bounds_.lambda_m, bounds_.lambda_M, tag + " expert covariance");
  }
}

Vector BlompeModel::expert_mean(int k, const Vector& y) const {
  return eval_poly_mean(experts_.coeffs[static_cast<std::size_t>(k)], monomials_, y);
}

Matrix BlompeModel::slope(int k) const {
  if (index_.d != 1) fail(Errc::unsupported_degree, "affine slope needs d = 1");
  return experts_.coeffs[static_cast<std::size_t>(k)].rightCols(index_.L);
}

Vector BlompeModel::intercept(int k) const {
  if (index_.d != 1) fail(Errc::unsupported_degree, "affine intercept needs d = 1");
  return experts_.coeffs[static_cast<std::size_t>(k)].col(0);
}

Dataset::Dataset(Matrix X, Matrix Y, UnitBoxPolicy policy)
    : X_(std::move(X)), Y_(std::move(Y)) {
  if (X_.rows() < 1) fail(Errc::insufficient_data, "dataset needs at least one row");
  if (X_.rows() != Y_.rows()) fail(Errc::dimension, "X and Y row counts differ");
  if (X_.cols() < 1 || Y_.cols() < 1) fail(Errc::dimension, "need D >= 1 and L >= 1");
  if (!X_.allFinite() || !Y_.allFinite()) fail(Errc::input, "dataset has non-finite values");

  const bool inside = Y_.minCoeff() >= 0.0 && Y_.maxCoeff() <= 1.0;
  scaling_.offset = Vector::Zero(Y_.cols());
  scaling_.scale = Vector::Ones(Y_.cols());
  if (inside) return;
  if (policy == UnitBoxPolicy::warn) {
    warn("covariates Y fall outside [0,1]^L; bounded-covariate guarantees do not apply");
    return;
  }
  for (Eigen::Index l = 0; l < Y_.cols(); ++l) {
    const double lo = Y_.col(l).minCoeff();
    const double hi = Y_.col(l).maxCoeff();
    scaling_.offset(l) = lo;
    scaling_.scale(l) = hi > lo ? hi - lo : 1.0;
    Y_.col(l) = (Y_.col(l).array() - lo) / scaling_.scale(l);
  }
  scaling_.applied = true;
}

Dataset Dataset::concat(const Dataset& other) const {
  if (other.D() != D() || other.L() != L()) fail(Errc::dimension, "datasets differ in shape");
  Matrix X(n() + other.n(), D());
  Matrix Y(n() + other.n(), L());
  X << X_, other.X_;
  Y << Y_, other.Y_;
  return Dataset(std::move(X), std::move(Y));
}

Vector log_gating(const GatingParams& gating, const Vector& y) {
  const auto K = gating.weights.size();
  Vector terms(K);
  for (Eigen::Index k = 0; k < K; ++k) {
    const auto ku = static_cast<std::size_t>(k);
    terms(k) = std::log(gating.weights(k)) +
               CholeskyFactor(gating.covariances[ku]).log_pdf(y, gating.means[ku]);
  }
  return terms.array() - log_sum_exp(terms);
}

Vector log_gating(const BlompeModel& model, const Vector& y) {
  Vector terms = log_gate_terms(model, y.transpose()).row(0).transpose();
  return terms.array() - log_sum_exp(terms);
}

double log_cond_density(const BlompeModel& model, const Vector& x, const Vector& y) {
  const Matrix gate = log_gate_terms(model, y.transpose());
  const Matrix expert = log_expert_terms(model, x.transpose(), y.transpose());
  const Vector g = gate.row(0).transpose();
  const Vector joint = (gate + expert).row(0).transpose();
  return log_sum_exp(joint) - log_sum_exp(g);
}

double log_joint_density(const BlompeModel& model, const Vector& x, const Vector& y) {
  if (model.d() != 1) {
    fail(Errc::unsupported_degree, "joint density is defined for affine experts (d = 1)");
  }
  const Matrix terms = log_gate_terms(model, y.transpose()) +
                       log_expert_terms(model, x.transpose(), y.transpose());
  return log_sum_exp(terms.row(0).transpose());
}

double log_covariate_marginal(const BlompeModel& model, const Vector& y) {
  return log_sum_exp(log_gate_terms(model, y.transpose()).row(0).transpose());
}

double nll(const BlompeModel& model, const Dataset& data) {
  if (data.D() != model.D() || data.L() != model.L()) {
    fail(Errc::dimension, "dataset shape does not match the model");
  }
  const Matrix gate = log_gate_terms(model, data.Y());
  const Matrix joint = gate + log_expert_terms(model, data.X(), data.Y());
  double total = 0.0;
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    total -= log_sum_exp(joint.row(i).transpose()) - log_sum_exp(gate.row(i).transpose());
  }
  return total;
}

Matrix log_gate_terms(const BlompeModel& model, const Matrix& Y) {
  if (Y.cols() != model.L()) fail(Errc::dimension, "covariates do not match L");
  const int K = model.K();
  Matrix out(Y.rows(), K);
  const double L = model.L();
  for (int k = 0; k < K; ++k) {
    const auto& chol = model.gate_factor(k);
    const Vector& c = model.gating().means[static_cast<std::size_t>(k)];
    const Matrix centered = Y.rowwise() - c.transpose();
    const Vector maha = chol.mahalanobis_rows(centered);
    out.col(k) = (-0.5 * (L * kLog2Pi + chol.log_det()) + std::log(model.gating().weights(k))) -
                 0.5 * maha.array();
  }
  return out;
}

Matrix log_expert_terms(const BlompeModel& model, const Matrix& X, const Matrix& Y) {
  if (X.cols() != model.D()) fail(Errc::dimension, "responses do not match D");
  if (Y.cols() != model.L() || X.rows() != Y.rows()) {
    fail(Errc::dimension, "covariates do not match L or the number of rows");
  }
  const int K = model.K();
  const Matrix phi = design_matrix(model.monomials(), Y);
  Matrix out(X.rows(), K);
  const double D = model.D();
  for (int k = 0; k < K; ++k) {
    const auto& chol = model.expert_factor(k);
    const Matrix residual = X - phi * model.experts().coeffs[static_cast<std::size_t>(k)].transpose();
    out.col(k) = -0.5 * (D * kLog2Pi + chol.log_det()) -
                 0.5 * chol.mahalanobis_rows(residual).array();
  }
  return out;
}

int model_dim(const ModelIndex& index, DimConvention convention) {
  index.validate();
  const int K = index.K;
  const int L = index.L;
  const int D = index.D();
  const int M = monomial_count(index.d, L);
  return (K - 1) + K * L + K * L * (L + 1) / 2 + K * D * M +
         cov_dim(index.blocks, convention);
}

}  // namespace blompe
