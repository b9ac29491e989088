#include <doctest.h>

#include <cmath>
#include <map>
#include <numbers>

#include "blompe/em.hpp"
#include "blompe/error.hpp"
#include "blompe/simulate.hpp"
#include "common/random_models.hpp"

using namespace blompe;
using blompe::testing::random_model;
using blompe::testing::random_vector;

namespace {

double gauss_pdf(const Vector& x, const Vector& mu, const Matrix& S) {
  const Vector r = x - mu;
  return std::exp(-0.5 * r.dot(S.inverse() * r)) /
         std::sqrt(std::pow(2.0 * std::numbers::pi, static_cast<double>(x.size())) * S.determinant());
}

double adjusted_rand_index(const std::vector<int>& a, const std::vector<int>& b) {
  std::map<std::pair<int, int>, double> joint;
  std::map<int, double> ra, rb;
  for (std::size_t i = 0; i < a.size(); ++i) {
    joint[{a[i], b[i]}] += 1.0;
    ra[a[i]] += 1.0;
    rb[b[i]] += 1.0;
  }
  auto c2 = [](double v) { return v * (v - 1.0) / 2.0; };
  double sum_joint = 0.0, sum_a = 0.0, sum_b = 0.0;
  for (const auto& [key, v] : joint) sum_joint += c2(v);
  for (const auto& [key, v] : ra) sum_a += c2(v);
  for (const auto& [key, v] : rb) sum_b += c2(v);
  const double expected = sum_a * sum_b / c2(static_cast<double>(a.size()));
  return (sum_joint - expected) / (0.5 * (sum_a + sum_b) - expected);
}

std::vector<int> hard_labels(const Matrix& resp) {
  std::vector<int> out(static_cast<std::size_t>(resp.rows()));
  for (Eigen::Index i = 0; i < resp.rows(); ++i) {
    Eigen::Index k = 0;
    resp.row(i).maxCoeff(&k);
    out[static_cast<std::size_t>(i)] = static_cast<int>(k);
  }
  return out;
}

Dataset noise_dataset(int n, int L, int D, Rng& rng) {
  Matrix X(n, D), Y(n, L);
  for (Eigen::Index i = 0; i < X.size(); ++i) X.data()[i] = rng.normal();
  for (Eigen::Index i = 0; i < Y.size(); ++i) Y.data()[i] = rng.uniform();
  return Dataset(X, Y);
}

void check_bounds(const BlompeModel& m) {
  const Bounds& b = m.bounds();
  CHECK(std::abs(m.gating().weights.sum() - 1.0) < 1e-12);
  CHECK(m.gating().weights.minCoeff() >= b.a_pi);
  for (int k = 0; k < m.K(); ++k) {
    const auto s = static_cast<std::size_t>(k);
    const auto [glo, ghi] = eigen_range(m.gating().covariances[s]);
    CHECK(glo >= b.a_Gamma * (1 - 1e-9));
    CHECK(ghi <= b.A_Gamma * (1 + 1e-9));
    const auto [elo, ehi] = eigen_range(m.experts().covariances[s]);
    CHECK(elo >= b.lambda_m * (1 - 1e-9));
    CHECK(ehi <= b.lambda_M * (1 + 1e-9));
    CHECK(m.experts().coeffs[s].cwiseAbs().maxCoeff() <= b.T_upsilon);
    CHECK(conforms_to_blocks(m.experts().covariances[s], m.index().blocks[s]));
  }
}

}  // namespace

TEST_CASE("E-step") {
  Rng rng(1);
  const Dataset data = noise_dataset(20, 1, 2, rng);
  const BlompeModel single = random_model(1, 1, 1, 2, rng);
  CHECK(e_step(single, data).responsibilities.isOnes());

  const BlompeModel base = random_model(1, 1, 1, 2, rng);
  ModelIndex idx2{2, 1, 1, {base.index().blocks[0], base.index().blocks[0]}};
  const GatingParams& g = base.gating();
  const ExpertParams& e = base.experts();
  const BlompeModel twin(idx2, {Vector::Constant(2, 0.5), {g.means[0], g.means[0]}, {g.covariances[0], g.covariances[0]}},
                         {{e.coeffs[0], e.coeffs[0]}, {e.covariances[0], e.covariances[0]}});
  const Matrix r = e_step(twin, data).responsibilities;
  CHECK((r.array() - 0.5).abs().maxCoeff() < 1e-15);

  const BlompeModel m = random_model(3, 2, 1, 2, rng);
  const EStepResult es = e_step(m, data);
  double loglik = 0.0;
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    Vector terms(3);
    for (int k = 0; k < 3; ++k) {
      const auto s = static_cast<std::size_t>(k);
      terms(k) = m.gating().weights(k) *
                 gauss_pdf(data.y(i), m.gating().means[s], m.gating().covariances[s]) *
                 gauss_pdf(data.x(i), m.expert_mean(k, data.y(i)), m.experts().covariances[s]);
    }
    loglik += std::log(terms.sum());
    CHECK(std::abs(es.responsibilities.row(i).sum() - 1.0) < 1e-12);
    for (int k = 0; k < 3; ++k) CHECK(std::abs(es.responsibilities(i, k) - terms(k) / terms.sum()) < 1e-12);
  }
  CHECK(std::abs(es.loglik - loglik) < 1e-10 * std::abs(loglik));
}

TEST_CASE("M-step") {
  Rng rng(2);
  const Dataset data = noise_dataset(50, 1, 3, rng);
  const BlockPartition B = BlockPartition::from_one_based({{1, 3}, {2}});
  const ModelIndex idx{1, 0, 1, {B}};
  const Matrix ones = Matrix::Ones(50, 1);
  const BlompeModel m = m_step(data, ones, idx, Bounds{});
  const Vector mean = data.X().colwise().mean().transpose();
  CHECK((m.experts().coeffs[0].col(0) - mean).norm() < 1e-9);
  const Matrix centred = data.X().rowwise() - mean.transpose();
  const Matrix cov = centred.transpose() * centred / 50.0;
  CHECK((m.experts().covariances[0] - project_to_blocks(cov, B)).norm() < 1e-12);
  CHECK((m.gating().means[0] - data.Y().colwise().mean().transpose()).norm() < 1e-12);

  const ModelIndex idx3{3, 1, 1, std::vector<BlockPartition>(3, BlockPartition::one_block(3))};
  const BlompeModel same = m_step(data, Matrix::Constant(50, 3, 1.0 / 3.0), idx3, Bounds{});
  for (std::size_t k = 1; k < 3; ++k) {
    CHECK((same.experts().coeffs[k] - same.experts().coeffs[0]).norm() < 1e-12);
    CHECK((same.experts().covariances[k] - same.experts().covariances[0]).norm() < 1e-12);
    CHECK((same.gating().covariances[k] - same.gating().covariances[0]).norm() < 1e-12);
  }

  // Noiseless affine data is fitted exactly.
  Matrix A(3, 2);
  A << 1.0, -2.0, 0.5, 3.0, -1.5, 0.25;
  Vector b(3);
  b << 0.3, -0.7, 2.0;
  Matrix Y(40, 2);
  for (Eigen::Index i = 0; i < Y.size(); ++i) Y.data()[i] = rng.uniform();
  const Matrix X = (Y * A.transpose()).rowwise() + b.transpose();
  const ModelIndex affine{1, 1, 2, {BlockPartition::singletons(3)}};
  const BlompeModel fitted = m_step(Dataset(X, Y), Matrix::Ones(40, 1), affine, Bounds{});
  CHECK((fitted.slope(0) - A).cwiseAbs().maxCoeff() < 1e-8);
  CHECK((fitted.intercept(0) - b).cwiseAbs().maxCoeff() < 1e-8);

  Matrix collapsed = Matrix::Zero(50, 2);
  collapsed.col(0).setOnes();
  try {
    m_step(data, collapsed, ModelIndex::full_blocks(2, 1, 1, 3), Bounds{});
    FAIL("expected a component collapse");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::component_collapse);
  }

  Bounds tight;
  tight.lambda_m = 2.0;
  tight.a_Gamma = 0.5;
  bool projected = false;
  const BlompeModel clamped = m_step(data, ones, idx, tight, &projected);
  CHECK(projected);
  check_bounds(clamped);
}

TEST_CASE("initialization") {
  Rng rng(3);
  const Dataset data = noise_dataset(60, 2, 2, rng);
  const BlompeModel one = init_params(data, ModelIndex::full_blocks(1, 1, 2, 2), 7, InitStrategy::kmeans);
  CHECK(one.gating().weights(0) == 1.0);
  const Vector c = data.Y().colwise().mean().transpose();
  CHECK((one.gating().means[0] - c).norm() < 1e-12);
  const Matrix Yc = data.Y().rowwise() - c.transpose();
  CHECK((one.gating().covariances[0] - Yc.transpose() * Yc / 60.0).norm() < 1e-12);

  for (auto strategy : {InitStrategy::kmeans, InitStrategy::random_responsibilities}) {
    const auto idx = ModelIndex::full_blocks(3, 1, 2, 2);
    const BlompeModel a = init_params(data, idx, 11, strategy);
    const BlompeModel b = init_params(data, idx, 11, strategy);
    CHECK(a.gating().weights == b.gating().weights);
    for (std::size_t k = 0; k < 3; ++k) {
      CHECK(a.experts().coeffs[k] == b.experts().coeffs[k]);
      CHECK(a.experts().covariances[k] == b.experts().covariances[k]);
    }
  }

  try {
    init_params(noise_dataset(2, 1, 1, rng), ModelIndex::full_blocks(3, 1, 1, 1), 1, InitStrategy::kmeans);
    FAIL("expected insufficient data");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::insufficient_data);
  }

  // Two clusters with means at ±10.
  Matrix X(400, 2), Y(400, 1);
  std::vector<int> truth(400);
  for (Eigen::Index i = 0; i < 400; ++i) {
    const int z = i < 200 ? 0 : 1;
    truth[static_cast<std::size_t>(i)] = z;
    Y(i, 0) = rng.uniform();
    X(i, 0) = (z ? 10.0 : -10.0) + rng.normal();
    X(i, 1) = (z ? 10.0 : -10.0) + rng.normal();
  }
  const auto labels = kmeans_labels(X, 2, 5);
  int agree = 0;
  for (std::size_t i = 0; i < 400; ++i) agree += labels[i] == truth[i] ? 1 : 0;
  CHECK(std::max(agree, 400 - agree) >= 396);
}

TEST_CASE("fitting") {
  Rng rng(4);
  const Dataset data = noise_dataset(200, 1, 2, rng);
  FitConfig config;
  config.seed = 3;
  const FitResult one = fit(data, ModelIndex::full_blocks(1, 1, 1, 2), config);
  CHECK(one.converged);
  CHECK(one.iterations <= 2);
  CHECK(std::abs(one.nll - nll(one.model, data)) < 1e-9);

  TrueModelSpec spec;
  spec.K = 2;
  spec.D = 3;
  spec.blocks = {BlockPartition::from_one_based({{1, 2}, {3}}), BlockPartition::singletons(3)};
  spec.coef_scale = 2.0;
  spec.seed = 8;
  const BlompeModel truth = make_true_model(spec);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const SampledData s = sample_dataset(truth, 500, 100 + seed);
    config.seed = seed;
    const FitResult r = fit(s.data, truth.index(), config);
    const auto labels = hard_labels(e_step(r.model, s.data).responsibilities);
    CHECK(adjusted_rand_index(labels, s.labels) >= 0.95);
    check_bounds(r.model);
  }

  const SampledData s = sample_dataset(truth, 300, 1);
  config.seed = 21;
  const FitResult r = fit(s.data, ModelIndex{2, 2, 1, truth.index().blocks}, config);
  const FitResult again = fit(s.data, ModelIndex{2, 2, 1, truth.index().blocks}, config);
  CHECK(r.nll == again.nll);
  CHECK(r.loglik_trace == again.loglik_trace);
  CHECK(r.model.experts().coeffs == again.model.experts().coeffs);
  REQUIRE(r.projected.size() == r.loglik_trace.size());
  for (std::size_t i = 1; i < r.loglik_trace.size(); ++i) {
    if (r.projected[i]) continue;
    CHECK(r.loglik_trace[i] >= r.loglik_trace[i - 1] - 1e-10 * std::max(1.0, std::abs(r.loglik_trace[i - 1])));
  }
  const FitResult refit = fit_from(s.data, r.model, config);
  CHECK(std::abs(refit.nll - r.nll) < std::max(config.rel_tol * std::abs(r.nll), 1e-9));
}

TEST_CASE("fit reaches the likelihood of the generating model") {
  Rng rng(5);
  TrueModelSpec spec;
  spec.K = 2;
  spec.D = 2;
  spec.coef_scale = 2.0;
  spec.seed = 12;
  spec.blocks.assign(2, BlockPartition::one_block(2));
  const BlompeModel truth = make_true_model(spec);
  const SampledData s = sample_dataset(truth, 2000, 5);
  FitConfig config;
  config.seed = 2;
  const FitResult r = fit(s.data, truth.index(), config);
  const double reference = nll(truth, s.data);
  CHECK(r.nll <= reference + 0.01 * std::abs(reference));
}

TEST_CASE("all starts failing raises a fit failure") {
  Matrix X = Matrix::Constant(10, 1, 1e300), Y = Matrix::Constant(10, 1, 0.5);
  X(0, 0) = -1e300;
  FitConfig config;
  config.n_starts = 2;
  try {
    fit(Dataset(X, Y), ModelIndex::full_blocks(1, 1, 1, 1), config);
    FAIL("expected a fit failure");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::fit_failure);
  }
}
