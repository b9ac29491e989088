#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "blompe/error.hpp"
#include "blompe/simulate.hpp"

using namespace blompe;

namespace {

BlompeModel with_gating(const BlompeModel& base, const Vector& weights, std::vector<Vector> means) {
  GatingParams g = base.gating();
  g.weights = weights;
  g.means = std::move(means);
  return BlompeModel(base.index(), g, base.experts(), base.bounds());
}

int bayes_label(const BlompeModel& m, const Vector& x, const Vector& y) {
  int best = 0;
  double best_v = -1e300;
  for (int k = 0; k < m.K(); ++k) {
    const double v = std::log(m.gating().weights(k)) +
                     m.gate_factor(k).log_pdf(y, m.gating().means[static_cast<std::size_t>(k)]) +
                     m.expert_factor(k).log_pdf(x, m.expert_mean(k, y));
    if (v > best_v) {
      best_v = v;
      best = k;
    }
  }
  return best;
}

}  // namespace

TEST_CASE("true model construction") {
  TrueModelSpec spec;
  spec.K = 3;
  spec.D = 4;
  spec.blocks.assign(3, BlockPartition::from_one_based({{1, 2}, {3}, {4}}));
  spec.seed = 2;
  const BlompeModel m = make_true_model(spec);
  CHECK(m.K() == 3);
  CHECK(m.D() == 4);
  for (int k = 0; k < 3; ++k) {
    CHECK(m.gating().weights(k) == doctest::Approx(1.0 / 3.0));
    const Vector& c = m.gating().means[static_cast<std::size_t>(k)];
    CHECK(c(0) >= 0.0);
    CHECK(c(0) <= 1.0);
    const Matrix& S = m.experts().covariances[static_cast<std::size_t>(k)];
    CHECK(S(0, 2) == 0.0);
    CHECK(S(2, 3) == 0.0);
    const double corr = std::abs(S(0, 1)) / std::sqrt(S(0, 0) * S(1, 1));
    CHECK(corr >= 0.6 - 1e-12);
    CHECK(corr <= 0.8 + 1e-12);
    CHECK(m.experts().coeffs[static_cast<std::size_t>(k)].cwiseAbs().maxCoeff() <= spec.coef_scale);
  }
  CHECK((m.gating().means[1] - m.gating().means[0]).norm() ==
        doctest::Approx(8.0 * std::sqrt(0.0025)).epsilon(1e-12));

  TrueModelSpec wide = spec;
  wide.separation = 30.0;
  try {
    make_true_model(wide);
    FAIL("expected a scenario error");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::scenario);
  }
  TrueModelSpec bad_blocks = spec;
  bad_blocks.blocks.pop_back();
  CHECK_THROWS_AS(make_true_model(bad_blocks), Error);
}

TEST_CASE("sampling") {
  TrueModelSpec spec;
  spec.D = 3;
  spec.seed = 4;
  const BlompeModel truth = make_true_model(spec);

  SUBCASE("shapes, unit box and determinism") {
    const SampledData a = sample_dataset(truth, 500, 11);
    const SampledData b = sample_dataset(truth, 500, 11);
    const SampledData c = sample_dataset(truth, 500, 12);
    CHECK(a.data.n() == 500);
    CHECK(a.data.D() == 3);
    CHECK(a.data.L() == 1);
    CHECK(a.labels.size() == 500u);
    CHECK(a.data.Y().minCoeff() >= 0.0);
    CHECK(a.data.Y().maxCoeff() <= 1.0);
    CHECK(a.acceptance_rate > 0.0);
    CHECK(a.acceptance_rate <= 1.0);
    CHECK(a.data.X() == b.data.X());
    CHECK(a.data.Y() == b.data.Y());
    CHECK(a.labels == b.labels);
    CHECK(a.data.X() != c.data.X());
  }

  SUBCASE("component frequencies") {
    Vector w(2);
    w << 0.2, 0.8;
    const BlompeModel skew = with_gating(truth, w, {Vector::Constant(1, 0.3), Vector::Constant(1, 0.7)});
    const std::size_t n = 100000;
    const SampledData s = sample_dataset(skew, n, 5);
    double ones = 0.0;
    for (int l : s.labels) ones += l;
    const double p = ones / static_cast<double>(n);
    CHECK(std::abs(p - 0.8) < 4.0 * std::sqrt(0.16 / static_cast<double>(n)));
  }

  SUBCASE("Bayes classifier recovers labels") {
    const SampledData s = sample_dataset(truth, 5000, 6);
    int correct = 0;
    for (Eigen::Index i = 0; i < s.data.n(); ++i) {
      if (bayes_label(truth, s.data.x(i), s.data.y(i)) == s.labels[static_cast<std::size_t>(i)]) ++correct;
    }
    CHECK(static_cast<double>(correct) / 5000.0 >= 0.999);
  }

  SUBCASE("rejection failure") {
    Vector w = Vector::Constant(2, 0.5);
    const BlompeModel outside = with_gating(truth, w, {Vector::Constant(1, 5.0), Vector::Constant(1, 6.0)});
    try {
      sample_dataset(outside, 10, 1);
      FAIL("expected a scenario error");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::scenario);
    }
    std::vector<std::string> warnings;
    const auto previous = set_warning_sink([&](std::string_view m) { warnings.emplace_back(m); });
    const SampledData free = sample_dataset(outside, 10, 1, false);
    set_warning_sink(previous);
    CHECK(free.data.Y().minCoeff() > 1.0);
    CHECK(free.acceptance_rate == 1.0);
    CHECK(warnings.size() == 1u);
  }
}

TEST_CASE("single-component moments") {
  TrueModelSpec spec;
  spec.K = 1;
  spec.D = 2;
  spec.blocks.assign(1, BlockPartition::one_block(2));
  spec.seed = 9;
  const BlompeModel m = make_true_model(spec);
  const std::size_t n = 200000;
  const SampledData s = sample_dataset(m, n, 3);
  const auto nd = static_cast<double>(n);

  const double ybar = s.data.Y().mean();
  const double yvar = (s.data.Y().array() - ybar).square().sum() / (nd - 1.0);
  CHECK(std::abs(ybar - 0.5) < 4.0 * std::sqrt(0.0025 / nd));
  CHECK(yvar == doctest::Approx(0.0025).epsilon(0.02));

  // Least squares of x on (1, y) recovers the expert coefficients.
  Matrix Phi(static_cast<Eigen::Index>(n), 2);
  Phi.col(0).setOnes();
  Phi.col(1) = s.data.Y().col(0);
  const Matrix beta = (Phi.transpose() * Phi).ldlt().solve(Phi.transpose() * s.data.X());
  const Matrix& coeffs = m.experts().coeffs[0];
  CHECK((beta.transpose() - coeffs).cwiseAbs().maxCoeff() < 0.02);

  // Squared Mahalanobis residuals are χ²_D: mean D, variance 2D.
  double sum = 0.0;
  for (Eigen::Index i = 0; i < s.data.n(); ++i) {
    const Vector r = s.data.x(i) - m.expert_mean(0, s.data.y(i));
    sum += m.expert_factor(0).mahalanobis(r);
  }
  CHECK(std::abs(sum / nd - 2.0) < 4.0 * std::sqrt(4.0 / nd));
}

TEST_CASE("oracle experiment") {
  TrueModelSpec spec;
  spec.D = 2;
  spec.seed = 1;
  Scenario sc(make_true_model(spec));
  sc.n_grid = {200, 400};
  sc.seeds = {1, 2};
  sc.K_max = 2;
  sc.d_max = 1;
  sc.detect.max_structures = 3;
  sc.fit.n_starts = 1;
  sc.fit.seed = 5;
  sc.n_designs = 20;
  sc.mc_samples = 5;
  const OracleReport a = oracle_experiment(sc);
  REQUIRE(a.cells.size() == 4u);
  REQUIRE(a.summaries.size() == 2u);
  CHECK(a.cells[0].n == 200u);
  CHECK(a.cells[3].n == 400u);
  for (const auto& c : a.cells) {
    REQUIRE(c.ok);
    CHECK(c.table_size == c.model_kl.size());
    double min_kl = c.model_kl.front();
    for (double v : c.model_kl) min_kl = std::min(min_kl, v);
    CHECK(c.oracle >= min_kl);
    CHECK(c.ratio == doctest::Approx(c.selected_jkl / c.oracle));
    CHECK(c.selected_jkl >= -4.0 * c.selected_jkl_se);
  }
  const OracleReport b = oracle_experiment(sc);
  for (std::size_t i = 0; i < a.cells.size(); ++i) {
    CHECK(a.cells[i].selected == b.cells[i].selected);
    CHECK(a.cells[i].selected_jkl == b.cells[i].selected_jkl);
  }

  Scenario bad = sc;
  bad.rho = 1.5;
  CHECK_THROWS_AS(bad.validate(), Error);
}
