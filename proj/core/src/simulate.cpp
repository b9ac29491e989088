#include "blompe/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "blompe/error.hpp"
#include "blompe/parallel.hpp"

namespace blompe {

namespace {

bool in_unit_box(const Vector& y) {
  return (y.array() >= 0.0).all() && (y.array() <= 1.0).all();
}

double median(std::vector<double> v) {
  if (v.empty()) return std::nan("");
  std::sort(v.begin(), v.end());
  const std::size_t mid = v.size() / 2;
  return v.size() % 2 ? v[mid] : 0.5 * (v[mid - 1] + v[mid]);
}

Matrix equicorrelated_block(const std::vector<int>& members, const TrueModelSpec& spec, Rng& rng) {
  const auto c = static_cast<Eigen::Index>(members.size());
  const double rho = spec.corr_min + (spec.corr_max - spec.corr_min) * rng.uniform();
  Matrix R = Matrix::Constant(c, c, rho);
  R.diagonal().setOnes();
  Vector sd(c);
  for (Eigen::Index i = 0; i < c; ++i) {
    const double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
    sd(i) = sign * spec.noise_scale * (0.75 + 0.5 * rng.uniform());
  }
  return sd.asDiagonal() * R * sd.asDiagonal();
}

}  // namespace

SampledData sample_dataset(const BlompeModel& model, std::size_t n, std::uint64_t seed,
                           bool enforce_unit_box) {
  if (n < 1) fail(Errc::domain, "sample size must be at least 1");
  Rng rng(seed);
  const Vector& pi = model.gating().weights;
  const std::span<const double> weights(pi.data(), static_cast<std::size_t>(pi.size()));
  Matrix X(static_cast<Eigen::Index>(n), model.D());
  Matrix Y(static_cast<Eigen::Index>(n), model.L());
  std::vector<int> labels(n);
  std::size_t proposals = 0;
  for (std::size_t i = 0; i < n; ++i) {
    int k = 0;
    Vector y;
    while (true) {
      k = static_cast<int>(rng.categorical(weights));
      y = model.gate_factor(k).transform(model.gating().means[static_cast<std::size_t>(k)],
                                         rng.normal_vector(model.L()));
      ++proposals;
      if (!enforce_unit_box || in_unit_box(y)) break;
      if (proposals >= 1000 && static_cast<double>(i) < 1e-3 * static_cast<double>(proposals)) {
        fail(Errc::scenario, "covariate rejection rate exceeds 0.999; the gating places "
                             "almost no mass inside the unit box");
      }
    }
    const auto row = static_cast<Eigen::Index>(i);
    Y.row(row) = y.transpose();
    X.row(row) = model.expert_factor(k)
                     .transform(model.expert_mean(k, y), rng.normal_vector(model.D()))
                     .transpose();
    labels[i] = k;
  }
  SampledData out{Dataset(std::move(X), std::move(Y)), std::move(labels), 1.0};
  out.acceptance_rate = static_cast<double>(n) / static_cast<double>(proposals);
  return out;
}

BlompeModel make_true_model(const TrueModelSpec& spec) {
  if (spec.K < 1 || spec.d < 0 || spec.D < 1 || spec.L < 1) {
    fail(Errc::scenario, "true model needs K >= 1, d >= 0, D >= 1, L >= 1");
  }
  if (!(spec.noise_scale > 0.0) || !(spec.coef_scale >= 0.0) || !(spec.separation >= 0.0)) {
    fail(Errc::scenario, "noise_scale must be positive, coef_scale and separation non-negative");
  }
  if (!(spec.corr_min >= 0.0 && spec.corr_min <= spec.corr_max && spec.corr_max < 1.0)) {
    fail(Errc::scenario, "correlation range must satisfy 0 <= corr_min <= corr_max < 1");
  }
  if (spec.coef_scale > spec.bounds.T_upsilon) {
    fail(Errc::scenario, "coef_scale exceeds the coefficient bound T_upsilon");
  }
  spec.bounds.validate(spec.K);

  const auto K = static_cast<std::size_t>(spec.K);
  ModelIndex index{spec.K, spec.d, spec.L, spec.blocks};
  if (index.blocks.empty()) index.blocks.assign(K, BlockPartition::singletons(spec.D));
  if (index.blocks.size() != K) fail(Errc::scenario, "need one block partition per cluster");
  for (const auto& B : index.blocks) {
    if (B.dim() != spec.D) fail(Errc::scenario, "block partition dimension differs from D");
  }

  // Centred lattice with m points per axis, first K points in row-major order.
  int m = 1;
  while (std::pow(static_cast<double>(m), spec.L) < static_cast<double>(spec.K)) ++m;
  const double spacing = spec.separation * std::sqrt(spec.bounds.A_Gamma);
  if (static_cast<double>(m - 1) * spacing > 1.0) {
    fail(Errc::scenario, "separation " + std::to_string(spec.separation) + " cannot place " +
                             std::to_string(spec.K) + " gating means inside [0,1]^" +
                             std::to_string(spec.L));
  }
  GatingParams gating;
  gating.weights = Vector::Constant(spec.K, 1.0 / spec.K);
  for (std::size_t k = 0; k < K; ++k) {
    Vector c(spec.L);
    std::size_t code = k;
    for (int l = spec.L - 1; l >= 0; --l) {
      const auto j = static_cast<double>(code % static_cast<std::size_t>(m));
      code /= static_cast<std::size_t>(m);
      c(l) = 0.5 + (j - 0.5 * (m - 1)) * spacing;
    }
    gating.means.push_back(c);
    gating.covariances.push_back(spec.bounds.A_Gamma * Matrix::Identity(spec.L, spec.L));
  }

  Rng rng(spec.seed);
  const auto M = static_cast<Eigen::Index>(monomial_count(spec.d, spec.L));
  ExpertParams experts;
  for (std::size_t k = 0; k < K; ++k) {
    Matrix coeffs(spec.D, M);
    for (Eigen::Index i = 0; i < coeffs.size(); ++i) {
      coeffs.data()[i] = spec.coef_scale * (2.0 * rng.uniform() - 1.0);
    }
    experts.coeffs.push_back(coeffs);
    Matrix sigma = Matrix::Zero(spec.D, spec.D);
    for (const auto& group : index.blocks[k].groups()) {
      const Matrix block = equicorrelated_block(group, spec, rng);
      for (std::size_t a = 0; a < group.size(); ++a) {
        for (std::size_t b = 0; b < group.size(); ++b) {
          sigma(group[a], group[b]) = block(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
        }
      }
    }
    const auto [lo, hi] = eigen_range(sigma);
    if (lo < spec.bounds.lambda_m || hi > spec.bounds.lambda_M) {
      fail(Errc::scenario, "expert covariance eigenvalues [" + std::to_string(lo) + ", " +
                               std::to_string(hi) + "] fall outside the bounds");
    }
    experts.covariances.push_back(sigma);
  }
  return BlompeModel(std::move(index), std::move(gating), std::move(experts), spec.bounds);
}

void Scenario::validate() const {
  if (n_grid.empty() || seeds.empty()) fail(Errc::scenario, "n_grid and seeds must be non-empty");
  if (!std::is_sorted(n_grid.begin(), n_grid.end()) ||
      std::adjacent_find(n_grid.begin(), n_grid.end()) != n_grid.end()) {
    fail(Errc::scenario, "n_grid must be strictly ascending");
  }
  if (K_max < 1 || d_max < 1) fail(Errc::scenario, "K_max and d_max must be >= 1");
  if (n_designs < 1 || mc_samples < 2) fail(Errc::scenario, "need n_designs >= 1 and mc_samples >= 2");
  if (!(rho > 0.0 && rho < 1.0)) fail(Errc::scenario, "rho must lie in (0, 1)");
  fit.validate();
}

OracleReport oracle_experiment(const Scenario& scenario) {
  scenario.validate();
  const BlompeModel& truth = scenario.true_model;
  const ModelLaw truth_law(truth);

  OracleReport report;
  for (std::size_t n : scenario.n_grid) {
    for (std::uint64_t seed : scenario.seeds) {
      OracleCell cell;
      cell.n = n;
      cell.seed = seed;
      report.cells.push_back(std::move(cell));
    }
  }

  parallel_for(report.cells.size(), scenario.threads, [&](std::size_t c) {
    OracleCell& cell = report.cells[c];
    const std::uint64_t base = derive_seed(derive_seed(scenario.fit.seed, cell.seed),
                                           static_cast<std::uint64_t>(cell.n));
    try {
      const SampledData sample = sample_dataset(truth, cell.n, derive_seed(base, 1));
      CollectionConfig cc;
      cc.K_max = scenario.K_max;
      cc.d_max = scenario.d_max;
      cc.detect = scenario.detect;
      cc.fit = scenario.fit;
      cc.fit.seed = derive_seed(base, 2);
      cc.fit.threads = 1;
      cc.threads = 1;
      const SelectionRun run = run_selection(sample.data, cc, scenario.slope);

      const Matrix designs =
          sample_dataset(truth, scenario.n_designs, derive_seed(base, 3)).data.Y();
      const std::uint64_t mc_seed = derive_seed(base, 4);
      const auto& rows = run.fitted.table.rows;
      cell.table_size = rows.size();
      cell.kappa_used = run.result.kappa_used;
      cell.selected = run.result.selected;
      cell.selected_is_truth = cell.selected == truth.index();
      cell.oracle = std::numeric_limits<double>::infinity();
      for (std::size_t r = 0; r < rows.size(); ++r) {
        const PairedDivergences pd =
            mc_divergences(truth_law, ModelLaw(run.fitted.models[r]), designs, scenario.rho,
                           scenario.mc_samples, mc_seed);
        cell.model_kl.push_back(pd.kl.value);
        cell.model_kl_se.push_back(pd.kl.std_error);
        const double value =
            pd.kl.value + 2.0 * cell.kappa_used * rows[r].pen_shape / static_cast<double>(cell.n);
        if (value < cell.oracle) {
          cell.oracle = value;
          cell.oracle_index = rows[r].index;
        }
        if (r == run.result.selected_row) {
          cell.selected_jkl = pd.jkl.value;
          cell.selected_jkl_se = pd.jkl.std_error;
          cell.selected_kl = pd.kl.value;
        }
      }
      cell.ratio = cell.oracle > 0.0 ? cell.selected_jkl / cell.oracle
                                     : std::numeric_limits<double>::infinity();
      cell.ok = true;
    } catch (const std::exception& e) {
      cell.ok = false;
      cell.error = e.what();
    }
  });

  std::vector<double> medians;
  for (std::size_t n : scenario.n_grid) {
    OracleSummary s;
    s.n = n;
    std::vector<double> jkl;
    double ratio_sum = 0.0;
    for (const auto& cell : report.cells) {
      if (cell.n != n) continue;
      ++s.cells;
      if (!cell.ok) {
        ++s.failures;
        continue;
      }
      jkl.push_back(cell.selected_jkl);
      ratio_sum += cell.ratio;
      s.max_ratio = std::max(s.max_ratio, cell.ratio);
      if (cell.ratio <= 3.0) ++s.ratio_le_3;
      if (cell.selected_is_truth) ++s.truth_selected;
    }
    if (!jkl.empty()) {
      s.median_selected_jkl = median(jkl);
      double total = 0.0;
      for (double v : jkl) total += v;
      s.mean_selected_jkl = total / static_cast<double>(jkl.size());
      s.mean_ratio = ratio_sum / static_cast<double>(jkl.size());
    } else {
      s.median_selected_jkl = s.mean_selected_jkl = s.mean_ratio = std::nan("");
    }
    medians.push_back(s.median_selected_jkl);
    report.summaries.push_back(s);
  }
  for (std::size_t i = 1; i < medians.size(); ++i) {
    if (!(medians[i] <= medians[i - 1])) ++report.median_inversions;
  }
  return report;
}

}  // namespace blompe
