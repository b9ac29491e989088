#include "blompe/em.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "blompe/error.hpp"
#include "blompe/parallel.hpp"
#include "blompe/random.hpp"

namespace blompe {

namespace {

// Euclidean projection of p onto {π : π_k >= floor, Σ π_k = 1}.
Vector project_weights(const Vector& p, double floor, bool* changed) {
  if (p.minCoeff() >= floor) {
    *changed = false;
    return p;
  }
  *changed = true;
  const auto K = p.size();
  std::vector<double> sorted(p.data(), p.data() + K);
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  double tau = 0.0;
  double prefix = 0.0;
  for (Eigen::Index m = 1; m <= K; ++m) {
    prefix += sorted[static_cast<std::size_t>(m - 1)];
    const double t = (prefix + static_cast<double>(K - m) * floor - 1.0) / static_cast<double>(m);
    const bool top_free = sorted[static_cast<std::size_t>(m - 1)] - t > floor;
    const bool rest_fixed = m == K || sorted[static_cast<std::size_t>(m)] - t <= floor;
    if (top_free && rest_fixed) {
      tau = t;
      break;
    }
  }
  Vector out = (p.array() - tau).max(floor);
  return out / out.sum();
}

// Weighted second moment Σ_i w_i r_i r_iᵀ / Σ_i w_i of the rows of R.
Matrix weighted_scatter(const Matrix& R, const Vector& w, double total) {
  Matrix S = R.transpose() * w.asDiagonal() * R / total;
  return 0.5 * (S + S.transpose());
}

// Clamps the spectrum of every diagonal block separately so that entries
// outside the blocks stay exactly zero.
Matrix clamp_blockwise(const Matrix& S, const BlockPartition& partition, double lo, double hi,
                       bool* changed) {
  Matrix out = S;
  *changed = false;
  for (const auto& group : partition.groups()) {
    const auto c = static_cast<Eigen::Index>(group.size());
    Matrix sub(c, c);
    for (Eigen::Index a = 0; a < c; ++a) {
      for (Eigen::Index b = 0; b < c; ++b) sub(a, b) = S(group[a], group[b]);
    }
    bool moved = false;
    sub = clamp_eigenvalues(sub, lo, hi, &moved);
    *changed = *changed || moved;
    for (Eigen::Index a = 0; a < c; ++a) {
      for (Eigen::Index b = 0; b < c; ++b) out(group[a], group[b]) = sub(a, b);
    }
  }
  return out;
}

Matrix standardize_columns(Matrix m) {
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    const double mean = m.col(j).mean();
    m.col(j).array() -= mean;
    const double sd = std::sqrt(m.col(j).squaredNorm() / static_cast<double>(m.rows()));
    if (sd > 0.0) m.col(j) /= sd;
  }
  return m;
}

}  // namespace

void FitConfig::validate() const {
  if (max_iters < 1) fail(Errc::domain, "max_iters must be >= 1");
  if (!(rel_tol > 0.0)) fail(Errc::domain, "rel_tol must be positive");
  if (n_starts < 1) fail(Errc::domain, "n_starts must be >= 1");
}

EStepResult e_step(const BlompeModel& model, const Dataset& data) {
  const Matrix joint = log_gate_terms(model, data.Y()) +
                       log_expert_terms(model, data.X(), data.Y());
  EStepResult out;
  out.responsibilities.resize(joint.rows(), joint.cols());
  for (Eigen::Index i = 0; i < joint.rows(); ++i) {
    const double lse = log_sum_exp(joint.row(i).transpose());
    out.loglik += lse;
    out.responsibilities.row(i) = (joint.row(i).array() - lse).exp();
    out.responsibilities.row(i) /= out.responsibilities.row(i).sum();
  }
  return out;
}

BlompeModel m_step(const Dataset& data, const Matrix& resp, const ModelIndex& index,
                   const Bounds& bounds, bool* projected) {
  index.validate();
  const int K = index.K;
  const auto n = data.n();
  if (resp.rows() != n || resp.cols() != K) {
    fail(Errc::dimension, "responsibilities must be n x K");
  }
  if (data.D() != index.D() || data.L() != index.L) {
    fail(Errc::dimension, "dataset shape does not match the model index");
  }
  const Vector mass = resp.colwise().sum().transpose();
  for (int k = 0; k < K; ++k) {
    if (mass(k) < 1e-10 * static_cast<double>(n)) {
      fail(Errc::component_collapse,
           "component " + std::to_string(k + 1) + " has no responsibility mass");
    }
  }

  bool any = false;
  bool changed = false;
  GatingParams gating;
  gating.weights = project_weights(mass / static_cast<double>(n), bounds.a_pi, &changed);
  any = any || changed;

  const auto monomials = enumerate_monomials(index.d, index.L);
  const Matrix phi = design_matrix(monomials, data.Y());
  const auto M = phi.cols();

  ExpertParams experts;
  for (int k = 0; k < K; ++k) {
    const Vector w = resp.col(k);
    const double Nk = mass(k);

    Vector c = data.Y().transpose() * w / Nk;
    const Vector c_clamped = c.cwiseMax(-bounds.A_c).cwiseMin(bounds.A_c);
    any = any || (c_clamped != c);
    const Matrix Yc = data.Y().rowwise() - c_clamped.transpose();
    Matrix Gamma = clamp_eigenvalues(weighted_scatter(Yc, w, Nk), bounds.a_Gamma,
                                     bounds.A_Gamma, &changed);
    any = any || changed;
    gating.means.push_back(c_clamped);
    gating.covariances.push_back(std::move(Gamma));

    Matrix gram = phi.transpose() * w.asDiagonal() * phi;
    gram = 0.5 * (gram + gram.transpose());
    const double ridge = 1e-10 * gram.trace() / static_cast<double>(M);
    gram.diagonal().array() += ridge;
    const Matrix cross = phi.transpose() * w.asDiagonal() * data.X();  // M × D
    Eigen::LDLT<Matrix> ldlt(gram);
    if (ldlt.info() != Eigen::Success) {
      fail(Errc::decomposition, "weighted least-squares system is singular");
    }
    Matrix alpha = ldlt.solve(cross).transpose();  // D × M
    const Matrix alpha_clipped = alpha.cwiseMax(-bounds.T_upsilon).cwiseMin(bounds.T_upsilon);
    any = any || (alpha_clipped != alpha);

    const Matrix residual = data.X() - phi * alpha_clipped.transpose();
    const auto& partition = index.blocks[static_cast<std::size_t>(k)];
    Matrix Sigma = project_to_blocks(weighted_scatter(residual, w, Nk), partition);
    Sigma = clamp_blockwise(Sigma, partition, bounds.lambda_m, bounds.lambda_M, &changed);
    any = any || changed;

    experts.coeffs.push_back(alpha_clipped);
    experts.covariances.push_back(std::move(Sigma));
  }
  if (projected) *projected = any;
  return BlompeModel(index, std::move(gating), std::move(experts), bounds);
}

std::vector<int> kmeans_labels(const Matrix& points, int K, std::uint64_t seed, int max_iters) {
  const auto n = points.rows();
  if (n < K) fail(Errc::insufficient_data, "k-means needs at least K points");
  Rng rng(seed);
  Matrix centers(K, points.cols());
  Vector dist2 = Vector::Constant(n, std::numeric_limits<double>::infinity());

  // k-means++ seeding
  centers.row(0) = points.row(static_cast<Eigen::Index>(rng.uniform_index(static_cast<std::size_t>(n))));
  for (int k = 1; k < K; ++k) {
    for (Eigen::Index i = 0; i < n; ++i) {
      dist2(i) = std::min(dist2(i), (points.row(i) - centers.row(k - 1)).squaredNorm());
    }
    const std::size_t pick =
        dist2.sum() > 0.0
            ? rng.categorical(std::span<const double>(dist2.data(), static_cast<std::size_t>(n)))
            : rng.uniform_index(static_cast<std::size_t>(n));
    centers.row(k) = points.row(static_cast<Eigen::Index>(pick));
  }

  std::vector<int> labels(static_cast<std::size_t>(n), -1);
  for (int iter = 0; iter < max_iters; ++iter) {
    bool moved = false;
    for (Eigen::Index i = 0; i < n; ++i) {
      int best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (int k = 0; k < K; ++k) {
        const double d = (points.row(i) - centers.row(k)).squaredNorm();
        if (d < best_d) {
          best_d = d;
          best = k;
        }
      }
      if (labels[static_cast<std::size_t>(i)] != best) {
        labels[static_cast<std::size_t>(i)] = best;
        moved = true;
      }
    }
    std::vector<int> counts(static_cast<std::size_t>(K), 0);
    for (int l : labels) ++counts[static_cast<std::size_t>(l)];
    for (int k = 0; k < K; ++k) {
      if (counts[static_cast<std::size_t>(k)] > 0) continue;
      // Reseed an empty cluster at the point farthest from its center.
      Eigen::Index far = 0;
      double far_d = -1.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        const auto li = labels[static_cast<std::size_t>(i)];
        if (counts[static_cast<std::size_t>(li)] <= 1) continue;
        const double d = (points.row(i) - centers.row(li)).squaredNorm();
        if (d > far_d) {
          far_d = d;
          far = i;
        }
      }
      --counts[static_cast<std::size_t>(labels[static_cast<std::size_t>(far)])];
      labels[static_cast<std::size_t>(far)] = k;
      counts[static_cast<std::size_t>(k)] = 1;
      moved = true;
    }
    centers.setZero();
    for (Eigen::Index i = 0; i < n; ++i) centers.row(labels[static_cast<std::size_t>(i)]) += points.row(i);
    for (int k = 0; k < K; ++k) centers.row(k) /= counts[static_cast<std::size_t>(k)];
    if (!moved) break;
  }
  return labels;
}

BlompeModel init_params(const Dataset& data, const ModelIndex& index, std::uint64_t seed,
                        InitStrategy strategy, const Bounds& bounds) {
  const int K = index.K;
  if (data.n() < K) {
    fail(Errc::insufficient_data, "need at least K = " + std::to_string(K) + " observations");
  }
  Matrix resp = Matrix::Zero(data.n(), K);
  if (K == 1) {
    resp.setOnes();
  } else if (strategy == InitStrategy::kmeans) {
    Matrix joined(data.n(), data.L() + data.D());
    joined << data.Y(), data.X();
    const auto labels = kmeans_labels(standardize_columns(std::move(joined)), K, seed);
    for (Eigen::Index i = 0; i < data.n(); ++i) resp(i, labels[static_cast<std::size_t>(i)]) = 1.0;
  } else {
    Rng rng(seed);
    for (Eigen::Index i = 0; i < data.n(); ++i) {
      for (int k = 0; k < K; ++k) resp(i, k) = rng.exponential();
      resp.row(i) /= resp.row(i).sum();
    }
  }
  return m_step(data, resp, index, bounds);
}

FitResult fit_from(const Dataset& data, const BlompeModel& start, const FitConfig& config,
                   int start_index) {
  config.validate();
  BlompeModel model = start;
  std::vector<double> trace;
  std::vector<bool> projected{false};
  bool converged = false;
  int iterations = 0;
  double rel_change = std::numeric_limits<double>::infinity();
  for (int it = 0; it < config.max_iters; ++it) {
    EStepResult es = e_step(model, data);
    if (!std::isfinite(es.loglik)) fail(Errc::fit_failure, "log-likelihood became non-finite");
    trace.push_back(es.loglik);
    if (it > 0) {
      const double prev = trace[trace.size() - 2];
      rel_change = std::abs(es.loglik - prev) / std::max(std::abs(prev), 1e-300);
      if (rel_change < config.rel_tol) {
        converged = true;
        break;
      }
    }
    bool hit = false;
    model = m_step(data, es.responsibilities, model.index(), config.bounds, &hit);
    projected.push_back(hit);
    iterations = it + 1;
  }
  if (!converged) {
    // The last M-step's model has not been scored yet.
    trace.push_back(e_step(model, data).loglik);
    const double prev = trace[trace.size() - 2];
    rel_change = std::abs(trace.back() - prev) / std::max(std::abs(prev), 1e-300);
  }
  projected.resize(trace.size());

  FitResult result{model, nll(model, data), model_dim(model.index()), {}, {}, false, 0, 0, 0.0, {}};
  result.loglik_trace = std::move(trace);
  result.projected = std::move(projected);
  result.converged = converged;
  result.iterations = iterations;
  result.start_index = start_index;
  result.eta = rel_change * std::abs(result.nll);
  if (std::count(result.projected.begin(), result.projected.end(), true) > 0) {
    result.diagnostics.push_back(
        "bound projections were active; the reported NLL upper-bounds the constrained minimum");
  }
  return result;
}

FitResult fit(const Dataset& data, const ModelIndex& index, const FitConfig& config) {
  config.validate();
  index.validate();
  const auto starts = static_cast<std::size_t>(config.n_starts);
  std::vector<std::optional<FitResult>> runs(starts);
  std::vector<std::string> failures(starts);
  parallel_for(starts, config.threads, [&](std::size_t s) {
    try {
      const auto seed = derive_seed(config.seed, s);
      const BlompeModel init = init_params(data, index, seed, config.init, config.bounds);
      runs[s] = fit_from(data, init, config, static_cast<int>(s));
    } catch (const Error& e) {
      failures[s] = e.what();
    }
  });

  std::optional<std::size_t> best;
  for (std::size_t s = 0; s < starts; ++s) {
    if (!runs[s]) continue;
    if (!best || runs[s]->loglik_trace.back() > runs[*best]->loglik_trace.back()) best = s;
  }
  if (!best) {
    std::ostringstream os;
    os << "all " << starts << " starts failed for " << describe(index);
    for (std::size_t s = 0; s < starts; ++s) os << "; start " << s << ": " << failures[s];
    fail(Errc::fit_failure, os.str());
  }
  FitResult out = std::move(*runs[*best]);
  for (std::size_t s = 0; s < starts; ++s) {
    if (!runs[s]) out.diagnostics.push_back("start " + std::to_string(s) + " failed: " + failures[s]);
  }
  return out;
}

std::vector<Matrix> residual_covariances(const BlompeModel& model, const Dataset& data,
                                         const Matrix& resp) {
  const Matrix phi = design_matrix(model.monomials(), data.Y());
  std::vector<Matrix> out;
  for (int k = 0; k < model.K(); ++k) {
    const Vector w = resp.col(k);
    const Matrix residual = data.X() - phi * model.experts().coeffs[static_cast<std::size_t>(k)].transpose();
    out.push_back(weighted_scatter(residual, w, w.sum()));
  }
  return out;
}

}  // namespace blompe
