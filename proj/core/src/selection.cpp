#include "blompe/selection.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <set>
#include <tuple>

#include "blompe/error.hpp"
#include "blompe/parallel.hpp"
#include "blompe/random.hpp"

namespace blompe {

namespace {

constexpr double kKappaFloor = 1e-12;

std::size_t distinct_pen_count(const SelectionTable& table) {
  std::set<double> pens;
  for (const auto& r : table.rows) pens.insert(r.pen_shape);
  return pens.size();
}

double median(std::vector<double> v) {
  const auto mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  const double upper = v[mid];
  if (v.size() % 2 == 1) return upper;
  const double lower = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

std::vector<double> kappa_grid(const SelectionTable& table, int grid_size) {
  double nll_lo = table.rows.front().nll, nll_hi = nll_lo;
  double pen_lo = table.rows.front().pen_shape, pen_hi = pen_lo;
  for (const auto& r : table.rows) {
    nll_lo = std::min(nll_lo, r.nll);
    nll_hi = std::max(nll_hi, r.nll);
    pen_lo = std::min(pen_lo, r.pen_shape);
    pen_hi = std::max(pen_hi, r.pen_shape);
  }
  double scale = pen_hi > pen_lo ? (nll_hi - nll_lo) / (pen_hi - pen_lo) : 1.0;
  if (!(scale > 0.0)) scale = 1.0;
  const double lo = std::log(scale * 1e-3);
  const double hi = std::log(scale * 1e2);
  std::vector<double> grid;
  for (int j = 0; j < grid_size; ++j) {
    const double t = grid_size == 1 ? 0.0 : static_cast<double>(j) / (grid_size - 1);
    grid.push_back(std::exp(lo + t * (hi - lo)));
  }
  return grid;
}

std::size_t argmin_row(const SelectionTable& table, double kappa) {
  auto key = [&](std::size_t i) {
    const auto& r = table.rows[i];
    return std::tuple<double, int, int, int, const BlockStructure&>(
        r.nll + kappa * r.pen_shape, r.dim, r.index.K, r.index.d, r.index.blocks);
  };
  std::size_t best = 0;
  for (std::size_t i = 1; i < table.rows.size(); ++i) {
    if (key(i) < key(best)) best = i;
  }
  return best;
}

}  // namespace

std::string_view to_string(SlopeMethod method) {
  switch (method) {
    case SlopeMethod::slope_fit: return "slope_fit";
    case SlopeMethod::dimension_jump: return "dimension_jump";
    case SlopeMethod::fixed: return "fixed";
  }
  return "slope_fit";
}

SlopeMethod slope_method_from_string(std::string_view name) {
  if (name == "slope_fit") return SlopeMethod::slope_fit;
  if (name == "dimension_jump") return SlopeMethod::dimension_jump;
  if (name == "fixed") return SlopeMethod::fixed;
  fail(Errc::input, "unknown slope method '" + std::string(name) + "'");
}

double pen_shape(int dim, std::size_t n) {
  if (n < 1) fail(Errc::domain, "sample size must be >= 1");
  return static_cast<double>(dim) * (1.0 + std::log(static_cast<double>(n)));
}

std::vector<std::size_t> lower_frontier(const SelectionTable& table) {
  std::vector<std::size_t> order(table.rows.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return table.rows[a].pen_shape < table.rows[b].pen_shape;
  });
  std::vector<std::size_t> frontier;
  double best_below = std::numeric_limits<double>::infinity();  // min nll at strictly smaller pen
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    const double pen = table.rows[order[i]].pen_shape;
    double best_here = std::numeric_limits<double>::infinity();
    while (j < order.size() && table.rows[order[j]].pen_shape == pen) {
      const double v = table.rows[order[j]].nll;
      if (v < best_below) frontier.push_back(order[j]);
      best_here = std::min(best_here, v);
      ++j;
    }
    best_below = std::min(best_below, best_here);
    i = j;
  }
  return frontier;
}

std::vector<std::pair<double, int>> selected_dim_curve(const SelectionTable& table, int grid_size) {
  if (table.rows.empty()) fail(Errc::insufficient_table, "empty selection table");
  if (grid_size < 2) fail(Errc::domain, "kappa grid needs at least two points");
  std::vector<std::pair<double, int>> curve;
  for (double kappa : kappa_grid(table, grid_size)) {
    curve.emplace_back(kappa, table.rows[argmin_row(table, kappa)].dim);
  }
  return curve;
}

SlopeEstimate slope_heuristic(const SelectionTable& table, const SlopeConfig& config) {
  if (distinct_pen_count(table) < 3) {
    fail(Errc::insufficient_table, "slope heuristic needs at least three distinct complexities");
  }
  SlopeEstimate est;
  est.method = config.method;
  if (config.method == SlopeMethod::dimension_jump) {
    const auto curve = selected_dim_curve(table, config.grid_size);
    int biggest = 0;
    double kappa_jump = curve.front().first;
    for (std::size_t j = 1; j < curve.size(); ++j) {
      const int drop = curve[j - 1].second - curve[j].second;
      if (drop > biggest) {
        biggest = drop;
        kappa_jump = curve[j].first;
      }
    }
    est.kappa_hat = kappa_jump;
    est.kappa_used = 2.0 * kappa_jump;
    return est;
  }

  if (!(config.fraction > 0.0 && config.fraction <= 1.0)) {
    fail(Errc::domain, "slope fraction must lie in (0, 1]");
  }
  const auto frontier = lower_frontier(table);
  const std::size_t want = std::max<std::size_t>(
      static_cast<std::size_t>(std::ceil(config.fraction * static_cast<double>(frontier.size()))),
      std::min<std::size_t>(3, frontier.size()));
  const std::vector<std::size_t> tail(frontier.end() - static_cast<std::ptrdiff_t>(want),
                                      frontier.end());
  // Theil–Sen: median of pairwise slopes.
  std::vector<double> slopes;
  for (std::size_t a = 0; a < tail.size(); ++a) {
    for (std::size_t b = a + 1; b < tail.size(); ++b) {
      const auto& ra = table.rows[tail[a]];
      const auto& rb = table.rows[tail[b]];
      if (ra.pen_shape == rb.pen_shape) continue;
      slopes.push_back((rb.nll - ra.nll) / (rb.pen_shape - ra.pen_shape));
    }
  }
  const double slope = slopes.empty() ? 0.0 : median(std::move(slopes));
  est.kappa_hat = std::max(-slope, kKappaFloor);
  est.kappa_used = 2.0 * est.kappa_hat;
  return est;
}

SelectionResult select_model(const SelectionTable& table, double kappa_used) {
  if (table.rows.empty()) fail(Errc::insufficient_table, "empty selection table");
  const std::size_t best = argmin_row(table, kappa_used);
  SelectionResult out;
  out.selected = table.rows[best].index;
  out.selected_row = best;
  out.kappa_used = kappa_used;
  out.method = SlopeMethod::fixed;
  out.table = table;
  return out;
}

ComplexityBound complexity_bound(int dim, double C_m, double n) {
  if (dim < 1 || !(C_m > 0.0) || !(n >= 1.0)) {
    fail(Errc::domain, "complexity bound needs dim >= 1, C_m > 0, n >= 1");
  }
  const double a = std::pow(std::sqrt(C_m) + std::sqrt(std::numbers::pi), 2);
  const double d = dim;
  ComplexityBound out;
  out.bound = d * (2.0 * a + std::max(0.0, std::log(n / (a * d))));
  out.cap = d * (2.0 * a + std::log(n));
  return out;
}

Collection build_collection(const Dataset& data, const CollectionConfig& config) {
  if (config.K_max < 1 || config.d_max < 1) fail(Errc::domain, "K_max and d_max must be >= 1");
  const int L = static_cast<int>(data.L());
  const int D = static_cast<int>(data.D());
  Collection out;
  out.base_fits.resize(static_cast<std::size_t>(config.K_max));
  std::vector<std::optional<BlockStructureSet>> structures(out.base_fits.size());
  std::vector<std::string> failures(out.base_fits.size());

  parallel_for(out.base_fits.size(), config.threads, [&](std::size_t slot) {
    const int K = static_cast<int>(slot) + 1;
    FitConfig fc = config.fit;
    fc.seed = derive_seed(config.fit.seed, static_cast<std::uint64_t>(K));
    fc.threads = 1;
    if (K == 1) fc.n_starts = 1;  // deterministic initialization
    try {
      FitResult base = fit(data, ModelIndex::full_blocks(K, 1, L, D), fc);
      const Matrix resp = e_step(base.model, data).responsibilities;
      const auto covs = residual_covariances(base.model, data, resp);
      structures[slot] = detect_candidates(covs, config.detect);
      out.base_fits[slot] = std::move(base);
    } catch (const Error& e) {
      failures[slot] = e.what();
    }
  });

  for (std::size_t slot = 0; slot < out.base_fits.size(); ++slot) {
    const int K = static_cast<int>(slot) + 1;
    if (!structures[slot]) {
      out.warnings.push_back("K=" + std::to_string(K) + " skipped: " + failures[slot]);
      warn(out.warnings.back());
      continue;
    }
    for (int d = 1; d <= config.d_max; ++d) {
      for (const auto& B : structures[slot]->candidates) {
        out.indices.push_back(ModelIndex{K, d, L, B});
      }
    }
  }
  return out;
}

FittedCollection fit_collection(const Dataset& data, const Collection& collection,
                                const CollectionConfig& config) {
  std::vector<std::optional<Matrix>> base_resp(collection.base_fits.size());
  for (std::size_t s = 0; s < base_resp.size(); ++s) {
    if (collection.base_fits[s]) base_resp[s] = e_step(collection.base_fits[s]->model, data).responsibilities;
  }

  const auto count = collection.indices.size();
  std::vector<std::optional<FitResult>> fits(count);
  std::vector<std::string> failures(count);
  parallel_for(count, config.threads, [&](std::size_t i) {
    const ModelIndex& index = collection.indices[i];
    const auto slot = static_cast<std::size_t>(index.K - 1);
    try {
      if (slot >= base_resp.size() || !base_resp[slot]) {
        fail(Errc::fit_failure, "no base fit for K=" + std::to_string(index.K));
      }
      FitConfig fc = config.fit;
      fc.threads = 1;
      const BlompeModel start = m_step(data, *base_resp[slot], index, fc.bounds);
      fits[i] = fit_from(data, start, fc);
    } catch (const Error& e) {
      failures[i] = e.what();
    }
  });

  FittedCollection out;
  out.table.n = static_cast<std::size_t>(data.n());
  for (std::size_t i = 0; i < count; ++i) {
    if (!fits[i]) {
      out.warnings.push_back(describe(collection.indices[i]) + " dropped: " + failures[i]);
      warn(out.warnings.back());
      continue;
    }
    SelectionRow row;
    row.index = collection.indices[i];
    row.nll = fits[i]->nll;
    row.dim = fits[i]->dim;
    row.pen_shape = pen_shape(row.dim, out.table.n);
    row.converged = fits[i]->converged;
    row.iterations = fits[i]->iterations;
    out.table.rows.push_back(std::move(row));
    out.models.push_back(std::move(fits[i]->model));
  }
  return out;
}

SelectionRun calibrate_selection(Collection collection, FittedCollection fitted,
                                 const SlopeConfig& slope, std::optional<double> kappa_override) {
  if (fitted.table.rows.empty()) fail(Errc::fit_failure, "every model of the collection failed");
  SlopeEstimate est;
  if (kappa_override) {
    est.method = SlopeMethod::fixed;
    est.kappa_used = *kappa_override;
    if (distinct_pen_count(fitted.table) >= 3) {
      SlopeConfig sc = slope;
      if (sc.method == SlopeMethod::fixed) sc.method = SlopeMethod::slope_fit;
      est.kappa_hat = slope_heuristic(fitted.table, sc).kappa_hat;
    }
  } else {
    est = slope_heuristic(fitted.table, slope);
  }
  SelectionResult result = select_model(fitted.table, est.kappa_used);
  result.kappa_hat = est.kappa_hat;
  result.method = est.method;
  return {std::move(collection), std::move(fitted), est, std::move(result)};
}

SelectionRun run_selection(const Dataset& data, const CollectionConfig& config,
                           const SlopeConfig& slope, std::optional<double> kappa_override) {
  Collection collection = build_collection(data, config);
  FittedCollection fitted = fit_collection(data, collection, config);
  return calibrate_selection(std::move(collection), std::move(fitted), slope, kappa_override);
}

}  // namespace blompe
