#include "blompe/blocks.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <string>

#include "blompe/error.hpp"

namespace blompe {

namespace {

// |corr| at or below this counts as zero.
constexpr double kZeroCorrelation = 1e-12;

class DisjointSets {
 public:
  explicit DisjointSets(int n) : parent_(static_cast<std::size_t>(n)) {
    std::iota(parent_.begin(), parent_.end(), 0);
  }
  int find(int i) {
    while (parent_[i] != i) {
      parent_[i] = parent_[parent_[i]];
      i = parent_[i];
    }
    return i;
  }
  void unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a != b) parent_[std::max(a, b)] = std::min(a, b);
  }

 private:
  std::vector<int> parent_;
};

Matrix abs_correlation(const Matrix& cov) {
  const Vector sd = cov.diagonal().cwiseSqrt();
  Matrix corr = cov.cwiseQuotient(sd * sd.transpose()).cwiseAbs();
  corr.diagonal().setOnes();
  return corr;
}

// Thresholds at grid levels 1, (T-2)/(T-1), ..., 0 of the empirical
// distribution of off-diagonal |corr| values (order statistics).
std::vector<double> threshold_grid(const Matrix& abs_corr, int count) {
  std::vector<double> off;
  const auto D = abs_corr.rows();
  for (Eigen::Index j = 1; j < D; ++j) {
    for (Eigen::Index i = 0; i < j; ++i) off.push_back(abs_corr(i, j));
  }
  std::vector<double> grid;
  if (off.empty()) return grid;
  std::sort(off.begin(), off.end());
  const double last = static_cast<double>(off.size() - 1);
  for (int j = 0; j < count; ++j) {
    const double level = count == 1 ? 1.0 : 1.0 - static_cast<double>(j) / (count - 1);
    grid.push_back(off[static_cast<std::size_t>(std::lround(level * last))]);
  }
  return grid;
}

}  // namespace

BlockPartition BlockPartition::from_groups(std::vector<std::vector<int>> groups,
                                           int expected_dim) {
  std::size_t total = 0;
  for (const auto& g : groups) {
    if (g.empty()) fail(Errc::invalid_partition, "empty group");
    total += g.size();
  }
  const int D = expected_dim >= 0 ? expected_dim : static_cast<int>(total);
  if (D == 0) fail(Errc::invalid_partition, "partition of zero indices");
  std::vector<int> seen(static_cast<std::size_t>(D), 0);
  for (const auto& g : groups) {
    for (int i : g) {
      if (i < 0 || i >= D) {
        fail(Errc::invalid_partition,
             "index " + std::to_string(i + 1) + " outside 1.." + std::to_string(D));
      }
      if (seen[static_cast<std::size_t>(i)]++) {
        fail(Errc::invalid_partition, "index " + std::to_string(i + 1) + " appears twice");
      }
    }
  }
  for (int i = 0; i < D; ++i) {
    if (!seen[static_cast<std::size_t>(i)]) {
      fail(Errc::invalid_partition, "index " + std::to_string(i + 1) + " is missing");
    }
  }
  for (auto& g : groups) std::sort(g.begin(), g.end());
  std::sort(groups.begin(), groups.end(),
            [](const auto& a, const auto& b) { return a.front() < b.front(); });
  BlockPartition p;
  p.groups_ = std::move(groups);
  p.dim_ = D;
  return p;
}

BlockPartition BlockPartition::from_one_based(std::vector<std::vector<int>> groups,
                                              int expected_dim) {
  for (auto& g : groups) {
    for (int& i : g) --i;
  }
  return from_groups(std::move(groups), expected_dim);
}

BlockPartition BlockPartition::singletons(int dim) {
  std::vector<std::vector<int>> groups;
  for (int i = 0; i < dim; ++i) groups.push_back({i});
  return from_groups(std::move(groups), dim);
}

BlockPartition BlockPartition::one_block(int dim) {
  std::vector<int> all(static_cast<std::size_t>(dim));
  std::iota(all.begin(), all.end(), 0);
  return from_groups({all}, dim);
}

BlockPartition BlockPartition::from_labels(std::span<const int> labels) {
  std::vector<std::vector<int>> groups;
  std::vector<int> label_of_group;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    auto it = std::find(label_of_group.begin(), label_of_group.end(), labels[i]);
    if (it == label_of_group.end()) {
      label_of_group.push_back(labels[i]);
      groups.push_back({static_cast<int>(i)});
    } else {
      groups[static_cast<std::size_t>(it - label_of_group.begin())].push_back(
          static_cast<int>(i));
    }
  }
  return from_groups(std::move(groups), static_cast<int>(labels.size()));
}

std::vector<std::vector<int>> BlockPartition::one_based_groups() const {
  auto out = groups_;
  for (auto& g : out) {
    for (int& i : g) ++i;
  }
  return out;
}

std::vector<int> BlockPartition::labels() const {
  std::vector<int> out(static_cast<std::size_t>(dim_), -1);
  for (std::size_t g = 0; g < groups_.size(); ++g) {
    for (int i : groups_[g]) out[static_cast<std::size_t>(i)] = static_cast<int>(g);
  }
  return out;
}

bool BlockPartition::same_group(int i, int j) const {
  for (const auto& g : groups_) {
    const bool has_i = std::binary_search(g.begin(), g.end(), i);
    const bool has_j = std::binary_search(g.begin(), g.end(), j);
    if (has_i || has_j) return has_i && has_j;
  }
  return false;
}

BlockPartition canonicalize(std::vector<std::vector<int>> groups) {
  return BlockPartition::from_groups(std::move(groups));
}

int cov_dim(const BlockPartition& partition, DimConvention convention) {
  int total = 0;
  for (const auto& g : partition.groups()) {
    const int c = static_cast<int>(g.size());
    total += convention == DimConvention::full ? c * (c + 1) / 2 : c * (c - 1) / 2;
  }
  return total;
}

int cov_dim(const BlockStructure& structure, DimConvention convention) {
  int total = 0;
  for (const auto& p : structure) total += cov_dim(p, convention);
  return total;
}

Matrix project_to_blocks(const Matrix& sym, const BlockPartition& partition) {
  if (sym.rows() != sym.cols() || sym.rows() != partition.dim()) {
    fail(Errc::dimension, "matrix is " + std::to_string(sym.rows()) + "x" +
                              std::to_string(sym.cols()) + ", partition covers " +
                              std::to_string(partition.dim()) + " indices");
  }
  const double scale = std::max(1.0, sym.cwiseAbs().maxCoeff());
  if (max_asymmetry(sym) > 1e-10 * scale) {
    fail(Errc::precondition, "project_to_blocks needs a symmetric matrix");
  }
  const auto labels = partition.labels();
  Matrix out = sym;
  for (Eigen::Index j = 0; j < sym.cols(); ++j) {
    for (Eigen::Index i = 0; i < sym.rows(); ++i) {
      if (labels[static_cast<std::size_t>(i)] != labels[static_cast<std::size_t>(j)]) {
        out(i, j) = 0.0;
      }
    }
  }
  return out;
}

bool conforms_to_blocks(const Matrix& m, const BlockPartition& partition) {
  if (m.rows() != partition.dim() || m.cols() != partition.dim()) return false;
  const auto labels = partition.labels();
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      if (labels[static_cast<std::size_t>(i)] != labels[static_cast<std::size_t>(j)] &&
          m(i, j) != 0.0) {
        return false;
      }
    }
  }
  return true;
}

BlockPartition threshold_partition(const Matrix& abs_corr, double threshold) {
  const int D = static_cast<int>(abs_corr.rows());
  DisjointSets sets(D);
  for (int j = 1; j < D; ++j) {
    for (int i = 0; i < j; ++i) {
      const double c = abs_corr(i, j);
      if (c > kZeroCorrelation && c >= threshold) sets.unite(i, j);
    }
  }
  std::vector<int> labels(static_cast<std::size_t>(D));
  for (int i = 0; i < D; ++i) labels[static_cast<std::size_t>(i)] = sets.find(i);
  return BlockPartition::from_labels(labels);
}

BlockStructureSet detect_candidates(std::span<const Matrix> residual_covs,
                                    const DetectConfig& config) {
  if (residual_covs.empty()) fail(Errc::dimension, "no residual covariances given");
  if (config.threshold_count < 1) fail(Errc::domain, "threshold_count must be >= 1");
  if (config.max_structures < 1) fail(Errc::domain, "max_structures must be >= 1");
  const auto D = residual_covs.front().rows();
  const std::size_t K = residual_covs.size();

  // per_cluster[k][j]: partition of cluster k at grid position j
  std::vector<std::vector<BlockPartition>> per_cluster(K);
  for (std::size_t k = 0; k < K; ++k) {
    const Matrix& cov = residual_covs[k];
    if (cov.rows() != D || cov.cols() != D) {
      fail(Errc::dimension, "residual covariances must share one dimension");
    }
    if (max_asymmetry(cov) > 1e-10 * std::max(1.0, cov.cwiseAbs().maxCoeff()) ||
        !is_positive_definite(cov)) {
      fail(Errc::decomposition,
           "residual covariance of cluster " + std::to_string(k + 1) + " is not SPD");
    }
    const Matrix corr = abs_correlation(cov);
    for (double t : threshold_grid(corr, config.threshold_count)) {
      per_cluster[k].push_back(threshold_partition(corr, t));
    }
  }

  std::set<BlockStructure> unique;
  const int Di = static_cast<int>(D);
  unique.insert(BlockStructure(K, BlockPartition::singletons(Di)));
  if (config.include_one_block) unique.insert(BlockStructure(K, BlockPartition::one_block(Di)));

  if (config.combine == CombineMode::matched_grid) {
    const std::size_t positions = per_cluster.front().size();
    for (std::size_t j = 0; j < positions; ++j) {
      BlockStructure s;
      for (std::size_t k = 0; k < K; ++k) s.push_back(per_cluster[k][j]);
      unique.insert(std::move(s));
    }
  } else {
    std::set<BlockPartition> parts;
    for (const auto& list : per_cluster) parts.insert(list.begin(), list.end());
    for (const auto& p : parts) unique.insert(BlockStructure(K, p));
  }

  BlockStructureSet out;
  out.candidates.assign(unique.begin(), unique.end());
  std::stable_sort(out.candidates.begin(), out.candidates.end(),
                   [](const BlockStructure& a, const BlockStructure& b) {
                     return cov_dim(a, DimConvention::full) < cov_dim(b, DimConvention::full);
                   });
  if (out.candidates.size() > static_cast<std::size_t>(config.max_structures)) {
    out.candidates.resize(static_cast<std::size_t>(config.max_structures));
  }
  return out;
}

}  // namespace blompe
