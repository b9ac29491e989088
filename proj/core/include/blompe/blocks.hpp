#pragma once

#include <compare>
#include <span>
#include <vector>

#include "blompe/linalg.hpp"

namespace blompe {

/// How covariance parameters of a block-diagonal matrix are counted.
///  full:          Σ_g c_g (c_g + 1) / 2 (diagonal and off-diagonal entries)
///  offdiag: Σ_g c_g (c_g - 1) / 2 (off-diagonal entries only)
enum class DimConvention { full, offdiag };

/// Partition of the covariate indices {0, ..., D-1} into groups. Always
/// stored in canonical form: members ascending inside each group, groups
/// ordered by their smallest member. Two partitions that differ only by
/// block order or within-block order compare equal.
class BlockPartition {
 public:
  BlockPartition() = default;

  /// Throws Errc::invalid_partition unless `groups` covers {0..D-1} exactly
  /// once with non-empty groups. `expected_dim` < 0 means "infer D".
  static BlockPartition from_groups(std::vector<std::vector<int>> groups,
                                    int expected_dim = -1);
  /// Same, for 1-based indices as used in files and on the command line.
  static BlockPartition from_one_based(std::vector<std::vector<int>> groups,
                                       int expected_dim = -1);
  static BlockPartition singletons(int dim);
  static BlockPartition one_block(int dim);
  /// Partition induced by a label per index (equal labels share a group).
  static BlockPartition from_labels(std::span<const int> labels);

  int dim() const { return dim_; }
  std::size_t group_count() const { return groups_.size(); }
  const std::vector<std::vector<int>>& groups() const { return groups_; }
  std::vector<std::vector<int>> one_based_groups() const;

  /// Group number of every index.
  std::vector<int> labels() const;
  bool same_group(int i, int j) const;

  auto operator<=>(const BlockPartition&) const = default;

 private:
  std::vector<std::vector<int>> groups_;
  int dim_ = 0;
};

/// Canonical representative of a raw 0-based partition.
BlockPartition canonicalize(std::vector<std::vector<int>> groups);

/// One partition per mixture component.
using BlockStructure = std::vector<BlockPartition>;

int cov_dim(const BlockPartition& partition, DimConvention convention);
int cov_dim(const BlockStructure& structure, DimConvention convention);

/// Zeroes every entry linking two different groups. Throws Errc::precondition
/// if the input is asymmetric beyond 1e-10 (relative to its largest entry).
Matrix project_to_blocks(const Matrix& sym, const BlockPartition& partition);

bool conforms_to_blocks(const Matrix& m, const BlockPartition& partition);

/// How per-cluster threshold partitions are combined into structures.
///  matched_grid: B = (B_1(λ_j), ..., B_K(λ_j)) for each grid position j.
///  shared:       every partition found for any cluster, used by all clusters.
enum class CombineMode { matched_grid, shared };

struct DetectConfig {
  int threshold_count = 20;
  int max_structures = 20;
  bool include_one_block = true;
  CombineMode combine = CombineMode::matched_grid;
};

/// Candidate block structures, unique and sorted by total full dimension
/// (ties broken lexicographically).
struct BlockStructureSet {
  std::vector<BlockStructure> candidates;
};

/// Builds candidate structures from per-cluster residual covariances by
/// thresholding absolute correlations on a grid of their empirical
/// quantiles (highest first) and taking connected components. The
/// all-singletons structure is always present.
BlockStructureSet detect_candidates(std::span<const Matrix> residual_covs,
                                    const DetectConfig& config = {});

/// Connected components of the graph with edges |corr_ij| >= threshold
/// (and |corr_ij| > 1e-12).
BlockPartition threshold_partition(const Matrix& abs_corr, double threshold);

}  // namespace blompe
