#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "agrn/graph.hpp"

namespace agrn {

/// Multilevel Graclus coarsening. levels[0] is the input graph and
/// levels[k + 1] is levels[k] after one round of greedy pair matching;
/// parents[k][i] is the index at level k + 1 of node i at level k.
struct CoarseningHierarchy {
  std::vector<ElectrodeGraph> levels;
  std::vector<std::vector<std::size_t>> parents;

  std::size_t n_levels() const { return parents.size(); }
};

/// Fake-node marker per padded position of one level.
using PoolMask = std::vector<std::uint8_t>;

/// Balanced-binary-tree layout: slots[k][p] is the level-k node sitting at
/// padded position p, or kFakeSlot. Padded sizes halve from level to level.
struct PoolLayout {
  static constexpr std::int64_t kFakeSlot = -1;

  std::vector<std::vector<std::int64_t>> slots;
  std::vector<PoolMask> masks;
  std::vector<std::size_t> n_fake_per_level;

  /// Level-0 padded ordering (the input permutation).
  std::span<const std::int64_t> permutation() const { return slots.front(); }
  std::size_t padded_size(std::size_t level) const { return slots[level].size(); }
  std::size_t n_real() const;
};

/// Greedy matching that maximises w_ij (1/d_i + 1/d_j). Nodes are visited in
/// a seeded random order; ties go to the lowest neighbour index.
CoarseningHierarchy graclus_coarsen(const ElectrodeGraph& graph, std::size_t n_levels,
                                    std::uint64_t seed);

/// One matching round: returns the parent of every node and the number of
/// clusters. Exposed for tests.
std::vector<std::size_t> graclus_match(const Matrix& adjacency, std::uint64_t seed,
                                       std::size_t& n_clusters);

/// Sums fine weights between clusters; intra-cluster weight is dropped.
Matrix coarsen_adjacency(const Matrix& adjacency, std::span<const std::size_t> parents,
                         std::size_t n_clusters);

PoolLayout build_permutation(const CoarseningHierarchy& hierarchy);

/// Reorders batch x N rows into batch x padded_N; fake slots are 0.
std::vector<double> permute_node_signals(std::span<const double> x, std::size_t batch,
                                         std::size_t n_nodes, const PoolLayout& layout);

/// Inverse of permute_node_signals on real slots.
std::vector<double> unpermute_node_signals(std::span<const double> x, std::size_t batch,
                                           const PoolLayout& layout);

/// Padded, permuted graph at every level: fake nodes become isolated nodes.
std::vector<ElectrodeGraph> padded_graphs(const CoarseningHierarchy& hierarchy,
                                          const PoolLayout& layout);

/// Text form: header line, then "level <k> nodes <n>" followed by a
/// "parents" integer list per level, then the permutation and fake counts.
/// Weights are not stored; read_hierarchy re-derives them from the base graph.
void write_hierarchy(std::ostream& out, const CoarseningHierarchy& hierarchy,
                     const PoolLayout& layout);
CoarseningHierarchy read_hierarchy(std::istream& in, const ElectrodeGraph& base);

}  // namespace agrn
