#include "agrn/coarsening.hpp"

#include <algorithm>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "agrn/random.hpp"

namespace agrn {
namespace {

constexpr std::size_t kMaxLevels = 24;

std::vector<std::int64_t> read_int_list(std::istream& in, const std::string& key) {
  std::string line;
  while (std::getline(in, line) && line.find_first_not_of(" \t\r") == std::string::npos) {
  }
  std::istringstream fields(line);
  std::string name;
  fields >> name;
  if (name != key) throw std::runtime_error("read_hierarchy: expected '" + key + "', got '" + name + "'");
  std::vector<std::int64_t> values;
  std::int64_t v;
  while (fields >> v) values.push_back(v);
  if (!fields.eof()) throw std::runtime_error("read_hierarchy: non-integer entry in '" + key + "'");
  return values;
}

}  // namespace

std::size_t PoolLayout::n_real() const {
  return n_fake_per_level.empty() ? 0 : slots.front().size() - n_fake_per_level.front();
}

std::vector<std::size_t> graclus_match(const Matrix& adjacency, std::uint64_t seed,
                                       std::size_t& n_clusters) {
  const std::size_t n = adjacency.rows();
  std::vector<double> degree(n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (double w : adjacency.row(i)) degree[i] += w;

  std::mt19937_64 rng(seed);
  const std::vector<std::size_t> order = shuffled_indices(n, rng);

  constexpr std::size_t kUnassigned = static_cast<std::size_t>(-1);
  std::vector<std::size_t> parent(n, kUnassigned);
  n_clusters = 0;
  for (std::size_t i : order) {
    if (parent[i] != kUnassigned) continue;
    std::size_t best = kUnassigned;
    double best_score = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double w = adjacency(i, j);
      if (j == i || parent[j] != kUnassigned || w <= 0.0) continue;
      const double score = w * (1.0 / degree[i] + 1.0 / degree[j]);
      // Strict comparison with ascending j keeps the lowest index on ties.
      if (best == kUnassigned || score > best_score) {
        best = j;
        best_score = score;
      }
    }
    parent[i] = n_clusters;
    if (best != kUnassigned) parent[best] = n_clusters;
    ++n_clusters;
  }
  return parent;
}

Matrix coarsen_adjacency(const Matrix& adjacency, std::span<const std::size_t> parents,
                         std::size_t n_clusters) {
  if (parents.size() != adjacency.rows()) {
    throw std::invalid_argument("coarsen_adjacency: parents size does not match graph");
  }
  Matrix coarse(n_clusters, n_clusters);
  for (std::size_t i = 0; i < adjacency.rows(); ++i) {
    for (std::size_t j = 0; j < adjacency.cols(); ++j) {
      const std::size_t a = parents[i];
      const std::size_t b = parents[j];
      if (a >= n_clusters || b >= n_clusters) {
        throw std::invalid_argument("coarsen_adjacency: parent index out of range");
      }
      if (a < b) coarse(a, b) += adjacency(i, j);
    }
  }
  for (std::size_t a = 0; a < n_clusters; ++a)
    for (std::size_t b = a + 1; b < n_clusters; ++b) coarse(b, a) = coarse(a, b);
  return coarse;
}

CoarseningHierarchy graclus_coarsen(const ElectrodeGraph& graph, std::size_t n_levels,
                                    std::uint64_t seed) {
  if (n_levels < 1) throw std::invalid_argument("graclus_coarsen: n_levels must be at least 1");
  if (n_levels > kMaxLevels) {
    throw std::invalid_argument("graclus_coarsen: " + std::to_string(n_levels) +
                                " levels would pad the graph beyond 2^" + std::to_string(kMaxLevels) +
                                " slots per coarse node");
  }
  if (graph.n_nodes() < 2) throw std::invalid_argument("graclus_coarsen: graph needs at least 2 nodes");

  CoarseningHierarchy h;
  h.levels.push_back(graph);
  for (std::size_t level = 0; level < n_levels; ++level) {
    const Matrix& fine = h.levels.back().adjacency;
    std::size_t n_clusters = 0;
    auto parents = graclus_match(fine, mix_seed(seed, level), n_clusters);
    Matrix coarse = coarsen_adjacency(fine, parents, n_clusters);
    // Summed weights can exceed 1, so skip the [0,1] check of from_adjacency.
    ElectrodeGraph next;
    next.laplacian = normalized_laplacian(coarse);
    next.adjacency = std::move(coarse);
    h.levels.push_back(std::move(next));
    h.parents.push_back(std::move(parents));
  }
  return h;
}

PoolLayout build_permutation(const CoarseningHierarchy& hierarchy) {
  const std::size_t n_levels = hierarchy.n_levels();
  if (n_levels == 0 || hierarchy.levels.size() != n_levels + 1) {
    throw std::invalid_argument("build_permutation: malformed hierarchy");
  }
  PoolLayout layout;
  layout.slots.resize(n_levels + 1);
  auto& coarsest = layout.slots[n_levels];
  coarsest.resize(hierarchy.levels[n_levels].n_nodes());
  std::iota(coarsest.begin(), coarsest.end(), std::int64_t{0});

  for (std::size_t k = n_levels; k-- > 0;) {
    const auto& parents = hierarchy.parents[k];
    const std::size_t n_coarse = hierarchy.levels[k + 1].n_nodes();
    if (parents.size() != hierarchy.levels[k].n_nodes()) {
      throw std::invalid_argument("build_permutation: parents of level " + std::to_string(k) +
                                  " do not cover its nodes");
    }
    std::vector<std::vector<std::int64_t>> children(n_coarse);
    for (std::size_t i = 0; i < parents.size(); ++i) {
      if (parents[i] >= n_coarse) throw std::invalid_argument("build_permutation: parent out of range");
      children[parents[i]].push_back(static_cast<std::int64_t>(i));
    }
    auto& fine_slots = layout.slots[k];
    fine_slots.reserve(2 * layout.slots[k + 1].size());
    for (std::int64_t coarse : layout.slots[k + 1]) {
      if (coarse == PoolLayout::kFakeSlot) {
        fine_slots.insert(fine_slots.end(), {PoolLayout::kFakeSlot, PoolLayout::kFakeSlot});
        continue;
      }
      const auto& kids = children[static_cast<std::size_t>(coarse)];
      if (kids.empty() || kids.size() > 2) {
        throw std::invalid_argument("build_permutation: coarse node with " +
                                    std::to_string(kids.size()) + " children");
      }
      fine_slots.push_back(kids[0]);
      fine_slots.push_back(kids.size() == 2 ? kids[1] : PoolLayout::kFakeSlot);
    }
  }

  for (const auto& slots : layout.slots) {
    PoolMask mask(slots.size());
    std::size_t fakes = 0;
    for (std::size_t p = 0; p < slots.size(); ++p) {
      mask[p] = slots[p] == PoolLayout::kFakeSlot;
      fakes += mask[p];
    }
    layout.masks.push_back(std::move(mask));
    layout.n_fake_per_level.push_back(fakes);
  }
  return layout;
}

std::vector<double> permute_node_signals(std::span<const double> x, std::size_t batch,
                                         std::size_t n_nodes, const PoolLayout& layout) {
  if (layout.slots.empty()) throw std::invalid_argument("permute_node_signals: empty layout");
  if (n_nodes != layout.n_real()) {
    throw std::invalid_argument("permute_node_signals: signal has " + std::to_string(n_nodes) +
                                " nodes but the permutation holds " +
                                std::to_string(layout.n_real()));
  }
  if (x.size() != batch * n_nodes) throw std::invalid_argument("permute_node_signals: size mismatch");
  const auto perm = layout.permutation();
  std::vector<double> out(batch * perm.size(), 0.0);
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t p = 0; p < perm.size(); ++p) {
      if (perm[p] != PoolLayout::kFakeSlot) {
        out[b * perm.size() + p] = x[b * n_nodes + static_cast<std::size_t>(perm[p])];
      }
    }
  }
  return out;
}

std::vector<double> unpermute_node_signals(std::span<const double> x, std::size_t batch,
                                           const PoolLayout& layout) {
  const auto perm = layout.permutation();
  const std::size_t n_real = layout.n_real();
  if (x.size() != batch * perm.size()) throw std::invalid_argument("unpermute_node_signals: size mismatch");
  std::vector<double> out(batch * n_real);
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t p = 0; p < perm.size(); ++p)
      if (perm[p] != PoolLayout::kFakeSlot)
        out[b * n_real + static_cast<std::size_t>(perm[p])] = x[b * perm.size() + p];
  return out;
}

std::vector<ElectrodeGraph> padded_graphs(const CoarseningHierarchy& hierarchy,
                                          const PoolLayout& layout) {
  std::vector<ElectrodeGraph> out;
  for (std::size_t k = 0; k < layout.slots.size(); ++k) {
    const auto& slots = layout.slots[k];
    const Matrix& a = hierarchy.levels[k].adjacency;
    Matrix padded(slots.size(), slots.size());
    for (std::size_t p = 0; p < slots.size(); ++p) {
      if (slots[p] == PoolLayout::kFakeSlot) continue;
      for (std::size_t q = 0; q < slots.size(); ++q) {
        if (slots[q] == PoolLayout::kFakeSlot) continue;
        padded(p, q) = a(static_cast<std::size_t>(slots[p]), static_cast<std::size_t>(slots[q]));
      }
    }
    ElectrodeGraph g;
    g.laplacian = normalized_laplacian(padded);
    g.adjacency = std::move(padded);
    out.push_back(std::move(g));
  }
  return out;
}

void write_hierarchy(std::ostream& out, const CoarseningHierarchy& hierarchy,
                     const PoolLayout& layout) {
  out << "agrn-hierarchy 1\n";
  out << "n_levels " << hierarchy.n_levels() << '\n';
  for (std::size_t k = 0; k < hierarchy.n_levels(); ++k) {
    out << "level " << k << " nodes " << hierarchy.levels[k].n_nodes() << '\n';
    out << "parents";
    for (std::size_t p : hierarchy.parents[k]) out << ' ' << p;
    out << '\n';
  }
  out << "level " << hierarchy.n_levels() << " nodes " << hierarchy.levels.back().n_nodes() << '\n';
  out << "permutation";
  for (std::int64_t p : layout.permutation()) out << ' ' << p;
  out << '\n';
  out << "n_fake";
  for (std::size_t f : layout.n_fake_per_level) out << ' ' << f;
  out << '\n';
}

CoarseningHierarchy read_hierarchy(std::istream& in, const ElectrodeGraph& base) {
  std::string magic;
  int version = 0;
  if (!(in >> magic >> version) || magic != "agrn-hierarchy" || version != 1) {
    throw std::runtime_error("read_hierarchy: missing 'agrn-hierarchy 1' header");
  }
  const auto levels_field = read_int_list(in, "n_levels");
  if (levels_field.size() != 1 || levels_field[0] < 1) {
    throw std::runtime_error("read_hierarchy: bad n_levels");
  }
  const auto n_levels = static_cast<std::size_t>(levels_field[0]);

  CoarseningHierarchy h;
  h.levels.push_back(base);
  auto expect_level = [&](std::size_t k) {
    std::string word;
    std::size_t index = 0, nodes = 0;
    if (!(in >> word >> index) || word != "level" || index != k || !(in >> word >> nodes) ||
        word != "nodes") {
      throw std::runtime_error("read_hierarchy: malformed 'level " + std::to_string(k) + "' line");
    }
    if (nodes != h.levels[k].n_nodes()) {
      throw std::runtime_error("read_hierarchy: level " + std::to_string(k) + " declares " +
                               std::to_string(nodes) + " nodes but the graph has " +
                               std::to_string(h.levels[k].n_nodes()));
    }
  };
  for (std::size_t k = 0; k < n_levels; ++k) {
    expect_level(k);
    const auto raw = read_int_list(in, "parents");
    if (raw.size() != h.levels[k].n_nodes()) {
      throw std::runtime_error("read_hierarchy: parents list of level " + std::to_string(k) +
                               " has the wrong length");
    }
    std::vector<std::size_t> parents;
    std::size_t n_clusters = 0;
    for (std::int64_t p : raw) {
      if (p < 0) throw std::runtime_error("read_hierarchy: negative parent index");
      parents.push_back(static_cast<std::size_t>(p));
      n_clusters = std::max(n_clusters, parents.back() + 1);
    }
    Matrix coarse = coarsen_adjacency(h.levels[k].adjacency, parents, n_clusters);
    ElectrodeGraph next;
    next.laplacian = normalized_laplacian(coarse);
    next.adjacency = std::move(coarse);
    h.levels.push_back(std::move(next));
    h.parents.push_back(std::move(parents));
  }
  expect_level(n_levels);

  const auto perm = read_int_list(in, "permutation");
  const PoolLayout layout = build_permutation(h);
  if (!std::equal(perm.begin(), perm.end(), layout.permutation().begin(), layout.permutation().end())) {
    throw std::runtime_error("read_hierarchy: stored permutation disagrees with the parents lists");
  }
  return h;
}

}  // namespace agrn
