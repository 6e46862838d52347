#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "smpnn/tensor.hpp"

namespace smpnn {

using Index = std::uint32_t;

enum class SelfLoopPolicy { add, keep_as_given };

struct Edge {
  Index src = 0;
  Index dst = 0;
  double weight = 1.0;
};

/// Immutable symmetric CSR adjacency.
///
/// Invariants: row_offsets is non-decreasing with row_offsets[0] = 0 and
/// row_offsets[N] = nnz; column indices are in range and strictly increasing
/// within a row; entry (i, j) exists iff (j, i) exists with the same value.
/// degrees[i] is the row sum of the stored values (self-loops included).
class SparseGraph {
 public:
  SparseGraph() = default;

  /// Validates every invariant above; throws Error(invalid_argument) otherwise.
  static SparseGraph from_csr(std::size_t num_nodes, std::vector<std::size_t> row_offsets,
                              std::vector<Index> col_indices, std::vector<double> values);

  std::size_t num_nodes() const noexcept { return num_nodes_; }
  std::size_t nnz() const noexcept { return col_indices_.size(); }
  bool has_self_loops() const noexcept { return has_self_loops_; }

  std::span<const std::size_t> row_offsets() const noexcept { return row_offsets_; }
  std::span<const Index> col_indices() const noexcept { return col_indices_; }
  std::span<const double> values() const noexcept { return values_; }
  std::span<const double> degrees() const noexcept { return degrees_; }

  std::span<const Index> neighbors(std::size_t i) const noexcept {
    return {col_indices_.data() + row_offsets_[i], row_offsets_[i + 1] - row_offsets_[i]};
  }
  std::span<const double> row_values(std::size_t i) const noexcept {
    return {values_.data() + row_offsets_[i], row_offsets_[i + 1] - row_offsets_[i]};
  }

  /// Stored value of (i, j), or 0 when absent.
  double value(std::size_t i, std::size_t j) const noexcept;
  /// Undirected edge count, self-loops counted once each.
  std::size_t num_undirected_edges() const noexcept;
  /// Connected components via BFS over stored entries.
  std::size_t num_components() const;
  Tensor to_dense() const;

  bool operator==(const SparseGraph&) const = default;

 private:
  std::size_t num_nodes_ = 0;
  std::vector<std::size_t> row_offsets_{0};
  std::vector<Index> col_indices_;
  std::vector<double> values_;
  std::vector<double> degrees_;
  bool has_self_loops_ = false;
};

/// Ã = D^{-1/2} A D^{-1/2} over a source graph. Only normalize_adjacency
/// produces one, so holding this type certifies every degree was positive.
class NormalizedAdjacency {
 public:
  const SparseGraph& graph() const noexcept { return graph_; }
  std::size_t num_nodes() const noexcept { return graph_.num_nodes(); }
  std::size_t nnz() const noexcept { return graph_.nnz(); }

 private:
  friend NormalizedAdjacency normalize_adjacency(const SparseGraph& g);
  explicit NormalizedAdjacency(SparseGraph g) : graph_(std::move(g)) {}
  SparseGraph graph_;
};

/// Symmetrizes the edge list and assembles canonical CSR. Repeated edges
/// merge when their weights agree; conflicting weights are rejected.
SparseGraph build_graph(std::span<const Edge> edges, std::size_t num_nodes,
                        SelfLoopPolicy policy = SelfLoopPolicy::add);

/// Returns g with a unit self-loop on every node lacking one.
SparseGraph with_self_loops(const SparseGraph& g);

NormalizedAdjacency normalize_adjacency(const SparseGraph& g);

/// I − Ã as a sparse symmetric matrix.
SparseGraph normalized_laplacian(const SparseGraph& g);

/// ½ Σ over ordered pairs (i, j), i ≠ j, of w_ij ‖x_j/√deg_j − x_i/√deg_i‖².
/// For unit weights this is the plain edge sum; with weights it equals
/// trace(Xᵀ L_norm X) exactly.
double dirichlet_energy(const SparseGraph& g, const Tensor& x);

/// Dirichlet energy divided by ‖X‖²_F (0 when X = 0).
double normalized_dirichlet_energy(const SparseGraph& g, const Tensor& x);

/// Ã X, accumulated per row; counts 2·nnz·D message-passing FLOPs.
Tensor spmm(const NormalizedAdjacency& a, const Tensor& x);
/// Same kernel over raw stored values.
Tensor spmm(const SparseGraph& g, const Tensor& x);

struct Subgraph {
  SparseGraph graph;
  /// original_ids[k] is the source-graph id of compact node k.
  std::vector<Index> original_ids;
};

/// Keeps exactly the entries whose endpoints are both selected. Compact id k
/// corresponds to nodes[k]; degrees are recomputed on the subgraph.
Subgraph induced_subgraph(const SparseGraph& g, std::span<const Index> nodes);

/// Multi-hop uniform neighbour sampling. Hop h draws min(fanouts[h], deg)
/// distinct non-self neighbours of every frontier node; the result is the
/// induced subgraph over seeds ∪ sampled nodes, seeds first in the given order.
Subgraph neighbor_sample(const SparseGraph& g, std::span<const Index> seeds,
                         std::span<const std::size_t> fanouts, std::uint64_t rng_seed);

}  // namespace smpnn
