#include "smpnn/graph.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>
#include <random>
#include <tuple>

#include "smpnn/error.hpp"
#include "smpnn/flops.hpp"

namespace smpnn {

SparseGraph SparseGraph::from_csr(std::size_t num_nodes, std::vector<std::size_t> row_offsets,
                                  std::vector<Index> col_indices, std::vector<double> values) {
  require(row_offsets.size() == num_nodes + 1, ErrorCode::invalid_argument,
          "row_offsets must have N+1 entries");
  require(row_offsets.front() == 0 && row_offsets.back() == col_indices.size(),
          ErrorCode::invalid_argument, "row_offsets must start at 0 and end at nnz");
  require(values.size() == col_indices.size(), ErrorCode::invalid_argument,
          "values and col_indices lengths differ");

  SparseGraph g;
  g.num_nodes_ = num_nodes;
  g.degrees_.assign(num_nodes, 0.0);
  for (std::size_t i = 0; i < num_nodes; ++i) {
    require(row_offsets[i] <= row_offsets[i + 1], ErrorCode::invalid_argument,
            "row_offsets decreases at row " + std::to_string(i));
    for (std::size_t k = row_offsets[i]; k < row_offsets[i + 1]; ++k) {
      require(col_indices[k] < num_nodes, ErrorCode::invalid_argument,
              "column index out of range in row " + std::to_string(i));
      require(k == row_offsets[i] || col_indices[k - 1] < col_indices[k],
              ErrorCode::invalid_argument,
              "columns not strictly increasing in row " + std::to_string(i));
      require(std::isfinite(values[k]), ErrorCode::invalid_argument,
              "non-finite value in row " + std::to_string(i));
      g.degrees_[i] += values[k];
      if (col_indices[k] == i) g.has_self_loops_ = true;
    }
  }
  g.row_offsets_ = std::move(row_offsets);
  g.col_indices_ = std::move(col_indices);
  g.values_ = std::move(values);

  for (std::size_t i = 0; i < num_nodes; ++i) {
    auto cols = g.neighbors(i);
    auto vals = g.row_values(i);
    for (std::size_t k = 0; k < cols.size(); ++k) {
      require(g.value(cols[k], i) == vals[k] &&
                  std::binary_search(g.neighbors(cols[k]).begin(), g.neighbors(cols[k]).end(),
                                     static_cast<Index>(i)),
              ErrorCode::invalid_argument,
              "matrix is not symmetric at (" + std::to_string(i) + ", " +
                  std::to_string(cols[k]) + ")");
    }
  }
  return g;
}

double SparseGraph::value(std::size_t i, std::size_t j) const noexcept {
  auto cols = neighbors(i);
  auto it = std::lower_bound(cols.begin(), cols.end(), static_cast<Index>(j));
  if (it == cols.end() || *it != j) return 0.0;
  return values_[row_offsets_[i] + static_cast<std::size_t>(it - cols.begin())];
}

std::size_t SparseGraph::num_undirected_edges() const noexcept {
  std::size_t loops = 0;
  for (std::size_t i = 0; i < num_nodes_; ++i) {
    auto cols = neighbors(i);
    if (std::binary_search(cols.begin(), cols.end(), static_cast<Index>(i))) ++loops;
  }
  return (nnz() - loops) / 2 + loops;
}

std::size_t SparseGraph::num_components() const {
  std::vector<char> seen(num_nodes_, 0);
  std::size_t components = 0;
  std::vector<Index> stack;
  for (std::size_t s = 0; s < num_nodes_; ++s) {
    if (seen[s]) continue;
    ++components;
    seen[s] = 1;
    stack.push_back(static_cast<Index>(s));
    while (!stack.empty()) {
      const Index v = stack.back();
      stack.pop_back();
      for (Index u : neighbors(v)) {
        if (!seen[u]) {
          seen[u] = 1;
          stack.push_back(u);
        }
      }
    }
  }
  return components;
}

Tensor SparseGraph::to_dense() const {
  Tensor out(num_nodes_, num_nodes_);
  for (std::size_t i = 0; i < num_nodes_; ++i) {
    auto cols = neighbors(i);
    auto vals = row_values(i);
    for (std::size_t k = 0; k < cols.size(); ++k) out(i, cols[k]) = vals[k];
  }
  return out;
}

namespace {

struct Entry {
  Index row;
  Index col;
  double weight;
};

SparseGraph assemble(std::size_t num_nodes, std::vector<Entry> entries) {
  std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
    return std::tie(a.row, a.col) < std::tie(b.row, b.col);
  });
  std::vector<std::size_t> offsets(num_nodes + 1, 0);
  std::vector<Index> cols;
  std::vector<double> vals;
  cols.reserve(entries.size());
  vals.reserve(entries.size());
  for (std::size_t k = 0; k < entries.size(); ++k) {
    const Entry& e = entries[k];
    if (k > 0 && entries[k - 1].row == e.row && entries[k - 1].col == e.col) {
      require(vals.back() == e.weight, ErrorCode::invalid_argument,
              "conflicting weights on edge (" + std::to_string(e.row) + ", " +
                  std::to_string(e.col) + ")");
      continue;
    }
    cols.push_back(e.col);
    vals.push_back(e.weight);
    ++offsets[e.row + 1];
  }
  std::partial_sum(offsets.begin(), offsets.end(), offsets.begin());
  return SparseGraph::from_csr(num_nodes, std::move(offsets), std::move(cols), std::move(vals));
}

}  // namespace

SparseGraph build_graph(std::span<const Edge> edges, std::size_t num_nodes,
                        SelfLoopPolicy policy) {
  std::vector<Entry> entries;
  entries.reserve(2 * edges.size() + (policy == SelfLoopPolicy::add ? num_nodes : 0));
  for (std::size_t k = 0; k < edges.size(); ++k) {
    const Edge& e = edges[k];
    require(e.src < num_nodes && e.dst < num_nodes, ErrorCode::invalid_argument,
            "edge " + std::to_string(k) + " (" + std::to_string(e.src) + ", " +
                std::to_string(e.dst) + ") has an endpoint outside [0, " +
                std::to_string(num_nodes) + ")");
    require(std::isfinite(e.weight) && e.weight > 0.0, ErrorCode::invalid_argument,
            "edge " + std::to_string(k) + " has a non-positive or non-finite weight");
    entries.push_back({e.src, e.dst, e.weight});
    if (e.src != e.dst) entries.push_back({e.dst, e.src, e.weight});
  }
  SparseGraph g = assemble(num_nodes, std::move(entries));
  if (policy == SelfLoopPolicy::add) return with_self_loops(g);
  return g;
}

SparseGraph with_self_loops(const SparseGraph& g) {
  const std::size_t n = g.num_nodes();
  std::vector<std::size_t> offsets(n + 1, 0);
  std::vector<Index> cols;
  std::vector<double> vals;
  cols.reserve(g.nnz() + n);
  vals.reserve(g.nnz() + n);
  for (std::size_t i = 0; i < n; ++i) {
    auto nc = g.neighbors(i);
    auto nv = g.row_values(i);
    bool placed = false;
    for (std::size_t k = 0; k < nc.size(); ++k) {
      if (!placed && nc[k] >= i) {
        if (nc[k] != i) {
          cols.push_back(static_cast<Index>(i));
          vals.push_back(1.0);
        }
        placed = true;
      }
      cols.push_back(nc[k]);
      vals.push_back(nv[k]);
    }
    if (!placed) {
      cols.push_back(static_cast<Index>(i));
      vals.push_back(1.0);
    }
    offsets[i + 1] = cols.size();
  }
  return SparseGraph::from_csr(n, std::move(offsets), std::move(cols), std::move(vals));
}

namespace {
void require_positive_degrees(const SparseGraph& g) {
  auto deg = g.degrees();
  for (std::size_t i = 0; i < deg.size(); ++i) {
    require(deg[i] > 0.0, ErrorCode::invalid_argument,
            "node " + std::to_string(i) + " has zero degree; 1/sqrt(deg) is undefined");
  }
}
}  // namespace

NormalizedAdjacency normalize_adjacency(const SparseGraph& g) {
  require_positive_degrees(g);
  const std::size_t n = g.num_nodes();
  auto deg = g.degrees();
  std::vector<double> vals(g.values().begin(), g.values().end());
  for (std::size_t i = 0; i < n; ++i) {
    auto cols = g.neighbors(i);
    const std::size_t base = g.row_offsets()[i];
    for (std::size_t k = 0; k < cols.size(); ++k)
      vals[base + k] /= std::sqrt(deg[i] * deg[cols[k]]);
  }
  return NormalizedAdjacency(SparseGraph::from_csr(
      n, {g.row_offsets().begin(), g.row_offsets().end()},
      {g.col_indices().begin(), g.col_indices().end()}, std::move(vals)));
}

SparseGraph normalized_laplacian(const SparseGraph& g) {
  const NormalizedAdjacency a = normalize_adjacency(g);
  const SparseGraph& ag = a.graph();
  const std::size_t n = ag.num_nodes();
  std::vector<std::size_t> offsets(n + 1, 0);
  std::vector<Index> cols;
  std::vector<double> vals;
  cols.reserve(ag.nnz() + n);
  vals.reserve(ag.nnz() + n);
  for (std::size_t i = 0; i < n; ++i) {
    auto nc = ag.neighbors(i);
    auto nv = ag.row_values(i);
    bool placed = false;
    for (std::size_t k = 0; k < nc.size(); ++k) {
      if (!placed && nc[k] >= i) {
        if (nc[k] == i) {
          cols.push_back(nc[k]);
          vals.push_back(1.0 - nv[k]);
          placed = true;
          continue;
        }
        cols.push_back(static_cast<Index>(i));
        vals.push_back(1.0);
        placed = true;
      }
      cols.push_back(nc[k]);
      vals.push_back(-nv[k]);
    }
    if (!placed) {
      cols.push_back(static_cast<Index>(i));
      vals.push_back(1.0);
    }
    offsets[i + 1] = cols.size();
  }
  return SparseGraph::from_csr(n, std::move(offsets), std::move(cols), std::move(vals));
}

double dirichlet_energy(const SparseGraph& g, const Tensor& x) {
  require(x.rows() == g.num_nodes(), ErrorCode::shape_mismatch,
          "dirichlet_energy: features have " + std::to_string(x.rows()) + " rows, graph has " +
              std::to_string(g.num_nodes()) + " nodes");
  require_positive_degrees(g);
  const std::size_t n = g.num_nodes();
  const std::size_t d = x.cols();
  auto deg = g.degrees();
  std::vector<double> inv_sqrt(n);
  for (std::size_t i = 0; i < n; ++i) inv_sqrt[i] = 1.0 / std::sqrt(deg[i]);

  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    auto cols = g.neighbors(i);
    auto vals = g.row_values(i);
    const double* xi = x.row(i).data();
    for (std::size_t k = 0; k < cols.size(); ++k) {
      const std::size_t j = cols[k];
      if (j == i) continue;
      const double* xj = x.row(j).data();
      double sq = 0.0;
      for (std::size_t c = 0; c < d; ++c) {
        const double diff = xj[c] * inv_sqrt[j] - xi[c] * inv_sqrt[i];
        sq += diff * diff;
      }
      total += vals[k] * sq;
    }
  }
  return 0.5 * total;
}

double normalized_dirichlet_energy(const SparseGraph& g, const Tensor& x) {
  const double energy = dirichlet_energy(g, x);
  const double norm = x.frobenius_norm();
  if (norm == 0.0) return 0.0;
  return energy / (norm * norm);
}

Tensor spmm(const SparseGraph& g, const Tensor& x) {
  require(x.rows() == g.num_nodes(), ErrorCode::shape_mismatch,
          "spmm: features have " + std::to_string(x.rows()) + " rows, operator has " +
              std::to_string(g.num_nodes()));
  const std::size_t n = g.num_nodes();
  const std::size_t d = x.cols();
  Tensor out(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    auto cols = g.neighbors(i);
    auto vals = g.row_values(i);
    double* o = out.row(i).data();
    for (std::size_t k = 0; k < cols.size(); ++k) {
      const double w = vals[k];
      const double* xr = x.row(cols[k]).data();
      for (std::size_t c = 0; c < d; ++c) o[c] += w * xr[c];
    }
  }
  flops::add_message_passing(2ull * g.nnz() * d);
  return out;
}

Tensor spmm(const NormalizedAdjacency& a, const Tensor& x) { return spmm(a.graph(), x); }

Subgraph induced_subgraph(const SparseGraph& g, std::span<const Index> nodes) {
  const std::size_t n = g.num_nodes();
  constexpr std::int64_t kUnset = -1;
  std::vector<std::int64_t> compact(n, kUnset);
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    require(nodes[k] < n, ErrorCode::invalid_argument,
            "induced_subgraph: node " + std::to_string(nodes[k]) + " out of range");
    require(compact[nodes[k]] == kUnset, ErrorCode::invalid_argument,
            "induced_subgraph: duplicate node " + std::to_string(nodes[k]));
    compact[nodes[k]] = static_cast<std::int64_t>(k);
  }

  const std::size_t m = nodes.size();
  std::vector<std::size_t> offsets(m + 1, 0);
  std::vector<Index> cols;
  std::vector<double> vals;
  std::vector<std::pair<Index, double>> row;
  for (std::size_t k = 0; k < m; ++k) {
    row.clear();
    auto nc = g.neighbors(nodes[k]);
    auto nv = g.row_values(nodes[k]);
    for (std::size_t e = 0; e < nc.size(); ++e) {
      const std::int64_t c = compact[nc[e]];
      if (c != kUnset) row.emplace_back(static_cast<Index>(c), nv[e]);
    }
    std::sort(row.begin(), row.end());
    for (const auto& [c, v] : row) {
      cols.push_back(c);
      vals.push_back(v);
    }
    offsets[k + 1] = cols.size();
  }
  return {SparseGraph::from_csr(m, std::move(offsets), std::move(cols), std::move(vals)),
          std::vector<Index>(nodes.begin(), nodes.end())};
}

Subgraph neighbor_sample(const SparseGraph& g, std::span<const Index> seeds,
                         std::span<const std::size_t> fanouts, std::uint64_t rng_seed) {
  require(!seeds.empty(), ErrorCode::invalid_argument, "neighbor_sample: empty seed set");
  require(!fanouts.empty(), ErrorCode::invalid_argument, "neighbor_sample: no fanouts given");
  const std::size_t n = g.num_nodes();
  std::vector<char> in_union(n, 0);
  std::vector<Index> order;
  std::vector<Index> frontier;
  for (Index s : seeds) {
    require(s < n, ErrorCode::invalid_argument,
            "neighbor_sample: seed " + std::to_string(s) + " out of range");
    if (!in_union[s]) {
      in_union[s] = 1;
      order.push_back(s);
      frontier.push_back(s);
    }
  }

  std::mt19937_64 rng(rng_seed);
  std::vector<Index> candidates;
  for (std::size_t fanout : fanouts) {
    std::vector<Index> next;
    for (Index v : frontier) {
      candidates.clear();
      for (Index u : g.neighbors(v))
        if (u != v) candidates.push_back(u);
      const std::size_t take = std::min(fanout, candidates.size());
      // Partial Fisher-Yates: the first `take` slots are a uniform sample
      // without replacement.
      for (std::size_t k = 0; k < take; ++k) {
        std::uniform_int_distribution<std::size_t> pick(k, candidates.size() - 1);
        std::swap(candidates[k], candidates[pick(rng)]);
        const Index u = candidates[k];
        if (!in_union[u]) {
          in_union[u] = 1;
          order.push_back(u);
          next.push_back(u);
        }
      }
    }
    frontier = std::move(next);
  }
  return induced_subgraph(g, order);
}

}  // namespace smpnn
