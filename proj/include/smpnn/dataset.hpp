#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "smpnn/graph.hpp"
#include "smpnn/tensor.hpp"

namespace smpnn {

/// Node labels: one class id per node, or a binary target matrix
/// (N × tasks) for multi-label data.
struct Labels {
  std::vector<int> classes;
  Tensor targets;
  bool multilabel = false;

  std::size_t size() const noexcept { return multilabel ? targets.rows() : classes.size(); }
  /// Class count for single-label data, task count for multi-label data.
  std::size_t num_outputs() const;
};

struct SplitSpec {
  std::vector<Index> train;
  std::vector<Index> val;
  std::vector<Index> test;

  /// Throws unless the three lists are pairwise disjoint and inside [0, n).
  void validate(std::size_t num_nodes) const;
};

struct Dataset {
  SparseGraph graph;
  Tensor features;
  Labels labels;
  SplitSpec split;
  /// Hash of the input files or of the generator parameters.
  std::string fingerprint;

  void validate() const;
};

enum class GraphKind { complete, path, cycle, sbm, erdos_renyi };

struct SyntheticParams {
  GraphKind kind = GraphKind::sbm;
  std::size_t num_nodes = 100;  // complete, path, cycle, erdos_renyi
  double edge_prob = 0.1;       // erdos_renyi
  std::size_t num_blocks = 4;   // sbm
  std::size_t block_size = 250;
  double p_in = 0.05;
  double p_out = 0.005;
  std::size_t feature_dim = 16;
  /// Distance of each class mean from the origin; noise is unit Gaussian.
  double mean_separation = 1.0;
  double train_fraction = 0.5;
  double val_fraction = 0.25;
  SelfLoopPolicy self_loops = SelfLoopPolicy::add;
  std::uint64_t seed = 0;
};

/// Deterministic given params.seed. Non-SBM kinds get Gaussian features and
/// all-zero labels.
Dataset make_synthetic(const SyntheticParams& params);

/// G(N, M): exactly num_edges distinct undirected non-loop edges drawn
/// uniformly, self-loop policy applied afterwards.
SparseGraph make_gnm_graph(std::size_t num_nodes, std::size_t num_edges, std::uint64_t seed,
                           SelfLoopPolicy policy = SelfLoopPolicy::add);

/// Random disjoint split of [0, n).
SplitSpec random_split(std::size_t n, double train_fraction, double val_fraction,
                       std::uint64_t seed);

GraphKind parse_graph_kind(const std::string& name);
std::string to_string(GraphKind kind);

}  // namespace smpnn
