#include "smpnn/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>
#include <unordered_set>

#include "smpnn/error.hpp"
#include "smpnn/io.hpp"

namespace smpnn {

std::size_t Labels::num_outputs() const {
  if (multilabel) return targets.cols();
  if (classes.empty()) return 0;
  return static_cast<std::size_t>(*std::max_element(classes.begin(), classes.end())) + 1;
}

void SplitSpec::validate(std::size_t num_nodes) const {
  std::vector<char> owner(num_nodes, 0);
  const std::vector<Index>* lists[] = {&train, &val, &test};
  const char* names[] = {"train", "val", "test"};
  for (int s = 0; s < 3; ++s) {
    for (Index id : *lists[s]) {
      require(id < num_nodes, ErrorCode::invalid_argument,
              std::string(names[s]) + " split contains node " + std::to_string(id) +
                  " outside [0, " + std::to_string(num_nodes) + ")");
      require(owner[id] == 0, ErrorCode::invalid_argument,
              "node " + std::to_string(id) + " appears twice across splits (" + names[s] + ")");
      owner[id] = static_cast<char>(s + 1);
    }
  }
}

void Dataset::validate() const {
  const std::size_t n = graph.num_nodes();
  require(features.rows() == n, ErrorCode::shape_mismatch,
          "feature rows " + std::to_string(features.rows()) + " != graph nodes " +
              std::to_string(n));
  require(labels.size() == n, ErrorCode::shape_mismatch,
          "label count " + std::to_string(labels.size()) + " != graph nodes " +
              std::to_string(n));
  for (int c : labels.classes)
    require(c >= 0, ErrorCode::invalid_argument, "negative class label");
  split.validate(n);
}

SplitSpec random_split(std::size_t n, double train_fraction, double val_fraction,
                       std::uint64_t seed) {
  require(train_fraction >= 0 && val_fraction >= 0 && train_fraction + val_fraction <= 1.0,
          ErrorCode::invalid_argument, "split fractions must be non-negative and sum to <= 1");
  std::vector<Index> perm(n);
  std::iota(perm.begin(), perm.end(), Index{0});
  std::mt19937_64 rng(seed);
  std::shuffle(perm.begin(), perm.end(), rng);
  const auto n_train = static_cast<std::size_t>(std::round(train_fraction * n));
  const auto n_val =
      std::min(n - n_train, static_cast<std::size_t>(std::round(val_fraction * n)));
  SplitSpec split;
  split.train.assign(perm.begin(), perm.begin() + n_train);
  split.val.assign(perm.begin() + n_train, perm.begin() + n_train + n_val);
  split.test.assign(perm.begin() + n_train + n_val, perm.end());
  for (auto* list : {&split.train, &split.val, &split.test}) std::sort(list->begin(), list->end());
  return split;
}

SparseGraph make_gnm_graph(std::size_t num_nodes, std::size_t num_edges, std::uint64_t seed,
                           SelfLoopPolicy policy) {
  require(num_nodes >= 2, ErrorCode::invalid_argument, "G(N, M) needs at least 2 nodes");
  const double max_edges = 0.5 * static_cast<double>(num_nodes) * (num_nodes - 1);
  require(static_cast<double>(num_edges) <= max_edges, ErrorCode::invalid_argument,
          "requested " + std::to_string(num_edges) + " edges, more than N(N-1)/2");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::uint64_t> pick(0, num_nodes - 1);
  std::unordered_set<std::uint64_t> seen;
  seen.reserve(num_edges * 2);
  std::vector<Edge> edges;
  edges.reserve(num_edges);
  while (edges.size() < num_edges) {
    std::uint64_t a = pick(rng), b = pick(rng);
    if (a == b) continue;
    if (a > b) std::swap(a, b);
    if (!seen.insert(a * num_nodes + b).second) continue;
    edges.push_back({static_cast<Index>(a), static_cast<Index>(b), 1.0});
  }
  return build_graph(edges, num_nodes, policy);
}

namespace {

std::string describe(const SyntheticParams& p) {
  std::ostringstream s;
  s.precision(17);
  s << "synthetic kind=" << to_string(p.kind) << " n=" << p.num_nodes << " p=" << p.edge_prob
    << " blocks=" << p.num_blocks << " block_size=" << p.block_size << " p_in=" << p.p_in
    << " p_out=" << p.p_out << " dim=" << p.feature_dim << " sep=" << p.mean_separation
    << " train=" << p.train_fraction << " val=" << p.val_fraction
    << " loops=" << (p.self_loops == SelfLoopPolicy::add ? "add" : "keep") << " seed=" << p.seed;
  return s.str();
}

void check_prob(double p, const char* name) {
  require(p >= 0.0 && p <= 1.0 && std::isfinite(p), ErrorCode::invalid_argument,
          std::string(name) + " must lie in [0, 1]");
}

}  // namespace

Dataset make_synthetic(const SyntheticParams& p) {
  std::mt19937_64 rng(p.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<Edge> edges;
  std::size_t n = p.num_nodes;
  std::vector<int> classes;

  switch (p.kind) {
    case GraphKind::complete:
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
          edges.push_back({static_cast<Index>(i), static_cast<Index>(j), 1.0});
      break;
    case GraphKind::path:
      for (std::size_t i = 0; i + 1 < n; ++i)
        edges.push_back({static_cast<Index>(i), static_cast<Index>(i + 1), 1.0});
      break;
    case GraphKind::cycle:
      require(n >= 3, ErrorCode::invalid_argument, "cycle needs at least 3 nodes");
      for (std::size_t i = 0; i < n; ++i)
        edges.push_back({static_cast<Index>(i), static_cast<Index>((i + 1) % n), 1.0});
      break;
    case GraphKind::erdos_renyi:
      check_prob(p.edge_prob, "edge_prob");
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
          if (unif(rng) < p.edge_prob)
            edges.push_back({static_cast<Index>(i), static_cast<Index>(j), 1.0});
      break;
    case GraphKind::sbm: {
      check_prob(p.p_in, "p_in");
      check_prob(p.p_out, "p_out");
      require(p.p_in > p.p_out, ErrorCode::invalid_argument, "SBM requires p_in > p_out");
      require(p.num_blocks >= 1 && p.block_size >= 1, ErrorCode::invalid_argument,
              "SBM needs at least one non-empty block");
      n = p.num_blocks * p.block_size;
      classes.resize(n);
      for (std::size_t i = 0; i < n; ++i) classes[i] = static_cast<int>(i / p.block_size);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
          const double prob = classes[i] == classes[j] ? p.p_in : p.p_out;
          if (prob > 0.0 && unif(rng) < prob)
            edges.push_back({static_cast<Index>(i), static_cast<Index>(j), 1.0});
        }
      break;
    }
  }

  Dataset data;
  data.graph = build_graph(edges, n, p.self_loops);
  require(p.feature_dim >= 1, ErrorCode::invalid_argument, "feature_dim must be positive");
  data.features = Tensor(n, p.feature_dim);
  for (double& v : data.features.data()) v = gauss(rng);

  if (p.kind == GraphKind::sbm) {
    // Class means: scaled basis vectors when they fit, random unit
    // directions otherwise.
    Tensor means(p.num_blocks, p.feature_dim);
    for (std::size_t c = 0; c < p.num_blocks; ++c) {
      if (p.num_blocks <= p.feature_dim) {
        means(c, c) = p.mean_separation;
      } else {
        double norm = 0.0;
        for (double& v : means.row(c)) {
          v = gauss(rng);
          norm += v * v;
        }
        norm = std::sqrt(norm);
        for (double& v : means.row(c)) v *= p.mean_separation / norm;
      }
    }
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t c = 0; c < p.feature_dim; ++c)
        data.features(i, c) += means(classes[i], c);
    data.labels.classes = std::move(classes);
  } else {
    data.labels.classes.assign(n, 0);
  }
  data.split = random_split(n, p.train_fraction, p.val_fraction, p.seed ^ 0x5bd1e995ULL);
  data.fingerprint = io::fingerprint_bytes(describe(p));
  return data;
}

GraphKind parse_graph_kind(const std::string& name) {
  if (name == "complete") return GraphKind::complete;
  if (name == "path") return GraphKind::path;
  if (name == "cycle") return GraphKind::cycle;
  if (name == "sbm") return GraphKind::sbm;
  if (name == "erdos_renyi" || name == "er") return GraphKind::erdos_renyi;
  throw Error(ErrorCode::invalid_argument, "unknown graph kind '" + name + "'");
}

std::string to_string(GraphKind kind) {
  switch (kind) {
    case GraphKind::complete: return "complete";
    case GraphKind::path: return "path";
    case GraphKind::cycle: return "cycle";
    case GraphKind::sbm: return "sbm";
    case GraphKind::erdos_renyi: return "erdos_renyi";
  }
  return "unknown";
}

}  // namespace smpnn
