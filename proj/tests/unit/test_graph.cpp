#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "helpers.hpp"
#include "smpnn/dataset.hpp"
#include "smpnn/error.hpp"
#include "smpnn/flops.hpp"
#include "smpnn/graph.hpp"
#include "smpnn/spectral.hpp"

using namespace smpnn;
using smpnn::testing::random_graph;
using smpnn::testing::random_tensor;

namespace {

SparseGraph complete(std::size_t n, SelfLoopPolicy policy = SelfLoopPolicy::add) {
  std::vector<Edge> e;
  for (Index i = 0; i < n; ++i)
    for (Index j = i + 1; j < n; ++j) e.push_back({i, j});
  return build_graph(e, n, policy);
}

SparseGraph path(std::size_t n, SelfLoopPolicy policy) {
  std::vector<Edge> e;
  for (Index i = 0; i + 1 < n; ++i) e.push_back({i, i + 1});
  return build_graph(e, n, policy);
}

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an smpnn::Error");
  return ErrorCode::invalid_argument;
}

}  // namespace

TEST_SUITE("graph") {

TEST_CASE("single edge with and without self-loops") {
  const std::vector<Edge> e{{0, 1}};
  SparseGraph g = build_graph(e, 2, SelfLoopPolicy::keep_as_given);
  CHECK(g.nnz() == 2);
  CHECK(g.degrees()[0] == 1.0);
  CHECK(g.degrees()[1] == 1.0);
  CHECK_FALSE(g.has_self_loops());

  SparseGraph h = build_graph(e, 2, SelfLoopPolicy::add);
  CHECK(h.nnz() == 4);
  CHECK(h.degrees()[0] == 2.0);
  CHECK(h.degrees()[1] == 2.0);
  CHECK(h.has_self_loops());
}

TEST_CASE("complete graph degrees and normalized entries") {
  SparseGraph g = complete(4);
  for (double d : g.degrees()) CHECK(d == 4.0);
  NormalizedAdjacency a = normalize_adjacency(g);
  for (double v : a.graph().values()) CHECK(v == doctest::Approx(0.25).epsilon(1e-15));
}

TEST_CASE("P2 normalization and Laplacian") {
  SparseGraph bare = path(2, SelfLoopPolicy::keep_as_given);
  Tensor a = normalize_adjacency(bare).graph().to_dense();
  CHECK(a == Tensor::from_rows({{0, 1}, {1, 0}}));
  Tensor l = normalized_laplacian(bare).to_dense();
  CHECK(l == Tensor::from_rows({{1, -1}, {-1, 1}}));
  auto ev = spectral::symmetric_eigenvalues(l);
  CHECK(ev[0] == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(ev[1] == doctest::Approx(2.0).epsilon(1e-14));

  Tensor looped = normalize_adjacency(path(2, SelfLoopPolicy::add)).graph().to_dense();
  for (std::size_t i = 0; i < 4; ++i) CHECK(looped[i] == 0.5);
}

TEST_CASE("normalized Laplacian of K_N with self-loops") {
  for (std::size_t n : {2u, 5u, 9u}) {
    auto ev = spectral::graph_spectrum(normalized_laplacian(complete(n)));
    CHECK(std::abs(ev[0]) < 1e-12);
    for (std::size_t i = 1; i < n; ++i) CHECK(std::abs(ev[i] - 1.0) < 1e-12);
  }
}

TEST_CASE("K_N spectrum of the normalized adjacency") {
  for (std::size_t n = 2; n <= 64; n *= 2) {
    auto ev = spectral::graph_spectrum(normalize_adjacency(complete(n)).graph());
    CHECK(std::abs(ev.back() - 1.0) < 1e-10);
    for (std::size_t i = 0; i + 1 < n; ++i) CHECK(std::abs(ev[i]) < 1e-10);
  }
}

TEST_CASE("normalized adjacency spectrum lies in [-1, 1]") {
  for (std::uint64_t s = 0; s < 10; ++s) {
    auto g = random_graph(30, 0.15, s, s % 2 ? SelfLoopPolicy::add : SelfLoopPolicy::keep_as_given);
    for (double ev : spectral::graph_spectrum(normalize_adjacency(g).graph())) {
      CHECK(ev >= -1.0 - 1e-12);
      CHECK(ev <= 1.0 + 1e-12);
    }
  }
}

TEST_CASE("normalized values match the dense formula") {
  auto g = random_graph(12, 0.3, 7, SelfLoopPolicy::add, true);
  Tensor oracle = testing::dense_normalized(g.to_dense());
  CHECK(max_abs_diff(normalize_adjacency(g).graph().to_dense(), oracle) < 1e-15);
}

TEST_CASE("CSR invariants and symmetry") {
  for (std::uint64_t s = 0; s < 20; ++s) {
    auto g = random_graph(25, 0.2, s, SelfLoopPolicy::add, s % 3 == 0);
    auto off = g.row_offsets();
    CHECK(off.front() == 0);
    CHECK(off.back() == g.nnz());
    for (std::size_t i = 0; i < g.num_nodes(); ++i) {
      auto cols = g.neighbors(i);
      CHECK(std::adjacent_find(cols.begin(), cols.end(), std::greater_equal<>()) == cols.end());
    }
    Tensor d = g.to_dense();
    CHECK(d == transpose(d));
  }
}

TEST_CASE("build_graph rejects bad input") {
  std::vector<Edge> out_of_range{{0, 3}};
  CHECK(code_of([&] { build_graph(out_of_range, 3); }) == ErrorCode::invalid_argument);
  std::vector<Edge> conflict{{0, 1, 1.0}, {1, 0, 2.0}};
  CHECK(code_of([&] { build_graph(conflict, 2); }) == ErrorCode::invalid_argument);
  std::vector<Edge> dup{{0, 1, 1.0}, {1, 0, 1.0}};
  CHECK(build_graph(dup, 2, SelfLoopPolicy::keep_as_given).nnz() == 2);
}

TEST_CASE("isolated node is refused at normalization") {
  std::vector<Edge> e{{0, 1}};
  auto g = build_graph(e, 3, SelfLoopPolicy::keep_as_given);
  try {
    normalize_adjacency(g);
    FAIL("expected failure");
  } catch (const Error& err) {
    CHECK(std::string(err.what()).find("2") != std::string::npos);
  }
}

TEST_CASE("Dirichlet energy examples") {
  auto p2 = path(2, SelfLoopPolicy::keep_as_given);
  CHECK(dirichlet_energy(p2, Tensor::from_rows({{1}, {-1}})) == doctest::Approx(4.0));

  auto g = random_graph(15, 0.3, 3);
  Tensor smooth(15, 2);
  for (std::size_t i = 0; i < 15; ++i) {
    smooth(i, 0) = 3.0 * std::sqrt(g.degrees()[i]);
    smooth(i, 1) = -0.5 * std::sqrt(g.degrees()[i]);
  }
  CHECK(dirichlet_energy(g, smooth) < 1e-12);
  CHECK(code_of([&] { dirichlet_energy(g, Tensor(14, 2)); }) == ErrorCode::shape_mismatch);
}

TEST_CASE("Dirichlet energy equals the Laplacian quadratic form") {
  for (std::uint64_t s = 0; s < 100; ++s) {
    auto g = random_graph(10 + s % 20, 0.2, s, s % 2 ? SelfLoopPolicy::add : SelfLoopPolicy::keep_as_given,
                          s % 4 == 0);
    Tensor x = random_tensor(g.num_nodes(), 3, s + 1000);
    Tensor l = normalized_laplacian(g).to_dense();
    const Tensor lx = testing::dense_matmul(l, x);
    double quad = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) quad += x[i] * lx[i];
    CHECK(std::abs(dirichlet_energy(g, x) - quad) <= 1e-9 * std::abs(quad));
  }
}

TEST_CASE("normalized energy stays inside [0, lambda_max]") {
  for (std::uint64_t s = 0; s < 10; ++s) {
    auto g = random_graph(20, 0.2, s);
    const double lmax = spectral::laplacian_lambda_max(g);
    CHECK(lmax <= 2.0 + 1e-12);
    const double e = normalized_dirichlet_energy(g, random_tensor(20, 4, s));
    CHECK(e >= 0.0);
    CHECK(e <= lmax + 1e-12);
  }
  CHECK(normalized_dirichlet_energy(random_graph(5, 0.5, 1), Tensor(5, 2)) == 0.0);
}

TEST_CASE("spmm examples and dense oracle") {
  auto a = normalize_adjacency(complete(4));
  Tensor ones(4, 1, 1.0);
  CHECK(max_abs_diff(spmm(a, ones), ones) < 1e-15);
  CHECK(spmm(a, Tensor::from_rows({{1}, {-1}, {0}, {0}})).max_abs() == 0.0);

  auto g = random_graph(5, 0.5, 11, SelfLoopPolicy::add, true);
  auto na = normalize_adjacency(g);
  Tensor x = random_tensor(5, 3, 12);
  CHECK(max_abs_diff(spmm(na, x), testing::dense_matmul(na.graph().to_dense(), x)) < 1e-12);
  CHECK_THROWS_AS(spmm(na, Tensor(4, 3)), Error);
}

TEST_CASE("spmm counts 2 nnz D flops") {
  auto a = normalize_adjacency(random_graph(40, 0.1, 5));
  FlopScope scope;
  spmm(a, Tensor(40, 7));
  CHECK(scope.count().message_passing == 2 * a.nnz() * 7);
  CHECK(scope.count().dense == 0);
}

TEST_CASE("induced subgraph") {
  const std::vector<Index> pair{0, 1};
  auto k2 = induced_subgraph(complete(4, SelfLoopPolicy::keep_as_given), pair);
  CHECK(k2.graph.num_nodes() == 2);
  CHECK(k2.graph.nnz() == 2);

  const std::vector<Index> ends{0, 2};
  auto edgeless = induced_subgraph(path(3, SelfLoopPolicy::keep_as_given), ends);
  CHECK(edgeless.graph.nnz() == 0);

  auto g = random_graph(30, 0.2, 9);
  std::vector<Index> nodes{3, 17, 5, 22, 9, 0, 28};
  auto sub = induced_subgraph(g, nodes);
  CHECK(sub.original_ids == nodes);
  Tensor full = g.to_dense();
  Tensor got = sub.graph.to_dense();
  for (std::size_t a = 0; a < nodes.size(); ++a)
    for (std::size_t b = 0; b < nodes.size(); ++b) CHECK(got(a, b) == full(nodes[a], nodes[b]));

  std::vector<Index> all(30);
  for (Index i = 0; i < 30; ++i) all[i] = i;
  CHECK(induced_subgraph(g, all).graph == g);

  std::vector<Index> dup{1, 1};
  CHECK_THROWS_AS(induced_subgraph(g, dup), Error);
  std::vector<Index> bad{31};
  CHECK_THROWS_AS(induced_subgraph(g, bad), Error);
}

TEST_CASE("neighbour sampling") {
  std::vector<Edge> star;
  for (Index i = 1; i <= 10; ++i) star.push_back({0, i});
  auto g = build_graph(star, 11);
  const std::vector<Index> center{0};
  const std::vector<std::size_t> three{3};
  auto s = neighbor_sample(g, center, three, 4);
  CHECK(s.graph.num_nodes() == 4);
  CHECK(s.original_ids.front() == 0);

  auto again = neighbor_sample(g, center, three, 4);
  CHECK(again.original_ids == s.original_ids);
  CHECK(again.graph == s.graph);

  auto rg = random_graph(40, 0.08, 21);
  const std::vector<Index> seeds{5, 17};
  const std::vector<std::size_t> wide{100, 100};
  auto full = neighbor_sample(rg, seeds, wide, 1);
  std::set<Index> bfs(seeds.begin(), seeds.end());
  std::set<Index> frontier = bfs;
  for (int hop = 0; hop < 2; ++hop) {
    std::set<Index> next;
    for (Index v : frontier)
      for (Index u : rg.neighbors(v))
        if (!bfs.count(u)) next.insert(u);
    bfs.insert(next.begin(), next.end());
    frontier = next;
  }
  CHECK(std::set<Index>(full.original_ids.begin(), full.original_ids.end()) == bfs);

  const std::vector<Index> none;
  CHECK_THROWS_AS(neighbor_sample(rg, none, wide, 1), Error);
}

TEST_CASE("synthetic generators") {
  SyntheticParams p;
  p.kind = GraphKind::complete;
  p.num_nodes = 4;
  p.self_loops = SelfLoopPolicy::keep_as_given;
  CHECK(make_synthetic(p).graph.num_undirected_edges() == 6);

  SyntheticParams sbm;
  sbm.num_blocks = 3;
  sbm.block_size = 20;
  sbm.p_in = 0.5;
  sbm.p_out = 0.0;
  Dataset d = make_synthetic(sbm);
  for (std::size_t i = 0; i < d.graph.num_nodes(); ++i)
    for (Index j : d.graph.neighbors(i)) CHECK(d.labels.classes[i] == d.labels.classes[j]);
  CHECK(make_synthetic(sbm).features == d.features);

  SyntheticParams er;
  er.kind = GraphKind::erdos_renyi;
  er.num_nodes = 200;
  er.edge_prob = 0.1;
  er.self_loops = SelfLoopPolicy::keep_as_given;
  double total = 0.0;
  for (std::uint64_t s = 0; s < 100; ++s) {
    er.seed = s;
    total += static_cast<double>(make_synthetic(er).graph.num_undirected_edges());
  }
  const double expected = 200.0 * 199.0 * 0.1 / 2.0;
  CHECK(std::abs(total / 100.0 - expected) < 0.05 * expected);

  SyntheticParams bad;
  bad.p_in = 1.5;
  CHECK_THROWS_AS(make_synthetic(bad), Error);
}

TEST_CASE("G(N, M) has exactly M edges") {
  auto g = make_gnm_graph(100, 300, 3, SelfLoopPolicy::keep_as_given);
  CHECK(g.num_undirected_edges() == 300);
  CHECK(g.nnz() == 600);
}

}
