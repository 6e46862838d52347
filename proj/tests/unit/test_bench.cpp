#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "smpnn/bench.hpp"
#include "smpnn/dataset.hpp"
#include "smpnn/error.hpp"

using namespace smpnn;
using namespace smpnn::testing;

TEST_SUITE("bench") {

TEST_CASE("gcn sublayer flops split into message passing and dense") {
  const auto adj = normalize_adjacency(random_graph(30, 0.2, 3));
  const FlopCount c = gcn_sublayer_flops(adj, 8);
  CHECK(c.message_passing == 2ull * adj.nnz() * 8);
  CHECK(c.dense == 2ull * 30 * 8 * 8);
}

TEST_CASE("linear fit recovers exact coefficients") {
  std::vector<double> e, n, y;
  for (int i = 0; i < 8; ++i) {
    e.push_back(1000.0 * (i + 1));
    n.push_back(50.0 + 7.0 * (i % 3));
    y.push_back(0.002 * e.back() + 0.3 * n.back() + 4.0);
  }
  const LinearFit fit = fit_linear({e, n}, y);
  CHECK(fit.coef[0] == doctest::Approx(0.002).epsilon(1e-10));
  CHECK(fit.coef[1] == doctest::Approx(0.3).epsilon(1e-10));
  CHECK(fit.coef[2] == doctest::Approx(4.0).epsilon(1e-10));
  CHECK(fit.r_squared == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("linear fit tolerates a constant regressor") {
  std::vector<double> e{1, 2, 3, 4, 5}, n(5, 100.0), y;
  for (double v : e) y.push_back(3.0 * v + 1.0);
  const LinearFit fit = fit_linear({e, n}, y);
  CHECK(fit.coef[0] == doctest::Approx(3.0));
  CHECK(fit.r_squared == doctest::Approx(1.0));
}

TEST_CASE("scale bench counts message flops exactly") {
  ScaleBenchConfig c;
  c.sizes = {{200, 500}, {200, 1500}, {300, 2000}};
  c.depth = 3;
  c.dim = 4;
  c.repeats = 3;
  const ExperimentReport r = scale_bench(c);
  REQUIRE(r.rows.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(r.number(i, "undirected_edges") == c.sizes[i].second + c.sizes[i].first);
    CHECK(r.number(i, "message_flops") == 2.0 * 3 * 4 * r.number(i, "nnz"));
    CHECK(r.number(i, "median_ms") > 0.0);
  }
  CHECK(std::isfinite(r.scalar("r_squared")));
}

TEST_CASE("scale bench validates its config") {
  ScaleBenchConfig c;
  CHECK_THROWS_AS(scale_bench(c), Error);
  c.sizes = {{10, 10}};
  c.repeats = 0;
  CHECK_THROWS_AS(scale_bench(c), Error);
}

}
