#pragma once

#include <cmath>
#include <random>
#include <vector>

#include "smpnn/graph.hpp"
#include "smpnn/tensor.hpp"

namespace smpnn::testing {

inline Tensor random_tensor(std::size_t r, std::size_t c, std::uint64_t seed, double lo = -2.0,
                            double hi = 2.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(lo, hi);
  Tensor t(r, c);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = dist(rng);
  return t;
}

/// Random undirected graph; every node gets at least one neighbour.
inline SparseGraph random_graph(std::size_t n, double p, std::uint64_t seed,
                                SelfLoopPolicy policy = SelfLoopPolicy::add,
                                bool weighted = false) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<Edge> edges;
  for (Index i = 0; i < n; ++i)
    for (Index j = i + 1; j < n; ++j)
      if (u(rng) < p || j == i + 1) edges.push_back({i, j, weighted ? 0.5 + u(rng) : 1.0});
  return build_graph(edges, n, policy);
}

inline Tensor dense_matmul(const Tensor& a, const Tensor& b) {
  Tensor c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j) {
      long double s = 0;
      for (std::size_t k = 0; k < a.cols(); ++k) s += static_cast<long double>(a(i, k)) * b(k, j);
      c(i, j) = static_cast<double>(s);
    }
  return c;
}

/// D^{-1/2} A D^{-1/2} from a dense adjacency.
inline Tensor dense_normalized(const Tensor& a) {
  std::vector<double> deg(a.rows(), 0.0);
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) deg[i] += a(i, j);
  Tensor out(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j)
      if (a(i, j) != 0.0) out(i, j) = a(i, j) / std::sqrt(deg[i] * deg[j]);
  return out;
}

}  // namespace smpnn::testing
