#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "smpnn/flops.hpp"
#include "smpnn/graph.hpp"
#include "smpnn/model.hpp"
#include "smpnn/report.hpp"

namespace smpnn {

struct ScaleBenchConfig {
  /// (N, undirected edge count) pairs.
  std::vector<std::pair<std::size_t, std::size_t>> sizes;
  std::size_t depth = 2;
  std::size_t dim = 16;
  std::size_t warmup = 1;  // untimed forwards per size, after the FLOP-counting one
  std::size_t repeats = 5;
  std::uint64_t seed = 0;
};

/// FLOPs of one GCN sublayer (Ã H W) on `adj` at width d, counted by the
/// kernels themselves.
FlopCount gcn_sublayer_flops(const NormalizedAdjacency& adj, std::size_t d);

struct LinearFit {
  std::vector<double> coef;  // one per regressor, then intercept
  double r_squared = 0.0;
};

/// Least squares y ≈ X·coef + c via a rank-revealing decomposition, so
/// constant regressor columns (e.g. fixed N) do not break the fit.
LinearFit fit_linear(const std::vector<std::vector<double>>& regressors,
                     const std::vector<double>& y);

/// Rows: n, nnz, undirected_edges, message_flops, dense_flops, median_ms,
/// rss_delta_kb. Scalars: fit_a_edges, fit_b_nodes, fit_c, r_squared.
/// Wall time is the median forward time of `repeats` runs after the warmups;
/// timed runs cycle through all sizes once per repeat.
ExperimentReport scale_bench(const ScaleBenchConfig& config);

/// Resident set size in KiB from /proc, or -1 where unavailable.
long resident_set_kb();

}  // namespace smpnn
