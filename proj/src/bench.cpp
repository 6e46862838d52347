#include "smpnn/bench.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <chrono>
#include <fstream>
#include <new>
#include <optional>
#include <tuple>
#include <random>
#include <unistd.h>
#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include "smpnn/dataset.hpp"
#include "smpnn/error.hpp"

namespace smpnn {

FlopCount gcn_sublayer_flops(const NormalizedAdjacency& adj, std::size_t d) {
  Tensor h(adj.num_nodes(), d);
  h.fill(1.0);
  Tensor w = Tensor::identity(d);
  FlopScope scope;
  matmul(spmm(adj, h), w);
  return scope.count();
}

LinearFit fit_linear(const std::vector<std::vector<double>>& regressors,
                     const std::vector<double>& y) {
  const std::size_t n = y.size();
  const std::size_t k = regressors.size();
  require(n >= 1, ErrorCode::invalid_argument, "fit_linear needs at least one observation");
  for (const auto& col : regressors)
    require(col.size() == n, ErrorCode::shape_mismatch, "regressor length differs from y");
  Eigen::MatrixXd x(n, k + 1);
  Eigen::VectorXd b(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < k; ++j) x(i, j) = regressors[j][i];
    x(i, k) = 1.0;
    b(i) = y[i];
  }
  const Eigen::VectorXd coef = x.completeOrthogonalDecomposition().solve(b);
  const Eigen::VectorXd fitted = x * coef;
  const double mean = b.mean();
  const double ss_res = (b - fitted).squaredNorm();
  const double ss_tot = (b.array() - mean).square().sum();
  LinearFit fit;
  fit.coef.assign(coef.data(), coef.data() + coef.size());
  fit.r_squared = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : (ss_res == 0.0 ? 1.0 : 0.0);
  return fit;
}

long resident_set_kb() {
  std::ifstream statm("/proc/self/statm");
  long pages = 0, resident = 0;
  if (!(statm >> pages >> resident)) return -1;
  return resident * (sysconf(_SC_PAGESIZE) / 1024);
}

namespace {

// Keeps freed blocks on the heap while timing so repeated forwards do not
// page-fault fresh mmap regions; glibc defaults come back on exit.
class RetainHeap {
 public:
  RetainHeap() {
#if defined(__GLIBC__)
    mallopt(M_MMAP_THRESHOLD, 1 << 30);
    mallopt(M_TRIM_THRESHOLD, 1 << 30);
#endif
  }
  ~RetainHeap() {
#if defined(__GLIBC__)
    mallopt(M_MMAP_THRESHOLD, 128 * 1024);
    mallopt(M_TRIM_THRESHOLD, 128 * 1024);
    malloc_trim(0);
#endif
  }
  RetainHeap(const RetainHeap&) = delete;
  RetainHeap& operator=(const RetainHeap&) = delete;
};

}  // namespace

ExperimentReport scale_bench(const ScaleBenchConfig& config) {
  require(!config.sizes.empty(), ErrorCode::invalid_argument, "scale bench needs sizes");
  require(config.repeats >= 1, ErrorCode::invalid_argument, "repeats must be at least 1");
  require(config.dim >= 1, ErrorCode::invalid_argument, "dim must be at least 1");
  using Clock = std::chrono::steady_clock;
  const RetainHeap retain;
  const BlockConfig block = block_preset("standard");
  const SmpnnParams params =
      init_params({config.dim, config.dim, config.dim, config.depth, 0}, config.seed);

  struct Case {
    std::size_t n = 0, e = 0;
    std::optional<NormalizedAdjacency> adj;
    std::size_t nnz = 0, undirected = 0;
    Tensor x;
    FlopCount counted;
    std::int64_t rss_delta = -1;
    std::vector<double> ms;
  };
  std::vector<Case> cases(config.sizes.size());
  for (std::size_t s = 0; s < cases.size(); ++s) {
    Case& c = cases[s];
    std::tie(c.n, c.e) = config.sizes[s];
    try {
      const long rss_before = resident_set_kb();
      const SparseGraph g = make_gnm_graph(c.n, c.e, config.seed + s);
      c.nnz = g.nnz();
      c.undirected = g.num_undirected_edges();
      c.adj = normalize_adjacency(g);
      std::mt19937_64 rng(config.seed + s);
      std::normal_distribution<double> dist;
      c.x = Tensor(c.n, config.dim);
      for (std::size_t i = 0; i < c.x.size(); ++i) c.x[i] = dist(rng);
      {
        FlopScope scope;
        model_forward(c.x, *c.adj, params, block);
        c.counted = scope.count();
      }
      for (std::size_t r = 0; r < config.warmup; ++r) model_forward(c.x, *c.adj, params, block);
      const long rss_after = resident_set_kb();
      if (rss_before >= 0 && rss_after >= 0) c.rss_delta = rss_after - rss_before;
    } catch (const std::bad_alloc&) {
      c.adj.reset();
    }
  }

  // Round-robin over sizes so slow phases of the machine hit every size alike.
  for (std::size_t r = 0; r < config.repeats; ++r) {
    for (Case& c : cases) {
      if (!c.adj) continue;
      const auto t0 = Clock::now();
      model_forward(c.x, *c.adj, params, block);
      c.ms.push_back(std::chrono::duration<double, std::milli>(Clock::now() - t0).count());
    }
  }

  ExperimentReport report;
  report.name = "scale_bench";
  report.columns = {"n",           "nnz",       "undirected_edges", "message_flops",
                    "dense_flops", "median_ms", "rss_delta_kb",     "status"};
  std::vector<double> edges, nodes, times;
  for (Case& c : cases) {
    if (!c.adj) {
      report.add_row({static_cast<std::int64_t>(c.n), std::int64_t{0},
                      static_cast<std::int64_t>(c.e), std::int64_t{0}, std::int64_t{0}, 0.0,
                      std::int64_t{-1}, std::string("skipped_out_of_memory")});
      continue;
    }
    std::sort(c.ms.begin(), c.ms.end());
    const std::size_t m = c.ms.size();
    const double median = m % 2 ? c.ms[m / 2] : 0.5 * (c.ms[m / 2 - 1] + c.ms[m / 2]);
    report.add_row({static_cast<std::int64_t>(c.n), static_cast<std::int64_t>(c.nnz),
                    static_cast<std::int64_t>(c.undirected),
                    static_cast<std::int64_t>(c.counted.message_passing),
                    static_cast<std::int64_t>(c.counted.dense), median, c.rss_delta,
                    std::string("ok")});
    edges.push_back(static_cast<double>(c.undirected));
    nodes.push_back(static_cast<double>(c.n));
    times.push_back(median);
  }
  if (!times.empty()) {
    const LinearFit fit = fit_linear({edges, nodes}, times);
    report.scalars["fit_a_edges"] = fit.coef[0];
    report.scalars["fit_b_nodes"] = fit.coef[1];
    report.scalars["fit_c"] = fit.coef[2];
    report.scalars["r_squared"] = fit.r_squared;
  }
  report.notes["time_model"] = "median_ms = a*E + b*N + c";
  return report;
}

}  // namespace smpnn
