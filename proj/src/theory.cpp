#include "smpnn/theory.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "smpnn/error.hpp"
#include "smpnn/spectral.hpp"

namespace smpnn::theory {
namespace {

std::mt19937_64 trial_rng(std::uint64_t seed, std::size_t trial) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(trial), static_cast<std::uint32_t>(trial >> 32)};
  return std::mt19937_64(seq);
}

Tensor gaussian(std::size_t r, std::size_t c, double sigma, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, sigma);
  Tensor t(r, c);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = dist(rng);
  return t;
}

OperatorSingularRange range_of(const std::vector<double>& sv) {
  OperatorSingularRange r;
  if (sv.empty()) return r;
  const auto [lo, hi] = std::minmax_element(sv.begin(), sv.end());
  r.s_min = std::max(*lo, 0.0);
  r.s_max = *hi;
  return r;
}

}  // namespace

SparseGraph complete_graph(std::size_t n) {
  require(n >= 1, ErrorCode::invalid_argument, "complete graph needs at least one node");
  std::vector<Edge> edges;
  edges.reserve(n * (n - 1) / 2);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      edges.push_back({static_cast<Index>(i), static_cast<Index>(j)});
  return build_graph(edges, n, SelfLoopPolicy::add);
}

KernelWitness kernel_witness(std::size_t n, const Tensor& w, std::uint64_t seed) {
  require(n >= 2, ErrorCode::invalid_argument,
          "kernel witness needs N >= 2, got N = " + std::to_string(n));
  require(w.rows() == w.cols() && w.rows() >= 1, ErrorCode::shape_mismatch,
          "kernel witness needs a square W, got " + w.shape_str());
  const std::size_t d = w.rows();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, 1.0);
  std::vector<double> v(d);
  for (double& x : v) x = dist(rng);
  if (std::all_of(v.begin(), v.end(), [](double x) { return x == 0.0; })) v[0] = 1.0;

  KernelWitness out{Tensor(n, d), 0.0};
  for (std::size_t j = 0; j < d; ++j) {
    out.x(0, j) = v[j];
    out.x(1, j) = -v[j];
  }
  const NormalizedAdjacency adj = normalize_adjacency(complete_graph(n));
  out.residual_norm = matmul(spmm(adj, out.x), w).frobenius_norm();
  return out;
}

ExperimentReport kernel_witness_sweep(std::size_t n, std::size_t d, std::size_t trials,
                                      std::uint64_t seed) {
  require(trials >= 1, ErrorCode::invalid_argument, "trials must be at least 1");
  require(d >= 1, ErrorCode::invalid_argument, "dimension must be at least 1");
  ExperimentReport report;
  report.name = "theory_kernel";
  report.columns = {"trial", "nodes", "dim", "witness_norm", "residual_norm"};
  double worst = 0.0;
  double min_witness = std::numeric_limits<double>::infinity();
  for (std::size_t t = 0; t < trials; ++t) {
    auto rng = trial_rng(seed, t);
    const Tensor w = gaussian(d, d, 1.0, rng);
    const KernelWitness k = kernel_witness(n, w, rng());
    const double xn = k.x.frobenius_norm();
    report.add_row({static_cast<std::int64_t>(t), static_cast<std::int64_t>(n),
                    static_cast<std::int64_t>(d), xn, k.residual_norm});
    worst = std::max(worst, k.residual_norm);
    min_witness = std::min(min_witness, xn);
  }
  report.scalars["max_residual"] = worst;
  report.scalars["min_witness_norm"] = min_witness;
  return report;
}

double InjectivityTrialConfig::effective_varsigma() const {
  if (varsigma > 0.0) return varsigma;
  const double d = static_cast<double>(dim);
  return 0.9 / (9.0 * std::pow(d, 1.5));
}

double eigenvalue_norm(const Tensor& w) {
  double s = 0.0;
  for (const auto& z : spectral::eigenvalues(w)) s += std::norm(z);
  return std::sqrt(s);
}

Tensor residual_operator(const Tensor& adj_dense, const Tensor& w) {
  Tensor op = spectral::kronecker(adj_dense, w);
  for (std::size_t i = 0; i < op.rows(); ++i) op(i, i) += 1.0;
  return op;
}

OperatorSingularRange residual_operator_range_dense(const Tensor& adj_dense, const Tensor& w) {
  return range_of(spectral::singular_values(residual_operator(adj_dense, w)));
}

OperatorSingularRange residual_operator_range_blocks(const Tensor& adj_dense, const Tensor& w) {
  require(w.rows() == w.cols(), ErrorCode::shape_mismatch, "W must be square");
  std::vector<double> all;
  for (double lambda : spectral::symmetric_eigenvalues(adj_dense)) {
    Tensor block = lambda * w;
    for (std::size_t i = 0; i < block.rows(); ++i) block(i, i) += 1.0;
    const auto sv = spectral::singular_values(block);
    all.insert(all.end(), sv.begin(), sv.end());
  }
  return range_of(all);
}

ExperimentReport residual_injectivity_trial(const InjectivityTrialConfig& config) {
  const double sigma = config.effective_varsigma();
  require(config.num_nodes >= 1 && config.dim >= 1, ErrorCode::invalid_argument,
          "injectivity trial needs N >= 1 and D >= 1");
  require(config.trials >= 1, ErrorCode::invalid_argument, "trials must be at least 1");
  require(std::isfinite(sigma) && sigma > 0.0, ErrorCode::invalid_argument,
          "varsigma must be positive");
  require(config.singular_threshold >= 0.0, ErrorCode::invalid_argument,
          "singular threshold must be non-negative");
  const std::size_t nd = config.num_nodes * config.dim;
  const bool dense = nd <= config.dense_limit;
  require(dense || !config.force_dense, ErrorCode::resource_limit,
          "dense Kronecker assembly refused: N*D = " + std::to_string(nd) + " exceeds limit " +
              std::to_string(config.dense_limit));

  const Tensor adj = normalize_adjacency(complete_graph(config.num_nodes)).graph().to_dense();
  ExperimentReport report;
  report.name = "theory_injectivity";
  report.columns = {"trial",  "lambda_sum",   "spectral_norm", "s_min",
                    "s_max",  "condition_ok", "invertible"};
  std::size_t condition_count = 0, invertible_count = 0, implication_failures = 0;
  for (std::size_t t = 0; t < config.trials; ++t) {
    auto rng = trial_rng(config.seed, t);
    const Tensor w = gaussian(config.dim, config.dim, sigma, rng);
    const double lambda_sum = eigenvalue_norm(w);
    const double spectral_norm = spectral::singular_values(w).front();
    const OperatorSingularRange r =
        dense ? residual_operator_range_dense(adj, w) : residual_operator_range_blocks(adj, w);
    const bool condition_ok = lambda_sum < 1.0;
    const bool invertible = r.s_min > config.singular_threshold * r.s_max;
    condition_count += condition_ok;
    invertible_count += invertible;
    if (condition_ok && !(r.s_min > 0.0)) ++implication_failures;
    report.add_row({static_cast<std::int64_t>(t), lambda_sum, spectral_norm, r.s_min, r.s_max,
                    static_cast<std::int64_t>(condition_ok), static_cast<std::int64_t>(invertible)});
  }
  const double trials = static_cast<double>(config.trials);
  report.scalars["condition_fraction"] = static_cast<double>(condition_count) / trials;
  report.scalars["invertible_fraction"] = static_cast<double>(invertible_count) / trials;
  report.scalars["implication_failures"] = static_cast<double>(implication_failures);
  report.scalars["implication_holds"] = implication_failures == 0 ? 1.0 : 0.0;
  report.scalars["theoretical_bound"] = 1.0 - std::exp(-static_cast<double>(config.dim) / 2.0);
  report.scalars["varsigma"] = sigma;
  report.notes["method"] = dense ? "dense" : "blocks";
  return report;
}

double kronecker_eigen_mismatch(const Tensor& a, const Tensor& b) {
  const auto ea = spectral::eigenvalues(a);
  const auto eb = spectral::eigenvalues(b);
  auto computed = spectral::eigenvalues(spectral::kronecker(a, b));
  std::vector<bool> used(computed.size(), false);
  double worst = 0.0;
  for (const auto& x : ea) {
    for (const auto& y : eb) {
      const std::complex<double> p = x * y;
      std::size_t best = computed.size();
      double best_dist = std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < computed.size(); ++k) {
        if (used[k]) continue;
        const double dist = std::abs(computed[k] - p);
        if (dist < best_dist) {
          best_dist = dist;
          best = k;
        }
      }
      require(best < computed.size(), ErrorCode::numerical_error,
              "eigenvalue count of the Kronecker product does not match");
      used[best] = true;
      worst = std::max(worst, best_dist);
    }
  }
  return worst;
}

ExperimentReport gordon_bound_trial(std::size_t d, std::size_t trials, double t,
                                    std::uint64_t seed) {
  require(d >= 2, ErrorCode::invalid_argument, "Gordon trial needs D >= 2");
  require(trials >= 1, ErrorCode::invalid_argument, "trials must be at least 1");
  const double sqrt_d = std::sqrt(static_cast<double>(d));
  if (t <= 0.0) t = sqrt_d;
  const double lower = sqrt_d - sqrt_d - t;
  const double upper = 2.0 * sqrt_d + t;

  ExperimentReport report;
  report.name = "theory_gordon";
  report.columns = {"trial", "s_min", "s_max", "lower_ok", "upper_ok"};
  std::size_t within = 0, upper_violations = 0;
  double smax_sum = 0.0;
  for (std::size_t k = 0; k < trials; ++k) {
    auto rng = trial_rng(seed, k);
    const auto sv = spectral::singular_values(gaussian(d, d, 1.0, rng));
    const double s_max = sv.front(), s_min = sv.back();
    const bool lower_ok = lower <= s_min;
    const bool upper_ok = s_max <= upper;
    within += lower_ok && upper_ok;
    upper_violations += !upper_ok;
    smax_sum += s_max;
    report.add_row({static_cast<std::int64_t>(k), s_min, s_max, static_cast<std::int64_t>(lower_ok),
                    static_cast<std::int64_t>(upper_ok)});
  }
  const double n = static_cast<double>(trials);
  report.scalars["fraction_within"] = static_cast<double>(within) / n;
  report.scalars["upper_violations"] = static_cast<double>(upper_violations);
  report.scalars["bound"] = 1.0 - std::exp(-t * t / 2.0);
  report.scalars["mean_smax_over_sqrt_d"] = smax_sum / n / sqrt_d;
  report.scalars["t"] = t;
  report.scalars["upper_limit"] = upper;
  return report;
}

FrequencyClass EnergyTrace::classify(double tol) const {
  if (per_layer_normalized.empty()) return FrequencyClass::neither;
  const double last = per_layer_normalized.back();
  if (std::abs(last - lambda_min) <= tol) return FrequencyClass::lfd_like;
  if (std::abs(last - lambda_max) <= tol) return FrequencyClass::hfd_like;
  return FrequencyClass::neither;
}

EnergyTrace oversmoothing_trace(const SparseGraph& g, const Tensor& x0, std::size_t layers,
                                TraceMode mode, std::uint64_t params_seed) {
  require(x0.rows() == g.num_nodes(), ErrorCode::shape_mismatch,
          "X0 has " + std::to_string(x0.rows()) + " rows but the graph has " +
              std::to_string(g.num_nodes()) + " nodes");
  require(g.num_nodes() >= 1 && g.num_components() == 1, ErrorCode::invalid_argument,
          "oversmoothing trace needs a connected graph");
  const NormalizedAdjacency adj = normalize_adjacency(g);

  EnergyTrace trace;
  trace.lambda_max = 2.0;
  if (g.num_nodes() <= spectral::kMaxDenseNodes) {
    const auto ev = spectral::graph_spectrum(normalized_laplacian(g));
    trace.lambda_min = ev.front();
    trace.lambda_max = ev.back();
  }
  auto record = [&](const Tensor& x) {
    trace.per_layer_energy.push_back(dirichlet_energy(g, x));
    trace.per_layer_normalized.push_back(normalized_dirichlet_energy(g, x));
  };

  record(x0);
  if (mode == TraceMode::linear_no_residual) {
    Tensor x = x0;
    for (std::size_t l = 0; l < layers; ++l) {
      x = spmm(adj, x);
      record(x);
    }
    return trace;
  }

  const std::size_t d = x0.cols();
  const SmpnnParams params = init_params({d, d, d, layers, 0}, params_seed);
  const BlockConfig config =
      block_preset(mode == TraceMode::smpnn_default ? "standard" : "no_residual");
  ad::Tape tape;
  const ParamVars vars = bind_params(tape, params, false);
  ad::Var x = tape.constant(x0);
  for (std::size_t l = 0; l < layers; ++l) {
    x = block_forward(x, adj, vars.layers[l], config, {}, l);
    record(x.value());
  }
  return trace;
}

TraceMode parse_trace_mode(const std::string& name) {
  if (name == "linear_no_residual" || name == "linear") return TraceMode::linear_no_residual;
  if (name == "smpnn_default" || name == "smpnn") return TraceMode::smpnn_default;
  if (name == "smpnn_no_residual") return TraceMode::smpnn_no_residual;
  throw Error(ErrorCode::invalid_argument, "unknown trace mode '" + name + "'");
}

std::string to_string(TraceMode mode) {
  switch (mode) {
    case TraceMode::linear_no_residual: return "linear_no_residual";
    case TraceMode::smpnn_default: return "smpnn_default";
    case TraceMode::smpnn_no_residual: return "smpnn_no_residual";
  }
  return "unknown";
}

std::string to_string(FrequencyClass c) {
  switch (c) {
    case FrequencyClass::lfd_like: return "lfd_like";
    case FrequencyClass::hfd_like: return "hfd_like";
    case FrequencyClass::neither: return "neither";
  }
  return "unknown";
}

}  // namespace smpnn::theory
