#pragma once

#include <complex>
#include <cstdint>
#include <string>
#include <vector>

#include "smpnn/graph.hpp"
#include "smpnn/model.hpp"
#include "smpnn/report.hpp"
#include "smpnn/tensor.hpp"

namespace smpnn::theory {

/// Complete graph on n nodes with self-loops; its Ã has every entry 1/n.
SparseGraph complete_graph(std::size_t n);

struct KernelWitness {
  Tensor x;             // u wᵀ with u = e1 − e2
  double residual_norm; // ‖Ã X W‖_F
};

/// Nonzero X in the kernel of X ↦ Ã X W on the complete graph with
/// self-loops. Throws for n < 2.
KernelWitness kernel_witness(std::size_t n, const Tensor& w, std::uint64_t seed);

/// kernel_witness over `trials` Gaussian W; one row per trial.
ExperimentReport kernel_witness_sweep(std::size_t n, std::size_t d, std::size_t trials,
                                      std::uint64_t seed);

struct InjectivityTrialConfig {
  std::size_t num_nodes = 8;
  std::size_t dim = 16;
  /// ς; non-positive selects the default 0.9 / (9 D^{3/2}).
  double varsigma = 0.0;
  std::size_t trials = 2000;
  std::uint64_t seed = 0;
  /// Invertible when s_min > threshold · s_max.
  double singular_threshold = 1e-9;
  /// Dense Kronecker assembly is used up to this N·D; beyond it the
  /// eigen-decomposition of Ã splits the operator into N blocks I + λ_i W.
  std::size_t dense_limit = 4096;
  /// Hard refusal for the dense path even when forced.
  bool force_dense = false;

  double effective_varsigma() const;
};

/// (Σ_j |λ_j(W)|²)^{1/2}, complex eigenvalues by modulus.
double eigenvalue_norm(const Tensor& w);

/// Operator I_{ND} + Ã ⊗ W, assembled densely.
Tensor residual_operator(const Tensor& adj_dense, const Tensor& w);

struct OperatorSingularRange {
  double s_min = 0.0;
  double s_max = 0.0;
};

/// Extreme singular values of I + Ã⊗W by dense SVD.
OperatorSingularRange residual_operator_range_dense(const Tensor& adj_dense, const Tensor& w);
/// Same quantity through the orthogonal block split: Ã = U Λ Uᵀ gives
/// (U⊗I)(I + Λ⊗W)(U⊗I)ᵀ, so the singular values are those of the N blocks
/// I + λ_i W.
OperatorSingularRange residual_operator_range_blocks(const Tensor& adj_dense, const Tensor& w);

/// Per-trial rows (trial, lambda_sum, spectral_norm, s_min, s_max, condition_ok,
/// invertible) and scalars: condition_fraction, invertible_fraction,
/// implication_holds, theoretical_bound = 1 − e^{−D/2}, varsigma.
ExperimentReport residual_injectivity_trial(const InjectivityTrialConfig& config);

/// Checks eig(A⊗B) = {λ_i(A) λ_j(B)} by direct decomposition; returns the
/// largest distance from a sorted product eigenvalue to the computed one.
double kronecker_eigen_mismatch(const Tensor& a, const Tensor& b);

/// Standard-Gaussian D×D samples; rows per trial (trial, s_min, s_max,
/// lower_ok, upper_ok), scalars: fraction_within, upper_violations,
/// bound = 1 − e^{−t²/2}, mean_smax_over_sqrt_d. t ≤ 0 selects √D.
ExperimentReport gordon_bound_trial(std::size_t d, std::size_t trials, double t,
                                    std::uint64_t seed);

enum class TraceMode { linear_no_residual, smpnn_default, smpnn_no_residual };
enum class FrequencyClass { lfd_like, hfd_like, neither };

struct EnergyTrace {
  std::vector<double> per_layer_energy;
  std::vector<double> per_layer_normalized;
  double lambda_min = 0.0;
  double lambda_max = 0.0;
  /// Finite-depth heuristic: last normalized value within `tol` of 0
  /// (LFD-like) or of λ_max (HFD-like).
  FrequencyClass classify(double tol = 1e-3) const;
};

/// Normalized Dirichlet energy of X^(0..L). linear_no_residual iterates
/// X ← Ã X; the smpnn modes run width-preserving blocks (no projections)
/// at default initialization from `params_seed`. Disconnected graphs are
/// refused. λ_max is computed densely when N ≤ 256, else left at 2.
EnergyTrace oversmoothing_trace(const SparseGraph& g, const Tensor& x0, std::size_t layers,
                                TraceMode mode, std::uint64_t params_seed = 0);

TraceMode parse_trace_mode(const std::string& name);
std::string to_string(TraceMode mode);
std::string to_string(FrequencyClass c);

}  // namespace smpnn::theory
