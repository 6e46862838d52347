#pragma once

#include <cstdint>
#include <iosfwd>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "smpnn/autodiff.hpp"
#include "smpnn/graph.hpp"

namespace smpnn {

enum class KeyNorm { global, per_row };

/// Switches for the block variants: the four removals of the ablation study
/// plus the parallel global-attention branch.
struct BlockConfig {
  bool use_residual = true;
  bool learn_alpha = true;  // false fixes both gates at 1
  bool use_feedforward = true;
  bool use_gcn_layernorm = true;
  bool use_attention = false;
  std::size_t num_heads = 1;
  KeyNorm key_norm = KeyNorm::global;

  bool operator==(const BlockConfig&) const = default;
};

/// Named presets: standard, no_residual, no_alpha, no_ff, no_gcn_ln, attention.
BlockConfig block_preset(const std::string& name);

struct AttentionHead {
  Tensor w_q;
  Tensor w_k;
  Tensor w_v;

  bool operator==(const AttentionHead&) const = default;
};

struct LayerParams {
  Tensor w1;  // D×D
  Tensor w2;  // D×D
  Tensor ln1_gamma, ln1_beta;
  Tensor ln2_gamma, ln2_beta;
  Tensor alpha1;  // 1×1
  Tensor alpha2;  // 1×1
  std::vector<AttentionHead> heads;
  Tensor ln_global_gamma, ln_global_beta;

  bool operator==(const LayerParams&) const = default;
};

struct ModelShape {
  std::size_t input_dim = 0;
  std::size_t hidden_dim = 0;
  std::size_t output_dim = 0;
  std::size_t depth = 1;
  std::size_t num_heads = 0;  // 0 means no attention parameters
};

struct SmpnnParams {
  Tensor input_proj;   // D_in×D
  std::vector<LayerParams> layers;
  Tensor output_proj;  // D×C

  ModelShape shape() const;
  /// Every tensor in a fixed order with a stable dotted name
  /// ("layers.3.w1", "input_proj", ...).
  std::vector<std::pair<std::string, Tensor*>> named_tensors();
  std::vector<std::pair<std::string, const Tensor*>> named_tensors() const;
  std::size_t num_scalars() const;

  bool operator==(const SmpnnParams&) const = default;
};

inline constexpr double kAlphaInit = 1e-6;

/// Glorot-uniform weights, gates at 1e-6, LayerNorm affine (1, 0).
SmpnnParams init_params(const ModelShape& shape, std::uint64_t seed);

/// Per-call options; rng is only touched when dropout > 0 in train mode.
struct ForwardOptions {
  bool train_mode = false;
  double dropout = 0.0;
  double ln_eps = 1e-5;
  std::mt19937_64* rng = nullptr;
};

struct LayerVars {
  ad::Var w1, w2, ln1_gamma, ln1_beta, ln2_gamma, ln2_beta, alpha1, alpha2;
  std::vector<ad::Var> w_q, w_k, w_v;
  ad::Var ln_global_gamma, ln_global_beta;
};

struct ParamVars {
  ad::Var input_proj;
  std::vector<LayerVars> layers;
  ad::Var output_proj;
  /// Same order as SmpnnParams::named_tensors().
  std::vector<ad::Var> flat;
};

ParamVars bind_params(ad::Tape& tape, const SmpnnParams& params, bool requires_grad);
/// Wires existing nodes, given in named_tensors() order, into the layout of `like`.
ParamVars param_vars_from_flat(const SmpnnParams& like, std::span<const ad::Var> flat);

/// One block: H1 = LN(X); H2 = α1·SiLU(Ã H1 W1) + X; H3 = LN(H2);
/// H4 = α2·SiLU(H3 W2) + H2. Dispatches to the hybrid form when the config
/// enables attention. Throws Error(numerical_error) naming `layer_index`
/// when the output is not finite.
ad::Var block_forward(ad::Var x, const NormalizedAdjacency& adj, const LayerVars& layer,
                      const BlockConfig& config, const ForwardOptions& options,
                      std::size_t layer_index = 0);

/// H2 = α1·(SiLU(Ã LN_local(X) W1) + Σ_h Attn_h(LN_global(X))) + X, followed
/// by the usual feedforward sublayer.
ad::Var hybrid_block_forward(ad::Var x, const NormalizedAdjacency& adj, const LayerVars& layer,
                             const BlockConfig& config, const ForwardOptions& options,
                             std::size_t layer_index = 0);

/// Input projection, every block, output projection. Returns logits.
ad::Var model_forward(ad::Var x_in, const NormalizedAdjacency& adj, const ParamVars& params,
                      const BlockConfig& config, const ForwardOptions& options = {});

/// Inference convenience on a private tape.
Tensor model_forward(const Tensor& x_in, const NormalizedAdjacency& adj,
                     const SmpnnParams& params, const BlockConfig& config);

/// Hidden states X^(0) (after the input projection) through X^(L).
std::vector<Tensor> hidden_states(const Tensor& x_in, const NormalizedAdjacency& adj,
                                  const SmpnnParams& params, const BlockConfig& config);

/// Virtual-node attention: q = ΣQ_i/‖ΣQ_i‖, K_n = K/‖K‖ (global Frobenius
/// norm, or per row), a = softmax(q K_nᵀ) ∈ R^{1×N}, output row aV broadcast
/// to all N rows.
ad::Var linear_global_attention(ad::Var x, ad::Var w_q, ad::Var w_k, ad::Var w_v,
                                KeyNorm key_norm = KeyNorm::global);

struct AttentionResult {
  Tensor weights;  // 1×N
  Tensor output;   // N×D
};
AttentionResult linear_global_attention(const Tensor& x, const Tensor& w_q, const Tensor& w_k,
                                        const Tensor& w_v, KeyNorm key_norm = KeyNorm::global);

// Checkpoint text container, format version 1:
//   smpnn-checkpoint 1
//   config <key>=<value> ...
//   shape <input_dim> <hidden_dim> <output_dim> <depth> <num_heads>
//   tensor <name> <rows> <cols>
//   <rows lines of cols values, %.17g>
//   ... one block per tensor in named_tensors() order
//   end
void save_checkpoint(std::ostream& out, const SmpnnParams& params, const BlockConfig& config);
struct Checkpoint {
  SmpnnParams params;
  BlockConfig config;
};
Checkpoint load_checkpoint(std::istream& in);

}  // namespace smpnn
