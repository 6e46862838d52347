#pragma once

#include <cstddef>
#include <functional>
#include <random>
#include <span>
#include <vector>

#include "smpnn/graph.hpp"
#include "smpnn/tensor.hpp"

namespace smpnn::ad {

class Tape;

/// Handle to a node recorded on a Tape. Cheap to copy; valid as long as the
/// tape is alive.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  const Tensor& grad() const;
  bool requires_grad() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }

  Tape* tape() const noexcept { return tape_; }
  std::size_t id() const noexcept { return id_; }
  bool valid() const noexcept { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Reverse-mode tape. Nodes are appended in creation order, which is a
/// topological order, so backward() is a single reverse sweep.
class Tape {
 public:
  /// Receives the upstream gradient of the node and accumulates into parents.
  using Vjp = std::function<void(Tape&, const Tensor& upstream)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var leaf(Tensor value, bool requires_grad = false);
  Var constant(Tensor value) { return leaf(std::move(value), false); }

  /// Records an op result. The node needs a gradient iff any parent does;
  /// otherwise the VJP is dropped.
  Var record(Tensor value, std::initializer_list<Var> parents, Vjp vjp);

  /// Seeds d(root)/d(root) = 1; root must be 1×1.
  void backward(Var root);
  void backward(Var root, const Tensor& seed);

  void accumulate(Var node, const Tensor& contribution);

  const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  const Tensor& grad(std::size_t id) const { return nodes_[id].grad; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  std::size_t size() const noexcept { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    Vjp vjp;
  };
  std::vector<Node> nodes_;
};

// Differentiable ops. Shapes are checked and mismatches throw
// Error(shape_mismatch).

Var matmul(Var a, Var b);
Var matmul_nt(Var a, Var b);  // a bᵀ
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var hadamard(Var a, Var b);
Var scale(Var a, double s);
/// a · s where s is a 1×1 node (learnable scalar gates).
Var scale_by(Var a, Var s);
/// Ã X; the adjacency is a constant and Ãᵀ = Ã carries the VJP.
Var spmm(const NormalizedAdjacency& adj, Var x);
Var silu(Var x);
/// Row-wise normalization over the D columns with the biased variance, then
/// featurewise affine. gamma and beta are 1×D.
Var layer_norm(Var x, Var gamma, Var beta, double eps = 1e-5);
Var softmax_rows(Var x);
/// Mean over `rows` of −log softmax(logits)[r, labels[r]].
Var cross_entropy(Var logits, std::span<const int> labels, std::span<const Index> rows);
/// Mean over `rows` × columns of the numerically stable BCE-with-logits.
Var bce_with_logits(Var logits, const Tensor& targets, std::span<const Index> rows);
/// Inverted dropout; identity in eval mode or when p = 0.
Var dropout(Var x, double p, std::mt19937_64& rng, bool train_mode);
Var sum(Var x);
Var mean(Var x);
/// Column sums, 1×D.
Var sum_rows(Var x);
/// Repeats a 1×D row n times.
Var broadcast_rows(Var row, std::size_t n);
/// x / ‖x‖_F; throws Error(numerical_error) when the norm is zero.
Var normalize_frobenius(Var x);
/// Each row divided by its own ℓ₂ norm.
Var normalize_rows(Var x);

double sigmoid(double x) noexcept;

}  // namespace smpnn::ad
