#pragma once

#include <complex>
#include <vector>

#include "smpnn/graph.hpp"
#include "smpnn/tensor.hpp"

namespace smpnn::spectral {

/// Dense ceiling for every eigen/SVD check on graph operators.
inline constexpr std::size_t kMaxDenseNodes = 256;

/// Ascending eigenvalues of a symmetric matrix.
std::vector<double> symmetric_eigenvalues(const Tensor& a);
/// Eigenvalues of a general square matrix (complex, unordered).
std::vector<std::complex<double>> eigenvalues(const Tensor& a);
/// Singular values, descending.
std::vector<double> singular_values(const Tensor& a);

/// Eigenvalues of a graph operator; refuses graphs above kMaxDenseNodes.
std::vector<double> graph_spectrum(const SparseGraph& operator_matrix);

/// Largest eigenvalue of L_norm.
double laplacian_lambda_max(const SparseGraph& g);

/// A ⊗ B with (A⊗B)[i·p + k, j·q + l] = A[i,j]·B[k,l].
Tensor kronecker(const Tensor& a, const Tensor& b);

}  // namespace smpnn::spectral
