#include "smpnn/spectral.hpp"

#include <Eigen/Dense>
#include <algorithm>

#include "smpnn/error.hpp"

namespace smpnn::spectral {
namespace {

Eigen::MatrixXd to_eigen(const Tensor& a) {
  Eigen::MatrixXd m(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) m(i, j) = a(i, j);
  return m;
}

void require_square(const Tensor& a, const char* what) {
  require(a.rows() == a.cols(), ErrorCode::shape_mismatch,
          std::string(what) + " needs a square matrix, got " + a.shape_str());
}

}  // namespace

std::vector<double> symmetric_eigenvalues(const Tensor& a) {
  require_square(a, "symmetric_eigenvalues");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(to_eigen(a), Eigen::EigenvaluesOnly);
  require(solver.info() == Eigen::Success, ErrorCode::numerical_error,
          "symmetric eigensolver did not converge");
  const auto& ev = solver.eigenvalues();
  return {ev.data(), ev.data() + ev.size()};
}

std::vector<std::complex<double>> eigenvalues(const Tensor& a) {
  require_square(a, "eigenvalues");
  Eigen::EigenSolver<Eigen::MatrixXd> solver(to_eigen(a), false);
  require(solver.info() == Eigen::Success, ErrorCode::numerical_error,
          "eigensolver did not converge");
  const auto& ev = solver.eigenvalues();
  return {ev.data(), ev.data() + ev.size()};
}

std::vector<double> singular_values(const Tensor& a) {
  Eigen::BDCSVD<Eigen::MatrixXd> svd(to_eigen(a));
  const auto& sv = svd.singularValues();
  return {sv.data(), sv.data() + sv.size()};
}

std::vector<double> graph_spectrum(const SparseGraph& operator_matrix) {
  require(operator_matrix.num_nodes() <= kMaxDenseNodes, ErrorCode::resource_limit,
          "dense spectral checks are capped at N <= " + std::to_string(kMaxDenseNodes) +
              ", got N = " + std::to_string(operator_matrix.num_nodes()));
  return symmetric_eigenvalues(operator_matrix.to_dense());
}

double laplacian_lambda_max(const SparseGraph& g) {
  const auto ev = graph_spectrum(normalized_laplacian(g));
  return ev.empty() ? 0.0 : ev.back();
}

Tensor kronecker(const Tensor& a, const Tensor& b) {
  const std::size_t p = b.rows(), q = b.cols();
  Tensor out(a.rows() * p, a.cols() * q);
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) {
      const double aij = a(i, j);
      if (aij == 0.0) continue;
      for (std::size_t k = 0; k < p; ++k)
        for (std::size_t l = 0; l < q; ++l) out(i * p + k, j * q + l) = aij * b(k, l);
    }
  return out;
}

}  // namespace smpnn::spectral
