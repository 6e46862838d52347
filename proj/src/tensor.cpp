#include "smpnn/tensor.hpp"

#include <algorithm>
#include <cmath>

#include "smpnn/error.hpp"
#include "smpnn/flops.hpp"

namespace smpnn {

Tensor::Tensor(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Tensor::Tensor(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  require(data_.size() == rows_ * cols_, ErrorCode::shape_mismatch,
          "tensor data length " + std::to_string(data_.size()) + " does not match shape " +
              shape_str());
}

Tensor Tensor::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r == 0 ? 0 : rows.begin()->size();
  std::vector<double> data;
  data.reserve(r * c);
  for (const auto& row : rows) {
    require(row.size() == c, ErrorCode::shape_mismatch, "ragged rows in Tensor::from_rows");
    data.insert(data.end(), row.begin(), row.end());
  }
  return Tensor(r, c, std::move(data));
}

Tensor Tensor::identity(std::size_t n) {
  Tensor t(n, n);
  for (std::size_t i = 0; i < n; ++i) t(i, i) = 1.0;
  return t;
}

std::string Tensor::shape_str() const {
  return "(" + std::to_string(rows_) + ", " + std::to_string(cols_) + ")";
}

void Tensor::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

double Tensor::max_abs() const noexcept {
  double m = 0.0;
  for (double v : data_) m = std::max(m, std::abs(v));
  return m;
}

double Tensor::frobenius_norm() const noexcept {
  double s = 0.0;
  for (double v : data_) s += v * v;
  return std::sqrt(s);
}

double Tensor::sum() const noexcept {
  double s = 0.0;
  for (double v : data_) s += v;
  return s;
}

bool Tensor::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

namespace {
void check_same(const Tensor& a, const Tensor& b, const char* op) {
  require(a.same_shape(b), ErrorCode::shape_mismatch,
          std::string(op) + ": shapes " + a.shape_str() + " and " + b.shape_str() + " differ");
}
}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  require(a.cols() == b.rows(), ErrorCode::shape_mismatch,
          "matmul: " + a.shape_str() + " x " + b.shape_str());
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  Tensor out(m, n);
  for (std::size_t i = 0; i < m; ++i) {
    double* o = out.row(i).data();
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = a(i, p);
      const double* brow = b.row(p).data();
      for (std::size_t j = 0; j < n; ++j) o[j] += aip * brow[j];
    }
  }
  flops::add_dense(2ull * m * k * n);
  return out;
}

Tensor matmul_tn(const Tensor& a, const Tensor& b) {
  require(a.rows() == b.rows(), ErrorCode::shape_mismatch,
          "matmul_tn: " + a.shape_str() + "ᵀ x " + b.shape_str());
  const std::size_t m = a.cols(), k = a.rows(), n = b.cols();
  Tensor out(m, n);
  for (std::size_t p = 0; p < k; ++p) {
    const double* arow = a.row(p).data();
    const double* brow = b.row(p).data();
    for (std::size_t i = 0; i < m; ++i) {
      const double api = arow[i];
      double* o = out.row(i).data();
      for (std::size_t j = 0; j < n; ++j) o[j] += api * brow[j];
    }
  }
  flops::add_dense(2ull * m * k * n);
  return out;
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  require(a.cols() == b.cols(), ErrorCode::shape_mismatch,
          "matmul_nt: " + a.shape_str() + " x " + b.shape_str() + "ᵀ");
  const std::size_t m = a.rows(), k = a.cols(), n = b.rows();
  Tensor out(m, n);
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = a.row(i).data();
    for (std::size_t j = 0; j < n; ++j) {
      const double* brow = b.row(j).data();
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) s += arow[p] * brow[p];
      out(i, j) = s;
    }
  }
  flops::add_dense(2ull * m * k * n);
  return out;
}

Tensor transpose(const Tensor& a) {
  Tensor out(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) out(j, i) = a(i, j);
  return out;
}

Tensor operator+(const Tensor& a, const Tensor& b) {
  check_same(a, b, "add");
  Tensor out = a;
  out += b;
  return out;
}

Tensor operator-(const Tensor& a, const Tensor& b) {
  check_same(a, b, "sub");
  Tensor out = a;
  auto o = out.data();
  auto bd = b.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] -= bd[i];
  return out;
}

Tensor operator*(double s, const Tensor& a) {
  Tensor out = a;
  for (double& v : out.data()) v *= s;
  return out;
}

Tensor& operator+=(Tensor& a, const Tensor& b) {
  check_same(a, b, "add");
  auto o = a.data();
  auto bd = b.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] += bd[i];
  return a;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  check_same(a, b, "max_abs_diff");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace smpnn
