#include "smpnn/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include "smpnn/error.hpp"

namespace smpnn::ad {

const Tensor& Var::value() const { return tape_->value(id_); }
const Tensor& Var::grad() const { return tape_->grad(id_); }
bool Var::requires_grad() const { return tape_->requires_grad(id_); }

Var Tape::leaf(Tensor value, bool requires_grad) {
  nodes_.push_back(Node{std::move(value), Tensor{}, requires_grad, nullptr});
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(Tensor value, std::initializer_list<Var> parents, Vjp vjp) {
  bool needs = false;
  for (const Var& p : parents) {
    require(p.tape() == this, ErrorCode::invalid_argument, "operand recorded on another tape");
    needs = needs || nodes_[p.id()].requires_grad;
  }
  nodes_.push_back(Node{std::move(value), Tensor{}, needs, needs ? std::move(vjp) : nullptr});
  return Var(this, nodes_.size() - 1);
}

void Tape::accumulate(Var node, const Tensor& contribution) {
  Node& n = nodes_[node.id()];
  if (!n.requires_grad) return;
  if (n.grad.empty() && !n.value.empty()) {
    n.grad = contribution;
    return;
  }
  n.grad += contribution;
}

void Tape::backward(Var root) {
  require(root.value().rows() == 1 && root.value().cols() == 1, ErrorCode::shape_mismatch,
          "backward() without a seed needs a 1x1 root, got " + root.value().shape_str());
  backward(root, Tensor::scalar(1.0));
}

void Tape::backward(Var root, const Tensor& seed) {
  require(seed.same_shape(root.value()), ErrorCode::shape_mismatch,
          "backward seed shape " + seed.shape_str() + " != root " + root.value().shape_str());
  accumulate(root, seed);
  for (std::size_t id = root.id() + 1; id-- > 0;) {
    Node& n = nodes_[id];
    if (!n.requires_grad || !n.vjp || n.grad.empty()) continue;
    n.vjp(*this, n.grad);
  }
}

namespace {

void check_same(const Var& a, const Var& b, const char* op) {
  require(a.value().same_shape(b.value()), ErrorCode::shape_mismatch,
          std::string(op) + ": shapes " + a.value().shape_str() + " and " +
              b.value().shape_str() + " differ");
}

Tensor hadamard_values(const Tensor& a, const Tensor& b) {
  Tensor out = a;
  auto o = out.data();
  auto bd = b.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] *= bd[i];
  return out;
}

Tensor column_sums(const Tensor& x) {
  Tensor out(1, x.cols());
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = 0; j < x.cols(); ++j) out(0, j) += x(i, j);
  return out;
}

Tensor repeat_row(const Tensor& row, std::size_t n) {
  Tensor out(n, row.cols());
  for (std::size_t i = 0; i < n; ++i) std::copy(row.data().begin(), row.data().end(), out.row(i).begin());
  return out;
}

}  // namespace

double sigmoid(double x) noexcept {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Var matmul(Var a, Var b) {
  Tensor out = smpnn::matmul(a.value(), b.value());
  return a.tape()->record(std::move(out), {a, b}, [a, b](Tape& t, const Tensor& g) {
    if (a.requires_grad()) t.accumulate(a, smpnn::matmul_nt(g, b.value()));
    if (b.requires_grad()) t.accumulate(b, smpnn::matmul_tn(a.value(), g));
  });
}

Var matmul_nt(Var a, Var b) {
  Tensor out = smpnn::matmul_nt(a.value(), b.value());
  return a.tape()->record(std::move(out), {a, b}, [a, b](Tape& t, const Tensor& g) {
    if (a.requires_grad()) t.accumulate(a, smpnn::matmul(g, b.value()));
    if (b.requires_grad()) t.accumulate(b, smpnn::matmul_tn(g, a.value()));
  });
}

Var add(Var a, Var b) {
  check_same(a, b, "add");
  return a.tape()->record(a.value() + b.value(), {a, b}, [a, b](Tape& t, const Tensor& g) {
    t.accumulate(a, g);
    t.accumulate(b, g);
  });
}

Var sub(Var a, Var b) {
  check_same(a, b, "sub");
  return a.tape()->record(a.value() - b.value(), {a, b}, [a, b](Tape& t, const Tensor& g) {
    t.accumulate(a, g);
    if (b.requires_grad()) t.accumulate(b, -1.0 * g);
  });
}

Var hadamard(Var a, Var b) {
  check_same(a, b, "hadamard");
  return a.tape()->record(hadamard_values(a.value(), b.value()), {a, b},
                          [a, b](Tape& t, const Tensor& g) {
                            if (a.requires_grad()) t.accumulate(a, hadamard_values(g, b.value()));
                            if (b.requires_grad()) t.accumulate(b, hadamard_values(g, a.value()));
                          });
}

Var scale(Var a, double s) {
  return a.tape()->record(s * a.value(), {a},
                          [a, s](Tape& t, const Tensor& g) { t.accumulate(a, s * g); });
}

Var scale_by(Var a, Var s) {
  require(s.value().rows() == 1 && s.value().cols() == 1, ErrorCode::shape_mismatch,
          "scale_by: gate must be 1x1, got " + s.value().shape_str());
  const double sv = s.value()(0, 0);
  return a.tape()->record(sv * a.value(), {a, s}, [a, s](Tape& t, const Tensor& g) {
    if (a.requires_grad()) t.accumulate(a, s.value()(0, 0) * g);
    if (s.requires_grad()) {
      double dot = 0.0;
      auto gd = g.data();
      auto ad = a.value().data();
      for (std::size_t i = 0; i < gd.size(); ++i) dot += gd[i] * ad[i];
      t.accumulate(s, Tensor::scalar(dot));
    }
  });
}

Var spmm(const NormalizedAdjacency& adj, Var x) {
  const NormalizedAdjacency* a = &adj;
  return x.tape()->record(smpnn::spmm(adj, x.value()), {x},
                          [a, x](Tape& t, const Tensor& g) { t.accumulate(x, smpnn::spmm(*a, g)); });
}

Var silu(Var x) {
  Tensor out = x.value();
  for (double& v : out.data()) v = v * sigmoid(v);
  return x.tape()->record(std::move(out), {x}, [x](Tape& t, const Tensor& g) {
    Tensor dx = g;
    auto xv = x.value().data();
    auto d = dx.data();
    for (std::size_t i = 0; i < d.size(); ++i) {
      const double s = sigmoid(xv[i]);
      d[i] *= s * (1.0 + xv[i] * (1.0 - s));
    }
    t.accumulate(x, dx);
  });
}

Var layer_norm(Var x, Var gamma, Var beta, double eps) {
  const Tensor& xv = x.value();
  const std::size_t n = xv.rows(), d = xv.cols();
  require(d >= 2, ErrorCode::invalid_argument,
          "layer_norm needs at least 2 features per row, got " + std::to_string(d));
  require(gamma.value().rows() == 1 && gamma.value().cols() == d && beta.value().same_shape(gamma.value()),
          ErrorCode::shape_mismatch,
          "layer_norm affine must be 1x" + std::to_string(d) + ", got " +
              gamma.value().shape_str() + " and " + beta.value().shape_str());

  auto xhat = std::make_shared<Tensor>(n, d);
  auto rstd = std::make_shared<std::vector<double>>(n);
  Tensor out(n, d);
  const Tensor& gv = gamma.value();
  const Tensor& bv = beta.value();
  for (std::size_t i = 0; i < n; ++i) {
    auto row = xv.row(i);
    double mu = 0.0;
    for (double v : row) mu += v;
    mu /= static_cast<double>(d);
    double var = 0.0;
    for (double v : row) var += (v - mu) * (v - mu);
    var /= static_cast<double>(d);
    const double r = 1.0 / std::sqrt(var + eps);
    (*rstd)[i] = r;
    for (std::size_t j = 0; j < d; ++j) {
      const double h = (row[j] - mu) * r;
      (*xhat)(i, j) = h;
      out(i, j) = h * gv(0, j) + bv(0, j);
    }
  }
  return x.tape()->record(std::move(out), {x, gamma, beta},
                          [x, gamma, beta, xhat, rstd](Tape& t, const Tensor& g) {
    const std::size_t n = g.rows(), d = g.cols();
    if (gamma.requires_grad() || beta.requires_grad()) {
      Tensor dgamma(1, d), dbeta(1, d);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) {
          dgamma(0, j) += g(i, j) * (*xhat)(i, j);
          dbeta(0, j) += g(i, j);
        }
      t.accumulate(gamma, dgamma);
      t.accumulate(beta, dbeta);
    }
    if (x.requires_grad()) {
      const Tensor& gv = gamma.value();
      Tensor dx(n, d);
      std::vector<double> dxhat(d);
      for (std::size_t i = 0; i < n; ++i) {
        double mean_dxhat = 0.0, mean_dxhat_xhat = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
          dxhat[j] = g(i, j) * gv(0, j);
          mean_dxhat += dxhat[j];
          mean_dxhat_xhat += dxhat[j] * (*xhat)(i, j);
        }
        mean_dxhat /= static_cast<double>(d);
        mean_dxhat_xhat /= static_cast<double>(d);
        for (std::size_t j = 0; j < d; ++j)
          dx(i, j) = (*rstd)[i] * (dxhat[j] - mean_dxhat - (*xhat)(i, j) * mean_dxhat_xhat);
      }
      t.accumulate(x, dx);
    }
  });
}

namespace {
Tensor softmax_values(const Tensor& x) {
  Tensor out = x;
  for (std::size_t i = 0; i < out.rows(); ++i) {
    auto row = out.row(i);
    const double m = *std::max_element(row.begin(), row.end());
    double s = 0.0;
    for (double& v : row) {
      v = std::exp(v - m);
      s += v;
    }
    for (double& v : row) v /= s;
  }
  return out;
}
}  // namespace

Var softmax_rows(Var x) {
  require(x.value().cols() >= 1, ErrorCode::shape_mismatch, "softmax over zero columns");
  auto y = std::make_shared<Tensor>(softmax_values(x.value()));
  Tensor out = *y;
  return x.tape()->record(std::move(out), {x}, [x, y](Tape& t, const Tensor& g) {
    Tensor dx(g.rows(), g.cols());
    for (std::size_t i = 0; i < g.rows(); ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < g.cols(); ++j) dot += g(i, j) * (*y)(i, j);
      for (std::size_t j = 0; j < g.cols(); ++j) dx(i, j) = (*y)(i, j) * (g(i, j) - dot);
    }
    t.accumulate(x, dx);
  });
}

Var cross_entropy(Var logits, std::span<const int> labels, std::span<const Index> rows) {
  const Tensor& z = logits.value();
  require(labels.size() == z.rows(), ErrorCode::shape_mismatch,
          "cross_entropy: " + std::to_string(labels.size()) + " labels for " +
              std::to_string(z.rows()) + " rows");
  require(!rows.empty(), ErrorCode::invalid_argument, "cross_entropy over an empty row set");
  auto probs = std::make_shared<Tensor>(softmax_values(z));
  double loss = 0.0;
  for (Index r : rows) {
    require(r < z.rows(), ErrorCode::invalid_argument, "cross_entropy: row out of range");
    const int y = labels[r];
    require(y >= 0 && static_cast<std::size_t>(y) < z.cols(), ErrorCode::invalid_argument,
            "label " + std::to_string(y) + " out of range for " + std::to_string(z.cols()) +
                " classes");
    auto row = z.row(r);
    const double m = *std::max_element(row.begin(), row.end());
    double s = 0.0;
    for (double v : row) s += std::exp(v - m);
    loss += m + std::log(s) - row[static_cast<std::size_t>(y)];
  }
  const double inv = 1.0 / static_cast<double>(rows.size());
  std::vector<Index> row_copy(rows.begin(), rows.end());
  std::vector<int> label_copy(labels.begin(), labels.end());
  return logits.tape()->record(
      Tensor::scalar(loss * inv), {logits},
      [logits, probs, row_copy = std::move(row_copy), label_copy = std::move(label_copy),
       inv](Tape& t, const Tensor& g) {
        const double scale = g(0, 0) * inv;
        Tensor dz(probs->rows(), probs->cols());
        for (Index r : row_copy) {
          for (std::size_t j = 0; j < dz.cols(); ++j) dz(r, j) += scale * (*probs)(r, j);
          dz(r, static_cast<std::size_t>(label_copy[r])) -= scale;
        }
        t.accumulate(logits, dz);
      });
}

Var bce_with_logits(Var logits, const Tensor& targets, std::span<const Index> rows) {
  const Tensor& z = logits.value();
  require(targets.same_shape(z), ErrorCode::shape_mismatch,
          "bce_with_logits: targets " + targets.shape_str() + " vs logits " + z.shape_str());
  require(!rows.empty(), ErrorCode::invalid_argument, "bce_with_logits over an empty row set");
  double loss = 0.0;
  for (Index r : rows) {
    require(r < z.rows(), ErrorCode::invalid_argument, "bce_with_logits: row out of range");
    for (std::size_t j = 0; j < z.cols(); ++j) {
      const double v = z(r, j);
      loss += std::max(v, 0.0) - v * targets(r, j) + std::log1p(std::exp(-std::abs(v)));
    }
  }
  const double inv = 1.0 / static_cast<double>(rows.size() * z.cols());
  auto tgt = std::make_shared<Tensor>(targets);
  std::vector<Index> row_copy(rows.begin(), rows.end());
  return logits.tape()->record(
      Tensor::scalar(loss * inv), {logits},
      [logits, tgt, row_copy = std::move(row_copy), inv](Tape& t, const Tensor& g) {
        const Tensor& z = logits.value();
        Tensor dz(z.rows(), z.cols());
        const double scale = g(0, 0) * inv;
        for (Index r : row_copy)
          for (std::size_t j = 0; j < z.cols(); ++j)
            dz(r, j) = scale * (sigmoid(z(r, j)) - (*tgt)(r, j));
        t.accumulate(logits, dz);
      });
}

Var dropout(Var x, double p, std::mt19937_64& rng, bool train_mode) {
  require(p >= 0.0 && p < 1.0, ErrorCode::invalid_argument, "dropout p must lie in [0, 1)");
  if (!train_mode || p == 0.0) return x;
  auto mask = std::make_shared<Tensor>(x.value().rows(), x.value().cols());
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double keep_scale = 1.0 / (1.0 - p);
  for (double& m : mask->data()) m = u(rng) >= p ? keep_scale : 0.0;
  return x.tape()->record(hadamard_values(x.value(), *mask), {x},
                          [x, mask](Tape& t, const Tensor& g) {
                            t.accumulate(x, hadamard_values(g, *mask));
                          });
}

Var sum(Var x) {
  return x.tape()->record(Tensor::scalar(x.value().sum()), {x}, [x](Tape& t, const Tensor& g) {
    t.accumulate(x, Tensor(x.value().rows(), x.value().cols(), g(0, 0)));
  });
}

Var mean(Var x) {
  const double inv = 1.0 / static_cast<double>(x.value().size());
  return x.tape()->record(Tensor::scalar(x.value().sum() * inv), {x},
                          [x, inv](Tape& t, const Tensor& g) {
                            t.accumulate(x, Tensor(x.value().rows(), x.value().cols(), g(0, 0) * inv));
                          });
}

Var sum_rows(Var x) {
  const std::size_t n = x.value().rows();
  return x.tape()->record(column_sums(x.value()), {x},
                          [x, n](Tape& t, const Tensor& g) { t.accumulate(x, repeat_row(g, n)); });
}

Var broadcast_rows(Var row, std::size_t n) {
  require(row.value().rows() == 1, ErrorCode::shape_mismatch,
          "broadcast_rows expects a single row, got " + row.value().shape_str());
  return row.tape()->record(repeat_row(row.value(), n), {row},
                            [row](Tape& t, const Tensor& g) { t.accumulate(row, column_sums(g)); });
}

Var normalize_frobenius(Var x) {
  const double norm = x.value().frobenius_norm();
  require(norm > 0.0 && std::isfinite(norm), ErrorCode::numerical_error,
          "normalize_frobenius: zero or non-finite norm");
  Tensor y = (1.0 / norm) * x.value();
  return x.tape()->record(std::move(y), {x}, [x, norm](Tape& t, const Tensor& g) {
    const Tensor& xv = x.value();
    double dot = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) dot += g[i] * xv[i];
    dot /= norm;  // <G, y>
    Tensor dx(g.rows(), g.cols());
    for (std::size_t i = 0; i < g.size(); ++i) dx[i] = (g[i] - xv[i] / norm * dot) / norm;
    t.accumulate(x, dx);
  });
}

Var normalize_rows(Var x) {
  const Tensor& xv = x.value();
  auto norms = std::make_shared<std::vector<double>>(xv.rows());
  Tensor y(xv.rows(), xv.cols());
  for (std::size_t i = 0; i < xv.rows(); ++i) {
    double s = 0.0;
    for (double v : xv.row(i)) s += v * v;
    const double nrm = std::sqrt(s);
    require(nrm > 0.0 && std::isfinite(nrm), ErrorCode::numerical_error,
            "normalize_rows: row " + std::to_string(i) + " has zero or non-finite norm");
    (*norms)[i] = nrm;
    for (std::size_t j = 0; j < xv.cols(); ++j) y(i, j) = xv(i, j) / nrm;
  }
  return x.tape()->record(std::move(y), {x}, [x, norms](Tape& t, const Tensor& g) {
    const Tensor& xv = x.value();
    Tensor dx(g.rows(), g.cols());
    for (std::size_t i = 0; i < g.rows(); ++i) {
      const double nrm = (*norms)[i];
      double dot = 0.0;
      for (std::size_t j = 0; j < g.cols(); ++j) dot += g(i, j) * xv(i, j) / nrm;
      for (std::size_t j = 0; j < g.cols(); ++j)
        dx(i, j) = (g(i, j) - xv(i, j) / nrm * dot) / nrm;
    }
    t.accumulate(x, dx);
  });
}

}  // namespace smpnn::ad
