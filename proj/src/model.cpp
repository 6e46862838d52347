#include "smpnn/model.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <istream>
#include <ostream>
#include <sstream>

#include "smpnn/error.hpp"

namespace smpnn {

BlockConfig block_preset(const std::string& name) {
  BlockConfig c;
  if (name == "standard") return c;
  if (name == "no_residual") {
    c.use_residual = false;
    return c;
  }
  if (name == "no_alpha") {
    c.learn_alpha = false;
    return c;
  }
  if (name == "no_ff") {
    c.use_feedforward = false;
    return c;
  }
  if (name == "no_gcn_ln") {
    c.use_gcn_layernorm = false;
    return c;
  }
  if (name == "attention") {
    c.use_attention = true;
    return c;
  }
  throw Error(ErrorCode::invalid_argument, "unknown block variant '" + name + "'");
}

ModelShape SmpnnParams::shape() const {
  ModelShape s;
  s.input_dim = input_proj.rows();
  s.hidden_dim = input_proj.cols();
  s.output_dim = output_proj.cols();
  s.depth = layers.size();
  s.num_heads = layers.empty() ? 0 : layers.front().heads.size();
  return s;
}

namespace {

template <typename Params, typename Out>
void collect(Params& p, Out& out) {
  out.emplace_back("input_proj", &p.input_proj);
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    auto& L = p.layers[l];
    const std::string prefix = "layers." + std::to_string(l) + ".";
    out.emplace_back(prefix + "w1", &L.w1);
    out.emplace_back(prefix + "w2", &L.w2);
    out.emplace_back(prefix + "ln1_gamma", &L.ln1_gamma);
    out.emplace_back(prefix + "ln1_beta", &L.ln1_beta);
    out.emplace_back(prefix + "ln2_gamma", &L.ln2_gamma);
    out.emplace_back(prefix + "ln2_beta", &L.ln2_beta);
    out.emplace_back(prefix + "alpha1", &L.alpha1);
    out.emplace_back(prefix + "alpha2", &L.alpha2);
    for (std::size_t h = 0; h < L.heads.size(); ++h) {
      const std::string hp = prefix + "heads." + std::to_string(h) + ".";
      out.emplace_back(hp + "w_q", &L.heads[h].w_q);
      out.emplace_back(hp + "w_k", &L.heads[h].w_k);
      out.emplace_back(hp + "w_v", &L.heads[h].w_v);
    }
    if (!L.heads.empty()) {
      out.emplace_back(prefix + "ln_global_gamma", &L.ln_global_gamma);
      out.emplace_back(prefix + "ln_global_beta", &L.ln_global_beta);
    }
  }
  out.emplace_back("output_proj", &p.output_proj);
}

Tensor glorot(std::size_t fan_in, std::size_t fan_out, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> u(-limit, limit);
  Tensor t(fan_in, fan_out);
  for (double& v : t.data()) v = u(rng);
  return t;
}

}  // namespace

std::vector<std::pair<std::string, Tensor*>> SmpnnParams::named_tensors() {
  std::vector<std::pair<std::string, Tensor*>> out;
  collect(*this, out);
  return out;
}

std::vector<std::pair<std::string, const Tensor*>> SmpnnParams::named_tensors() const {
  std::vector<std::pair<std::string, const Tensor*>> out;
  collect(*this, out);
  return out;
}

std::size_t SmpnnParams::num_scalars() const {
  std::size_t n = 0;
  for (const auto& [name, t] : named_tensors()) n += t->size();
  return n;
}

SmpnnParams init_params(const ModelShape& shape, std::uint64_t seed) {
  require(shape.input_dim > 0 && shape.hidden_dim > 0 && shape.output_dim > 0,
          ErrorCode::invalid_argument, "model dimensions must be positive");
  std::mt19937_64 rng(seed);
  SmpnnParams p;
  const std::size_t d = shape.hidden_dim;
  p.input_proj = glorot(shape.input_dim, d, rng);
  p.layers.resize(shape.depth);
  for (auto& L : p.layers) {
    L.w1 = glorot(d, d, rng);
    L.w2 = glorot(d, d, rng);
    L.ln1_gamma = Tensor(1, d, 1.0);
    L.ln1_beta = Tensor(1, d, 0.0);
    L.ln2_gamma = Tensor(1, d, 1.0);
    L.ln2_beta = Tensor(1, d, 0.0);
    L.alpha1 = Tensor::scalar(kAlphaInit);
    L.alpha2 = Tensor::scalar(kAlphaInit);
    for (std::size_t h = 0; h < shape.num_heads; ++h) {
      AttentionHead head;
      head.w_q = glorot(d, d, rng);
      head.w_k = glorot(d, d, rng);
      head.w_v = glorot(d, d, rng);
      L.heads.push_back(std::move(head));
    }
    if (shape.num_heads > 0) {
      L.ln_global_gamma = Tensor(1, d, 1.0);
      L.ln_global_beta = Tensor(1, d, 0.0);
    }
  }
  p.output_proj = glorot(d, shape.output_dim, rng);
  return p;
}

ParamVars param_vars_from_flat(const SmpnnParams& like, std::span<const ad::Var> flat) {
  ParamVars v;
  std::size_t k = 0;
  auto next = [&](const Tensor& t) {
    require(k < flat.size(), ErrorCode::shape_mismatch, "too few parameter nodes");
    const ad::Var var = flat[k++];
    require(var.value().same_shape(t), ErrorCode::shape_mismatch,
            "parameter node " + std::to_string(k - 1) + " has shape " + var.value().shape_str() +
                ", expected " + t.shape_str());
    v.flat.push_back(var);
    return var;
  };
  // Same traversal order as collect().
  v.input_proj = next(like.input_proj);
  for (const auto& L : like.layers) {
    LayerVars lv;
    lv.w1 = next(L.w1);
    lv.w2 = next(L.w2);
    lv.ln1_gamma = next(L.ln1_gamma);
    lv.ln1_beta = next(L.ln1_beta);
    lv.ln2_gamma = next(L.ln2_gamma);
    lv.ln2_beta = next(L.ln2_beta);
    lv.alpha1 = next(L.alpha1);
    lv.alpha2 = next(L.alpha2);
    for (const auto& h : L.heads) {
      lv.w_q.push_back(next(h.w_q));
      lv.w_k.push_back(next(h.w_k));
      lv.w_v.push_back(next(h.w_v));
    }
    if (!L.heads.empty()) {
      lv.ln_global_gamma = next(L.ln_global_gamma);
      lv.ln_global_beta = next(L.ln_global_beta);
    }
    v.layers.push_back(std::move(lv));
  }
  v.output_proj = next(like.output_proj);
  require(k == flat.size(), ErrorCode::shape_mismatch, "too many parameter nodes");
  return v;
}

ParamVars bind_params(ad::Tape& tape, const SmpnnParams& params, bool requires_grad) {
  std::vector<ad::Var> flat;
  for (const auto& [name, t] : params.named_tensors()) flat.push_back(tape.leaf(*t, requires_grad));
  return param_vars_from_flat(params, flat);
}

namespace {

ad::Var gate(const ad::Var& alpha, const BlockConfig& config, ad::Var like) {
  if (config.learn_alpha) return alpha;
  return like.tape()->constant(Tensor::scalar(1.0));
}

ad::Var maybe_dropout(ad::Var x, const ForwardOptions& o) {
  if (!o.train_mode || o.dropout == 0.0) return x;
  require(o.rng != nullptr, ErrorCode::invalid_argument, "dropout in train mode needs an rng");
  return ad::dropout(x, o.dropout, *o.rng, true);
}

void check_finite(const ad::Var& v, std::size_t layer_index, const char* where) {
  require(v.value().all_finite(), ErrorCode::numerical_error,
          std::string("non-finite values in ") + where + " of layer " +
              std::to_string(layer_index));
}

void check_block_input(const ad::Var& x, const NormalizedAdjacency& adj, const LayerVars& layer) {
  require(x.value().rows() == adj.num_nodes(), ErrorCode::shape_mismatch,
          "block input has " + std::to_string(x.value().rows()) + " rows, adjacency has " +
              std::to_string(adj.num_nodes()) + " nodes");
  require(x.value().cols() == layer.w1.value().rows(), ErrorCode::shape_mismatch,
          "block input width " + std::to_string(x.value().cols()) + " != hidden width " +
              std::to_string(layer.w1.value().rows()));
}

ad::Var feedforward(ad::Var h2, const LayerVars& layer, const BlockConfig& config,
                    const ForwardOptions& options, std::size_t layer_index) {
  if (!config.use_feedforward) return h2;
  ad::Var h3 = ad::layer_norm(h2, layer.ln2_gamma, layer.ln2_beta, options.ln_eps);
  ad::Var ff = maybe_dropout(ad::silu(ad::matmul(h3, layer.w2)), options);
  ad::Var h4 = ad::add(ad::scale_by(ff, gate(layer.alpha2, config, h2)), h2);
  check_finite(h4, layer_index, "feedforward output");
  return h4;
}

}  // namespace

ad::Var block_forward(ad::Var x, const NormalizedAdjacency& adj, const LayerVars& layer,
                      const BlockConfig& config, const ForwardOptions& options,
                      std::size_t layer_index) {
  if (config.use_attention) return hybrid_block_forward(x, adj, layer, config, options, layer_index);
  check_block_input(x, adj, layer);
  check_finite(x, layer_index, "input");

  ad::Var h1 = config.use_gcn_layernorm
                   ? ad::layer_norm(x, layer.ln1_gamma, layer.ln1_beta, options.ln_eps)
                   : x;
  ad::Var conv = maybe_dropout(ad::silu(ad::spmm(adj, ad::matmul(h1, layer.w1))), options);
  ad::Var h2 = ad::scale_by(conv, gate(layer.alpha1, config, x));
  if (config.use_residual) h2 = ad::add(h2, x);
  check_finite(h2, layer_index, "graph-convolution output");
  return feedforward(h2, layer, config, options, layer_index);
}

ad::Var hybrid_block_forward(ad::Var x, const NormalizedAdjacency& adj, const LayerVars& layer,
                             const BlockConfig& config, const ForwardOptions& options,
                             std::size_t layer_index) {
  require(config.use_attention, ErrorCode::invalid_argument,
          "hybrid block requested with attention disabled");
  require(!layer.w_q.empty() && layer.ln_global_gamma.valid(), ErrorCode::invalid_argument,
          "layer " + std::to_string(layer_index) + " has no attention parameters");
  check_block_input(x, adj, layer);
  check_finite(x, layer_index, "input");

  ad::Var local_in = config.use_gcn_layernorm
                         ? ad::layer_norm(x, layer.ln1_gamma, layer.ln1_beta, options.ln_eps)
                         : x;
  ad::Var local = ad::silu(ad::spmm(adj, ad::matmul(local_in, layer.w1)));
  ad::Var global_in =
      ad::layer_norm(x, layer.ln_global_gamma, layer.ln_global_beta, options.ln_eps);
  const std::size_t heads = std::min(config.num_heads, layer.w_q.size());
  require(heads >= 1, ErrorCode::invalid_argument, "attention needs at least one head");
  ad::Var global = linear_global_attention(global_in, layer.w_q[0], layer.w_k[0], layer.w_v[0],
                                           config.key_norm);
  for (std::size_t h = 1; h < heads; ++h)
    global = ad::add(global, linear_global_attention(global_in, layer.w_q[h], layer.w_k[h],
                                                     layer.w_v[h], config.key_norm));
  ad::Var mixed = maybe_dropout(ad::add(local, global), options);
  ad::Var h2 = ad::scale_by(mixed, gate(layer.alpha1, config, x));
  if (config.use_residual) h2 = ad::add(h2, x);
  check_finite(h2, layer_index, "local+global output");
  return feedforward(h2, layer, config, options, layer_index);
}

ad::Var model_forward(ad::Var x_in, const NormalizedAdjacency& adj, const ParamVars& params,
                      const BlockConfig& config, const ForwardOptions& options) {
  require(x_in.value().cols() == params.input_proj.value().rows(), ErrorCode::shape_mismatch,
          "input width " + std::to_string(x_in.value().cols()) + " != projection rows " +
              std::to_string(params.input_proj.value().rows()));
  ad::Var h = maybe_dropout(ad::matmul(x_in, params.input_proj), options);
  for (std::size_t l = 0; l < params.layers.size(); ++l)
    h = block_forward(h, adj, params.layers[l], config, options, l);
  return ad::matmul(h, params.output_proj);
}

Tensor model_forward(const Tensor& x_in, const NormalizedAdjacency& adj,
                     const SmpnnParams& params, const BlockConfig& config) {
  ad::Tape tape;
  ParamVars vars = bind_params(tape, params, false);
  return model_forward(tape.constant(x_in), adj, vars, config).value();
}

std::vector<Tensor> hidden_states(const Tensor& x_in, const NormalizedAdjacency& adj,
                                  const SmpnnParams& params, const BlockConfig& config) {
  ad::Tape tape;
  ParamVars vars = bind_params(tape, params, false);
  ad::Var h = ad::matmul(tape.constant(x_in), vars.input_proj);
  std::vector<Tensor> states{h.value()};
  for (std::size_t l = 0; l < vars.layers.size(); ++l) {
    h = block_forward(h, adj, vars.layers[l], config, {}, l);
    states.push_back(h.value());
  }
  return states;
}

ad::Var linear_global_attention(ad::Var x, ad::Var w_q, ad::Var w_k, ad::Var w_v,
                                KeyNorm key_norm) {
  const std::size_t n = x.value().rows();
  ad::Var q = ad::matmul(x, w_q);
  ad::Var k = ad::matmul(x, w_k);
  ad::Var v = ad::matmul(x, w_v);
  ad::Var q_summed = ad::sum_rows(q);
  require(q_summed.value().frobenius_norm() > 0.0, ErrorCode::numerical_error,
          "linear attention: the summed query has zero norm");
  ad::Var q_sn = ad::normalize_frobenius(q_summed);
  ad::Var k_n = key_norm == KeyNorm::global ? ad::normalize_frobenius(k) : ad::normalize_rows(k);
  ad::Var weights = ad::softmax_rows(ad::matmul_nt(q_sn, k_n));  // 1×N
  return ad::broadcast_rows(ad::matmul(weights, v), n);
}

AttentionResult linear_global_attention(const Tensor& x, const Tensor& w_q, const Tensor& w_k,
                                        const Tensor& w_v, KeyNorm key_norm) {
  const std::size_t n = x.rows();
  const Tensor q = matmul(x, w_q);
  Tensor k = matmul(x, w_k);
  const Tensor v = matmul(x, w_v);

  Tensor q_sum(1, q.cols());
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < q.cols(); ++j) q_sum(0, j) += q(i, j);
  const double qn = q_sum.frobenius_norm();
  require(qn > 0.0, ErrorCode::numerical_error, "linear attention: the summed query has zero norm");
  q_sum = (1.0 / qn) * q_sum;

  if (key_norm == KeyNorm::global) {
    const double kn = k.frobenius_norm();
    require(kn > 0.0, ErrorCode::numerical_error, "linear attention: zero key matrix");
    k = (1.0 / kn) * k;
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0.0;
      for (double c : k.row(i)) s += c * c;
      s = std::sqrt(s);
      require(s > 0.0, ErrorCode::numerical_error, "linear attention: zero key row");
      for (double& c : k.row(i)) c /= s;
    }
  }

  AttentionResult r;
  r.weights = matmul_nt(q_sum, k);
  double m = r.weights(0, 0);
  for (double s : r.weights.data()) m = std::max(m, s);
  double total = 0.0;
  for (double& s : r.weights.data()) {
    s = std::exp(s - m);
    total += s;
  }
  for (double& s : r.weights.data()) s /= total;

  const Tensor row = matmul(r.weights, v);
  r.output = Tensor(n, v.cols());
  for (std::size_t i = 0; i < n; ++i)
    std::copy(row.data().begin(), row.data().end(), r.output.row(i).begin());
  return r;
}

namespace {

std::string config_line(const BlockConfig& c) {
  std::ostringstream s;
  s << "config use_residual=" << c.use_residual << " learn_alpha=" << c.learn_alpha
    << " use_feedforward=" << c.use_feedforward << " use_gcn_layernorm=" << c.use_gcn_layernorm
    << " use_attention=" << c.use_attention << " num_heads=" << c.num_heads
    << " key_norm=" << (c.key_norm == KeyNorm::global ? "global" : "per_row");
  return s.str();
}

[[noreturn]] void bad_checkpoint(const std::string& why) {
  throw Error(ErrorCode::parse_error, "checkpoint: " + why);
}

}  // namespace

void save_checkpoint(std::ostream& out, const SmpnnParams& params, const BlockConfig& config) {
  const ModelShape s = params.shape();
  out << "smpnn-checkpoint 1\n" << config_line(config) << '\n';
  out << "shape " << s.input_dim << ' ' << s.hidden_dim << ' ' << s.output_dim << ' ' << s.depth
      << ' ' << s.num_heads << '\n';
  char buf[32];
  for (const auto& [name, t] : params.named_tensors()) {
    out << "tensor " << name << ' ' << t->rows() << ' ' << t->cols() << '\n';
    for (std::size_t i = 0; i < t->rows(); ++i) {
      for (std::size_t j = 0; j < t->cols(); ++j) {
        std::snprintf(buf, sizeof buf, "%.17g", (*t)(i, j));
        out << (j ? " " : "") << buf;
      }
      out << '\n';
    }
  }
  out << "end\n";
}

Checkpoint load_checkpoint(std::istream& in) {
  std::string magic;
  int version = 0;
  if (!(in >> magic >> version) || magic != "smpnn-checkpoint") bad_checkpoint("bad header");
  if (version != 1) bad_checkpoint("unsupported version " + std::to_string(version));

  Checkpoint ck;
  std::string tag;
  if (!(in >> tag) || tag != "config") bad_checkpoint("missing config line");
  std::string rest;
  std::getline(in, rest);
  std::istringstream cs(rest);
  std::string kv;
  while (cs >> kv) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) bad_checkpoint("malformed config entry '" + kv + "'");
    const std::string key = kv.substr(0, eq), val = kv.substr(eq + 1);
    auto flag = [&]() {
      if (val != "0" && val != "1") bad_checkpoint("flag " + key + " must be 0 or 1");
      return val == "1";
    };
    if (key == "use_residual") ck.config.use_residual = flag();
    else if (key == "learn_alpha") ck.config.learn_alpha = flag();
    else if (key == "use_feedforward") ck.config.use_feedforward = flag();
    else if (key == "use_gcn_layernorm") ck.config.use_gcn_layernorm = flag();
    else if (key == "use_attention") ck.config.use_attention = flag();
    else if (key == "num_heads") ck.config.num_heads = std::stoul(val);
    else if (key == "key_norm") ck.config.key_norm = val == "per_row" ? KeyNorm::per_row : KeyNorm::global;
    else bad_checkpoint("unknown config key '" + key + "'");
  }

  ModelShape s;
  if (!(in >> tag) || tag != "shape" ||
      !(in >> s.input_dim >> s.hidden_dim >> s.output_dim >> s.depth >> s.num_heads))
    bad_checkpoint("missing or malformed shape line");
  ck.params = init_params(s, 0);
  for (auto& [name, t] : ck.params.named_tensors()) {
    std::string got_name;
    std::size_t rows = 0, cols = 0;
    if (!(in >> tag >> got_name >> rows >> cols) || tag != "tensor")
      bad_checkpoint("expected tensor " + name);
    if (got_name != name) bad_checkpoint("expected tensor " + name + ", found " + got_name);
    if (rows != t->rows() || cols != t->cols())
      bad_checkpoint("tensor " + name + " has shape (" + std::to_string(rows) + ", " +
                     std::to_string(cols) + "), expected " + t->shape_str());
    for (double& v : t->data()) {
      std::string tok;
      if (!(in >> tok)) bad_checkpoint("truncated tensor " + name);
      char* end = nullptr;
      v = std::strtod(tok.c_str(), &end);
      if (end != tok.c_str() + tok.size()) bad_checkpoint("bad number '" + tok + "' in tensor " + name);
    }
  }
  if (!(in >> tag) || tag != "end") bad_checkpoint("missing end marker");
  return ck;
}

}  // namespace smpnn
