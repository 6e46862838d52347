#include "smpnn/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>

#include "smpnn/error.hpp"
#include "smpnn/graph.hpp"

namespace smpnn {

void adam_step(std::span<Tensor* const> params, std::span<const Tensor> grads, AdamState& state,
               const AdamConfig& config, std::span<const std::string> names) {
  require(params.size() == grads.size(), ErrorCode::shape_mismatch,
          "adam_step: " + std::to_string(params.size()) + " params but " +
              std::to_string(grads.size()) + " gradients");
  for (std::size_t k = 0; k < grads.size(); ++k) {
    const std::string name = k < names.size() ? names[k] : "#" + std::to_string(k);
    require(grads[k].empty() || grads[k].same_shape(*params[k]), ErrorCode::shape_mismatch,
            "adam_step: gradient shape mismatch for parameter " + name);
    require(grads[k].all_finite(), ErrorCode::numerical_error,
            "non-finite gradient for parameter " + name);
  }
  if (state.m.empty()) {
    for (Tensor* p : params) {
      state.m.emplace_back(p->rows(), p->cols());
      state.v.emplace_back(p->rows(), p->cols());
    }
  }
  require(state.m.size() == params.size(), ErrorCode::shape_mismatch,
          "adam_step: optimizer state does not match parameter list");
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(config.beta1, t);
  const double bc2 = 1.0 - std::pow(config.beta2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor& p = *params[k];
    Tensor& m = state.m[k];
    Tensor& v = state.v[k];
    require(m.same_shape(p), ErrorCode::shape_mismatch, "adam_step: state shape mismatch");
    for (std::size_t i = 0; i < p.size(); ++i) {
      double g = grads[k].empty() ? 0.0 : grads[k][i];
      g += config.weight_decay * p[i];
      m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * g;
      v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * g * g;
      const double m_hat = m[i] / bc1;
      const double v_hat = v[i] / bc2;
      p[i] -= config.lr * m_hat / (std::sqrt(v_hat) + config.eps);
    }
  }
}

void TrainConfig::validate() const {
  require(adam.lr >= 0.0 && std::isfinite(adam.lr), ErrorCode::invalid_argument,
          "learning rate must be finite and non-negative");
  require(dropout >= 0.0 && dropout < 1.0, ErrorCode::invalid_argument,
          "dropout must lie in [0, 1)");
  require(hidden_dim >= 2, ErrorCode::invalid_argument, "hidden_dim must be at least 2");
  require(eval_every >= 1, ErrorCode::invalid_argument, "eval_every must be positive");
  require(!inference_fanouts.empty(), ErrorCode::invalid_argument,
          "inference fanouts must not be empty");
  require(inference_batch >= 1, ErrorCode::invalid_argument, "inference batch must be positive");
}

void TrainResult::write_metrics_csv(std::ostream& out) const {
  out << "epoch,train_loss,val_metric,test_metric,wall_ms\n";
  char buf[160];
  for (const auto& r : history) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g,%.3f\n", r.epoch, r.train_loss,
                  r.val_metric, r.test_metric, r.wall_ms);
    out << buf;
  }
}

SyntheticParams desk_task(std::uint64_t seed) {
  SyntheticParams p;
  p.kind = GraphKind::sbm;
  p.num_blocks = 4;
  p.block_size = 250;
  p.p_in = 0.04;
  p.p_out = 0.01;
  p.feature_dim = 16;
  p.mean_separation = 1.0;
  p.seed = seed;
  return p;
}

TrainConfig desk_train_config() {
  TrainConfig c;
  c.adam.lr = 1e-2;
  c.epochs = 100;
  c.hidden_dim = 16;
  c.eval_every = 5;
  return c;
}

std::string to_string(Metric metric) { return metric == Metric::accuracy ? "accuracy" : "rocauc"; }

Metric parse_metric(const std::string& name) {
  if (name == "accuracy" || name == "acc") return Metric::accuracy;
  if (name == "rocauc" || name == "auc") return Metric::rocauc;
  throw Error(ErrorCode::invalid_argument, "unknown metric '" + name + "'");
}

double roc_auc(std::span<const double> scores, std::span<const int> labels) {
  require(scores.size() == labels.size(), ErrorCode::shape_mismatch,
          "roc_auc: scores and labels differ in length");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double positive_rank_sum = 0.0;
  std::size_t positives = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);  // ranks i+1..j
    for (std::size_t k = i; k < j; ++k) {
      if (labels[order[k]] != 0) {
        positive_rank_sum += avg_rank;
        ++positives;
      }
    }
    i = j;
  }
  const std::size_t negatives = scores.size() - positives;
  require(positives > 0 && negatives > 0, ErrorCode::invalid_argument,
          "ROC-AUC is undefined when only one class is present");
  const double p = static_cast<double>(positives);
  return (positive_rank_sum - p * (p + 1.0) / 2.0) / (p * static_cast<double>(negatives));
}

double evaluate(const Tensor& logits, const Labels& labels, std::span<const Index> rows,
                Metric metric) {
  require(labels.size() == logits.rows(), ErrorCode::shape_mismatch,
          "evaluate: label count does not match logits");
  require(!rows.empty(), ErrorCode::invalid_argument, "evaluate over an empty split");
  if (metric == Metric::accuracy) {
    require(!labels.multilabel, ErrorCode::invalid_argument,
            "accuracy needs single-label targets");
    std::size_t correct = 0;
    for (Index r : rows) {
      auto row = logits.row(r);
      const auto best = static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
      if (static_cast<int>(best) == labels.classes[r]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(rows.size());
  }

  std::vector<double> scores(rows.size());
  std::vector<int> truth(rows.size());
  if (!labels.multilabel) {
    require(logits.cols() == 2, ErrorCode::invalid_argument,
            "ROC-AUC on single-label data needs exactly 2 classes");
    for (std::size_t k = 0; k < rows.size(); ++k) {
      scores[k] = logits(rows[k], 1) - logits(rows[k], 0);
      truth[k] = labels.classes[rows[k]];
    }
    return roc_auc(scores, truth);
  }
  require(labels.targets.cols() == logits.cols(), ErrorCode::shape_mismatch,
          "evaluate: target columns do not match logits");
  double total = 0.0;
  for (std::size_t c = 0; c < logits.cols(); ++c) {
    for (std::size_t k = 0; k < rows.size(); ++k) {
      scores[k] = logits(rows[k], c);
      truth[k] = labels.targets(rows[k], c) != 0.0 ? 1 : 0;
    }
    total += roc_auc(scores, truth);
  }
  return total / static_cast<double>(logits.cols());
}

ad::Var node_loss(ad::Var logits, const Labels& labels, std::span<const Index> rows) {
  if (labels.multilabel) return ad::bce_with_logits(logits, labels.targets, rows);
  return ad::cross_entropy(logits, labels.classes, rows);
}

SmpnnParams init_for_dataset(const Dataset& data, const TrainConfig& config,
                             const BlockConfig& block) {
  ModelShape shape;
  shape.input_dim = data.features.cols();
  shape.hidden_dim = config.hidden_dim;
  shape.output_dim = data.labels.num_outputs();
  shape.depth = config.depth;
  shape.num_heads = block.use_attention ? block.num_heads : 0;
  return init_params(shape, config.seed);
}

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

Tensor gather_rows(const Tensor& x, std::span<const Index> ids) {
  Tensor out(ids.size(), x.cols());
  for (std::size_t k = 0; k < ids.size(); ++k)
    std::copy(x.row(ids[k]).begin(), x.row(ids[k]).end(), out.row(k).begin());
  return out;
}

Labels gather_labels(const Labels& labels, std::span<const Index> ids) {
  Labels out;
  out.multilabel = labels.multilabel;
  if (labels.multilabel) {
    out.targets = gather_rows(labels.targets, ids);
  } else {
    out.classes.reserve(ids.size());
    for (Index id : ids) out.classes.push_back(labels.classes[id]);
  }
  return out;
}

struct StepResult {
  double loss = 0.0;
  std::vector<Tensor> grads;
};

StepResult loss_and_grads(const Tensor& features, const NormalizedAdjacency& adj,
                          const Labels& labels, std::span<const Index> rows,
                          const SmpnnParams& params, const BlockConfig& block,
                          const ForwardOptions& options) {
  ad::Tape tape;
  ParamVars vars = bind_params(tape, params, true);
  ad::Var logits = model_forward(tape.constant(features), adj, vars, block, options);
  ad::Var loss = node_loss(logits, labels, rows);
  tape.backward(loss);
  StepResult r;
  r.loss = loss.value()(0, 0);
  for (const ad::Var& v : vars.flat)
    r.grads.push_back(v.grad().empty() ? Tensor(v.value().rows(), v.value().cols()) : v.grad());
  return r;
}

struct Optimizer {
  AdamState state;
  std::vector<Tensor*> ptrs;
  std::vector<std::string> names;

  explicit Optimizer(SmpnnParams& params) {
    for (auto& [name, t] : params.named_tensors()) {
      names.push_back(name);
      ptrs.push_back(t);
    }
  }
  void step(const std::vector<Tensor>& grads, const AdamConfig& config) {
    adam_step(ptrs, grads, state, config, names);
  }
};

struct Batch {
  Subgraph sub;
  std::vector<Index> train_rows;
};

Batch make_batch(const Dataset& data, std::span<const Index> batch,
                 const std::vector<char>& is_train) {
  Batch b{induced_subgraph(data.graph, batch), {}};
  for (std::size_t k = 0; k < batch.size(); ++k)
    if (is_train[batch[k]]) b.train_rows.push_back(static_cast<Index>(k));
  return b;
}

std::vector<char> train_mask(const Dataset& data) {
  std::vector<char> mask(data.graph.num_nodes(), 0);
  for (Index id : data.split.train) mask[id] = 1;
  return mask;
}

class EvalTracker {
 public:
  EvalTracker(const Dataset& data, const BlockConfig& block, const TrainConfig& config,
              TrainResult& result)
      : data_(data), block_(block), config_(config), result_(result) {}

  void record(std::size_t epoch, double train_loss, const SmpnnParams& params,
              Clock::time_point start) {
    const Tensor logits = predict(data_, params, block_, config_);
    MetricsRow row;
    row.epoch = epoch;
    row.train_loss = train_loss;
    row.val_metric = metric_or_nan(logits, data_.split.val);
    row.test_metric = metric_or_nan(logits, data_.split.test);
    row.wall_ms = elapsed_ms(start);
    result_.history.push_back(row);
    // Ties go to the later epoch; without a validation split the last
    // evaluation wins.
    const bool better = std::isnan(row.val_metric) || !have_best_ || row.val_metric >= result_.best_val;
    if (better) {
      have_best_ = true;
      result_.best_val = row.val_metric;
      result_.test_at_best = row.test_metric;
      result_.best_epoch = epoch;
      result_.best_params = params;
    }
  }

 private:
  double metric_or_nan(const Tensor& logits, const std::vector<Index>& rows) const {
    if (rows.empty()) return std::numeric_limits<double>::quiet_NaN();
    return evaluate(logits, data_.labels, rows, config_.metric);
  }

  const Dataset& data_;
  const BlockConfig& block_;
  const TrainConfig& config_;
  TrainResult& result_;
  bool have_best_ = false;
};

bool should_eval(std::size_t epoch, const TrainConfig& c) {
  return epoch % c.eval_every == 0 || epoch == c.epochs;
}

double initial_loss(const Dataset& data, const NormalizedAdjacency& adj, const SmpnnParams& params,
                    const BlockConfig& block) {
  if (data.split.train.empty()) return std::numeric_limits<double>::quiet_NaN();
  ad::Tape tape;
  ParamVars vars = bind_params(tape, params, false);
  ad::Var logits = model_forward(tape.constant(data.features), adj, vars, block, {});
  return node_loss(logits, data.labels, data.split.train).value()(0, 0);
}

}  // namespace

std::vector<Tensor> full_graph_gradients(const Dataset& data, const SmpnnParams& params,
                                         const BlockConfig& block, const TrainConfig& config) {
  const NormalizedAdjacency adj = normalize_adjacency(data.graph);
  std::mt19937_64 rng(config.seed);
  ForwardOptions options{true, config.dropout, 1e-5, &rng};
  return loss_and_grads(data.features, adj, data.labels, data.split.train, params, block, options)
      .grads;
}

std::vector<Tensor> batch_gradients(const Dataset& data, std::span<const Index> batch,
                                    const SmpnnParams& params, const BlockConfig& block,
                                    const TrainConfig& config) {
  const Batch b = make_batch(data, batch, train_mask(data));
  require(!b.train_rows.empty(), ErrorCode::invalid_argument, "batch has no training nodes");
  const NormalizedAdjacency adj = normalize_adjacency(b.sub.graph);
  std::mt19937_64 rng(config.seed);
  ForwardOptions options{true, config.dropout, 1e-5, &rng};
  return loss_and_grads(gather_rows(data.features, batch), adj, gather_labels(data.labels, batch),
                        b.train_rows, params, block, options)
      .grads;
}

Tensor predict(const Dataset& data, const SmpnnParams& params, const BlockConfig& block,
               const TrainConfig& config) {
  if (!config.sampled_inference) {
    const NormalizedAdjacency adj = normalize_adjacency(data.graph);
    return model_forward(data.features, adj, params, block);
  }
  const std::size_t n = data.graph.num_nodes();
  Tensor logits(n, params.output_proj.cols());
  std::vector<Index> chunk;
  std::size_t chunk_index = 0;
  for (std::size_t start = 0; start < n; start += config.inference_batch, ++chunk_index) {
    chunk.clear();
    for (std::size_t i = start; i < std::min(n, start + config.inference_batch); ++i)
      chunk.push_back(static_cast<Index>(i));
    const Subgraph sub =
        neighbor_sample(data.graph, chunk, config.inference_fanouts, config.seed + chunk_index);
    const NormalizedAdjacency adj = normalize_adjacency(sub.graph);
    const Tensor out = model_forward(gather_rows(data.features, sub.original_ids), adj, params, block);
    for (std::size_t k = 0; k < chunk.size(); ++k)
      std::copy(out.row(k).begin(), out.row(k).end(), logits.row(chunk[k]).begin());
  }
  return logits;
}

TrainResult train_full_graph(const Dataset& data, const BlockConfig& block,
                             const TrainConfig& config) {
  config.validate();
  data.validate();
  require(!data.split.train.empty(), ErrorCode::invalid_argument, "training split is empty");
  const auto start = Clock::now();
  const NormalizedAdjacency adj = normalize_adjacency(data.graph);
  SmpnnParams params = init_for_dataset(data, config, block);
  Optimizer opt(params);
  std::mt19937_64 rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
  ForwardOptions options{true, config.dropout, 1e-5, &rng};

  TrainResult result;
  EvalTracker tracker(data, block, config, result);
  tracker.record(0, initial_loss(data, adj, params, block), params, start);
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    StepResult step =
        loss_and_grads(data.features, adj, data.labels, data.split.train, params, block, options);
    opt.step(step.grads, config.adam);
    if (should_eval(epoch, config)) tracker.record(epoch, step.loss, params, start);
  }
  result.final_params = std::move(params);
  return result;
}

std::vector<std::vector<Index>> epoch_batches(std::size_t num_nodes, std::size_t batch_nodes,
                                              std::mt19937_64& rng) {
  require(batch_nodes >= 1, ErrorCode::invalid_argument, "batch size must be positive");
  std::vector<Index> perm(num_nodes);
  std::iota(perm.begin(), perm.end(), Index{0});
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<std::vector<Index>> batches;
  for (std::size_t s = 0; s < num_nodes; s += batch_nodes)
    batches.emplace_back(perm.begin() + s, perm.begin() + std::min(num_nodes, s + batch_nodes));
  return batches;
}

TrainResult train_mini_batch(const Dataset& data, const BlockConfig& block,
                             const TrainConfig& config) {
  config.validate();
  data.validate();
  require(config.batch_nodes >= 1, ErrorCode::invalid_argument,
          "mini-batch training needs batch_nodes >= 1");
  require(!data.split.train.empty(), ErrorCode::invalid_argument, "training split is empty");
  const auto start = Clock::now();
  SmpnnParams params = init_for_dataset(data, config, block);
  Optimizer opt(params);
  std::mt19937_64 batch_rng(config.seed ^ 0xbf58476d1ce4e5b9ULL);
  std::mt19937_64 rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
  ForwardOptions options{true, config.dropout, 1e-5, &rng};
  const std::vector<char> is_train = train_mask(data);

  TrainResult result;
  EvalTracker tracker(data, block, config, result);
  {
    const NormalizedAdjacency adj = normalize_adjacency(data.graph);
    tracker.record(0, initial_loss(data, adj, params, block), params, start);
  }
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    double loss_sum = 0.0;
    std::size_t steps = 0;
    for (const auto& ids : epoch_batches(data.graph.num_nodes(), config.batch_nodes, batch_rng)) {
      const Batch b = make_batch(data, ids, is_train);
      if (b.train_rows.empty()) {
        ++result.skipped_batches;
        continue;
      }
      const NormalizedAdjacency adj = normalize_adjacency(b.sub.graph);
      StepResult step = loss_and_grads(gather_rows(data.features, ids), adj,
                                       gather_labels(data.labels, ids), b.train_rows, params,
                                       block, options);
      opt.step(step.grads, config.adam);
      loss_sum += step.loss;
      ++steps;
    }
    const double loss = steps ? loss_sum / static_cast<double>(steps)
                              : std::numeric_limits<double>::quiet_NaN();
    if (should_eval(epoch, config)) tracker.record(epoch, loss, params, start);
  }
  result.final_params = std::move(params);
  return result;
}

TrainResult train(const Dataset& data, const BlockConfig& block, const TrainConfig& config) {
  if (config.batch_nodes == 0) return train_full_graph(data, block, config);
  return train_mini_batch(data, block, config);
}

namespace {

struct Summary {
  double mean = 0.0;
  double std = 0.0;
};

Summary summarize(const std::vector<double>& xs) {
  Summary s;
  if (xs.empty()) return s;
  s.mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
  if (xs.size() > 1) {
    double ss = 0.0;
    for (double x : xs) ss += (x - s.mean) * (x - s.mean);
    s.std = std::sqrt(ss / static_cast<double>(xs.size() - 1));
  }
  return s;
}

std::string join(const std::vector<double>& xs) {
  std::ostringstream s;
  s.precision(10);
  for (std::size_t i = 0; i < xs.size(); ++i) s << (i ? ";" : "") << xs[i];
  return s.str();
}

std::vector<double> energy_profile(const Dataset& data, const SmpnnParams& params,
                                   const BlockConfig& block) {
  const NormalizedAdjacency adj = normalize_adjacency(data.graph);
  std::vector<double> out;
  for (const Tensor& h : hidden_states(data.features, adj, params, block))
    out.push_back(normalized_dirichlet_energy(data.graph, h));
  return out;
}

}  // namespace

ExperimentReport depth_sweep(const Dataset& data, const SweepConfig& sweep,
                             const TrainConfig& base) {
  require(!sweep.depths.empty() && !sweep.variants.empty() && !sweep.seeds.empty(),
          ErrorCode::invalid_argument, "depth sweep needs depths, variants and seeds");
  ExperimentReport report;
  report.name = "depth_sweep";
  report.columns = {"depth", "variant", "mean", "std", "seeds", "per_seed", "energy"};
  report.notes["metric"] = to_string(base.metric);
  report.notes["hyperparameters"] = "desk-task settings chosen for this tool, not published values";
  for (std::size_t depth : sweep.depths) {
    for (const std::string& variant : sweep.variants) {
      const BlockConfig block = block_preset(variant);
      std::vector<double> scores;
      std::vector<double> energy;
      for (std::size_t s = 0; s < sweep.seeds.size(); ++s) {
        TrainConfig config = base;
        config.depth = depth;
        config.seed = sweep.seeds[s];
        const TrainResult r = train(data, block, config);
        scores.push_back(r.test_at_best);
        if (s == 0 && sweep.record_energy) energy = energy_profile(data, r.best_params, block);
      }
      const Summary sum = summarize(scores);
      report.add_row({static_cast<std::int64_t>(depth), variant, sum.mean, sum.std,
                      static_cast<std::int64_t>(scores.size()), join(scores), join(energy)});
      report.scalars["mean." + variant + ".depth" + std::to_string(depth)] = sum.mean;
    }
  }
  return report;
}

ExperimentReport ablation(const Dataset& data, const std::vector<std::string>& variants,
                          const std::vector<std::uint64_t>& seeds, const TrainConfig& base) {
  require(!variants.empty() && !seeds.empty(), ErrorCode::invalid_argument,
          "ablation needs variants and seeds");
  ExperimentReport report;
  report.name = "ablation";
  report.columns = {"variant", "depth", "mean", "std", "seeds", "per_seed"};
  report.notes["metric"] = to_string(base.metric);
  for (const std::string& variant : variants) {
    const BlockConfig block = block_preset(variant);
    std::vector<double> scores;
    for (std::uint64_t seed : seeds) {
      TrainConfig config = base;
      config.seed = seed;
      scores.push_back(train(data, block, config).test_at_best);
    }
    const Summary sum = summarize(scores);
    report.add_row({variant, static_cast<std::int64_t>(base.depth), sum.mean, sum.std,
                    static_cast<std::int64_t>(scores.size()), join(scores)});
    report.scalars["mean." + variant] = sum.mean;
  }
  return report;
}

}  // namespace smpnn
