#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "smpnn/dataset.hpp"
#include "smpnn/model.hpp"
#include "smpnn/report.hpp"

namespace smpnn {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
};

/// First and second moment buffers, one per parameter tensor.
struct AdamState {
  std::vector<Tensor> m;
  std::vector<Tensor> v;
  std::uint64_t step = 0;
};

/// Bias-corrected Adam; weight decay is added to the gradient (L2 style).
/// A non-finite gradient throws Error(numerical_error) naming the parameter
/// before anything is modified.
void adam_step(std::span<Tensor* const> params, std::span<const Tensor> grads, AdamState& state,
               const AdamConfig& config, std::span<const std::string> names = {});

enum class Metric { accuracy, rocauc };

struct TrainConfig {
  AdamConfig adam;
  std::size_t epochs = 100;
  /// 0 means full-graph training.
  std::size_t batch_nodes = 0;
  double dropout = 0.0;
  std::size_t depth = 2;
  std::size_t hidden_dim = 32;
  std::uint64_t seed = 0;
  std::size_t eval_every = 1;
  Metric metric = Metric::accuracy;
  /// Mini-batch inference through neighbour sampling instead of the full graph.
  bool sampled_inference = false;
  std::vector<std::size_t> inference_fanouts{15, 10, 5};
  std::size_t inference_batch = 1024;

  void validate() const;
};

struct MetricsRow {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_metric = 0.0;
  double test_metric = 0.0;
  double wall_ms = 0.0;
};

struct TrainResult {
  std::vector<MetricsRow> history;
  SmpnnParams best_params;
  SmpnnParams final_params;
  double best_val = 0.0;
  double test_at_best = 0.0;
  std::size_t best_epoch = 0;
  /// Mini-batch steps skipped because no training node fell in the batch.
  std::size_t skipped_batches = 0;

  void write_metrics_csv(std::ostream& out) const;
};

/// Metric over the listed rows. Accuracy takes the argmax (lowest index on
/// ties). ROC-AUC is the Mann-Whitney rank statistic per target column,
/// averaged; a column with a single class throws Error(invalid_argument).
double evaluate(const Tensor& logits, const Labels& labels, std::span<const Index> rows,
                Metric metric);

double roc_auc(std::span<const double> scores, std::span<const int> labels);

/// Loss over `rows` for the given label type (cross-entropy or BCE).
ad::Var node_loss(ad::Var logits, const Labels& labels, std::span<const Index> rows);

SmpnnParams init_for_dataset(const Dataset& data, const TrainConfig& config,
                             const BlockConfig& block);

/// Per-parameter gradients of the training loss for one full-graph step.
std::vector<Tensor> full_graph_gradients(const Dataset& data, const SmpnnParams& params,
                                         const BlockConfig& block, const TrainConfig& config);

/// Gradients of one mini-batch step over `batch` (induced subgraph).
std::vector<Tensor> batch_gradients(const Dataset& data, std::span<const Index> batch,
                                    const SmpnnParams& params, const BlockConfig& block,
                                    const TrainConfig& config);

TrainResult train_full_graph(const Dataset& data, const BlockConfig& block,
                             const TrainConfig& config);

/// Per epoch: a fresh permutation of all nodes cut into batches of
/// config.batch_nodes; each batch trains on its induced subgraph.
TrainResult train_mini_batch(const Dataset& data, const BlockConfig& block,
                             const TrainConfig& config);

/// Dispatches on config.batch_nodes.
TrainResult train(const Dataset& data, const BlockConfig& block, const TrainConfig& config);

/// Logits for all nodes, full graph or by neighbour-sampled batches.
Tensor predict(const Dataset& data, const SmpnnParams& params, const BlockConfig& block,
               const TrainConfig& config);

/// Batch partition used by train_mini_batch for one epoch.
std::vector<std::vector<Index>> epoch_batches(std::size_t num_nodes, std::size_t batch_nodes,
                                              std::mt19937_64& rng);

struct SweepConfig {
  std::vector<std::size_t> depths{2, 12};
  std::vector<std::string> variants{"standard", "no_residual"};
  std::vector<std::uint64_t> seeds{0, 1, 2};
  bool record_energy = true;
};

/// One row per (depth, variant): mean/std of the test metric at the best
/// validation epoch, plus the per-layer normalized Dirichlet energy of the
/// first seed's trained model in a `energy` column (semicolon separated).
ExperimentReport depth_sweep(const Dataset& data, const SweepConfig& sweep,
                             const TrainConfig& base);

/// One row per variant at a fixed depth; mean/std of the test metric.
ExperimentReport ablation(const Dataset& data, const std::vector<std::string>& variants,
                          const std::vector<std::uint64_t>& seeds, const TrainConfig& base);

/// Desk-scale SBM node-classification task: 4 blocks of 250 nodes,
/// p_in 0.04, p_out 0.01, 16-d Gaussian features at mean separation 1.
SyntheticParams desk_task(std::uint64_t seed = 0);
/// Hyperparameters used on the desk task: Adam lr 1e-2, 100 epochs,
/// hidden width 16, evaluation every 5 epochs.
TrainConfig desk_train_config();

std::string to_string(Metric metric);
Metric parse_metric(const std::string& name);

}  // namespace smpnn
