#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "smpnn/bench.hpp"
#include "smpnn/dataset.hpp"
#include "smpnn/error.hpp"
#include "smpnn/grad_check.hpp"
#include "smpnn/io.hpp"
#include "smpnn/manifest.hpp"
#include "smpnn/model.hpp"
#include "smpnn/report.hpp"
#include "smpnn/theory.hpp"
#include "smpnn/trainer.hpp"

namespace fs = std::filesystem;
using namespace smpnn;

namespace {

enum Exit : int {
  kOk = 0,
  kInternal = 1,
  kUsage = 2,
  kIo = 3,
  kInvalidConfig = 4,
  kParse = 5,
  kNumerical = 6,
  kCheckFailed = 7,
  kResource = 8,
};

struct CheckFailed : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

int exit_code(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_argument:
    case ErrorCode::shape_mismatch:
      return kInvalidConfig;
    case ErrorCode::parse_error:
      return kParse;
    case ErrorCode::io_error:
      return kIo;
    case ErrorCode::numerical_error:
      return kNumerical;
    case ErrorCode::resource_limit:
      return kResource;
  }
  return kInternal;
}

int fail(int code, std::string_view name, const std::string& msg) {
  std::string one_line = msg;
  for (char& c : one_line)
    if (c == '\n') c = ' ';
  std::cerr << "error: code=" << name << " msg=" << one_line << "\n";
  return code;
}

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

/// Flat `key = value` file; `#` comments, blank lines ignored.
std::map<std::string, std::string> read_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io_error, "cannot open config file " + path.string());
  std::map<std::string, std::string> out;
  std::string line;
  for (std::size_t no = 1; std::getline(in, line); ++no) {
    if (const auto h = line.find('#'); h != std::string::npos) line.resize(h);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw Error(ErrorCode::parse_error,
                  path.string() + ":" + std::to_string(no) + ": expected key=value");
    std::string key = trim(line.substr(0, eq));
    while (!key.empty() && key.front() == '-') key.erase(key.begin());
    out[key] = trim(line.substr(eq + 1));
  }
  return out;
}

/// Options that exist on every subcommand.
struct Common {
  std::string out_dir;
  std::string config;
  std::uint64_t seed = 0;
};

struct DataOptions {
  std::string data_dir;
  std::string self_loops = "add";
  std::uint64_t data_seed = 0;
};

struct TrainOptions {
  std::string variant = "standard";
  std::size_t depth = 0;
  std::size_t hidden = 0;
  std::size_t epochs = 0;
  double lr = -1.0;
  double weight_decay = 0.0;
  double dropout = 0.0;
  std::size_t batch_nodes = 0;
  std::size_t eval_every = 0;
  std::string metric = "accuracy";
  bool sampled_inference = false;
};

void add_data_options(CLI::App* sub, DataOptions& d) {
  sub->add_option("--data-dir", d.data_dir,
                  "dataset directory (edges.txt, features.txt, labels.txt, train/val/test.txt); "
                  "the synthetic desk task when omitted");
  sub->add_option("--self-loops", d.self_loops, "add | keep_as_given")
      ->check(CLI::IsMember({"add", "keep_as_given"}));
  sub->add_option("--data-seed", d.data_seed, "seed of the synthetic desk task");
}

void add_train_options(CLI::App* sub, TrainOptions& t) {
  sub->add_option("--variant", t.variant,
                  "standard | no_residual | no_alpha | no_ff | no_gcn_ln | attention");
  sub->add_option("--depth", t.depth, "number of blocks (desk default 2)");
  sub->add_option("--hidden", t.hidden, "hidden width (desk default 16)");
  sub->add_option("--epochs", t.epochs, "training epochs (desk default 100)");
  sub->add_option("--lr", t.lr, "Adam learning rate (desk default 1e-2)");
  sub->add_option("--weight-decay", t.weight_decay, "L2 weight decay");
  sub->add_option("--dropout", t.dropout, "dropout probability");
  sub->add_option("--batch-nodes", t.batch_nodes, "mini-batch size, 0 for full graph");
  sub->add_option("--eval-every", t.eval_every, "epochs between evaluations (desk default 5)");
  sub->add_option("--metric", t.metric, "accuracy | rocauc")
      ->check(CLI::IsMember({"accuracy", "rocauc"}));
  sub->add_flag("--sampled-inference", t.sampled_inference,
                "evaluate through neighbour-sampled batches");
}

SelfLoopPolicy parse_policy(const std::string& s) {
  return s == "keep_as_given" ? SelfLoopPolicy::keep_as_given : SelfLoopPolicy::add;
}

Dataset load_data(const DataOptions& d) {
  if (d.data_dir.empty()) return make_synthetic(desk_task(d.data_seed));
  return io::load_dataset(io::DatasetPaths::in_directory(d.data_dir), parse_policy(d.self_loops));
}

TrainConfig make_train_config(const TrainOptions& t, std::uint64_t seed) {
  TrainConfig c = desk_train_config();
  c.seed = seed;
  if (t.depth) c.depth = t.depth;
  if (t.hidden) c.hidden_dim = t.hidden;
  if (t.epochs) c.epochs = t.epochs;
  if (t.lr >= 0.0) c.adam.lr = t.lr;
  if (t.eval_every) c.eval_every = t.eval_every;
  c.adam.weight_decay = t.weight_decay;
  c.dropout = t.dropout;
  c.batch_nodes = t.batch_nodes;
  c.metric = parse_metric(t.metric);
  c.sampled_inference = t.sampled_inference;
  c.validate();
  return c;
}

template <class T>
std::vector<T> parse_list(const std::string& text, const std::string& what) {
  std::vector<T> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    std::istringstream is(item);
    T v{};
    if (!(is >> v) || !is.eof())
      throw Error(ErrorCode::invalid_argument, "bad " + what + " entry '" + item + "'");
    out.push_back(v);
  }
  if (out.empty()) throw Error(ErrorCode::invalid_argument, what + " list is empty");
  return out;
}

template <>
std::vector<std::string> parse_list<std::string>(const std::string& text, const std::string& what) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!trim(item).empty()) out.push_back(trim(item));
  if (out.empty()) throw Error(ErrorCode::invalid_argument, what + " list is empty");
  return out;
}

std::vector<std::uint64_t> seed_range(std::size_t count, std::uint64_t first) {
  if (count == 0) throw Error(ErrorCode::invalid_argument, "--seeds must be positive");
  std::vector<std::uint64_t> out(count);
  for (std::size_t i = 0; i < count; ++i) out[i] = first + i;
  return out;
}

/// Effective value of every option after CLI, config file and defaults.
std::map<std::string, std::string> snapshot(const CLI::App* sub) {
  std::map<std::string, std::string> out;
  for (const CLI::Option* opt : sub->get_options()) {
    const std::string name = opt->get_single_name();
    if (name.empty() || name == "help" || name == "config" || name == "out-dir") continue;
    std::string value;
    if (opt->count() > 0) {
      for (const auto& r : opt->results()) value += (value.empty() ? "" : ",") + r;
      if (opt->get_type_size() == 0 && value.empty()) value = "true";
    } else {
      value = opt->get_default_str();
      if (opt->get_type_size() == 0 && value.empty()) value = "false";
    }
    out[name] = value;
  }
  return out;
}

class Output {
 public:
  Output(std::string command, const CLI::App* sub, const Common& common)
      : command_(std::move(command)), dir_(resolve_dir(common.out_dir)) {
    manifest_.command = command_;
    manifest_.config = snapshot(sub);
    manifest_.seed = common.seed;
    manifest_.tool_version = tool_version();
    manifest_.timestamp = utc_timestamp();
  }

  RunManifest& manifest() { return manifest_; }
  const fs::path& dir() const { return dir_; }

  void write(const std::function<void(std::ostream&)>& body) {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec) throw Error(ErrorCode::io_error, "cannot create " + dir_.string() + ": " + ec.message());
    const fs::path csv = dir_ / (command_ + ".csv");
    std::ofstream out(csv);
    if (!out) throw Error(ErrorCode::io_error, "cannot write " + csv.string());
    body(out);
    out.close();
    if (!out) throw Error(ErrorCode::io_error, "failed writing " + csv.string());
    manifest_.write(dir_ / (command_ + ".manifest.json"));
    std::cout << "wrote " << csv.string() << "\n";
  }

  void write(const ExperimentReport& report) {
    for (const auto& [k, v] : report.scalars) manifest_.results[k] = v;
    for (const auto& [k, v] : report.notes) manifest_.config["note." + k] = v;
    write([&](std::ostream& out) { report.write_csv(out); });
  }

 private:
  static fs::path resolve_dir(const std::string& flag) {
    if (!flag.empty()) return flag;
    if (const char* env = std::getenv("SMPNN_OUT_DIR"); env && *env) return env;
    return ".";
  }

  std::string command_;
  fs::path dir_;
  RunManifest manifest_;
};

void print_scalars(const std::map<std::string, double>& scalars) {
  for (const auto& [k, v] : scalars) std::printf("%s = %.10g\n", k.c_str(), v);
}

// ---------------------------------------------------------------------------

int run_gen_data(const CLI::App* sub, const Common& common, SyntheticParams p,
                 const std::string& kind, const std::string& policy, const std::string& dir) {
  p.kind = parse_graph_kind(kind);
  p.self_loops = parse_policy(policy);
  p.seed = common.seed;
  const Dataset data = make_synthetic(p);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::io_error, "cannot create " + dir + ": " + ec.message());
  io::save_dataset(data, io::DatasetPaths::in_directory(dir));
  Output out("gen-data", sub, common);
  out.manifest().dataset_fingerprint = data.fingerprint;
  ExperimentReport r;
  r.name = "gen-data";
  r.columns = {"data_dir", "nodes", "nnz", "undirected_edges", "feature_dim", "outputs", "train",
               "val", "test"};
  r.add_row({dir, static_cast<std::int64_t>(data.graph.num_nodes()),
             static_cast<std::int64_t>(data.graph.nnz()),
             static_cast<std::int64_t>(data.graph.num_undirected_edges()),
             static_cast<std::int64_t>(data.features.cols()),
             static_cast<std::int64_t>(data.labels.num_outputs()),
             static_cast<std::int64_t>(data.split.train.size()),
             static_cast<std::int64_t>(data.split.val.size()),
             static_cast<std::int64_t>(data.split.test.size())});
  out.write(r);
  return kOk;
}

int run_train(const CLI::App* sub, const Common& common, const DataOptions& d,
              const TrainOptions& t, const std::string& checkpoint) {
  const Dataset data = load_data(d);
  const TrainConfig config = make_train_config(t, common.seed);
  const BlockConfig block = block_preset(t.variant);
  const TrainResult result = train(data, block, config);
  Output out("train", sub, common);
  out.manifest().dataset_fingerprint = data.fingerprint;
  out.manifest().results = {{"best_val", result.best_val},
                            {"test_at_best", result.test_at_best},
                            {"best_epoch", static_cast<double>(result.best_epoch)},
                            {"skipped_batches", static_cast<double>(result.skipped_batches)}};
  const fs::path ckpt = checkpoint.empty() ? out.dir() / "train.checkpoint" : fs::path(checkpoint);
  std::error_code ec;
  if (ckpt.has_parent_path()) fs::create_directories(ckpt.parent_path(), ec);
  std::ofstream ck(ckpt);
  if (!ck) throw Error(ErrorCode::io_error, "cannot write checkpoint " + ckpt.string());
  save_checkpoint(ck, result.best_params, block);
  ck.close();
  out.manifest().config["checkpoint_path"] = ckpt.string();
  out.write([&](std::ostream& os) { result.write_metrics_csv(os); });
  std::printf("best_val = %.6f at epoch %zu, test = %.6f\n", result.best_val, result.best_epoch,
              result.test_at_best);
  return kOk;
}

int run_eval(const CLI::App* sub, const Common& common, const DataOptions& d,
             const TrainOptions& t, const std::string& checkpoint) {
  const Dataset data = load_data(d);
  std::ifstream in(checkpoint);
  if (!in) throw Error(ErrorCode::io_error, "cannot open checkpoint " + checkpoint);
  const Checkpoint ck = load_checkpoint(in);
  TrainConfig config = make_train_config(t, common.seed);
  config.depth = ck.params.layers.size();
  config.hidden_dim = ck.params.shape().hidden_dim;
  const Tensor logits = predict(data, ck.params, ck.config, config);
  ExperimentReport r;
  r.name = "eval";
  r.columns = {"split", "metric", "value"};
  const std::pair<const char*, const std::vector<Index>*> splits[] = {
      {"train", &data.split.train}, {"val", &data.split.val}, {"test", &data.split.test}};
  for (const auto& [name, rows] : splits) {
    if (rows->empty()) continue;
    const double v = evaluate(logits, data.labels, *rows, config.metric);
    r.add_row({std::string(name), to_string(config.metric), v});
    r.scalars[std::string(name) + "_" + to_string(config.metric)] = v;
  }
  Output out("eval", sub, common);
  out.manifest().dataset_fingerprint = data.fingerprint;
  out.write(r);
  print_scalars(r.scalars);
  return kOk;
}

struct GradCheckArgs {
  std::size_t depth = 3;
  std::size_t nodes = 12;
  std::size_t dim = 4;
  std::size_t classes = 3;
  std::string variant = "standard";
  std::string objective = "mean-logit";
  bool default_gates = false;
  double tolerance = 1e-5;
  double step = 0.0;
  std::string method = "ridders";
  std::size_t max_coordinates = 1000;
};

int run_grad_check(const CLI::App* sub, const Common& common, const GradCheckArgs& a) {
  const BlockConfig block = block_preset(a.variant);
  if (a.nodes < 2 || a.dim < 1 || a.classes < 2)
    throw Error(ErrorCode::invalid_argument, "grad-check needs nodes >= 2, dim >= 1, classes >= 2");
  std::mt19937_64 rng(common.seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0), gate(0.5, 1.5), shift(-0.3, 0.3);

  std::vector<Edge> edges;
  for (Index i = 0; i + 1 < a.nodes; ++i) edges.push_back({i, i + 1});
  std::bernoulli_distribution extra(0.25);
  for (Index i = 0; i < a.nodes; ++i)
    for (Index j = i + 2; j < a.nodes; ++j)
      if (extra(rng)) edges.push_back({i, j});
  const NormalizedAdjacency adj = normalize_adjacency(build_graph(edges, a.nodes));

  SmpnnParams params = init_params(
      {a.dim, a.dim, a.classes, a.depth, block.use_attention ? block.num_heads : 0}, common.seed);
  if (!a.default_gates) {
    for (auto& [name, t] : params.named_tensors()) {
      const bool scaled = name.find("alpha") != std::string::npos ||
                          name.find("gamma") != std::string::npos;
      const bool offset = name.find("beta") != std::string::npos;
      for (std::size_t i = 0; scaled && i < t->size(); ++i) (*t)[i] = gate(rng);
      for (std::size_t i = 0; offset && i < t->size(); ++i) (*t)[i] = shift(rng);
    }
  }
  Tensor x(a.nodes, a.dim), weights(a.nodes, a.classes);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = u(rng);
  for (std::size_t i = 0; i < weights.size(); ++i) weights[i] = u(rng);
  std::vector<int> labels(a.nodes);
  std::vector<Index> rows(a.nodes);
  for (std::size_t i = 0; i < a.nodes; ++i) {
    labels[i] = static_cast<int>(i % a.classes);
    rows[i] = static_cast<Index>(i);
  }

  std::vector<Tensor> flat;
  for (auto& [name, t] : params.named_tensors()) flat.push_back(*t);
  const bool use_ce = a.objective == "cross-entropy";
  Objective f = [&](ad::Tape& tape, std::span<const ad::Var> leaves) {
    const ParamVars vars = param_vars_from_flat(params, leaves);
    const ad::Var logits = model_forward(tape.constant(x), adj, vars, block);
    if (use_ce) return ad::cross_entropy(logits, labels, rows);
    return ad::mean(ad::hadamard(logits, tape.constant(weights)));
  };
  GradCheckOptions opt;
  opt.tolerance = a.tolerance;
  opt.max_coordinates = a.max_coordinates;
  opt.sample_seed = common.seed;
  opt.method = a.method == "central"      ? FdMethod::central
               : a.method == "five-point" ? FdMethod::five_point
                                          : FdMethod::ridders;
  if (a.step > 0.0) opt.step = a.step;
  else if (opt.method == FdMethod::central) opt.step = 1e-5;
  else if (opt.method == FdMethod::five_point) opt.step = 1e-3;
  const GradCheckReport report = grad_check(f, flat, opt);

  Output out("grad-check", sub, common);
  out.manifest().results = {{"max_rel_err", report.max_rel_err},
                            {"checked", static_cast<double>(report.checked)},
                            {"total_coordinates", static_cast<double>(report.total_coordinates)},
                            {"passed", report.passed ? 1.0 : 0.0}};
  out.write([&](std::ostream& os) { report.write_csv(os); });
  std::printf("max_rel_err = %.3e over %zu of %zu coordinates (tolerance %.1e)\n",
              report.max_rel_err, report.checked, report.total_coordinates, a.tolerance);
  if (!report.passed)
    throw CheckFailed("max relative error " + std::to_string(report.max_rel_err) +
                      " exceeds tolerance");
  return kOk;
}

int run_theory_kernel(const CLI::App* sub, const Common& common, std::size_t nodes,
                      std::size_t dim, std::size_t trials, double limit) {
  ExperimentReport r = theory::kernel_witness_sweep(nodes, dim, trials, common.seed);
  Output out("theory-kernel", sub, common);
  out.write(r);
  print_scalars(r.scalars);
  if (!(r.scalar("max_residual") < limit))
    throw CheckFailed("max residual " + std::to_string(r.scalar("max_residual")) +
                      " is not below " + std::to_string(limit));
  return kOk;
}

int run_theory_injectivity(const CLI::App* sub, const Common& common,
                           theory::InjectivityTrialConfig c) {
  c.seed = common.seed;
  ExperimentReport r = theory::residual_injectivity_trial(c);
  Output out("theory-injectivity", sub, common);
  out.write(r);
  print_scalars(r.scalars);
  if (r.scalar("implication_holds") != 1.0)
    throw CheckFailed("a trial met the condition but the operator was singular");
  return kOk;
}

int run_theory_gordon(const CLI::App* sub, const Common& common, std::size_t dim,
                      std::size_t trials, double t) {
  ExperimentReport r = theory::gordon_bound_trial(dim, trials, t, common.seed);
  Output out("theory-gordon", sub, common);
  out.write(r);
  print_scalars(r.scalars);
  return kOk;
}

struct EnergyArgs {
  std::string graph = "cycle";
  std::size_t nodes = 32;
  double edge_prob = 0.1;
  std::size_t layers = 100;
  std::size_t feature_dim = 8;
  std::string mode = "linear_no_residual";
  std::string self_loops = "add";
  std::string data_dir;
};

int run_energy_trace(const CLI::App* sub, const Common& common, const EnergyArgs& a) {
  SparseGraph g;
  Tensor x0;
  std::string fingerprint;
  if (!a.data_dir.empty()) {
    Dataset data = io::load_dataset(io::DatasetPaths::in_directory(a.data_dir),
                                    parse_policy(a.self_loops));
    g = std::move(data.graph);
    x0 = std::move(data.features);
    fingerprint = data.fingerprint;
  } else {
    SyntheticParams p;
    p.kind = parse_graph_kind(a.graph);
    p.num_nodes = a.nodes;
    p.edge_prob = a.edge_prob;
    p.feature_dim = a.feature_dim;
    p.self_loops = parse_policy(a.self_loops);
    p.seed = common.seed;
    Dataset data = make_synthetic(p);
    g = std::move(data.graph);
    x0 = std::move(data.features);
    fingerprint = data.fingerprint;
  }
  const theory::TraceMode mode = theory::parse_trace_mode(a.mode);
  const theory::EnergyTrace trace = theory::oversmoothing_trace(g, x0, a.layers, mode, common.seed);
  ExperimentReport r;
  r.name = "energy-trace";
  r.columns = {"layer", "energy", "normalized_energy"};
  for (std::size_t l = 0; l < trace.per_layer_energy.size(); ++l)
    r.add_row({static_cast<std::int64_t>(l), trace.per_layer_energy[l],
               trace.per_layer_normalized[l]});
  r.scalars = {{"lambda_min", trace.lambda_min},
               {"lambda_max", trace.lambda_max},
               {"final_normalized_energy", trace.per_layer_normalized.back()}};
  r.notes["frequency_class"] = theory::to_string(trace.classify());
  Output out("energy-trace", sub, common);
  out.manifest().dataset_fingerprint = fingerprint;
  out.write(r);
  print_scalars(r.scalars);
  std::printf("frequency_class = %s (finite-depth heuristic)\n",
              theory::to_string(trace.classify()).c_str());
  return kOk;
}

int run_depth_sweep(const CLI::App* sub, const Common& common, const DataOptions& d,
                    const TrainOptions& t, const std::string& depths, const std::string& variants,
                    std::size_t seeds, bool energy) {
  const Dataset data = load_data(d);
  SweepConfig sweep;
  sweep.depths = parse_list<std::size_t>(depths, "--depths");
  sweep.variants = parse_list<std::string>(variants, "--variants");
  for (const auto& v : sweep.variants) block_preset(v);
  sweep.seeds = seed_range(seeds, common.seed);
  sweep.record_energy = energy;
  ExperimentReport r = depth_sweep(data, sweep, make_train_config(t, common.seed));
  Output out("depth-sweep", sub, common);
  out.manifest().dataset_fingerprint = data.fingerprint;
  out.write(r);
  print_scalars(r.scalars);
  return kOk;
}

int run_ablate(const CLI::App* sub, const Common& common, const DataOptions& d,
               const TrainOptions& t, const std::string& variants, std::size_t seeds) {
  const Dataset data = load_data(d);
  const auto names = parse_list<std::string>(variants, "--variants");
  for (const auto& v : names) block_preset(v);
  ExperimentReport r =
      ablation(data, names, seed_range(seeds, common.seed), make_train_config(t, common.seed));
  Output out("ablate", sub, common);
  out.manifest().dataset_fingerprint = data.fingerprint;
  out.write(r);
  print_scalars(r.scalars);
  return kOk;
}

int run_scale_bench(const CLI::App* sub, const Common& common, std::size_t nodes,
                    const std::string& edges, ScaleBenchConfig c) {
  c.seed = common.seed;
  for (std::size_t e : parse_list<std::size_t>(edges, "--edges")) c.sizes.push_back({nodes, e});
  ExperimentReport r = scale_bench(c);
  Output out("scale-bench", sub, common);
  out.write(r);
  print_scalars(r.scalars);
  return kOk;
}

/// Injects config-file values for options not given on the command line.
std::vector<std::string> apply_config(CLI::App& app, std::vector<std::string> args) {
  CLI::App* sub = nullptr;
  std::string config_path;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (!sub) {
      for (CLI::App* s : app.get_subcommands({}))
        if (s->get_name() == args[i]) sub = s;
      continue;
    }
    if (args[i] == "--config" && i + 1 < args.size()) config_path = args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) config_path = args[i].substr(9);
  }
  if (!sub || config_path.empty()) return args;
  const auto entries = read_config(config_path);
  auto given = [&](const std::string& flag) {
    for (const auto& a : args)
      if (a == flag || a.rfind(flag + "=", 0) == 0) return true;
    return false;
  };
  for (const auto& [key, value] : entries) {
    const std::string flag = "--" + key;
    const CLI::Option* opt = sub->get_option_no_throw(flag);
    if (!opt || key == "config" || key == "help")
      throw ConfigError(config_path + ": unknown key '" + key + "' for " + sub->get_name());
    if (given(flag)) continue;
    if (opt->get_type_size() == 0) {
      if (value == "true" || value == "1") args.push_back(flag);
      else if (value != "false" && value != "0")
        throw ConfigError(config_path + ": flag '" + key + "' takes true or false");
    } else {
      args.push_back(flag);
      args.push_back(value);
    }
  }
  return args;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"smpnn: residual graph-convolution networks, training and theory checks"};
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default();

  Common common;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--out-dir", common.out_dir, "output directory (default $SMPNN_OUT_DIR or .)");
    sub->add_option("--config", common.config, "key=value file; command-line flags take precedence");
    sub->add_option("--seed", common.seed, "random seed");
  };

  DataOptions data;
  TrainOptions train_opts;
  std::string checkpoint;

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "write a synthetic dataset directory");
  add_common(gen);
  SyntheticParams gen_params = desk_task();
  std::string gen_kind = "sbm", gen_policy = "add", gen_dir;
  gen->add_option("--data-dir", gen_dir, "destination directory")->required();
  gen->add_option("--kind", gen_kind, "sbm | complete | path | cycle | erdos_renyi")
      ->check(CLI::IsMember({"sbm", "complete", "path", "cycle", "erdos_renyi"}));
  gen->add_option("--nodes", gen_params.num_nodes, "nodes (non-SBM kinds)");
  gen->add_option("--edge-prob", gen_params.edge_prob, "edge probability (erdos_renyi)");
  gen->add_option("--blocks", gen_params.num_blocks, "SBM blocks");
  gen->add_option("--block-size", gen_params.block_size, "nodes per SBM block");
  gen->add_option("--p-in", gen_params.p_in, "SBM within-block edge probability");
  gen->add_option("--p-out", gen_params.p_out, "SBM between-block edge probability");
  gen->add_option("--feature-dim", gen_params.feature_dim, "feature width");
  gen->add_option("--separation", gen_params.mean_separation, "class mean distance from origin");
  gen->add_option("--train-frac", gen_params.train_fraction, "training fraction");
  gen->add_option("--val-frac", gen_params.val_fraction, "validation fraction");
  gen->add_option("--self-loops", gen_policy, "add | keep_as_given")
      ->check(CLI::IsMember({"add", "keep_as_given"}));

  // train / eval
  auto* train_cmd = app.add_subcommand("train", "train a model and save its best checkpoint");
  add_common(train_cmd);
  add_data_options(train_cmd, data);
  add_train_options(train_cmd, train_opts);
  train_cmd->add_option("--checkpoint", checkpoint, "checkpoint path (default <out-dir>/train.checkpoint)");

  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on every split");
  add_common(eval_cmd);
  add_data_options(eval_cmd, data);
  add_train_options(eval_cmd, train_opts);
  eval_cmd->add_option("--checkpoint", checkpoint, "checkpoint to evaluate")->required();

  // grad-check
  GradCheckArgs gc;
  auto* grad = app.add_subcommand("grad-check", "compare reverse-mode and finite-difference gradients");
  add_common(grad);
  grad->add_option("--depth", gc.depth, "blocks");
  grad->add_option("--nodes", gc.nodes, "graph nodes");
  grad->add_option("--dim", gc.dim, "input and hidden width");
  grad->add_option("--classes", gc.classes, "output width");
  grad->add_option("--variant", gc.variant, "block preset");
  grad->add_option("--objective", gc.objective, "mean-logit | cross-entropy")
      ->check(CLI::IsMember({"mean-logit", "cross-entropy"}));
  grad->add_flag("--default-gates", gc.default_gates,
                 "keep initial gates and LayerNorm affine instead of randomizing them");
  grad->add_option("--tolerance", gc.tolerance, "maximum relative error");
  grad->add_option("--step", gc.step, "finite-difference step (method default when 0)");
  grad->add_option("--method", gc.method, "ridders | five-point | central")
      ->check(CLI::IsMember({"ridders", "five-point", "central"}));
  grad->add_option("--max-coordinates", gc.max_coordinates, "subsample beyond this many coordinates");

  // theory
  theory::InjectivityTrialConfig inj;
  auto* inj_cmd = app.add_subcommand("theory-injectivity", "singular values of I + Ã⊗W over random W");
  add_common(inj_cmd);
  inj_cmd->add_option("--nodes", inj.num_nodes, "nodes of the complete graph");
  inj_cmd->add_option("--dim", inj.dim, "width D");
  inj_cmd->add_option("--trials", inj.trials, "random W draws");
  inj_cmd->add_option("--varsigma", inj.varsigma, "ς; 0 selects 0.9/(9 D^1.5)");
  inj_cmd->add_option("--threshold", inj.singular_threshold, "invertible when s_min > threshold*s_max");
  inj_cmd->add_option("--dense-limit", inj.dense_limit, "largest N*D assembled densely");
  inj_cmd->add_flag("--force-dense", inj.force_dense, "refuse instead of switching to blocks");

  std::size_t kernel_nodes = 4, kernel_dim = 3, kernel_trials = 100;
  double kernel_limit = 1e-12;
  auto* kernel = app.add_subcommand("theory-kernel", "kernel witness of X -> ÃXW on complete graphs");
  add_common(kernel);
  kernel->add_option("--nodes", kernel_nodes, "nodes");
  kernel->add_option("--dim", kernel_dim, "width");
  kernel->add_option("--seeds", kernel_trials, "number of random W");
  kernel->add_option("--limit", kernel_limit, "largest accepted residual");

  std::size_t gordon_dim = 64, gordon_trials = 1000;
  double gordon_t = 8.0;
  auto* gordon = app.add_subcommand("theory-gordon", "extreme singular values of Gaussian matrices");
  add_common(gordon);
  gordon->add_option("--dim", gordon_dim, "matrix size");
  gordon->add_option("--trials", gordon_trials, "samples");
  gordon->add_option("--t", gordon_t, "deviation t; <= 0 selects sqrt(D)");

  EnergyArgs energy;
  auto* energy_cmd = app.add_subcommand("energy-trace", "normalized Dirichlet energy per layer");
  add_common(energy_cmd);
  energy_cmd->add_option("--graph", energy.graph, "complete | path | cycle | erdos_renyi | sbm")
      ->check(CLI::IsMember({"complete", "path", "cycle", "erdos_renyi", "sbm"}));
  energy_cmd->add_option("--nodes", energy.nodes, "nodes");
  energy_cmd->add_option("--edge-prob", energy.edge_prob, "edge probability (erdos_renyi)");
  energy_cmd->add_option("--layers", energy.layers, "layers");
  energy_cmd->add_option("--feature-dim", energy.feature_dim, "feature width");
  energy_cmd->add_option("--mode", energy.mode,
                         "linear_no_residual | smpnn_default | smpnn_no_residual");
  energy_cmd->add_option("--self-loops", energy.self_loops, "add | keep_as_given")
      ->check(CLI::IsMember({"add", "keep_as_given"}));
  energy_cmd->add_option("--data-dir", energy.data_dir, "use a dataset's graph and features");

  // experiments
  std::string sweep_depths = "2,12", sweep_variants = "standard,no_residual";
  std::size_t sweep_seeds = 3;
  bool sweep_energy = true;
  auto* sweep = app.add_subcommand("depth-sweep", "test metric against depth per variant");
  add_common(sweep);
  add_data_options(sweep, data);
  add_train_options(sweep, train_opts);
  sweep->add_option("--depths", sweep_depths, "comma-separated depths");
  sweep->add_option("--variants", sweep_variants, "comma-separated presets");
  sweep->add_option("--seeds", sweep_seeds, "seeds per cell, counting up from --seed");
  sweep->add_option("--energy", sweep_energy, "record per-layer energy of the first seed");

  std::string ablate_variants = "standard,no_residual,no_alpha,no_ff,no_gcn_ln";
  std::size_t ablate_seeds = 3;
  auto* ablate = app.add_subcommand("ablate", "test metric per variant at one depth");
  add_common(ablate);
  add_data_options(ablate, data);
  add_train_options(ablate, train_opts);
  ablate->add_option("--variants", ablate_variants, "comma-separated presets");
  ablate->add_option("--seeds", ablate_seeds, "seeds per variant, counting up from --seed");

  ScaleBenchConfig bench;
  std::size_t bench_nodes = 10000;
  std::string bench_edges = "100000,200000,300000,400000,500000,600000,700000,800000,900000,1000000";
  auto* bench_cmd = app.add_subcommand("scale-bench", "counted FLOPs and forward time against edges");
  add_common(bench_cmd);
  bench_cmd->add_option("--nodes", bench_nodes, "nodes per graph");
  bench_cmd->add_option("--edges", bench_edges, "comma-separated undirected edge counts");
  bench_cmd->add_option("--depth", bench.depth, "blocks");
  bench_cmd->add_option("--dim", bench.dim, "width");
  bench_cmd->add_option("--repeats", bench.repeats, "timed forwards per size");
  bench_cmd->add_option("--warmup", bench.warmup, "untimed forwards per size");

  std::vector<std::string> args;
  for (int i = argc - 1; i >= 1; --i) args.emplace_back(argv[i]);
  try {
    std::vector<std::string> forward(args.rbegin(), args.rend());
    forward = apply_config(app, std::move(forward));
    args.assign(forward.rbegin(), forward.rend());
    app.parse(args);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ValidationError& e) {
    return fail(kInvalidConfig, "invalid_config", e.what());
  } catch (const CLI::ConversionError& e) {
    return fail(kInvalidConfig, "invalid_config", e.what());
  } catch (const CLI::ParseError& e) {
    std::cerr << app.help();
    std::string msg = e.what();
    if (argc > 1 && argv[1][0] != '-' && !app.get_subcommand_no_throw(argv[1]))
      msg = std::string("unknown subcommand '") + argv[1] + "'";
    return fail(kUsage, "usage", msg);
  } catch (const ConfigError& e) {
    return fail(kInvalidConfig, "invalid_config", e.what());
  } catch (const Error& e) {
    return fail(exit_code(e.code()), to_string(e.code()), e.what());
  }

  try {
    if (*gen) return run_gen_data(gen, common, gen_params, gen_kind, gen_policy, gen_dir);
    if (*train_cmd) return run_train(train_cmd, common, data, train_opts, checkpoint);
    if (*eval_cmd) return run_eval(eval_cmd, common, data, train_opts, checkpoint);
    if (*grad) return run_grad_check(grad, common, gc);
    if (*inj_cmd) return run_theory_injectivity(inj_cmd, common, inj);
    if (*kernel)
      return run_theory_kernel(kernel, common, kernel_nodes, kernel_dim, kernel_trials, kernel_limit);
    if (*gordon) return run_theory_gordon(gordon, common, gordon_dim, gordon_trials, gordon_t);
    if (*energy_cmd) return run_energy_trace(energy_cmd, common, energy);
    if (*sweep)
      return run_depth_sweep(sweep, common, data, train_opts, sweep_depths, sweep_variants,
                             sweep_seeds, sweep_energy);
    if (*ablate) return run_ablate(ablate, common, data, train_opts, ablate_variants, ablate_seeds);
    if (*bench_cmd) return run_scale_bench(bench_cmd, common, bench_nodes, bench_edges, bench);
  } catch (const CheckFailed& e) {
    return fail(kCheckFailed, "check_failed", e.what());
  } catch (const Error& e) {
    return fail(exit_code(e.code()), to_string(e.code()), e.what());
  } catch (const std::bad_alloc&) {
    return fail(kResource, "resource_limit", "out of memory");
  } catch (const std::exception& e) {
    return fail(kInternal, "internal", e.what());
  }
  return fail(kUsage, "usage", "no subcommand");
}
