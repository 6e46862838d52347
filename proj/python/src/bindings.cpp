#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <fstream>

#include "smpnn/dataset.hpp"
#include "smpnn/error.hpp"
#include "smpnn/graph.hpp"
#include "smpnn/io.hpp"
#include "smpnn/model.hpp"
#include "smpnn/report.hpp"
#include "smpnn/theory.hpp"
#include "smpnn/trainer.hpp"

namespace py = pybind11;
using namespace smpnn;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Tensor to_tensor(const Array& a) {
  if (a.ndim() == 1) return Tensor(a.shape(0), 1, std::vector<double>(a.data(), a.data() + a.size()));
  if (a.ndim() != 2) throw Error(ErrorCode::shape_mismatch, "expected a 1-D or 2-D array");
  return Tensor(a.shape(0), a.shape(1), std::vector<double>(a.data(), a.data() + a.size()));
}

Array to_array(const Tensor& t) {
  Array out({t.rows(), t.cols()});
  std::copy(t.data().begin(), t.data().end(), out.mutable_data());
  return out;
}

SelfLoopPolicy policy(const std::string& s) {
  if (s == "add") return SelfLoopPolicy::add;
  if (s == "keep_as_given") return SelfLoopPolicy::keep_as_given;
  throw Error(ErrorCode::invalid_argument, "self_loops must be 'add' or 'keep_as_given'");
}

struct Model {
  SmpnnParams params;
  BlockConfig block;
};

py::object cell(const Cell& c) {
  return std::visit([](const auto& v) -> py::object { return py::cast(v); }, c);
}

}  // namespace

PYBIND11_MODULE(_smpnn, m) {
  m.doc() = "Residual graph-convolution networks: graphs, models, training and theory checks";

  static py::exception<Error> error_type(m, "SmpnnError");
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object exc = py::reinterpret_borrow<py::object>(error_type.ptr())(std::string(e.what()));
      exc.attr("code") = to_string(e.code());
      PyErr_SetObject(error_type.ptr(), exc.ptr());
    }
  });

  m.def("version", &tool_version);

  py::class_<SparseGraph>(m, "Graph")
      .def(py::init([](const std::vector<std::tuple<Index, Index, double>>& edges,
                       std::size_t num_nodes, const std::string& self_loops) {
             std::vector<Edge> es;
             es.reserve(edges.size());
             for (const auto& [s, d, w] : edges) es.push_back({s, d, w});
             return build_graph(es, num_nodes, policy(self_loops));
           }),
           py::arg("edges"), py::arg("num_nodes"), py::arg("self_loops") = "add")
      .def_static(
          "from_pairs",
          [](const std::vector<std::pair<Index, Index>>& pairs, std::size_t num_nodes,
             const std::string& self_loops) {
            std::vector<Edge> es;
            for (const auto& [s, d] : pairs) es.push_back({s, d});
            return build_graph(es, num_nodes, policy(self_loops));
          },
          py::arg("pairs"), py::arg("num_nodes"), py::arg("self_loops") = "add")
      .def_property_readonly("num_nodes", &SparseGraph::num_nodes)
      .def_property_readonly("nnz", &SparseGraph::nnz)
      .def_property_readonly("num_undirected_edges", &SparseGraph::num_undirected_edges)
      .def_property_readonly("has_self_loops", &SparseGraph::has_self_loops)
      .def("num_components", &SparseGraph::num_components)
      .def("degrees", [](const SparseGraph& g) {
        return std::vector<double>(g.degrees().begin(), g.degrees().end());
      })
      .def("propagate", [](const SparseGraph& g, const Array& x) {
        return to_array(spmm(normalize_adjacency(g), to_tensor(x)));
      }, "Ã x with Ã = D^-1/2 A D^-1/2")
      .def("dirichlet_energy", [](const SparseGraph& g, const Array& x) {
        return dirichlet_energy(g, to_tensor(x));
      })
      .def("normalized_dirichlet_energy", [](const SparseGraph& g, const Array& x) {
        return normalized_dirichlet_energy(g, to_tensor(x));
      });

  py::class_<Dataset>(m, "Dataset")
      .def_property_readonly("graph", [](const Dataset& d) { return d.graph; })
      .def_property_readonly("features", [](const Dataset& d) { return to_array(d.features); })
      .def_property_readonly("classes", [](const Dataset& d) { return d.labels.classes; })
      .def_property_readonly("num_outputs", [](const Dataset& d) { return d.labels.num_outputs(); })
      .def_property_readonly("train", [](const Dataset& d) { return d.split.train; })
      .def_property_readonly("val", [](const Dataset& d) { return d.split.val; })
      .def_property_readonly("test", [](const Dataset& d) { return d.split.test; })
      .def_readonly("fingerprint", &Dataset::fingerprint);

  m.def("desk_task", [](std::uint64_t seed) { return make_synthetic(desk_task(seed)); },
        py::arg("seed") = 0);
  m.def(
      "make_synthetic",
      [](const std::string& kind, std::size_t num_nodes, double edge_prob, std::size_t num_blocks,
         std::size_t block_size, double p_in, double p_out, std::size_t feature_dim,
         double separation, std::uint64_t seed) {
        SyntheticParams p;
        p.kind = parse_graph_kind(kind);
        p.num_nodes = num_nodes;
        p.edge_prob = edge_prob;
        p.num_blocks = num_blocks;
        p.block_size = block_size;
        p.p_in = p_in;
        p.p_out = p_out;
        p.feature_dim = feature_dim;
        p.mean_separation = separation;
        p.seed = seed;
        return make_synthetic(p);
      },
      py::arg("kind") = "sbm", py::arg("num_nodes") = 100, py::arg("edge_prob") = 0.1,
      py::arg("num_blocks") = 4, py::arg("block_size") = 250, py::arg("p_in") = 0.05,
      py::arg("p_out") = 0.005, py::arg("feature_dim") = 16, py::arg("separation") = 1.0,
      py::arg("seed") = 0);
  m.def("load_dataset", [](const std::string& dir, const std::string& self_loops) {
    return io::load_dataset(io::DatasetPaths::in_directory(dir), policy(self_loops));
  }, py::arg("directory"), py::arg("self_loops") = "add");
  m.def("save_dataset", [](const Dataset& d, const std::string& dir) {
    io::save_dataset(d, io::DatasetPaths::in_directory(dir));
  }, py::arg("dataset"), py::arg("directory"));

  py::class_<Model>(m, "Model")
      .def(py::init([](std::size_t input_dim, std::size_t hidden_dim, std::size_t output_dim,
                       std::size_t depth, const std::string& variant, std::uint64_t seed) {
             Model md{{}, block_preset(variant)};
             md.params = init_params({input_dim, hidden_dim, output_dim, depth,
                                      md.block.use_attention ? md.block.num_heads : 0},
                                     seed);
             return md;
           }),
           py::arg("input_dim"), py::arg("hidden_dim"), py::arg("output_dim"),
           py::arg("depth") = 2, py::arg("variant") = "standard", py::arg("seed") = 0)
      .def_property_readonly("depth", [](const Model& md) { return md.params.layers.size(); })
      .def_property_readonly("num_parameters", [](const Model& md) { return md.params.num_scalars(); })
      .def("forward", [](const Model& md, const SparseGraph& g, const Array& x) {
        return to_array(model_forward(to_tensor(x), normalize_adjacency(g), md.params, md.block));
      }, py::arg("graph"), py::arg("x"))
      .def("hidden_states", [](const Model& md, const SparseGraph& g, const Array& x) {
        py::list out;
        for (const Tensor& h : hidden_states(to_tensor(x), normalize_adjacency(g), md.params, md.block))
          out.append(to_array(h));
        return out;
      }, py::arg("graph"), py::arg("x"))
      .def("save", [](const Model& md, const std::string& path) {
        std::ofstream out(path);
        if (!out) throw Error(ErrorCode::io_error, "cannot write " + path);
        save_checkpoint(out, md.params, md.block);
      })
      .def_static("load", [](const std::string& path) {
        std::ifstream in(path);
        if (!in) throw Error(ErrorCode::io_error, "cannot open " + path);
        Checkpoint ck = load_checkpoint(in);
        return Model{std::move(ck.params), ck.config};
      });

  m.def(
      "train",
      [](const Dataset& data, const std::string& variant, std::size_t depth, std::size_t hidden,
         std::size_t epochs, double lr, double weight_decay, double dropout,
         std::size_t batch_nodes, std::size_t eval_every, const std::string& metric,
         std::uint64_t seed) {
        TrainConfig c = desk_train_config();
        c.depth = depth;
        c.hidden_dim = hidden;
        c.epochs = epochs;
        c.adam.lr = lr;
        c.adam.weight_decay = weight_decay;
        c.dropout = dropout;
        c.batch_nodes = batch_nodes;
        c.eval_every = eval_every;
        c.metric = parse_metric(metric);
        c.seed = seed;
        c.validate();
        const BlockConfig block = block_preset(variant);
        TrainResult r;
        {
          py::gil_scoped_release release;
          r = train(data, block, c);
        }
        py::list history;
        for (const MetricsRow& row : r.history) {
          py::dict d;
          d["epoch"] = row.epoch;
          d["train_loss"] = row.train_loss;
          d["val_metric"] = row.val_metric;
          d["test_metric"] = row.test_metric;
          history.append(d);
        }
        py::dict out;
        out["best_val"] = r.best_val;
        out["test_at_best"] = r.test_at_best;
        out["best_epoch"] = r.best_epoch;
        out["history"] = history;
        out["model"] = Model{std::move(r.best_params), block};
        return out;
      },
      py::arg("dataset"), py::arg("variant") = "standard", py::arg("depth") = 2,
      py::arg("hidden") = 16, py::arg("epochs") = 100, py::arg("lr") = 1e-2,
      py::arg("weight_decay") = 0.0, py::arg("dropout") = 0.0, py::arg("batch_nodes") = 0,
      py::arg("eval_every") = 5, py::arg("metric") = "accuracy", py::arg("seed") = 0);

  m.def("evaluate", [](const Dataset& data, const Model& md, const std::string& split,
                       const std::string& metric) {
    TrainConfig c = desk_train_config();
    c.depth = md.params.layers.size();
    c.metric = parse_metric(metric);
    const Tensor logits = predict(data, md.params, md.block, c);
    const auto& rows = split == "train" ? data.split.train
                       : split == "val" ? data.split.val
                       : split == "test" ? data.split.test
                       : throw Error(ErrorCode::invalid_argument, "split must be train, val or test");
    return evaluate(logits, data.labels, rows, c.metric);
  }, py::arg("dataset"), py::arg("model"), py::arg("split") = "test", py::arg("metric") = "accuracy");

  m.def("linear_global_attention", [](const Array& x, const Array& w_q, const Array& w_k,
                                      const Array& w_v) {
    const AttentionResult r =
        linear_global_attention(to_tensor(x), to_tensor(w_q), to_tensor(w_k), to_tensor(w_v));
    return py::make_tuple(to_array(r.weights), to_array(r.output));
  }, py::arg("x"), py::arg("w_q"), py::arg("w_k"), py::arg("w_v"));

  py::class_<ExperimentReport>(m, "Report")
      .def_readonly("name", &ExperimentReport::name)
      .def_readonly("columns", &ExperimentReport::columns)
      .def_readonly("scalars", &ExperimentReport::scalars)
      .def_readonly("notes", &ExperimentReport::notes)
      .def_property_readonly("rows", [](const ExperimentReport& r) {
        py::list rows;
        for (const auto& row : r.rows) {
          py::list out;
          for (const Cell& c : row) out.append(cell(c));
          rows.append(out);
        }
        return rows;
      })
      .def("to_csv", &ExperimentReport::to_csv);

  m.def("kernel_witness_sweep", &theory::kernel_witness_sweep, py::arg("nodes"), py::arg("dim"),
        py::arg("trials") = 100, py::arg("seed") = 0);
  m.def("gordon_bound_trial", &theory::gordon_bound_trial, py::arg("dim"), py::arg("trials"),
        py::arg("t"), py::arg("seed") = 0);
  m.def(
      "residual_injectivity_trial",
      [](std::size_t nodes, std::size_t dim, std::size_t trials, double varsigma, std::uint64_t seed) {
        theory::InjectivityTrialConfig c;
        c.num_nodes = nodes;
        c.dim = dim;
        c.trials = trials;
        c.varsigma = varsigma;
        c.seed = seed;
        return theory::residual_injectivity_trial(c);
      },
      py::arg("nodes"), py::arg("dim"), py::arg("trials") = 100, py::arg("varsigma") = 0.0,
      py::arg("seed") = 0);
  m.def(
      "oversmoothing_trace",
      [](const SparseGraph& g, const Array& x0, std::size_t layers, const std::string& mode,
         std::uint64_t seed) {
        const theory::EnergyTrace t =
            theory::oversmoothing_trace(g, to_tensor(x0), layers, theory::parse_trace_mode(mode), seed);
        py::dict out;
        out["energy"] = t.per_layer_energy;
        out["normalized"] = t.per_layer_normalized;
        out["lambda_min"] = t.lambda_min;
        out["lambda_max"] = t.lambda_max;
        out["frequency_class"] = theory::to_string(t.classify());
        return out;
      },
      py::arg("graph"), py::arg("x0"), py::arg("layers"), py::arg("mode") = "linear_no_residual",
      py::arg("seed") = 0);
}
