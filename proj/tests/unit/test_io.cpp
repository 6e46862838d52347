#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "helpers.hpp"
#include "smpnn/error.hpp"
#include "smpnn/io.hpp"
#include "smpnn/manifest.hpp"
#include "smpnn/report.hpp"
#include "smpnn/trainer.hpp"

using namespace smpnn;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("smpnn_unit_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an smpnn::Error");
  return ErrorCode::invalid_argument;
}

}  // namespace

TEST_SUITE("io") {

TEST_CASE("edge parser") {
  std::istringstream in("# comment\n0 1\n1 2 0.5\n\n2 0 # trailing\n");
  auto e = io::read_edges(in);
  REQUIRE(e.size() == 3);
  CHECK(e[1].weight == 0.5);
  std::istringstream bad("0 1\n0 x\n");
  try {
    io::read_edges(bad, "edges.txt");
    FAIL("expected failure");
  } catch (const Error& err) {
    CHECK(err.code() == ErrorCode::parse_error);
    CHECK(std::string(err.what()).find("edges.txt:2") != std::string::npos);
  }
  std::istringstream extra("0 1 1.0 7\n");
  CHECK(code_of([&] { io::read_edges(extra); }) == ErrorCode::parse_error);
  std::istringstream negative("-1 2\n");
  CHECK(code_of([&] { io::read_edges(negative); }) == ErrorCode::parse_error);
}

TEST_CASE("feature header mismatch names both counts") {
  std::istringstream in("3 2\n1 2\n3 4\n");
  try {
    io::read_features(in);
    FAIL("expected failure");
  } catch (const Error& e) {
    const std::string msg = e.what();
    CHECK(msg.find('3') != std::string::npos);
    CHECK(msg.find('2') != std::string::npos);
  }
  std::istringstream short_row("2 2\n1 2\n3\n");
  CHECK(code_of([&] { io::read_features(short_row); }) == ErrorCode::parse_error);
}

TEST_CASE("labels: single and multi-label") {
  std::istringstream single("0\n2\n1\n");
  Labels a = io::read_labels(single);
  CHECK(a.classes == std::vector<int>{0, 2, 1});
  CHECK(a.num_outputs() == 3);
  std::istringstream multi("1,0,1\n0,0,1\n");
  Labels b = io::read_labels(multi);
  CHECK(b.multilabel);
  CHECK(b.targets == Tensor::from_rows({{1, 0, 1}, {0, 0, 1}}));
  std::istringstream ragged("1,0\n1\n");
  CHECK(code_of([&] { io::read_labels(ragged); }) == ErrorCode::parse_error);
  std::istringstream nonbinary("1,2\n");
  CHECK(code_of([&] { io::read_labels(nonbinary); }) == ErrorCode::parse_error);
}

TEST_CASE("two-node toy dataset round-trips bitwise") {
  fs::path dir = scratch_dir("toy");
  {
    std::ofstream(dir / "edges.txt") << "0 1\n";
    std::ofstream(dir / "features.txt") << "2 2\n0.1 -3e-5\n7 1e300\n";
    std::ofstream(dir / "labels.txt") << "0\n1\n";
    std::ofstream(dir / "train.txt") << "0\n";
    std::ofstream(dir / "val.txt") << "1\n";
    std::ofstream(dir / "test.txt") << "";
  }
  Dataset d = io::load_dataset(io::DatasetPaths::in_directory(dir));
  CHECK(d.graph.nnz() == 4);
  fs::path out = scratch_dir("toy_out");
  io::save_dataset(d, io::DatasetPaths::in_directory(out));
  Dataset e = io::load_dataset(io::DatasetPaths::in_directory(out));
  CHECK(e.graph == d.graph);
  CHECK(e.features == d.features);
  CHECK(e.labels.classes == d.labels.classes);
  CHECK(e.split.train == d.split.train);
  io::save_dataset(e, io::DatasetPaths::in_directory(dir));
  CHECK(slurp(dir / "features.txt") == slurp(out / "features.txt"));
  CHECK(slurp(dir / "edges.txt") == slurp(out / "edges.txt"));
}

TEST_CASE("dataset consistency errors") {
  fs::path dir = scratch_dir("bad");
  std::ofstream(dir / "edges.txt") << "0 5\n";
  std::ofstream(dir / "features.txt") << "2 1\n1\n2\n";
  std::ofstream(dir / "labels.txt") << "0\n1\n";
  std::ofstream(dir / "train.txt") << "0\n";
  std::ofstream(dir / "val.txt") << "0\n";
  std::ofstream(dir / "test.txt") << "";
  auto paths = io::DatasetPaths::in_directory(dir);
  CHECK(code_of([&] { io::load_dataset(paths); }) == ErrorCode::parse_error);
  std::ofstream(dir / "edges.txt") << "0 1\n";
  CHECK(code_of([&] { io::load_dataset(paths); }) == ErrorCode::invalid_argument);
  std::ofstream(dir / "val.txt") << "1\n";
  std::ofstream(dir / "labels.txt") << "0\n1\n1\n";
  CHECK(code_of([&] { io::load_dataset(paths); }) == ErrorCode::parse_error);
  fs::remove(dir / "labels.txt");
  CHECK(code_of([&] { io::load_dataset(paths); }) == ErrorCode::io_error);
}

TEST_CASE("saved SBM trains identically to the in-memory run") {
  SyntheticParams p;
  p.num_blocks = 3;
  p.block_size = 30;
  p.p_in = 0.2;
  p.p_out = 0.02;
  p.feature_dim = 4;
  Dataset d = make_synthetic(p);
  fs::path dir = scratch_dir("sbm");
  io::save_dataset(d, io::DatasetPaths::in_directory(dir));
  Dataset loaded = io::load_dataset(io::DatasetPaths::in_directory(dir));
  TrainConfig c;
  c.epochs = 5;
  TrainResult a = train(d, block_preset("standard"), c);
  TrainResult b = train(loaded, block_preset("standard"), c);
  REQUIRE(a.history.size() == b.history.size());
  for (std::size_t i = 0; i < a.history.size(); ++i) {
    CHECK(a.history[i].train_loss == b.history[i].train_loss);
    CHECK(a.history[i].test_metric == b.history[i].test_metric);
  }
}

TEST_CASE("fingerprints") {
  CHECK(io::fingerprint_bytes("") == "cbf29ce484222325");
  CHECK(io::fingerprint_bytes("a") == "af63dc4c8601ec8c");
}

TEST_CASE("report csv and manifest json") {
  ExperimentReport r;
  r.columns = {"a", "b", "c"};
  r.add_row({std::int64_t{3}, 0.1, std::string("x")});
  CHECK(r.to_csv() == "a,b,c\n3,0.10000000000000001,x\n");
  CHECK_THROWS_AS(r.add_row({std::int64_t{1}}), Error);

  RunManifest m;
  m.command = "train";
  m.config = {{"lr", "0.01"}, {"epochs", "3"}};
  m.seed = 7;
  m.dataset_fingerprint = "abc";
  m.timestamp = utc_timestamp();
  m.tool_version = tool_version();
  m.results = {{"best_val", 0.5}};
  RunManifest back = RunManifest::from_json(m.to_json());
  CHECK(back.command == m.command);
  CHECK(back.config == m.config);
  CHECK(back.seed == 7);
  CHECK(back.results == m.results);
}

}
