#include "smpnn/io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string_view>

#include "smpnn/error.hpp"

namespace smpnn::io {
namespace {

std::string where(const std::string& source, std::size_t line) {
  return source + ":" + std::to_string(line) + ": ";
}

std::string_view strip_comment(std::string_view line) {
  if (auto pos = line.find('#'); pos != std::string_view::npos) line = line.substr(0, pos);
  return line;
}

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

template <typename T>
T parse_int(std::string_view tok, const std::string& source, std::size_t line) {
  T value{};
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), value);
  require(ec == std::errc() && ptr == tok.data() + tok.size(), ErrorCode::parse_error,
          where(source, line) + "expected an integer, got '" + std::string(tok) + "'");
  return value;
}

double parse_double(std::string_view tok, const std::string& source, std::size_t line) {
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), value);
  require(ec == std::errc() && ptr == tok.data() + tok.size(), ErrorCode::parse_error,
          where(source, line) + "expected a number, got '" + std::string(tok) + "'");
  return value;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::ifstream open_in(const std::filesystem::path& p) {
  std::ifstream in(p);
  require(static_cast<bool>(in), ErrorCode::io_error, "cannot open '" + p.string() + "'");
  return in;
}

std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream out(p);
  require(static_cast<bool>(out), ErrorCode::io_error, "cannot write '" + p.string() + "'");
  return out;
}

}  // namespace

std::vector<Edge> read_edges(std::istream& in, const std::string& source) {
  std::vector<Edge> edges;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto toks = split_ws(strip_comment(line));
    if (toks.empty()) continue;
    require(toks.size() == 2 || toks.size() == 3, ErrorCode::parse_error,
            where(source, lineno) + "expected 'src dst [weight]', got " +
                std::to_string(toks.size()) + " fields");
    Edge e;
    e.src = parse_int<Index>(toks[0], source, lineno);
    e.dst = parse_int<Index>(toks[1], source, lineno);
    if (toks.size() == 3) e.weight = parse_double(toks[2], source, lineno);
    edges.push_back(e);
  }
  return edges;
}

Tensor read_features(std::istream& in, const std::string& source) {
  std::string line;
  std::size_t lineno = 0;
  std::size_t n = 0, d = 0;
  bool have_header = false;
  std::vector<double> data;
  std::size_t rows_read = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto toks = split_ws(strip_comment(line));
    if (toks.empty()) continue;
    if (!have_header) {
      require(toks.size() == 2, ErrorCode::parse_error,
              where(source, lineno) + "expected header 'N D'");
      n = parse_int<std::size_t>(toks[0], source, lineno);
      d = parse_int<std::size_t>(toks[1], source, lineno);
      have_header = true;
      data.reserve(n * d);
      continue;
    }
    require(toks.size() == d, ErrorCode::parse_error,
            where(source, lineno) + "expected " + std::to_string(d) + " values, got " +
                std::to_string(toks.size()));
    for (auto t : toks) data.push_back(parse_double(t, source, lineno));
    ++rows_read;
  }
  require(have_header, ErrorCode::parse_error, source + ": missing 'N D' header");
  require(rows_read == n, ErrorCode::parse_error,
          source + ": header declares N=" + std::to_string(n) + " rows but the file has " +
              std::to_string(rows_read));
  return Tensor(n, d, std::move(data));
}

Labels read_labels(std::istream& in, const std::string& source) {
  Labels labels;
  std::string line;
  std::size_t lineno = 0;
  std::size_t arity = 0;
  std::vector<double> flat;
  bool decided = false;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view body = strip_comment(line);
    auto toks = split_ws(body);
    if (toks.empty()) continue;
    require(toks.size() == 1, ErrorCode::parse_error,
            where(source, lineno) + "expected one label token per line");
    std::string_view tok = toks[0];
    const bool multi = tok.find(',') != std::string_view::npos;
    if (!decided) {
      labels.multilabel = multi;
      decided = true;
    }
    if (!labels.multilabel) {
      require(!multi, ErrorCode::parse_error,
              where(source, lineno) + "label arity mismatch: expected a single class id");
      const int c = parse_int<int>(tok, source, lineno);
      require(c >= 0, ErrorCode::parse_error, where(source, lineno) + "negative class id");
      labels.classes.push_back(c);
      continue;
    }
    std::size_t count = 0;
    std::size_t start = 0;
    while (start <= tok.size()) {
      std::size_t comma = tok.find(',', start);
      if (comma == std::string_view::npos) comma = tok.size();
      const int v = parse_int<int>(tok.substr(start, comma - start), source, lineno);
      require(v == 0 || v == 1, ErrorCode::parse_error,
              where(source, lineno) + "multi-label entries must be 0 or 1");
      flat.push_back(v);
      ++count;
      start = comma + 1;
    }
    if (arity == 0) arity = count;
    require(count == arity, ErrorCode::parse_error,
            where(source, lineno) + "label arity mismatch: expected " + std::to_string(arity) +
                " entries, got " + std::to_string(count));
  }
  if (labels.multilabel) {
    const std::size_t rows = arity == 0 ? 0 : flat.size() / arity;
    labels.targets = Tensor(rows, arity, std::move(flat));
  }
  return labels;
}

std::vector<Index> read_index_list(std::istream& in, const std::string& source) {
  std::vector<Index> ids;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto toks = split_ws(strip_comment(line));
    if (toks.empty()) continue;
    require(toks.size() == 1, ErrorCode::parse_error,
            where(source, lineno) + "expected one node id per line");
    ids.push_back(parse_int<Index>(toks[0], source, lineno));
  }
  return ids;
}

void write_edges(std::ostream& out, const SparseGraph& g) {
  for (std::size_t i = 0; i < g.num_nodes(); ++i) {
    auto cols = g.neighbors(i);
    auto vals = g.row_values(i);
    for (std::size_t k = 0; k < cols.size(); ++k) {
      if (cols[k] < i) continue;
      out << i << ' ' << cols[k];
      if (vals[k] != 1.0) out << ' ' << fmt(vals[k]);
      out << '\n';
    }
  }
}

void write_features(std::ostream& out, const Tensor& x) {
  out << x.rows() << ' ' << x.cols() << '\n';
  for (std::size_t i = 0; i < x.rows(); ++i) {
    for (std::size_t j = 0; j < x.cols(); ++j) out << (j ? " " : "") << fmt(x(i, j));
    out << '\n';
  }
}

void write_labels(std::ostream& out, const Labels& labels) {
  if (!labels.multilabel) {
    for (int c : labels.classes) out << c << '\n';
    return;
  }
  for (std::size_t i = 0; i < labels.targets.rows(); ++i) {
    for (std::size_t j = 0; j < labels.targets.cols(); ++j)
      out << (j ? "," : "") << static_cast<int>(labels.targets(i, j));
    out << '\n';
  }
}

void write_index_list(std::ostream& out, const std::vector<Index>& ids) {
  for (Index id : ids) out << id << '\n';
}

DatasetPaths DatasetPaths::in_directory(const std::filesystem::path& dir) {
  return {dir / "edges.txt", dir / "features.txt", dir / "labels.txt",
          dir / "train.txt", dir / "val.txt",      dir / "test.txt"};
}

Dataset load_dataset(const DatasetPaths& paths, SelfLoopPolicy policy) {
  Dataset data;
  auto features_in = open_in(paths.features);
  data.features = read_features(features_in, paths.features.string());
  const std::size_t n = data.features.rows();

  auto edges_in = open_in(paths.edges);
  const auto edges = read_edges(edges_in, paths.edges.string());
  for (std::size_t k = 0; k < edges.size(); ++k) {
    require(edges[k].src < n && edges[k].dst < n, ErrorCode::parse_error,
            paths.edges.string() + ": edge " + std::to_string(k) + " references node " +
                std::to_string(std::max(edges[k].src, edges[k].dst)) +
                " but the feature file declares N=" + std::to_string(n));
  }
  data.graph = build_graph(edges, n, policy);

  auto labels_in = open_in(paths.labels);
  data.labels = read_labels(labels_in, paths.labels.string());
  require(data.labels.size() == n, ErrorCode::parse_error,
          paths.labels.string() + ": " + std::to_string(data.labels.size()) +
              " labels but the feature file declares N=" + std::to_string(n));

  std::vector<std::filesystem::path> files{paths.edges, paths.features, paths.labels};
  auto read_split = [&](const std::filesystem::path& p) -> std::vector<Index> {
    if (p.empty()) return {};
    auto in = open_in(p);
    files.push_back(p);
    return read_index_list(in, p.string());
  };
  data.split.train = read_split(paths.train);
  data.split.val = read_split(paths.val);
  data.split.test = read_split(paths.test);
  data.split.validate(n);
  data.fingerprint = fingerprint_files(files);
  return data;
}

void save_dataset(const Dataset& data, const DatasetPaths& paths) {
  {
    auto out = open_out(paths.edges);
    write_edges(out, data.graph);
  }
  {
    auto out = open_out(paths.features);
    write_features(out, data.features);
  }
  {
    auto out = open_out(paths.labels);
    write_labels(out, data.labels);
  }
  const std::pair<const std::filesystem::path*, const std::vector<Index>*> splits[] = {
      {&paths.train, &data.split.train},
      {&paths.val, &data.split.val},
      {&paths.test, &data.split.test}};
  for (const auto& [p, ids] : splits) {
    if (p->empty()) continue;
    auto out = open_out(*p);
    write_index_list(out, *ids);
  }
}

std::string fingerprint_bytes(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream s;
  s << std::hex << std::setw(16) << std::setfill('0') << h;
  return s.str();
}

std::string fingerprint_files(const std::vector<std::filesystem::path>& files) {
  std::string all;
  for (const auto& p : files) {
    auto in = open_in(p);
    std::ostringstream buf;
    buf << in.rdbuf();
    all += fingerprint_bytes(buf.str());
  }
  return fingerprint_bytes(all);
}

}  // namespace smpnn::io
