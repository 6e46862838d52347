#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "smpnn/dataset.hpp"

namespace smpnn::io {

// Text formats:
//   edges    one `src dst [weight]` per line, 0-indexed, `#` starts a comment
//   features first line `N D`, then N rows of D numbers
//   labels   one integer per line, or a comma-separated 0/1 vector per line
//   split    one node id per line
// Parsers reject malformed input with the offending line number.

std::vector<Edge> read_edges(std::istream& in, const std::string& source = "<edges>");
Tensor read_features(std::istream& in, const std::string& source = "<features>");
Labels read_labels(std::istream& in, const std::string& source = "<labels>");
std::vector<Index> read_index_list(std::istream& in, const std::string& source = "<split>");

void write_edges(std::ostream& out, const SparseGraph& g);
void write_features(std::ostream& out, const Tensor& x);
void write_labels(std::ostream& out, const Labels& labels);
void write_index_list(std::ostream& out, const std::vector<Index>& ids);

struct DatasetPaths {
  std::filesystem::path edges;
  std::filesystem::path features;
  std::filesystem::path labels;
  std::filesystem::path train;
  std::filesystem::path val;
  std::filesystem::path test;

  /// Conventional file names inside a directory.
  static DatasetPaths in_directory(const std::filesystem::path& dir);
};

/// Loads and cross-checks all files. The node count is taken from the
/// feature header; edges, labels and splits must agree with it.
Dataset load_dataset(const DatasetPaths& paths, SelfLoopPolicy policy = SelfLoopPolicy::add);

/// Writes every stored undirected entry (self-loops included), so loading
/// with either self-loop policy reproduces the same graph.
void save_dataset(const Dataset& data, const DatasetPaths& paths);

/// FNV-1a 64-bit hash, hex encoded.
std::string fingerprint_bytes(std::string_view bytes);
std::string fingerprint_files(const std::vector<std::filesystem::path>& files);

}  // namespace smpnn::io
