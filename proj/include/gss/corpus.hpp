#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "gss/common.hpp"

namespace gss {

using NodeId = std::uint32_t;
inline constexpr NodeId kNoNode = static_cast<NodeId>(-1);

// Compressed sparse row adjacency. Rows are sorted ascending, self-loop free
// and duplicate free; offsets has node_count()+1 entries.
struct CsrGraph {
  std::vector<std::uint64_t> offsets{0};
  std::vector<NodeId> indices;

  std::size_t node_count() const { return offsets.size() - 1; }
  std::size_t edge_count() const { return indices.size(); }
  std::span<const NodeId> neighbors(NodeId i) const {
    return {indices.data() + offsets[i], indices.data() + offsets[i + 1]};
  }
  bool has_edge(NodeId u, NodeId v) const;
  std::vector<std::pair<NodeId, NodeId>> edge_list() const;
};

// Builds a CSR graph from an edge list. Rows are sorted; self-loops and
// duplicate (i,j) pairs are rejected, not repaired.
CsrGraph make_csr(std::size_t node_count, std::vector<std::pair<NodeId, NodeId>> edges);

// Checks offsets monotonicity, index range, row order, self-loops, duplicates.
void validate_csr(const CsrGraph& g, const std::string& what);

// Undirected closure: (i,j) present iff (i,j) or (j,i) is in g. Idempotent.
CsrGraph symmetrize(const CsrGraph& g);

struct CorpusGraph {
  CsrGraph out_edges;
  CsrGraph symmetric_view;  // built at load/construction
  std::size_t node_count() const { return out_edges.node_count(); }
};

CorpusGraph make_corpus_graph(std::size_t node_count, std::vector<std::pair<NodeId, NodeId>> edges);

struct NodeFeatures {
  std::size_t dim = 0;
  std::vector<float> data;  // row-major N x dim

  std::size_t node_count() const { return dim == 0 ? 0 : data.size() / dim; }
  std::span<const float> row(NodeId i) const { return {data.data() + std::size_t(i) * dim, dim}; }
};

struct EmbeddingMatrix {
  std::size_t dim = 0;
  std::vector<float> data;  // row-major N x dim

  std::size_t node_count() const { return dim == 0 ? 0 : data.size() / dim; }
  std::span<const float> row(NodeId i) const { return {data.data() + std::size_t(i) * dim, dim}; }
};

// Per-node low-rank metric factors; slab i is a dim x rank matrix stored
// row-major. The induced metric is slab * slab^T + epsilon * I.
struct MetricFactorTensor {
  std::size_t dim = 0;
  std::size_t rank = 0;
  double epsilon = 0.01;
  std::vector<float> data;  // N x dim x rank

  std::size_t node_count() const { return dim * rank == 0 ? 0 : data.size() / (dim * rank); }
  std::span<const float> slab(NodeId i) const {
    return {data.data() + std::size_t(i) * dim * rank, dim * rank};
  }
};

struct TemporalSplit {
  std::vector<NodeId> train_ids;
  std::vector<NodeId> valid_ids;
  std::vector<NodeId> test_ids;
  int train_end_year = 0;  // corpus metadata, not hardcoded anywhere
  int valid_end_year = 0;
};

struct Corpus {
  CorpusGraph graph;
  NodeFeatures features;
  std::optional<EmbeddingMatrix> embeddings;
  std::optional<MetricFactorTensor> factors;
  std::optional<TemporalSplit> split;

  std::size_t node_count() const { return graph.node_count(); }
  const EmbeddingMatrix& require_embeddings() const;
  const MetricFactorTensor& require_factors() const;
};

// Cross-component invariants: sizes agree, values finite, epsilon > 0,
// rank <= dim, split is a disjoint cover. Throws DataError.
void validate_corpus(const Corpus& c);

// Manifest JSON plus raw little-endian binaries (f32 for matrices, u64 for
// CSR arrays and id lists). Component files live next to the manifest.
Corpus load_corpus(const std::string& manifest_path);
void save_corpus(const Corpus& c, const std::string& manifest_path);

// Fingerprint over all components; used to pair hierarchies with the corpus
// they were built from.
std::uint64_t corpus_fingerprint(const Corpus& c);

// Raw binary component IO, also used by the hierarchy store.
void write_binary_u64(const std::string& path, std::span<const std::uint64_t> v);
void write_binary_f32(const std::string& path, std::span<const float> v);
void write_binary_f64(const std::string& path, std::span<const double> v);
std::vector<std::uint64_t> read_binary_u64(const std::string& path, std::size_t expected_count);
std::vector<float> read_binary_f32(const std::string& path, std::size_t expected_count);
std::vector<double> read_binary_f64(const std::string& path, std::size_t expected_count);

}  // namespace gss
