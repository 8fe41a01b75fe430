#include "gss/corpus.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>

#include <json.hpp>

namespace gss {

namespace fs = std::filesystem;
using nlohmann::json;

static_assert(std::endian::native == std::endian::little,
              "corpus binaries are little-endian");

bool CsrGraph::has_edge(NodeId u, NodeId v) const {
  auto nb = neighbors(u);
  return std::binary_search(nb.begin(), nb.end(), v);
}

std::vector<std::pair<NodeId, NodeId>> CsrGraph::edge_list() const {
  std::vector<std::pair<NodeId, NodeId>> out;
  out.reserve(edge_count());
  for (NodeId i = 0; i < node_count(); ++i) {
    for (NodeId j : neighbors(i)) out.emplace_back(i, j);
  }
  return out;
}

CsrGraph make_csr(std::size_t node_count, std::vector<std::pair<NodeId, NodeId>> edges) {
  std::sort(edges.begin(), edges.end());
  CsrGraph g;
  g.offsets.assign(node_count + 1, 0);
  g.indices.reserve(edges.size());
  for (std::size_t e = 0; e < edges.size(); ++e) {
    auto [i, j] = edges[e];
    if (i >= node_count || j >= node_count) {
      throw DataError("edge (" + std::to_string(i) + "," + std::to_string(j) +
                      ") out of range for N=" + std::to_string(node_count));
    }
    if (i == j) {
      throw DataError("self-loop at node " + std::to_string(i));
    }
    if (e > 0 && edges[e] == edges[e - 1]) {
      throw DataError("duplicate edge (" + std::to_string(i) + "," + std::to_string(j) + ")");
    }
    g.offsets[i + 1]++;
    g.indices.push_back(j);
  }
  for (std::size_t i = 0; i < node_count; ++i) g.offsets[i + 1] += g.offsets[i];
  return g;
}

void validate_csr(const CsrGraph& g, const std::string& what) {
  const std::size_t n = g.node_count();
  if (g.offsets.empty() || g.offsets.front() != 0 || g.offsets.back() != g.indices.size()) {
    throw DataError(what + ": CSR offsets do not frame the index array");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (g.offsets[i + 1] < g.offsets[i]) {
      throw DataError(what + ": CSR offsets decrease at row " + std::to_string(i));
    }
    NodeId prev = kNoNode;
    for (NodeId j : g.neighbors(static_cast<NodeId>(i))) {
      if (j >= n) {
        throw DataError(what + ": column index " + std::to_string(j) + " out of range in row " +
                        std::to_string(i));
      }
      if (j == i) throw DataError(what + ": self-loop at node " + std::to_string(i));
      if (prev != kNoNode) {
        if (j == prev) {
          throw DataError(what + ": duplicate edge (" + std::to_string(i) + "," +
                          std::to_string(j) + ")");
        }
        if (j < prev) throw DataError(what + ": unsorted row " + std::to_string(i));
      }
      prev = j;
    }
  }
}

CsrGraph symmetrize(const CsrGraph& g) {
  const std::size_t n = g.node_count();
  std::vector<std::pair<NodeId, NodeId>> edges;
  edges.reserve(2 * g.edge_count());
  for (NodeId i = 0; i < n; ++i) {
    for (NodeId j : g.neighbors(i)) {
      edges.emplace_back(i, j);
      edges.emplace_back(j, i);
    }
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());

  CsrGraph out;
  out.offsets.assign(n + 1, 0);
  out.indices.reserve(edges.size());
  for (auto [i, j] : edges) {
    out.offsets[i + 1]++;
    out.indices.push_back(j);
  }
  for (std::size_t i = 0; i < n; ++i) out.offsets[i + 1] += out.offsets[i];
  return out;
}

CorpusGraph make_corpus_graph(std::size_t node_count, std::vector<std::pair<NodeId, NodeId>> edges) {
  CorpusGraph g;
  g.out_edges = make_csr(node_count, std::move(edges));
  g.symmetric_view = symmetrize(g.out_edges);
  return g;
}

const EmbeddingMatrix& Corpus::require_embeddings() const {
  if (!embeddings) throw DataError("corpus has no embeddings (train or ingest them first)");
  return *embeddings;
}

const MetricFactorTensor& Corpus::require_factors() const {
  if (!factors) throw DataError("corpus has no metric factors (train or ingest them first)");
  return *factors;
}

namespace {

void check_finite(std::span<const float> v, std::size_t dim, const std::string& field) {
  for (std::size_t idx = 0; idx < v.size(); ++idx) {
    if (!std::isfinite(v[idx])) {
      throw DataError("non-finite value in " + field + " at node " + std::to_string(idx / dim) +
                      " (component " + std::to_string(idx % dim) + ")");
    }
  }
}

}  // namespace

void validate_corpus(const Corpus& c) {
  const std::size_t n = c.node_count();
  validate_csr(c.graph.out_edges, "out_edges");
  validate_csr(c.graph.symmetric_view, "symmetric_view");
  if (c.graph.symmetric_view.node_count() != n) {
    throw DataError("symmetric view node count mismatch");
  }
  if (c.features.dim == 0 || c.features.node_count() != n) {
    throw DataError("features: expected " + std::to_string(n) + " rows, have " +
                    std::to_string(c.features.node_count()));
  }
  check_finite(c.features.data, c.features.dim, "features");
  if (c.embeddings) {
    if (c.embeddings->dim == 0 || c.embeddings->node_count() != n) {
      throw DataError("embeddings: expected " + std::to_string(n) + " rows, have " +
                      std::to_string(c.embeddings->node_count()));
    }
    check_finite(c.embeddings->data, c.embeddings->dim, "embeddings");
  }
  if (c.factors) {
    const auto& f = *c.factors;
    if (f.epsilon <= 0.0) throw DataError("metric epsilon must be > 0");
    if (f.rank == 0 || f.rank > f.dim) throw DataError("metric rank must satisfy 1 <= r <= d");
    if (!c.embeddings || f.dim != c.embeddings->dim) {
      throw DataError("factor dim must match embedding dim");
    }
    if (f.node_count() != n) {
      throw DataError("factors: expected " + std::to_string(n) + " slabs, have " +
                      std::to_string(f.node_count()));
    }
    check_finite(f.data, f.dim * f.rank, "factors");
  }
  if (c.split) {
    std::vector<char> seen(n, 0);
    std::size_t total = 0;
    for (const auto* ids : {&c.split->train_ids, &c.split->valid_ids, &c.split->test_ids}) {
      for (NodeId id : *ids) {
        if (id >= n) throw DataError("split id " + std::to_string(id) + " out of range");
        if (seen[id]) throw DataError("split sets overlap at node " + std::to_string(id));
        seen[id] = 1;
        ++total;
      }
    }
    if (total != n) throw DataError("split sets do not cover all nodes");
  }
}

// ---------------------------------------------------------------------------
// Binary component IO

namespace {

template <typename T>
void write_raw(const std::string& path, std::span<const T> v) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open for write: " + path);
  out.write(reinterpret_cast<const char*>(v.data()),
            static_cast<std::streamsize>(v.size() * sizeof(T)));
  if (!out) throw DataError("short write: " + path);
}

template <typename T>
std::vector<T> read_raw(const std::string& path, std::size_t expected_count) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("missing file: " + path);
  in.seekg(0, std::ios::end);
  const auto bytes = static_cast<std::size_t>(in.tellg());
  in.seekg(0);
  if (bytes != expected_count * sizeof(T)) {
    throw DataError(path + ": expected " + std::to_string(expected_count * sizeof(T)) +
                    " bytes, found " + std::to_string(bytes));
  }
  std::vector<T> v(expected_count);
  in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(bytes));
  if (!in) throw DataError("short read: " + path);
  return v;
}

}  // namespace

void write_binary_u64(const std::string& path, std::span<const std::uint64_t> v) { write_raw(path, v); }
void write_binary_f32(const std::string& path, std::span<const float> v) { write_raw(path, v); }
void write_binary_f64(const std::string& path, std::span<const double> v) { write_raw(path, v); }
std::vector<std::uint64_t> read_binary_u64(const std::string& path, std::size_t n) { return read_raw<std::uint64_t>(path, n); }
std::vector<float> read_binary_f32(const std::string& path, std::size_t n) { return read_raw<float>(path, n); }
std::vector<double> read_binary_f64(const std::string& path, std::size_t n) { return read_raw<double>(path, n); }

// ---------------------------------------------------------------------------
// Manifest IO

namespace {

std::vector<NodeId> narrow_ids(const std::vector<std::uint64_t>& v, const std::string& what) {
  std::vector<NodeId> out;
  out.reserve(v.size());
  for (auto x : v) {
    if (x > 0xffffffffull) throw DataError(what + ": id " + std::to_string(x) + " too large");
    out.push_back(static_cast<NodeId>(x));
  }
  return out;
}

std::vector<std::uint64_t> widen_ids(std::span<const NodeId> v) {
  return {v.begin(), v.end()};
}

}  // namespace

Corpus load_corpus(const std::string& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw DataError("missing file: " + manifest_path);
  json m;
  try {
    in >> m;
  } catch (const json::exception& e) {
    throw DataError(manifest_path + ": invalid manifest JSON: " + e.what());
  }
  if (m.value("format", "") != std::string("gss-corpus")) {
    throw DataError(manifest_path + ": not a gss-corpus manifest");
  }
  const fs::path dir = fs::path(manifest_path).parent_path();
  auto file = [&](const char* key) -> std::string {
    if (!m.contains("files") || !m["files"].contains(key)) {
      throw DataError(manifest_path + ": manifest missing files." + key);
    }
    return (dir / m["files"][key].get<std::string>()).string();
  };

  const auto n = m.at("node_count").get<std::size_t>();
  const auto edge_count = m.at("edge_count").get<std::size_t>();

  Corpus c;
  c.graph.out_edges.offsets = read_binary_u64(file("graph_offsets"), n + 1);
  std::vector<std::uint64_t> idx = read_binary_u64(file("graph_indices"), edge_count);
  c.graph.out_edges.indices = narrow_ids(idx, "graph_indices");
  validate_csr(c.graph.out_edges, "out_edges");
  c.graph.symmetric_view = symmetrize(c.graph.out_edges);

  c.features.dim = m.at("feature_dim").get<std::size_t>();
  c.features.data = read_binary_f32(file("features"), n * c.features.dim);

  if (m["files"].contains("embeddings")) {
    EmbeddingMatrix e;
    e.dim = m.at("embedding_dim").get<std::size_t>();
    e.data = read_binary_f32(file("embeddings"), n * e.dim);
    c.embeddings = std::move(e);
  }
  if (m["files"].contains("factors")) {
    if (!m.contains("metric")) throw DataError(manifest_path + ": factors present but no metric block");
    MetricFactorTensor f;
    f.dim = c.embeddings ? c.embeddings->dim : m.at("embedding_dim").get<std::size_t>();
    f.rank = m["metric"].at("rank").get<std::size_t>();
    f.epsilon = m["metric"].value("epsilon", 0.01);  // default when the corpus omits it
    f.data = read_binary_f32(file("factors"), n * f.dim * f.rank);
    c.factors = std::move(f);
  }
  if (m["files"].contains("train_ids")) {
    TemporalSplit s;
    const auto counts = m.at("split_counts");
    s.train_ids = narrow_ids(read_binary_u64(file("train_ids"), counts.at(0).get<std::size_t>()), "train_ids");
    s.valid_ids = narrow_ids(read_binary_u64(file("valid_ids"), counts.at(1).get<std::size_t>()), "valid_ids");
    s.test_ids = narrow_ids(read_binary_u64(file("test_ids"), counts.at(2).get<std::size_t>()), "test_ids");
    if (m.contains("split_years")) {
      s.train_end_year = m["split_years"].value("train_end", 0);
      s.valid_end_year = m["split_years"].value("valid_end", 0);
    }
    c.split = std::move(s);
  }

  validate_corpus(c);
  return c;
}

void save_corpus(const Corpus& c, const std::string& manifest_path) {
  validate_corpus(c);
  const fs::path dir = fs::path(manifest_path).parent_path();
  if (!dir.empty()) fs::create_directories(dir);

  json m;
  m["format"] = "gss-corpus";
  m["version"] = 1;
  m["node_count"] = c.node_count();
  m["edge_count"] = c.graph.out_edges.edge_count();
  m["feature_dim"] = c.features.dim;
  m["element_type"] = "f32le";
  m["index_type"] = "u64le";
  json files;

  auto path_of = [&](const char* name) { return (dir / name).string(); };

  write_binary_u64(path_of("graph_offsets.u64"), c.graph.out_edges.offsets);
  files["graph_offsets"] = "graph_offsets.u64";
  std::vector<std::uint64_t> idx = widen_ids(c.graph.out_edges.indices);
  write_binary_u64(path_of("graph_indices.u64"), idx);
  files["graph_indices"] = "graph_indices.u64";
  write_binary_f32(path_of("features.f32"), c.features.data);
  files["features"] = "features.f32";

  if (c.embeddings) {
    m["embedding_dim"] = c.embeddings->dim;
    write_binary_f32(path_of("embeddings.f32"), c.embeddings->data);
    files["embeddings"] = "embeddings.f32";
  }
  if (c.factors) {
    if (!c.embeddings) m["embedding_dim"] = c.factors->dim;
    m["metric"] = {{"rank", c.factors->rank}, {"epsilon", c.factors->epsilon}};
    write_binary_f32(path_of("factors.f32"), c.factors->data);
    files["factors"] = "factors.f32";
  }
  if (c.split) {
    const auto& s = *c.split;
    write_binary_u64(path_of("train_ids.u64"), widen_ids(s.train_ids));
    write_binary_u64(path_of("valid_ids.u64"), widen_ids(s.valid_ids));
    write_binary_u64(path_of("test_ids.u64"), widen_ids(s.test_ids));
    files["train_ids"] = "train_ids.u64";
    files["valid_ids"] = "valid_ids.u64";
    files["test_ids"] = "test_ids.u64";
    m["split_counts"] = {s.train_ids.size(), s.valid_ids.size(), s.test_ids.size()};
    if (s.train_end_year != 0 || s.valid_end_year != 0) {
      m["split_years"] = {{"train_end", s.train_end_year}, {"valid_end", s.valid_end_year}};
    }
  }
  m["files"] = std::move(files);

  std::ofstream out(manifest_path, std::ios::trunc);
  if (!out) throw DataError("cannot open for write: " + manifest_path);
  out << m.dump(2) << "\n";
  if (!out) throw DataError("short write: " + manifest_path);
}

std::uint64_t corpus_fingerprint(const Corpus& c) {
  std::uint64_t h = fnv1a(c.graph.out_edges.offsets.data(),
                          c.graph.out_edges.offsets.size() * sizeof(std::uint64_t));
  h = fnv1a(c.graph.out_edges.indices.data(), c.graph.out_edges.indices.size() * sizeof(NodeId), h);
  h = fnv1a(c.features.data.data(), c.features.data.size() * sizeof(float), h);
  if (c.embeddings) h = fnv1a(c.embeddings->data.data(), c.embeddings->data.size() * sizeof(float), h);
  if (c.factors) {
    h = fnv1a(c.factors->data.data(), c.factors->data.size() * sizeof(float), h);
    h = fnv1a(&c.factors->epsilon, sizeof(double), h);
  }
  return h;
}

}  // namespace gss
