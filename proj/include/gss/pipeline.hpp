#pragma once

#include <optional>
#include <string>
#include <vector>

#include "gss/corpus.hpp"
#include "gss/geodesic.hpp"

namespace gss {

struct Query {
  enum class Kind { Node, Embedding };
  Kind kind = Kind::Node;
  NodeId node = 0;
  std::vector<double> embedding;  // corpus dim, Kind::Embedding only
  std::size_t k = 10;

  static Query by_node(NodeId id, std::size_t k);
  static Query by_embedding(std::vector<double> v, std::size_t k);
};

struct PipelineConfig {
  std::size_t seed_count = 0;         // 0 -> ceil(sqrt(N))
  double mmr_lambda = 0.7;            // engineering default, unconfirmed
  double coherence_threshold = 0.3;
  std::size_t candidate_multiplier = 2;
  std::int64_t early_stop_window = -1;  // -1 -> 8*k, 0 -> disabled, >0 -> explicit
  bool use_symmetric_view = true;       // restrict to citation direction when false
  bool exclude_query_node = true;       // drop the query node from candidates
  std::size_t beam_width = 0;           // hierarchical search: 0 -> 2*k per level
};

struct RetrievalHit {
  NodeId node = 0;
  double distance = 0.0;
  double mmr_score = 0.0;
  GeodesicPath path;
  std::vector<double> step_similarities;
  double coherence = 1.0;
};

struct RetrievalDiagnostics {
  std::size_t settled = 0;
  std::vector<NodeId> seeds;
  std::size_t candidate_count = 0;
  std::size_t filtered = 0;                 // candidates dropped by the coherence filter
  std::vector<std::size_t> level_settled;   // coarse-to-fine, finest last
};

struct RetrievalResult {
  std::vector<RetrievalHit> hits;  // selection order
  RetrievalDiagnostics diagnostics;
};

// The query embedding as a 64-bit vector (corpus row for node queries).
std::vector<double> query_embedding(const Query& q, const EmbeddingMatrix& e);

// Exact top-S nodes by cosine similarity to the query (brute force), with
// initial distances: 0 for the query node itself, d_{G_s}(s, query) for every
// other seed s (the seed-side metric measures the hop from seed to query).
// Ties break by ascending node id.
std::vector<std::pair<NodeId, double>> select_seeds(const Query& q, const EmbeddingMatrix& e,
                                                    const MetricFactorTensor& f, std::size_t S);

// Greedy maximal-marginal-relevance ordering. candidates carry (id, relevance)
// with relevance = -geodesic distance; the first pick is the pure relevance
// argmax (empty selected set contributes no similarity penalty). Returns
// (id, score at selection time), at most k entries.
std::vector<std::pair<NodeId, double>> mmr_rerank(
    std::span<const std::pair<NodeId, double>> candidates, const EmbeddingMatrix& e,
    double lambda, std::size_t k);

// Similarities of consecutive path steps; empty for single-node paths.
std::vector<double> path_step_similarities(const GeodesicPath& p, const EmbeddingMatrix& e);

// Minimum consecutive cosine similarity along the path; 1.0 for single-node
// paths (a query's own node is never self-filtered).
double path_coherence(const GeodesicPath& p, const EmbeddingMatrix& e);

// Full pipeline: seeds -> multi-source Dijkstra -> top-2k candidates by
// distance -> MMR -> coherence filter -> top-k.
RetrievalResult search(const Query& q, const Corpus& corpus, const PipelineConfig& cfg);

// Same pipeline with traversal (and candidacy) restricted to an allowed node
// set; seeds are the global top-S intersected with the allowed set. Used by
// coarse-to-fine search; `allowed == nullptr` means unrestricted.
RetrievalResult search_restricted(const Query& q, const Corpus& corpus, const PipelineConfig& cfg,
                                  const std::vector<char>* allowed);

}  // namespace gss
