#pragma once

#include <map>
#include <string>
#include <vector>

#include "gss/corpus.hpp"
#include "gss/hierarchy.hpp"
#include "gss/pipeline.hpp"

namespace gss {

// ---------------------------------------------------------------------------
// Retrieval metrics

// |top-k intersect relevant| / |relevant|; 0 when nothing is relevant.
double recall_at_k(std::span<const NodeId> ranking, const std::map<NodeId, double>& judged,
                   std::size_t k);

// DCG with gain / log2(rank+1) discount normalized by the ideal DCG. Queries
// with no relevant documents score 0 (callers may exclude them from means).
double ndcg_at_k(std::span<const NodeId> ranking, const std::map<NodeId, double>& judged,
                 std::size_t k);

// Mean over queries of 1 / rank of the first relevant hit, 0 when none.
double mrr(std::span<const std::vector<NodeId>> rankings,
           std::span<const std::map<NodeId, double>> judged);

struct BridgeTask {
  NodeId query = 0;
  std::vector<NodeId> source_area;
  std::vector<NodeId> target_area;
  std::vector<NodeId> bridges;      // ground truth
  std::vector<NodeId> distractors;  // neither-area lookalikes, disjoint from bridges
};

double bridge_at_k(std::span<const NodeId> ranking, const BridgeTask& task, std::size_t k);

// ---------------------------------------------------------------------------
// Baselines

// Exact descending-cosine ranking (ties by ascending id). Node queries rank
// themselves first; experiment drivers drop the query node before scoring.
std::vector<NodeId> baseline_cosine_ranking(const Query& q, const EmbeddingMatrix& e,
                                            std::size_t k);

// A copy of the corpus with all-zero factors: the learned metric collapses to
// scaled Euclidean distance (the fixed-distance ablation).
Corpus with_zero_factors(const Corpus& c);

// ---------------------------------------------------------------------------
// Synthetic fixtures

// Minimum path sum from src to dst over all simple paths with at most
// max_edges steps, by exhaustive DFS. Independent of the Dijkstra engine.
double min_path_sum_enumeration(const CsrGraph& view, const EmbeddingMatrix& e,
                                const MetricFactorTensor& f, NodeId src, NodeId dst,
                                std::size_t max_edges, std::vector<NodeId>* best_path = nullptr);

struct AdvantageProbe {
  NodeId source = 0;
  NodeId target = 0;
  double path_sum = 0.0;        // minimal enumerated path sum
  double dissimilarity = 0.0;   // 1 - cos(source, target)
  double alpha = 0.0;           // fixture scale calibration
  double margin = 0.0;          // alpha * dissimilarity / path_sum
  std::vector<NodeId> best_path;
};

struct BarbellParams {
  std::uint64_t seed = 7;
  std::size_t cluster_size = 20;   // per area, query/hub included
  std::size_t path_length = 4;     // intermediate bridge-chain nodes; must be >= 1
  std::size_t distractors = 6;
  double separation_deg = 80.0;    // angle between the area centers
  double metric_gain = 10.0;       // factor amplification off the chain
  double epsilon = 0.01;
  double noise = 0.01;             // out-of-plane jitter on area members
};

struct BarbellFixture {
  Corpus corpus;
  BridgeTask task;
  AdvantageProbe probe;
};

// Two dense areas joined by a chain of high-similarity intermediates. Factors
// make chain steps cheap and everything else expensive, so the geodesic
// pipeline surfaces the bridge node while plain cosine prefers the
// distractors. The emitted probe certifies path_sum < alpha * (1 - sim) by
// exhaustive path enumeration; infeasible parameter combinations are refused
// with the violated inequality.
BarbellFixture make_barbell_fixture(const BarbellParams& p);

// Two feature blocks with mostly intra-block citations; the training fixture.
Corpus make_two_block_corpus(std::uint64_t seed, std::size_t n = 50, std::size_t feature_dim = 8,
                             std::size_t cross_edges = 3);

struct BlobParams {
  std::uint64_t seed = 1;
  std::size_t n = 5000;
  std::size_t blobs = 50;
  std::size_t dim = 16;
  std::size_t rank = 4;
  double noise = 0.08;
  double factor_scale = 0.5;
  double epsilon = 0.01;
  bool homogeneous_factors = false;  // one shared factor slab (equal-metric fixture)
  std::size_t intra_degree = 3;
  std::size_t inter_pairs = 2;       // member pairs linking consecutive blobs
};

// Clustered corpus with embeddings and factors; the scale fixture for search
// and hierarchy measurements.
Corpus make_blob_corpus(const BlobParams& p);

// ---------------------------------------------------------------------------
// Experiment driver

struct RelevanceJudgments {
  // query id -> (node -> gain >= 0)
  std::map<std::string, std::map<NodeId, double>> gains;
};

struct ExperimentQuery {
  std::string id;
  Query query;
};

struct ExperimentConfig {
  std::vector<std::string> methods;  // cosine | geodesic-flat | geodesic-hier
  std::vector<std::uint64_t> seeds = {1};
  PipelineConfig pipeline;
  HierarchyConfig hierarchy;
  std::size_t threads = 1;
};

struct ExperimentRow {
  std::string method;
  std::string metric;
  double mean = 0.0;
  double stddev = 0.0;
  std::size_t seeds = 0;
};

std::vector<ExperimentRow> run_experiment(const Corpus& corpus,
                                          const std::vector<ExperimentQuery>& queries,
                                          const RelevanceJudgments& judgments,
                                          const ExperimentConfig& cfg);

std::string experiment_csv(std::span<const ExperimentRow> rows);

std::vector<ExperimentQuery> load_queries_json(const std::string& path);
RelevanceJudgments load_judgments_json(const std::string& path);
void save_bridge_task_json(const BridgeTask& task, const std::string& path);
void save_probe_json(const AdvantageProbe& probe, const std::string& path);

}  // namespace gss
