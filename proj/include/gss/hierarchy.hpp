#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gss/corpus.hpp"
#include "gss/geodesic.hpp"
#include "gss/pipeline.hpp"

namespace gss {

struct KMeansResult {
  std::vector<NodeId> assignment;   // point -> cluster
  std::vector<double> centroids;    // k x dim, row-major
  std::size_t k = 0;
  std::vector<double> wcss_trace;   // within-cluster sum of squares per Lloyd iteration
};

// Seeded k-means++ init, Lloyd iterations to an assignment fixpoint or the
// cap. Empty clusters are reseeded with the point farthest from its centroid.
// Cluster ids are canonicalized by ascending minimum member id.
KMeansResult kmeans(const double* points, std::size_t m, std::size_t dim, std::size_t k,
                    std::size_t iter_cap, std::uint64_t seed);

// One coarsened level: pooled embeddings/factors are arithmetic member means
// (64-bit storage), the cluster graph connects (a,b) iff some member edge
// crosses a<->b, and diameters bound member-to-member local distances.
struct HierarchyLevel {
  std::size_t cluster_count = 0;
  std::size_t dim = 0;
  std::size_t rank = 0;
  double epsilon = 0.01;
  std::vector<NodeId> assignment;              // finer node -> cluster
  std::vector<std::vector<NodeId>> children;   // cluster -> member ids, ascending
  std::vector<double> embeddings;              // C x dim
  std::vector<double> factors;                 // C x dim x rank
  CsrGraph graph;                              // symmetric cluster adjacency
  std::vector<double> diameters;               // per cluster
  std::vector<char> diameter_exact;            // 0 = sampled lower-bound estimate

  MetricSpace<double> space() const {
    MetricSpace<double> s;
    s.embeddings = embeddings.data();
    s.factors = factors.data();
    s.n = cluster_count;
    s.dim = dim;
    s.rank = rank;
    s.epsilon = epsilon;
    return s;
  }
};

struct HierarchyConfig {
  double rho = 0.1;            // pooling ratio (0,1]; 1 gives singleton clusters
  std::size_t levels = 3;      // total level count including the base corpus
  std::size_t kmeans_iter_cap = 50;
  std::uint64_t kmeans_seed = 1;
  std::size_t diameter_sample_pairs = 256;  // for clusters larger than the exact cutoff
  std::size_t diameter_exact_limit = 64;
};

struct Hierarchy {
  HierarchyConfig config;
  std::uint64_t fingerprint = 0;            // of the corpus this was built from
  std::vector<HierarchyLevel> coarse;       // coarse[0] over the base, coarse[1] over coarse[0], ...

  std::size_t levels() const { return coarse.size() + 1; }
};

// Coarsens one level. Inputs describe the finer level (the base corpus or a
// previously built level); `fine_graph` must be the traversal (symmetric)
// view.
HierarchyLevel coarsen(const MetricSpace<double>& fine, const CsrGraph& fine_graph, double rho,
                       const HierarchyConfig& cfg);
HierarchyLevel coarsen(const EmbeddingMatrix& e, const MetricFactorTensor& f,
                       const CsrGraph& fine_graph, double rho, const HierarchyConfig& cfg);

Hierarchy build_hierarchy(const Corpus& corpus, const HierarchyConfig& cfg);

void save_hierarchy(const Hierarchy& h, const std::string& manifest_path);
Hierarchy load_hierarchy(const std::string& manifest_path);

// Coarse-to-fine search: full Dijkstra at the coarsest level, then each finer
// level restricts traversal to children of the surviving beam (the query's
// own cluster always survives); the finest level runs the standard pipeline
// restricted to the surviving node set.
RetrievalResult coarse_to_fine_search(const Query& q, const Hierarchy& h, const Corpus& corpus,
                                      const PipelineConfig& cfg);

struct BoundTransitionReport {
  std::size_t level = 0;        // coarse level index (0 = base -> coarse[0])
  std::size_t sampled = 0;
  std::size_t skipped = 0;      // unreachable pairs
  std::size_t violations = 0;   // |d_coarse - d_fine| exceeding the diameter bound
  double max_excess = 0.0;
  double fine_diameter_bound = 0.0;
  double coarse_diameter_bound = 0.0;
};

// Samples node pairs per level transition and reports
// |d^(l)(c_i, c_j) - d^(l-1)(i, j)| - (Delta^(l-1) + Delta^(l)) statistics.
// A measurement, not a gate: callers decide what to assert.
std::vector<BoundTransitionReport> check_hierarchical_bound(const Hierarchy& h,
                                                            const Corpus& corpus,
                                                            std::size_t pairs_per_level,
                                                            std::uint64_t seed);

}  // namespace gss
