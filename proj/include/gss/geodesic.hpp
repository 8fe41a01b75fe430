#pragma once

#include <cstdint>
#include <limits>
#include <queue>
#include <span>
#include <tuple>
#include <vector>

#include "gss/corpus.hpp"
#include "gss/metric.hpp"

namespace gss {

inline constexpr double kUnreachable = std::numeric_limits<double>::infinity();

// A node set with per-node embeddings and metric factors, generic over the
// storage type so that corpus levels (f32) and pooled hierarchy levels (f64)
// share one code path. Edge weights use the tail node's metric.
template <typename FT>
struct MetricSpace {
  const FT* embeddings = nullptr;
  const FT* factors = nullptr;
  std::size_t n = 0;
  std::size_t dim = 0;
  std::size_t rank = 0;
  double epsilon = 0.01;

  std::span<const FT> emb_row(NodeId i) const { return {embeddings + std::size_t(i) * dim, dim}; }
  std::span<const FT> factor_slab(NodeId i) const {
    return {factors + std::size_t(i) * dim * rank, dim * rank};
  }
  // w(u, v) = d_{G_u}(u, v): direction-dependent, tail metric.
  double weight(NodeId u, NodeId v) const {
    return local_distance_span(factor_slab(u), dim, rank, epsilon, emb_row(u), emb_row(v));
  }
};

MetricSpace<float> metric_space(const EmbeddingMatrix& e, const MetricFactorTensor& f);

double edge_weight(NodeId u, NodeId v, const EmbeddingMatrix& e, const MetricFactorTensor& f);

// Stop once the k smallest settled distances (as an id set) have been stable
// for `window` consecutive settles. window == 0 disables early stopping.
struct EarlyStopConfig {
  std::size_t k = 0;
  std::size_t window = 0;
};

struct GeodesicSearchResult {
  std::vector<double> dist;        // +inf where unreached
  std::vector<NodeId> parent;      // kNoNode at seeds and unreached nodes
  std::vector<NodeId> settle_order;
  std::vector<char> settled;
};

struct GeodesicPath {
  std::vector<NodeId> nodes;        // seed ... target
  std::vector<double> step_weights; // nodes.size() - 1 entries
  double total = 0.0;               // sum of step weights
};

namespace detail {

// Min-heap keyed by (distance, node id); equal distances settle in ascending
// id order. Lazy deletion: stale entries are skipped on pop.
template <typename FT>
GeodesicSearchResult dijkstra_impl(std::span<const std::pair<NodeId, double>> seeds,
                                   const CsrGraph& view, const MetricSpace<FT>& space,
                                   const EarlyStopConfig& stop,
                                   const std::vector<char>* allowed) {
  const std::size_t n = view.node_count();
  GeodesicSearchResult r;
  r.dist.assign(n, kUnreachable);
  r.parent.assign(n, kNoNode);
  r.settled.assign(n, 0);

  using Entry = std::pair<double, NodeId>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<Entry>> heap;

  if (seeds.empty()) throw DataError("multi_source_dijkstra: empty seed set");
  for (auto [s, init] : seeds) {
    if (s >= n) throw DataError("multi_source_dijkstra: seed id out of range");
    if (init < 0.0) throw DataError("multi_source_dijkstra: negative seed distance");
    if (allowed && !(*allowed)[s]) continue;
    if (init < r.dist[s]) {
      r.dist[s] = init;
      heap.emplace(init, s);
    }
  }

  // Settle order is nondecreasing in distance, so the k smallest settled
  // distances are exactly the first k settles; that prefix set changes only
  // while fewer than k nodes are settled.
  std::size_t stable_count = 0;

  while (!heap.empty()) {
    auto [d, u] = heap.top();
    heap.pop();
    if (r.settled[u] || d > r.dist[u]) continue;  // stale entry
    r.settled[u] = 1;
    r.settle_order.push_back(u);

    if (stop.window > 0 && stop.k > 0) {
      if (r.settle_order.size() > stop.k) {
        if (++stable_count >= stop.window) break;
      } else {
        stable_count = 0;
      }
    }

    for (NodeId v : view.neighbors(u)) {
      if (r.settled[v]) continue;
      if (allowed && !(*allowed)[v]) continue;
      const double nd = d + space.weight(u, v);
      if (nd < r.dist[v]) {
        r.dist[v] = nd;
        r.parent[v] = u;
        heap.emplace(nd, v);
      }
    }
  }
  return r;
}

}  // namespace detail

template <typename FT>
GeodesicSearchResult multi_source_dijkstra(std::span<const std::pair<NodeId, double>> seeds,
                                           const CsrGraph& view, const MetricSpace<FT>& space,
                                           const EarlyStopConfig& stop = {},
                                           const std::vector<char>* allowed = nullptr) {
  return detail::dijkstra_impl(seeds, view, space, stop, allowed);
}

GeodesicSearchResult multi_source_dijkstra(std::span<const std::pair<NodeId, double>> seeds,
                                           const CsrGraph& view, const EmbeddingMatrix& e,
                                           const MetricFactorTensor& f,
                                           const EarlyStopConfig& stop = {});

// Follows parents from `target` back to its seed and recomputes step weights.
template <typename FT>
GeodesicPath extract_path(NodeId target, const GeodesicSearchResult& r, const MetricSpace<FT>& space) {
  if (target >= r.settled.size() || !r.settled[target]) {
    throw DataError("extract_path: target " + std::to_string(target) + " was not settled");
  }
  GeodesicPath p;
  for (NodeId v = target; v != kNoNode; v = r.parent[v]) p.nodes.push_back(v);
  std::reverse(p.nodes.begin(), p.nodes.end());
  p.step_weights.reserve(p.nodes.size() - 1);
  for (std::size_t t = 0; t + 1 < p.nodes.size(); ++t) {
    const double w = space.weight(p.nodes[t], p.nodes[t + 1]);
    p.step_weights.push_back(w);
    p.total += w;
  }
  return p;
}

GeodesicPath extract_path(NodeId target, const GeodesicSearchResult& r, const EmbeddingMatrix& e,
                          const MetricFactorTensor& f);

// Plain single-source Dijkstra with no early stopping; the reference for all
// engine tests. `init` is added to the source distance.
std::vector<double> exact_geodesic_oracle(NodeId source, const CsrGraph& view,
                                          const EmbeddingMatrix& e, const MetricFactorTensor& f,
                                          double init = 0.0);

}  // namespace gss
