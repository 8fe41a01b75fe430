#include "gss/geodesic.hpp"

namespace gss {

MetricSpace<float> metric_space(const EmbeddingMatrix& e, const MetricFactorTensor& f) {
  if (e.dim != f.dim) throw DataError("metric_space: embedding/factor dim mismatch");
  if (e.node_count() != f.node_count()) throw DataError("metric_space: node count mismatch");
  MetricSpace<float> s;
  s.embeddings = e.data.data();
  s.factors = f.data.data();
  s.n = e.node_count();
  s.dim = e.dim;
  s.rank = f.rank;
  s.epsilon = f.epsilon;
  return s;
}

double edge_weight(NodeId u, NodeId v, const EmbeddingMatrix& e, const MetricFactorTensor& f) {
  return metric_space(e, f).weight(u, v);
}

GeodesicSearchResult multi_source_dijkstra(std::span<const std::pair<NodeId, double>> seeds,
                                           const CsrGraph& view, const EmbeddingMatrix& e,
                                           const MetricFactorTensor& f,
                                           const EarlyStopConfig& stop) {
  return multi_source_dijkstra(seeds, view, metric_space(e, f), stop, nullptr);
}

GeodesicPath extract_path(NodeId target, const GeodesicSearchResult& r, const EmbeddingMatrix& e,
                          const MetricFactorTensor& f) {
  return extract_path(target, r, metric_space(e, f));
}

std::vector<double> exact_geodesic_oracle(NodeId source, const CsrGraph& view,
                                          const EmbeddingMatrix& e, const MetricFactorTensor& f,
                                          double init) {
  const std::pair<NodeId, double> seed{source, init};
  auto r = multi_source_dijkstra({&seed, 1}, view, metric_space(e, f), EarlyStopConfig{}, nullptr);
  return std::move(r.dist);
}

}  // namespace gss
