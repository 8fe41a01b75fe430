#include "gss/pipeline.hpp"

#include <algorithm>
#include <cmath>

namespace gss {

Query Query::by_node(NodeId id, std::size_t k) {
  Query q;
  q.kind = Kind::Node;
  q.node = id;
  q.k = k;
  return q;
}

Query Query::by_embedding(std::vector<double> v, std::size_t k) {
  Query q;
  q.kind = Kind::Embedding;
  q.embedding = std::move(v);
  q.k = k;
  return q;
}

std::vector<double> query_embedding(const Query& q, const EmbeddingMatrix& e) {
  if (q.kind == Query::Kind::Node) {
    if (q.node >= e.node_count()) {
      throw DataError("query node " + std::to_string(q.node) + " out of range");
    }
    auto row = e.row(q.node);
    return {row.begin(), row.end()};
  }
  if (q.embedding.size() != e.dim) {
    throw DataError("query embedding dim " + std::to_string(q.embedding.size()) +
                    " != corpus dim " + std::to_string(e.dim));
  }
  for (double x : q.embedding) {
    if (!std::isfinite(x)) throw DataError("query embedding has non-finite entries");
  }
  return q.embedding;
}

std::vector<std::pair<NodeId, double>> select_seeds(const Query& q, const EmbeddingMatrix& e,
                                                    const MetricFactorTensor& f, std::size_t S) {
  const std::size_t n = e.node_count();
  if (n == 0) throw DataError("select_seeds: empty corpus");
  if (S < 1 || S > n) throw DataError("select_seeds: S must be in [1, N]");

  const std::vector<double> qv = query_embedding(q, e);
  std::vector<std::pair<double, NodeId>> scored(n);
  for (NodeId i = 0; i < n; ++i) {
    scored[i] = {cosine(std::span<const double>(qv), e.row(i)), i};
  }
  // Top-S by (similarity desc, id asc).
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(S), scored.end(),
                    [](const auto& a, const auto& b) {
                      if (a.first != b.first) return a.first > b.first;
                      return a.second < b.second;
                    });

  std::vector<std::pair<NodeId, double>> seeds;
  seeds.reserve(S);
  for (std::size_t t = 0; t < S; ++t) {
    const NodeId s = scored[t].second;
    double init;
    if (q.kind == Query::Kind::Node && s == q.node) {
      init = 0.0;
    } else {
      init = local_distance(s, std::span<const double>(qv), f, e);
    }
    seeds.emplace_back(s, init);
  }
  return seeds;
}

std::vector<std::pair<NodeId, double>> mmr_rerank(
    std::span<const std::pair<NodeId, double>> candidates, const EmbeddingMatrix& e,
    double lambda, std::size_t k) {
  if (lambda < 0.0 || lambda > 1.0) throw DataError("mmr_rerank: lambda must be in [0,1]");
  const std::size_t take = std::min(k, candidates.size());

  std::vector<std::pair<NodeId, double>> selected;
  selected.reserve(take);
  std::vector<char> used(candidates.size(), 0);
  // max over already-selected items of cosine similarity, per candidate
  std::vector<double> max_sim(candidates.size(), 0.0);

  for (std::size_t round = 0; round < take; ++round) {
    std::size_t best = candidates.size();
    double best_score = 0.0;
    for (std::size_t c = 0; c < candidates.size(); ++c) {
      if (used[c]) continue;
      const double penalty = selected.empty() ? 0.0 : max_sim[c];
      const double score = lambda * candidates[c].second - (1.0 - lambda) * penalty;
      if (best == candidates.size() || score > best_score ||
          (score == best_score && candidates[c].first < candidates[best].first)) {
        best = c;
        best_score = score;
      }
    }
    used[best] = 1;
    selected.emplace_back(candidates[best].first, best_score);
    for (std::size_t c = 0; c < candidates.size(); ++c) {
      if (used[c]) continue;
      const double sim = cosine(e.row(candidates[c].first), e.row(candidates[best].first));
      max_sim[c] = std::max(max_sim[c], sim);
    }
  }
  return selected;
}

std::vector<double> path_step_similarities(const GeodesicPath& p, const EmbeddingMatrix& e) {
  std::vector<double> sims;
  sims.reserve(p.step_weights.size());
  for (std::size_t t = 0; t + 1 < p.nodes.size(); ++t) {
    sims.push_back(cosine(e.row(p.nodes[t]), e.row(p.nodes[t + 1]), /*strict=*/true));
  }
  return sims;
}

double path_coherence(const GeodesicPath& p, const EmbeddingMatrix& e) {
  if (p.nodes.empty()) throw DataError("path_coherence: empty path");
  const auto sims = path_step_similarities(p, e);
  double m = 1.0;  // min over an empty step set
  for (double s : sims) m = std::min(m, s);
  return m;
}

RetrievalResult search(const Query& q, const Corpus& corpus, const PipelineConfig& cfg) {
  return search_restricted(q, corpus, cfg, nullptr);
}

RetrievalResult search_restricted(const Query& q, const Corpus& corpus, const PipelineConfig& cfg,
                                  const std::vector<char>* allowed) {
  const std::size_t n = corpus.node_count();
  if (n == 0) throw DataError("search: empty corpus");
  const EmbeddingMatrix& emb = corpus.require_embeddings();
  const MetricFactorTensor& fac = corpus.require_factors();
  if (q.k == 0) throw DataError("search: k must be >= 1");

  const std::size_t S =
      cfg.seed_count > 0 ? std::min(cfg.seed_count, n)
                         : static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(n))));

  auto seeds = select_seeds(q, emb, fac, S);
  if (allowed) {
    std::erase_if(seeds, [&](const auto& s) { return !(*allowed)[s.first]; });
    if (seeds.empty()) {
      // No global seed survived the restriction; fall back to the most
      // similar allowed node so the search has somewhere to start.
      const std::vector<double> qv = query_embedding(q, emb);
      NodeId best = kNoNode;
      double best_sim = 0.0;
      for (NodeId i = 0; i < n; ++i) {
        if (!(*allowed)[i]) continue;
        const double sim = cosine(std::span<const double>(qv), emb.row(i));
        if (best == kNoNode || sim > best_sim) {
          best = i;
          best_sim = sim;
        }
      }
      if (best == kNoNode) throw DataError("search: allowed node set is empty");
      const double init = (q.kind == Query::Kind::Node && best == q.node)
                              ? 0.0
                              : local_distance(best, std::span<const double>(query_embedding(q, emb)), fac, emb);
      seeds.emplace_back(best, init);
    }
  }

  EarlyStopConfig stop;
  if (cfg.early_stop_window != 0) {
    stop.k = q.k;
    stop.window = cfg.early_stop_window > 0 ? static_cast<std::size_t>(cfg.early_stop_window)
                                            : 8 * q.k;
  }

  const CsrGraph& view = cfg.use_symmetric_view ? corpus.graph.symmetric_view : corpus.graph.out_edges;
  const auto space = metric_space(emb, fac);
  const auto res = multi_source_dijkstra(std::span<const std::pair<NodeId, double>>(seeds), view,
                                         space, stop, allowed);

  // Top candidates by distance = settle-order prefix, minus the query node.
  const std::size_t budget = cfg.candidate_multiplier * q.k;
  std::vector<std::pair<NodeId, double>> candidates;  // (id, relevance = -distance)
  candidates.reserve(budget);
  for (NodeId u : res.settle_order) {
    if (candidates.size() >= budget) break;
    if (cfg.exclude_query_node && q.kind == Query::Kind::Node && u == q.node) continue;
    candidates.emplace_back(u, -res.dist[u]);
  }

  const auto ordered = mmr_rerank(candidates, emb, cfg.mmr_lambda, candidates.size());

  RetrievalResult out;
  out.diagnostics.settled = res.settle_order.size();
  out.diagnostics.candidate_count = candidates.size();
  for (const auto& s : seeds) out.diagnostics.seeds.push_back(s.first);

  for (const auto& [id, score] : ordered) {
    GeodesicPath path = extract_path(id, res, space);
    const auto sims = path_step_similarities(path, emb);
    double coh = 1.0;
    for (double s : sims) coh = std::min(coh, s);
    if (coh < cfg.coherence_threshold) {
      out.diagnostics.filtered++;
      continue;
    }
    if (out.hits.size() < q.k) {
      RetrievalHit hit;
      hit.node = id;
      hit.distance = res.dist[id];
      hit.mmr_score = score;
      hit.path = std::move(path);
      hit.step_similarities = sims;
      hit.coherence = coh;
      out.hits.push_back(std::move(hit));
    }
  }
  out.diagnostics.level_settled.push_back(res.settle_order.size());
  return out;
}

}  // namespace gss
