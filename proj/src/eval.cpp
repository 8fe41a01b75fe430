#include "gss/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <thread>

#include <json.hpp>

namespace gss {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Metrics

namespace {

std::size_t relevant_count(const std::map<NodeId, double>& judged) {
  std::size_t n = 0;
  for (const auto& [id, gain] : judged) {
    if (gain > 0.0) ++n;
  }
  return n;
}

}  // namespace

double recall_at_k(std::span<const NodeId> ranking, const std::map<NodeId, double>& judged,
                   std::size_t k) {
  const std::size_t total = relevant_count(judged);
  if (total == 0) return 0.0;
  std::size_t hit = 0;
  for (std::size_t t = 0; t < ranking.size() && t < k; ++t) {
    auto it = judged.find(ranking[t]);
    if (it != judged.end() && it->second > 0.0) ++hit;
  }
  return static_cast<double>(hit) / static_cast<double>(total);
}

double ndcg_at_k(std::span<const NodeId> ranking, const std::map<NodeId, double>& judged,
                 std::size_t k) {
  std::vector<double> gains;
  gains.reserve(judged.size());
  for (const auto& [id, gain] : judged) {
    if (gain > 0.0) gains.push_back(gain);
  }
  if (gains.empty()) return 0.0;
  std::sort(gains.rbegin(), gains.rend());

  double dcg = 0.0;
  for (std::size_t t = 0; t < ranking.size() && t < k; ++t) {
    auto it = judged.find(ranking[t]);
    if (it != judged.end() && it->second > 0.0) {
      dcg += it->second / std::log2(static_cast<double>(t) + 2.0);
    }
  }
  double idcg = 0.0;
  for (std::size_t t = 0; t < gains.size() && t < k; ++t) {
    idcg += gains[t] / std::log2(static_cast<double>(t) + 2.0);
  }
  return idcg > 0.0 ? dcg / idcg : 0.0;
}

double mrr(std::span<const std::vector<NodeId>> rankings,
           std::span<const std::map<NodeId, double>> judged) {
  if (rankings.size() != judged.size()) throw DataError("mrr: rankings/judgments size mismatch");
  if (rankings.empty()) return 0.0;
  double acc = 0.0;
  for (std::size_t qi = 0; qi < rankings.size(); ++qi) {
    for (std::size_t t = 0; t < rankings[qi].size(); ++t) {
      auto it = judged[qi].find(rankings[qi][t]);
      if (it != judged[qi].end() && it->second > 0.0) {
        acc += 1.0 / static_cast<double>(t + 1);
        break;
      }
    }
  }
  return acc / static_cast<double>(rankings.size());
}

double bridge_at_k(std::span<const NodeId> ranking, const BridgeTask& task, std::size_t k) {
  if (task.bridges.empty()) throw DataError("bridge_at_k: empty bridge set");
  if (k == 0) return 0.0;
  std::size_t hit = 0;
  for (std::size_t t = 0; t < ranking.size() && t < k; ++t) {
    if (std::find(task.bridges.begin(), task.bridges.end(), ranking[t]) != task.bridges.end()) {
      ++hit;
    }
  }
  return static_cast<double>(hit) / static_cast<double>(task.bridges.size());
}

// ---------------------------------------------------------------------------
// Baselines

std::vector<NodeId> baseline_cosine_ranking(const Query& q, const EmbeddingMatrix& e,
                                            std::size_t k) {
  const std::size_t n = e.node_count();
  const std::vector<double> qv = query_embedding(q, e);
  std::vector<std::pair<double, NodeId>> scored(n);
  for (NodeId i = 0; i < n; ++i) {
    scored[i] = {cosine(std::span<const double>(qv), e.row(i)), i};
  }
  std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  std::vector<NodeId> out;
  out.reserve(std::min(k, n));
  for (std::size_t t = 0; t < n && t < k; ++t) out.push_back(scored[t].second);
  return out;
}

Corpus with_zero_factors(const Corpus& c) {
  Corpus out = c;
  if (!out.factors) throw DataError("with_zero_factors: corpus has no factors");
  std::fill(out.factors->data.begin(), out.factors->data.end(), 0.0f);
  return out;
}

// ---------------------------------------------------------------------------
// Path enumeration

namespace {

void enumerate_paths(const CsrGraph& view, const MetricSpace<float>& space, NodeId dst,
                     std::size_t max_edges, std::vector<NodeId>& stack, std::vector<char>& on_path,
                     double partial, double& best, std::vector<NodeId>& best_path) {
  const NodeId u = stack.back();
  if (u == dst) {
    if (partial < best) {
      best = partial;
      best_path = stack;
    }
    return;
  }
  if (stack.size() > max_edges) return;  // stack holds edges+1 nodes
  for (NodeId v : view.neighbors(u)) {
    if (on_path[v]) continue;
    const double w = space.weight(u, v);
    if (partial + w >= best) continue;
    on_path[v] = 1;
    stack.push_back(v);
    enumerate_paths(view, space, dst, max_edges, stack, on_path, partial + w, best, best_path);
    stack.pop_back();
    on_path[v] = 0;
  }
}

}  // namespace

double min_path_sum_enumeration(const CsrGraph& view, const EmbeddingMatrix& e,
                                const MetricFactorTensor& f, NodeId src, NodeId dst,
                                std::size_t max_edges, std::vector<NodeId>* best_path_out) {
  const auto space = metric_space(e, f);
  std::vector<NodeId> stack{src};
  std::vector<char> on_path(view.node_count(), 0);
  on_path[src] = 1;
  double best = kUnreachable;
  std::vector<NodeId> best_path;
  enumerate_paths(view, space, dst, max_edges, stack, on_path, 0.0, best, best_path);
  if (best_path_out) *best_path_out = best_path;
  return best;
}

// ---------------------------------------------------------------------------
// Barbell fixture

namespace {

constexpr double kDeg = M_PI / 180.0;
constexpr std::size_t kBarbellDim = 8;
constexpr std::size_t kBarbellRank = 2;

}  // namespace

BarbellFixture make_barbell_fixture(const BarbellParams& p) {
  if (p.path_length < 1) {
    throw DataError("barbell: path length 0 merges the areas; the advantage probe is inapplicable");
  }
  if (p.cluster_size < 8) throw DataError("barbell: cluster_size must be >= 8");
  if (p.distractors < 1) throw DataError("barbell: need at least one distractor");
  const std::size_t A = p.cluster_size;
  const std::size_t D = p.distractors;
  const std::size_t m = p.path_length;
  const std::size_t n = 2 * A + D + m;
  const double step = p.separation_deg / static_cast<double>(m + 1);
  const double chain_sim = std::cos(step * kDeg);
  if (chain_sim <= 0.65) {
    throw DataError("barbell: consecutive chain similarity " + std::to_string(chain_sim) +
                    " <= 0.65; raise path_length or lower separation");
  }

  const NodeId q = 0;
  const NodeId hub = static_cast<NodeId>(A);
  const NodeId d0 = static_cast<NodeId>(2 * A);      // distractors d0 .. d0+D-1
  const NodeId v0 = static_cast<NodeId>(2 * A + D);  // chain v0 .. v0+m-1

  Rng rng(p.seed);
  std::vector<double> emb(n * kBarbellDim, 0.0);
  auto place = [&](NodeId id, double angle_deg, bool jitter) {
    emb[id * kBarbellDim + 0] = std::cos(angle_deg * kDeg);
    emb[id * kBarbellDim + 1] = std::sin(angle_deg * kDeg);
    if (jitter) {
      for (std::size_t c = 2; c < kBarbellDim; ++c) {
        emb[id * kBarbellDim + c] = p.noise * (2.0 * rng.uniform() - 1.0);
      }
    }
  };

  place(q, 0.0, false);
  // Source area fans away from the chain; member angles -10 .. -28 degrees.
  for (std::size_t i = 1; i < A; ++i) {
    const double t = static_cast<double>(i - 1) / static_cast<double>(std::max<std::size_t>(A - 2, 1));
    place(static_cast<NodeId>(i), -(10.0 + 18.0 * t), true);
  }
  place(hub, p.separation_deg, true);
  for (std::size_t i = 1; i < A; ++i) {
    const double t = static_cast<double>(i - 1) / static_cast<double>(std::max<std::size_t>(A - 2, 1));
    place(static_cast<NodeId>(A + i), p.separation_deg + 10.0 + 18.0 * t, true);
  }
  // Lookalikes: closer to the query (in cosine) than anything else, but with
  // no useful graph connection.
  for (std::size_t j = 0; j < D; ++j) {
    const double t = static_cast<double>(j) / static_cast<double>(std::max<std::size_t>(D - 1, 1));
    place(d0 + static_cast<NodeId>(j), -(6.5 + 3.0 * t), true);
  }
  for (std::size_t t = 0; t < m; ++t) {
    place(v0 + static_cast<NodeId>(t), step * static_cast<double>(t + 1), false);
  }

  // Factors: the chain (and the query along the chain direction) is cheap,
  // every other neighborhood is amplified by metric_gain in the plane.
  std::vector<double> fac(n * kBarbellDim * kBarbellRank, 0.0);
  auto slab = [&](NodeId id) { return fac.data() + id * kBarbellDim * kBarbellRank; };
  for (NodeId id = 0; id < n; ++id) {
    if (id == q || (id >= v0 && id < v0 + m)) continue;
    double* L = slab(id);
    L[0 * kBarbellRank + 0] = p.metric_gain;  // e0 column
    L[1 * kBarbellRank + 1] = p.metric_gain;  // e1 column
  }
  {
    // Query factors: expensive radially at the half-step angle (toward the
    // source area), invisible along the first chain chord.
    const double half = 0.5 * step * kDeg;
    double* L = slab(q);
    L[0 * kBarbellRank + 0] = p.metric_gain * std::cos(half);
    L[1 * kBarbellRank + 0] = p.metric_gain * std::sin(half);
    L[2 * kBarbellRank + 1] = p.metric_gain;
  }

  // Directed citations.
  std::set<std::pair<NodeId, NodeId>> edges;
  auto add = [&](NodeId a, NodeId b) {
    if (a != b) edges.insert({a, b});
  };
  // source area: chain of chords plus query attachments
  for (std::size_t i = 1; i + 1 < A; ++i) add(static_cast<NodeId>(i), static_cast<NodeId>(i + 1));
  for (std::size_t i = 1; i + 2 < A; ++i) add(static_cast<NodeId>(i), static_cast<NodeId>(i + 2));
  add(q, 1);
  add(q, 2);
  add(q, 3);
  add(4, q);
  add(5, q);
  // target area
  for (std::size_t i = 1; i + 1 < A; ++i) {
    add(static_cast<NodeId>(A + i), static_cast<NodeId>(A + i + 1));
  }
  for (std::size_t i = 1; i + 2 < A; ++i) {
    add(static_cast<NodeId>(A + i), static_cast<NodeId>(A + i + 2));
  }
  add(hub, static_cast<NodeId>(A + 1));
  add(hub, static_cast<NodeId>(A + 2));
  add(static_cast<NodeId>(A + 3), hub);
  // distractor clique tail, attached to the middle of the source area
  for (std::size_t j = 0; j + 1 < D; ++j) {
    add(d0 + static_cast<NodeId>(j), d0 + static_cast<NodeId>(j + 1));
  }
  add(d0, static_cast<NodeId>(A / 2));
  // bridge chain
  add(q, v0);
  for (std::size_t t = 0; t + 1 < m; ++t) add(v0 + static_cast<NodeId>(t), v0 + static_cast<NodeId>(t + 1));
  add(v0 + static_cast<NodeId>(m - 1), hub);

  BarbellFixture fx;
  fx.corpus.graph = make_corpus_graph(n, {edges.begin(), edges.end()});
  EmbeddingMatrix e;
  e.dim = kBarbellDim;
  e.data.assign(emb.begin(), emb.end());
  fx.corpus.embeddings = std::move(e);
  NodeFeatures feats;
  feats.dim = kBarbellDim;
  feats.data = fx.corpus.embeddings->data;
  fx.corpus.features = std::move(feats);
  MetricFactorTensor mf;
  mf.dim = kBarbellDim;
  mf.rank = kBarbellRank;
  mf.epsilon = p.epsilon;
  mf.data.assign(fac.begin(), fac.end());
  fx.corpus.factors = std::move(mf);
  validate_corpus(fx.corpus);

  fx.task.query = q;
  for (std::size_t i = 0; i < A; ++i) fx.task.source_area.push_back(static_cast<NodeId>(i));
  for (std::size_t i = 0; i < A; ++i) fx.task.target_area.push_back(static_cast<NodeId>(A + i));
  fx.task.bridges.push_back(v0);
  for (std::size_t j = 0; j < D; ++j) fx.task.distractors.push_back(d0 + static_cast<NodeId>(j));

  // Advantage probe: certify sum of chain steps < alpha * (1 - sim(q, hub))
  // by exhaustive enumeration, with alpha set from the fixture's own scales.
  const auto& E = *fx.corpus.embeddings;
  const auto& F = *fx.corpus.factors;
  fx.probe.source = q;
  fx.probe.target = hub;
  fx.probe.path_sum = min_path_sum_enumeration(fx.corpus.graph.symmetric_view, E, F, q, hub,
                                               std::max<std::size_t>(8, m + 1), &fx.probe.best_path);
  if (!std::isfinite(fx.probe.path_sum)) {
    throw DataError("barbell: no path from query to target hub; fixture disconnected");
  }
  fx.probe.dissimilarity = 1.0 - cosine(E.row(q), E.row(hub));

  double max_w = 0.0;
  for (NodeId u = 0; u < n; ++u) {
    for (NodeId v : fx.corpus.graph.symmetric_view.neighbors(u)) {
      max_w = std::max(max_w, edge_weight(u, v, E, F));
    }
  }
  double max_dissim = 0.0;
  for (NodeId a = 0; a < n; ++a) {
    for (NodeId b = static_cast<NodeId>(a + 1); b < n; ++b) {
      max_dissim = std::max(max_dissim, 1.0 - cosine(E.row(a), E.row(b)));
    }
  }
  fx.probe.alpha = max_w / max_dissim;
  const double rhs = fx.probe.alpha * fx.probe.dissimilarity;
  if (!(fx.probe.path_sum < rhs)) {
    throw DataError("barbell: advantage inequality violated: path sum " +
                    std::to_string(fx.probe.path_sum) + " >= alpha*(1-sim) = " +
                    std::to_string(rhs));
  }
  fx.probe.margin = rhs / fx.probe.path_sum;
  return fx;
}

// ---------------------------------------------------------------------------
// Training and scale fixtures

Corpus make_two_block_corpus(std::uint64_t seed, std::size_t n, std::size_t feature_dim,
                             std::size_t cross_edges) {
  if (n < 8 || n % 2 != 0) throw DataError("two_block corpus needs even n >= 8");
  Rng rng(seed);
  const std::size_t half = n / 2;

  NodeFeatures feats;
  feats.dim = feature_dim;
  feats.data.resize(n * feature_dim);
  for (std::size_t i = 0; i < n; ++i) {
    const bool block_b = i >= half;
    for (std::size_t c = 0; c < feature_dim; ++c) {
      const bool on = block_b ? (c >= feature_dim / 2) : (c < feature_dim / 2);
      feats.data[i * feature_dim + c] =
          static_cast<float>((on ? 1.0 : 0.0) + 0.3 * rng.normal());
    }
  }

  std::set<std::pair<NodeId, NodeId>> edges;
  auto add = [&](std::size_t a, std::size_t b) {
    if (a != b) edges.insert({static_cast<NodeId>(a), static_cast<NodeId>(b)});
  };
  for (std::size_t b = 0; b < 2; ++b) {
    const std::size_t lo = b * half;
    for (std::size_t i = 0; i < half; ++i) {
      add(lo + i, lo + (i + 1) % half);
      for (int c = 0; c < 2; ++c) add(lo + i, lo + rng.below(half));
    }
  }
  for (std::size_t c = 0; c < cross_edges; ++c) {
    add(rng.below(half), half + rng.below(half));
  }

  Corpus corpus;
  corpus.graph = make_corpus_graph(n, {edges.begin(), edges.end()});
  corpus.features = std::move(feats);
  validate_corpus(corpus);
  return corpus;
}

Corpus make_blob_corpus(const BlobParams& p) {
  if (p.blobs < 2 || p.n < 2 * p.blobs) throw DataError("blob corpus: need n >= 2*blobs >= 4");
  Rng rng(p.seed);
  const std::size_t per = p.n / p.blobs;
  const std::size_t n = per * p.blobs;  // drop the remainder for even blobs

  std::vector<double> centers(p.blobs * p.dim);
  for (std::size_t b = 0; b < p.blobs; ++b) {
    double norm = 0.0;
    for (std::size_t c = 0; c < p.dim; ++c) {
      centers[b * p.dim + c] = rng.normal();
      norm += centers[b * p.dim + c] * centers[b * p.dim + c];
    }
    norm = std::sqrt(norm);
    for (std::size_t c = 0; c < p.dim; ++c) centers[b * p.dim + c] /= norm;
  }

  EmbeddingMatrix emb;
  emb.dim = p.dim;
  emb.data.resize(n * p.dim);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t b = i / per;
    for (std::size_t c = 0; c < p.dim; ++c) {
      emb.data[i * p.dim + c] =
          static_cast<float>(centers[b * p.dim + c] + p.noise * rng.normal());
    }
  }

  MetricFactorTensor fac;
  fac.dim = p.dim;
  fac.rank = p.rank;
  fac.epsilon = p.epsilon;
  fac.data.resize(n * p.dim * p.rank);
  const double fscale = p.factor_scale / std::sqrt(static_cast<double>(p.dim));
  if (p.homogeneous_factors) {
    std::vector<float> shared(p.dim * p.rank);
    for (auto& x : shared) x = static_cast<float>(fscale * rng.normal());
    for (std::size_t i = 0; i < n; ++i) {
      std::copy(shared.begin(), shared.end(), fac.data.begin() + i * shared.size());
    }
  } else {
    for (auto& x : fac.data) x = static_cast<float>(fscale * rng.normal());
  }

  std::set<std::pair<NodeId, NodeId>> edges;
  auto add = [&](std::size_t a, std::size_t b) {
    if (a != b) edges.insert({static_cast<NodeId>(a), static_cast<NodeId>(b)});
  };
  for (std::size_t b = 0; b < p.blobs; ++b) {
    const std::size_t lo = b * per;
    for (std::size_t i = 0; i < per; ++i) {
      add(lo + i, lo + (i + 1) % per);
      for (std::size_t c = 0; c < p.intra_degree; ++c) add(lo + i, lo + rng.below(per));
    }
    const std::size_t nb = ((b + 1) % p.blobs) * per;
    for (std::size_t c = 0; c < p.inter_pairs; ++c) {
      add(lo + rng.below(per), nb + rng.below(per));
    }
  }

  Corpus corpus;
  corpus.graph = make_corpus_graph(n, {edges.begin(), edges.end()});
  NodeFeatures feats;
  feats.dim = p.dim;
  feats.data = emb.data;
  corpus.features = std::move(feats);
  corpus.embeddings = std::move(emb);
  corpus.factors = std::move(fac);
  validate_corpus(corpus);
  return corpus;
}

// ---------------------------------------------------------------------------
// Experiment driver

namespace {

struct QueryOutcome {
  std::vector<NodeId> ranking;
  double settled = 0.0;
  double latency_ms = 0.0;
  double coherence = 0.0;
  bool has_coherence = false;
};

std::vector<NodeId> strip_query_node(const std::vector<NodeId>& ranking, const Query& q) {
  if (q.kind != Query::Kind::Node) return ranking;
  std::vector<NodeId> out;
  out.reserve(ranking.size());
  for (NodeId id : ranking) {
    if (id != q.node) out.push_back(id);
  }
  return out;
}

template <typename Fn>
void parallel_for(std::size_t count, std::size_t threads, Fn&& fn) {
  if (threads <= 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::size_t per = (count + threads - 1) / threads;
  for (std::size_t t = 0; t < threads; ++t) {
    const std::size_t lo = t * per;
    const std::size_t hi = std::min(count, lo + per);
    if (lo >= hi) break;
    pool.emplace_back([lo, hi, &fn]() {
      for (std::size_t i = lo; i < hi; ++i) fn(i);
    });
  }
  for (auto& th : pool) th.join();
}

}  // namespace

std::vector<ExperimentRow> run_experiment(const Corpus& corpus,
                                          const std::vector<ExperimentQuery>& queries,
                                          const RelevanceJudgments& judgments,
                                          const ExperimentConfig& cfg) {
  if (queries.empty()) throw DataError("run_experiment: no queries");
  if (cfg.methods.empty()) throw DataError("run_experiment: no methods");
  if (cfg.seeds.empty()) throw DataError("run_experiment: no seeds");

  // metric name -> per-seed values, per method
  std::vector<ExperimentRow> rows;

  for (const auto& method : cfg.methods) {
    if (method != "cosine" && method != "geodesic-flat" && method != "geodesic-hier") {
      throw DataError("run_experiment: unknown method '" + method + "'");
    }
    std::map<std::string, std::vector<double>> per_seed;

    for (const std::uint64_t seed : cfg.seeds) {
      Hierarchy hier;
      if (method == "geodesic-hier") {
        HierarchyConfig hc = cfg.hierarchy;
        hc.kmeans_seed = seed;
        hier = build_hierarchy(corpus, hc);
      }

      std::vector<QueryOutcome> outcomes(queries.size());
      parallel_for(queries.size(), cfg.threads, [&](std::size_t qi) {
        const Query& q = queries[qi].query;
        QueryOutcome& oc = outcomes[qi];
        const auto t0 = std::chrono::steady_clock::now();
        if (method == "cosine") {
          auto full = baseline_cosine_ranking(q, corpus.require_embeddings(), q.k + 1);
          oc.ranking = strip_query_node(full, q);
          if (oc.ranking.size() > q.k) oc.ranking.resize(q.k);
        } else {
          RetrievalResult r = (method == "geodesic-flat")
                                  ? search(q, corpus, cfg.pipeline)
                                  : coarse_to_fine_search(q, hier, corpus, cfg.pipeline);
          double settled = 0.0;
          for (std::size_t s : r.diagnostics.level_settled) settled += static_cast<double>(s);
          oc.settled = settled;
          double coh = 0.0;
          for (const auto& h : r.hits) {
            oc.ranking.push_back(h.node);
            coh += h.coherence;
          }
          if (!r.hits.empty()) {
            oc.coherence = coh / static_cast<double>(r.hits.size());
            oc.has_coherence = true;
          }
        }
        const auto t1 = std::chrono::steady_clock::now();
        oc.latency_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
      });

      // Aggregate over queries.
      double recall_sum = 0.0, ndcg_sum = 0.0, settled_sum = 0.0, lat_sum = 0.0;
      double coh_sum = 0.0;
      std::size_t coh_n = 0;
      std::vector<std::vector<NodeId>> rankings;
      std::vector<std::map<NodeId, double>> judged;
      for (std::size_t qi = 0; qi < queries.size(); ++qi) {
        const auto it = judgments.gains.find(queries[qi].id);
        const std::map<NodeId, double> empty;
        const auto& g = it != judgments.gains.end() ? it->second : empty;
        recall_sum += recall_at_k(outcomes[qi].ranking, g, queries[qi].query.k);
        ndcg_sum += ndcg_at_k(outcomes[qi].ranking, g, queries[qi].query.k);
        settled_sum += outcomes[qi].settled;
        lat_sum += outcomes[qi].latency_ms;
        if (outcomes[qi].has_coherence) {
          coh_sum += outcomes[qi].coherence;
          ++coh_n;
        }
        rankings.push_back(outcomes[qi].ranking);
        judged.push_back(g);
      }
      const auto nq = static_cast<double>(queries.size());
      per_seed["recall_at_k"].push_back(recall_sum / nq);
      per_seed["ndcg_at_k"].push_back(ndcg_sum / nq);
      per_seed["mrr"].push_back(mrr(rankings, judged));
      per_seed["latency_ms"].push_back(lat_sum / nq);
      if (method != "cosine") {
        per_seed["settled_nodes"].push_back(settled_sum / nq);
        if (coh_n > 0) per_seed["coherence"].push_back(coh_sum / static_cast<double>(coh_n));
      }
    }

    for (const auto& [metric, values] : per_seed) {
      ExperimentRow row;
      row.method = method;
      row.metric = metric;
      row.seeds = values.size();
      double mean = 0.0;
      for (double v : values) mean += v;
      mean /= static_cast<double>(values.size());
      double var = 0.0;
      for (double v : values) var += (v - mean) * (v - mean);
      row.mean = mean;
      row.stddev = values.size() > 1 ? std::sqrt(var / static_cast<double>(values.size() - 1)) : 0.0;
      rows.push_back(row);
    }
  }
  return rows;
}

std::string experiment_csv(std::span<const ExperimentRow> rows) {
  std::string out = "method,metric,mean,std,seeds\n";
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%s,%s,%.6f,%.6f,%zu\n", r.method.c_str(), r.metric.c_str(),
                  r.mean, r.stddev, r.seeds);
    out += buf;
  }
  return out;
}

std::vector<ExperimentQuery> load_queries_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("missing file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw DataError(path + ": invalid JSON: " + e.what());
  }
  std::vector<ExperimentQuery> out;
  for (const auto& item : j) {
    ExperimentQuery q;
    q.id = item.at("id").get<std::string>();
    const auto k = item.value("k", 10);
    if (item.contains("node")) {
      q.query = Query::by_node(item.at("node").get<NodeId>(), k);
    } else if (item.contains("embedding")) {
      q.query = Query::by_embedding(item.at("embedding").get<std::vector<double>>(), k);
    } else {
      throw DataError(path + ": query '" + q.id + "' has neither node nor embedding");
    }
    out.push_back(std::move(q));
  }
  return out;
}

RelevanceJudgments load_judgments_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("missing file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw DataError(path + ": invalid JSON: " + e.what());
  }
  RelevanceJudgments out;
  for (const auto& [qid, gains] : j.items()) {
    for (const auto& [node, gain] : gains.items()) {
      const double g = gain.get<double>();
      if (g < 0.0 || !std::isfinite(g)) {
        throw DataError(path + ": gain for query " + qid + " node " + node + " must be finite, >= 0");
      }
      out.gains[qid][static_cast<NodeId>(std::stoul(node))] = g;
    }
  }
  return out;
}

void save_bridge_task_json(const BridgeTask& task, const std::string& path) {
  json j;
  j["query"] = task.query;
  j["source_area"] = task.source_area;
  j["target_area"] = task.target_area;
  j["bridges"] = task.bridges;
  j["distractors"] = task.distractors;
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot open for write: " + path);
  out << j.dump(2) << "\n";
}

void save_probe_json(const AdvantageProbe& probe, const std::string& path) {
  json j;
  j["source"] = probe.source;
  j["target"] = probe.target;
  j["path_sum"] = probe.path_sum;
  j["dissimilarity"] = probe.dissimilarity;
  j["alpha"] = probe.alpha;
  j["margin"] = probe.margin;
  j["best_path"] = probe.best_path;
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot open for write: " + path);
  out << j.dump(2) << "\n";
}

}  // namespace gss
