#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "gss/eval.hpp"
#include "gss/pipeline.hpp"

using namespace gss;

namespace {

Corpus chain_corpus() {
  // 0-1-2-3 with unit-spaced embeddings, L = 0, eps = 1: unit edge weights.
  Corpus c;
  c.graph = make_corpus_graph(4, {{0, 1}, {1, 2}, {2, 3}});
  c.features.dim = 2;
  c.features.data.assign(8, 0.0f);
  EmbeddingMatrix e;
  e.dim = 2;
  e.data = {1.0f, 0.0f, 1.0f, 0.5f, 1.0f, 1.0f, 1.0f, 1.5f};
  c.embeddings = e;
  MetricFactorTensor f;
  f.dim = 2;
  f.rank = 1;
  f.epsilon = 1.0;
  f.data.assign(4 * 2, 0.0f);
  c.factors = f;
  return c;
}

}  // namespace

TEST_CASE("select_seeds: the query node is its own best seed with zero offset") {
  Corpus c = chain_corpus();
  auto seeds = select_seeds(Query::by_node(2, 1), *c.embeddings, *c.factors, 1);
  REQUIRE(seeds.size() == 1);
  CHECK(seeds[0].first == 2);
  CHECK(seeds[0].second == 0.0);
}

TEST_CASE("seed count rule matches ceil(sqrt(N)) at the published corpus size") {
  CHECK(static_cast<std::size_t>(std::ceil(std::sqrt(169343.0))) == 412);
}

TEST_CASE("select_seeds equals a full similarity argsort on a random fixture") {
  Rng rng(41);
  const std::size_t n = 100, d = 6;
  EmbeddingMatrix e;
  e.dim = d;
  e.data.resize(n * d);
  for (auto& x : e.data) x = static_cast<float>(rng.normal());
  MetricFactorTensor f;
  f.dim = d;
  f.rank = 2;
  f.epsilon = 0.01;
  f.data.resize(n * d * 2);
  for (auto& x : f.data) x = static_cast<float>(0.3 * rng.normal());

  std::vector<double> qv(d);
  for (auto& x : qv) x = rng.normal();
  Query q = Query::by_embedding(qv, 5);

  const std::size_t S = 10;
  auto seeds = select_seeds(q, e, f, S);
  REQUIRE(seeds.size() == S);

  // oracle: full sort by (cosine desc, id asc)
  std::vector<std::pair<double, NodeId>> all(n);
  for (NodeId i = 0; i < n; ++i) all[i] = {cosine(std::span<const double>(qv), e.row(i)), i};
  std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  for (std::size_t t = 0; t < S; ++t) {
    CHECK(seeds[t].first == all[t].second);
    CHECK(seeds[t].second ==
          doctest::Approx(local_distance(seeds[t].first, std::span<const double>(qv), f, e)));
  }
  CHECK_THROWS_AS(select_seeds(q, e, f, n + 1), DataError);
}

TEST_CASE("mmr: lambda = 1 reproduces distance order") {
  Rng rng(43);
  EmbeddingMatrix e;
  e.dim = 3;
  e.data.resize(30);
  for (auto& x : e.data) x = static_cast<float>(rng.normal());
  std::vector<std::pair<NodeId, double>> cands;
  for (NodeId i = 0; i < 10; ++i) cands.emplace_back(i, -rng.uniform());  // relevance = -dist
  auto sel = mmr_rerank(cands, e, 1.0, cands.size());
  std::vector<std::pair<double, NodeId>> by_rel;
  for (auto [id, rel] : cands) by_rel.emplace_back(-rel, id);
  std::sort(by_rel.begin(), by_rel.end());
  for (std::size_t t = 0; t < sel.size(); ++t) CHECK(sel[t].first == by_rel[t].second);
}

TEST_CASE("mmr: duplicate embeddings are deferred under diversity pressure") {
  EmbeddingMatrix e;
  e.dim = 2;
  // nodes 0 and 1 identical; node 2 orthogonal
  e.data = {1.0f, 0.0f, 1.0f, 0.0f, 0.0f, 1.0f};
  std::vector<std::pair<NodeId, double>> cands{{0, -0.1}, {1, -0.1}, {2, -0.3}};
  auto sel = mmr_rerank(cands, e, 0.5, 3);
  REQUIRE(sel.size() == 3);
  CHECK(sel[0].first == 0);  // pure relevance first, tie by id
  CHECK(sel[1].first == 2);  // duplicate penalized by similarity 1 to the first pick
  CHECK(sel[2].first == 1);
}

TEST_CASE("mmr matches an independently coded greedy oracle") {
  Rng rng(47);
  const std::size_t n = 20, d = 4;
  EmbeddingMatrix e;
  e.dim = d;
  e.data.resize(n * d);
  for (auto& x : e.data) x = static_cast<float>(rng.normal());
  std::vector<std::pair<NodeId, double>> cands;
  for (NodeId i = 0; i < n; ++i) cands.emplace_back(i, -rng.uniform(0.0, 3.0));
  const double lambda = 0.7;
  auto sel = mmr_rerank(cands, e, lambda, 5);

  // oracle: direct greedy recomputation
  std::vector<NodeId> chosen;
  std::vector<char> used(n, 0);
  for (int round = 0; round < 5; ++round) {
    double best_score = -1e300;
    std::size_t best = n;
    for (std::size_t ci = 0; ci < n; ++ci) {
      if (used[ci]) continue;
      double pen = 0.0;
      for (NodeId s : chosen) {
        pen = std::max(pen, cosine(e.row(cands[ci].first), e.row(s)));
      }
      if (chosen.empty()) pen = 0.0;
      const double score = lambda * cands[ci].second - (1.0 - lambda) * pen;
      if (best == n || score > best_score ||
          (score == best_score && cands[ci].first < cands[best].first)) {
        best = ci;
        best_score = score;
      }
    }
    used[best] = 1;
    chosen.push_back(cands[best].first);
  }
  REQUIRE(sel.size() == 5);
  for (std::size_t t = 0; t < 5; ++t) CHECK(sel[t].first == chosen[t]);
}

TEST_CASE("path coherence: identity, orthogonal step, and table-style chain") {
  EmbeddingMatrix e;
  e.dim = 2;
  e.data = {1.0f, 0.0f, 1.0f, 0.0f, 0.0f, 1.0f};
  GeodesicPath same;
  same.nodes = {0, 1};
  same.step_weights = {0.0};
  CHECK(path_coherence(same, e) == doctest::Approx(1.0));

  GeodesicPath ortho;
  ortho.nodes = {0, 2};
  ortho.step_weights = {1.0};
  CHECK(path_coherence(ortho, e) == doctest::Approx(0.0));

  GeodesicPath single;
  single.nodes = {1};
  CHECK(path_coherence(single, e) == 1.0);

  // five-hop chain with step similarities (0.82, 0.76, 0.71, 0.68): min = 0.68
  const std::vector<double> sims{0.82, 0.76, 0.71, 0.68};
  EmbeddingMatrix chain;
  chain.dim = 2;
  double angle = 0.0;
  chain.data.push_back(1.0f);
  chain.data.push_back(0.0f);
  for (double s : sims) {
    angle += std::acos(s);
    chain.data.push_back(static_cast<float>(std::cos(angle)));
    chain.data.push_back(static_cast<float>(std::sin(angle)));
  }
  GeodesicPath p;
  p.nodes = {0, 1, 2, 3, 4};
  p.step_weights.assign(4, 0.1);
  CHECK(path_coherence(p, chain) == doctest::Approx(0.68).epsilon(1e-6));

  EmbeddingMatrix zero;
  zero.dim = 2;
  zero.data = {0.0f, 0.0f, 1.0f, 0.0f};
  GeodesicPath zp;
  zp.nodes = {0, 1};
  zp.step_weights = {1.0};
  CHECK_THROWS_AS(path_coherence(zp, zero), NumericError);
}

TEST_CASE("chain search returns the geodesic nearest neighbor") {
  Corpus c = chain_corpus();
  PipelineConfig cfg;
  cfg.mmr_lambda = 1.0;
  cfg.coherence_threshold = -1.0;
  Query q = Query::by_node(0, 1);
  auto r = search(q, c, cfg);
  REQUIRE(r.hits.size() == 1);
  CHECK(r.hits[0].node == 1);
  CHECK(r.hits[0].distance == doctest::Approx(0.5));
}

TEST_CASE("theta = 1 keeps only coherence-1 hits") {
  // strictly decreasing similarity along the chain: any multi-hop path has
  // coherence < 1, single-hop steps too; only exact duplicates survive.
  Corpus c = chain_corpus();
  PipelineConfig cfg;
  cfg.coherence_threshold = 1.0;
  auto r = search(Query::by_node(0, 3), c, cfg);
  for (const auto& h : r.hits) CHECK(h.coherence >= 1.0);
  CHECK(r.diagnostics.filtered > 0);
}

TEST_CASE("filter soundness: hits pass the threshold, filtered candidates fail it") {
  Corpus c = chain_corpus();
  PipelineConfig cfg;
  cfg.coherence_threshold = 0.9;
  auto r = search(Query::by_node(0, 3), c, cfg);
  for (const auto& h : r.hits) CHECK(h.coherence >= 0.9);
  // every candidate = hit or filtered
  CHECK(r.hits.size() + r.diagnostics.filtered == r.diagnostics.candidate_count);

  PipelineConfig open = cfg;
  open.coherence_threshold = -1.0;
  auto all = search(Query::by_node(0, 3), c, open);
  CHECK(all.diagnostics.filtered == 0);
}

TEST_CASE("candidate budget is min(2k, settled minus query)") {
  Corpus c = chain_corpus();
  PipelineConfig cfg;
  cfg.coherence_threshold = -1.0;
  auto r = search(Query::by_node(0, 1), c, cfg);
  CHECK(r.diagnostics.candidate_count == std::min<std::size_t>(2, r.diagnostics.settled - 1));
  auto r2 = search(Query::by_node(0, 10), c, cfg);
  CHECK(r2.diagnostics.candidate_count == 3);  // 4 settled minus the query
}

TEST_CASE("search is deterministic end to end") {
  auto fx = make_barbell_fixture({});
  PipelineConfig cfg;
  Query q = Query::by_node(fx.task.query, 5);
  auto a = search(q, fx.corpus, cfg);
  auto b = search(q, fx.corpus, cfg);
  REQUIRE(a.hits.size() == b.hits.size());
  for (std::size_t i = 0; i < a.hits.size(); ++i) {
    CHECK(a.hits[i].node == b.hits[i].node);
    CHECK(a.hits[i].distance == b.hits[i].distance);
    CHECK(a.hits[i].mmr_score == b.hits[i].mmr_score);
    CHECK(a.hits[i].coherence == b.hits[i].coherence);
    CHECK(a.hits[i].path.nodes == b.hits[i].path.nodes);
  }
  CHECK(a.diagnostics.settled == b.diagnostics.settled);
  CHECK(a.diagnostics.seeds == b.diagnostics.seeds);
}

TEST_CASE("barbell: geodesic pipeline surfaces the bridge, cosine prefers lookalikes") {
  auto fx = make_barbell_fixture({});
  PipelineConfig cfg;
  auto r = search(Query::by_node(fx.task.query, 1), fx.corpus, cfg);
  REQUIRE(r.hits.size() == 1);
  CHECK(r.hits[0].node == fx.task.bridges.front());
  CHECK(r.hits[0].coherence >= cfg.coherence_threshold);

  auto cos_rank = baseline_cosine_ranking(Query::by_node(fx.task.query, 3),
                                          *fx.corpus.embeddings, 3);
  CHECK(cos_rank[0] == fx.task.query);  // self first
  const NodeId top_other = cos_rank[1];
  CHECK(std::find(fx.task.distractors.begin(), fx.task.distractors.end(), top_other) !=
        fx.task.distractors.end());
}

TEST_CASE("embedding queries accept only finite corpus-dim vectors") {
  Corpus c = chain_corpus();
  PipelineConfig cfg;
  CHECK_THROWS_AS(search(Query::by_embedding({1.0, 2.0, 3.0}, 1), c, cfg), DataError);
  std::vector<double> bad{1.0, std::numeric_limits<double>::infinity()};
  CHECK_THROWS_AS(search(Query::by_embedding(bad, 1), c, cfg), DataError);
  auto r = search(Query::by_embedding({1.0, 0.1}, 2), c, cfg);
  CHECK(!r.hits.empty());
}
