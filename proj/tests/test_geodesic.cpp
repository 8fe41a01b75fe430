#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "gss/geodesic.hpp"

using namespace gss;

namespace {

struct Fixture {
  CorpusGraph graph;
  EmbeddingMatrix emb;
  MetricFactorTensor fac;
};

Fixture random_fixture(std::uint64_t seed, std::size_t n, std::size_t d = 4, std::size_t r = 2,
                       double factor_scale = 0.5) {
  Rng rng(seed);
  std::vector<std::pair<NodeId, NodeId>> edges;
  // ring for connectivity plus random chords
  for (NodeId i = 0; i < n; ++i) edges.emplace_back(i, static_cast<NodeId>((i + 1) % n));
  for (std::size_t e = 0; e < 2 * n; ++e) {
    const auto i = static_cast<NodeId>(rng.below(n));
    const auto j = static_cast<NodeId>(rng.below(n));
    if (i != j) edges.emplace_back(i, j);
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());

  Fixture f;
  f.graph = make_corpus_graph(n, edges);
  f.emb.dim = d;
  f.emb.data.resize(n * d);
  for (auto& x : f.emb.data) x = static_cast<float>(rng.normal());
  f.fac.dim = d;
  f.fac.rank = r;
  f.fac.epsilon = 0.01;
  f.fac.data.resize(n * d * r);
  for (auto& x : f.fac.data) x = static_cast<float>(factor_scale * rng.normal());
  return f;
}

// Chain 0-1-2 with unit-spaced embeddings and L=0, eps=1: unit edge weights.
Fixture chain_fixture() {
  Fixture f;
  f.graph = make_corpus_graph(3, {{0, 1}, {1, 2}});
  f.emb.dim = 1;
  f.emb.data = {0.0f, 1.0f, 2.0f};
  f.fac.dim = 1;
  f.fac.rank = 1;
  f.fac.epsilon = 1.0;
  f.fac.data = {0.0f, 0.0f, 0.0f};
  return f;
}

}  // namespace

TEST_CASE("edge weight uses the tail node's metric") {
  Fixture f;
  f.graph = make_corpus_graph(2, {{0, 1}});
  f.emb.dim = 2;
  f.emb.data = {0.0f, 0.0f, 1.0f, 0.0f};
  f.fac.dim = 2;
  f.fac.rank = 1;
  f.fac.epsilon = 0.01;
  f.fac.data = {3.0f, 0.0f, 0.0f, 0.0f};  // L_0 amplifies e0, L_1 = 0

  SUBCASE("identical embeddings give zero weight") {
    EmbeddingMatrix same = f.emb;
    same.data = {1.0f, 2.0f, 1.0f, 2.0f};
    CHECK(edge_weight(0, 1, same, f.fac) == 0.0);
  }
  SUBCASE("equal factors and symmetric delta give symmetric weights") {
    MetricFactorTensor eq = f.fac;
    eq.data = {1.0f, 0.5f, 1.0f, 0.5f};
    CHECK(edge_weight(0, 1, f.emb, eq) == doctest::Approx(edge_weight(1, 0, f.emb, eq)));
  }
  SUBCASE("distinct factors break symmetry, dense oracle confirms both") {
    const double w01 = edge_weight(0, 1, f.emb, f.fac);
    const double w10 = edge_weight(1, 0, f.emb, f.fac);
    CHECK(w01 == doctest::Approx(std::sqrt(9.0 + 0.01)));
    CHECK(w10 == doctest::Approx(std::sqrt(0.01)));
    CHECK(w01 != w10);
    for (auto [u, v, expect] : {std::tuple<NodeId, NodeId, double>{0, 1, w01},
                                std::tuple<NodeId, NodeId, double>{1, 0, w10}}) {
      const auto g = dense_metric(u, f.fac);
      std::vector<double> delta(2);
      for (std::size_t c = 0; c < 2; ++c) {
        delta[c] = static_cast<double>(f.emb.row(u)[c]) - static_cast<double>(f.emb.row(v)[c]);
      }
      CHECK(dense_quadratic_distance(g, 2, delta) == doctest::Approx(expect).epsilon(1e-12));
    }
  }
}

TEST_CASE("single seed at the target gives distance zero") {
  auto f = chain_fixture();
  const std::pair<NodeId, double> seed{2, 0.0};
  auto r = multi_source_dijkstra(std::span(&seed, 1), f.graph.symmetric_view, f.emb, f.fac);
  CHECK(r.dist[2] == 0.0);
  CHECK(r.parent[2] == kNoNode);
}

TEST_CASE("unit chain distances and parents") {
  auto f = chain_fixture();
  const std::pair<NodeId, double> seed{0, 0.0};
  auto r = multi_source_dijkstra(std::span(&seed, 1), f.graph.symmetric_view, f.emb, f.fac);
  CHECK(r.dist[0] == doctest::Approx(0.0));
  CHECK(r.dist[1] == doctest::Approx(1.0));
  CHECK(r.dist[2] == doctest::Approx(2.0));
  CHECK(r.parent[0] == kNoNode);
  CHECK(r.parent[1] == 0);
  CHECK(r.parent[2] == 1);

  auto p = extract_path(2, r, f.emb, f.fac);
  CHECK(p.nodes == std::vector<NodeId>{0, 1, 2});
  CHECK(p.total == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("multi-source equals the per-seed oracle minimum, exactly") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    auto f = random_fixture(seed, 200);
    Rng rng(seed * 31 + 1);
    std::vector<std::pair<NodeId, double>> seeds;
    for (int s = 0; s < 14; ++s) {
      seeds.emplace_back(static_cast<NodeId>(rng.below(200)), rng.uniform() * 2.0);
    }
    auto multi = multi_source_dijkstra(std::span<const std::pair<NodeId, double>>(seeds),
                                       f.graph.symmetric_view, f.emb, f.fac);
    std::vector<double> expect(200, kUnreachable);
    for (auto [s, init] : seeds) {
      auto one = exact_geodesic_oracle(s, f.graph.symmetric_view, f.emb, f.fac, init);
      for (std::size_t v = 0; v < 200; ++v) expect[v] = std::min(expect[v], one[v]);
    }
    for (std::size_t v = 0; v < 200; ++v) {
      CHECK(multi.dist[v] == expect[v]);  // bit-exact: same accumulation order per path
    }
  }
}

TEST_CASE("settled distances are nondecreasing and paths sum to their distance") {
  auto f = random_fixture(77, 150);
  const std::pair<NodeId, double> seed{3, 0.0};
  auto r = multi_source_dijkstra(std::span(&seed, 1), f.graph.symmetric_view, f.emb, f.fac);
  double prev = 0.0;
  for (NodeId u : r.settle_order) {
    CHECK(r.dist[u] >= prev);
    prev = r.dist[u];
  }
  for (NodeId u : r.settle_order) {
    auto p = extract_path(u, r, f.emb, f.fac);
    CHECK(std::abs(p.total - r.dist[u]) <= 1e-9);
    CHECK(p.nodes.front() == 3);
    CHECK(p.nodes.back() == u);
    for (std::size_t t = 0; t + 1 < p.nodes.size(); ++t) {
      CHECK(f.graph.symmetric_view.has_edge(p.nodes[t], p.nodes[t + 1]));
    }
  }
}

TEST_CASE("unreachable components report infinity") {
  Fixture f;
  f.graph = make_corpus_graph(4, {{0, 1}, {2, 3}});
  f.emb.dim = 1;
  f.emb.data = {0.0f, 1.0f, 5.0f, 6.0f};
  f.fac.dim = 1;
  f.fac.rank = 1;
  f.fac.epsilon = 1.0;
  f.fac.data = {0.0f, 0.0f, 0.0f, 0.0f};
  auto d = exact_geodesic_oracle(0, f.graph.symmetric_view, f.emb, f.fac);
  CHECK(d[1] == doctest::Approx(1.0));
  CHECK(d[2] == kUnreachable);
  CHECK(d[3] == kUnreachable);
  const std::pair<NodeId, double> seed{0, 0.0};
  auto r = multi_source_dijkstra(std::span(&seed, 1), f.graph.symmetric_view, f.emb, f.fac);
  CHECK_THROWS_AS(extract_path(2, r, f.emb, f.fac), DataError);
}

TEST_CASE("single-node graph") {
  Fixture f;
  f.graph = make_corpus_graph(1, {});
  f.emb.dim = 1;
  f.emb.data = {0.5f};
  f.fac.dim = 1;
  f.fac.rank = 1;
  f.fac.epsilon = 0.01;
  f.fac.data = {0.0f};
  auto d = exact_geodesic_oracle(0, f.graph.symmetric_view, f.emb, f.fac);
  CHECK(d.size() == 1);
  CHECK(d[0] == 0.0);
}

TEST_CASE("early stopping settles an exact prefix of the full order") {
  auto f = random_fixture(123, 180);
  const std::pair<NodeId, double> seed{0, 0.0};
  auto full = multi_source_dijkstra(std::span(&seed, 1), f.graph.symmetric_view, f.emb, f.fac);

  EarlyStopConfig stop;
  stop.k = 5;
  stop.window = 40;  // default rule T = 8k
  auto stopped =
      multi_source_dijkstra(std::span(&seed, 1), f.graph.symmetric_view, f.emb, f.fac, stop);
  CHECK(stopped.settle_order.size() == std::min<std::size_t>(5 + 40, full.settle_order.size()));
  for (std::size_t t = 0; t < stopped.settle_order.size(); ++t) {
    CHECK(stopped.settle_order[t] == full.settle_order[t]);
    CHECK(stopped.dist[stopped.settle_order[t]] == full.dist[full.settle_order[t]]);
  }
}

TEST_CASE("exact oracle agrees with single-seed multi-source across fixtures") {
  for (std::uint64_t seed = 50; seed < 60; ++seed) {
    auto f = random_fixture(seed, 60);
    const auto src = static_cast<NodeId>(seed % 60);
    const std::pair<NodeId, double> s{src, 0.0};
    auto a = exact_geodesic_oracle(src, f.graph.symmetric_view, f.emb, f.fac);
    auto b = multi_source_dijkstra(std::span(&s, 1), f.graph.symmetric_view, f.emb, f.fac);
    CHECK(a == b.dist);
  }
}

TEST_CASE("edge weights are nonnegative and bounded below by sqrt(eps)*|delta|") {
  auto f = random_fixture(31, 80);
  for (NodeId u = 0; u < 80; ++u) {
    for (NodeId v : f.graph.symmetric_view.neighbors(u)) {
      const double w = edge_weight(u, v, f.emb, f.fac);
      double nd = 0.0;
      for (std::size_t c = 0; c < f.emb.dim; ++c) {
        const double t = static_cast<double>(f.emb.row(u)[c]) - static_cast<double>(f.emb.row(v)[c]);
        nd += t * t;
      }
      CHECK(w >= 0.0);
      CHECK(w + 1e-12 >= std::sqrt(f.fac.epsilon * nd));
    }
  }
}
