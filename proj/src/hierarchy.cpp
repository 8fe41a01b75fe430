#include "gss/hierarchy.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>

#include <json.hpp>

namespace gss {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

double sq_dist(const double* a, const double* b, std::size_t dim) {
  double s = 0.0;
  for (std::size_t c = 0; c < dim; ++c) {
    const double d = a[c] - b[c];
    s += d * d;
  }
  return s;
}

}  // namespace

KMeansResult kmeans(const double* points, std::size_t m, std::size_t dim, std::size_t k,
                    std::size_t iter_cap, std::uint64_t seed) {
  if (k == 0 || k > m) throw DataError("kmeans: k must be in [1, M]");
  Rng rng(seed);

  // k-means++ init: first centroid uniform, then D^2 sampling. When all
  // remaining weights are zero (duplicate points), take the first unchosen.
  std::vector<std::size_t> centers;
  centers.reserve(k);
  std::vector<char> chosen(m, 0);
  std::vector<double> d2(m, 0.0);
  centers.push_back(rng.below(m));
  chosen[centers[0]] = 1;
  for (std::size_t i = 0; i < m; ++i) d2[i] = sq_dist(points + i * dim, points + centers[0] * dim, dim);
  while (centers.size() < k) {
    double total = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      if (!chosen[i]) total += d2[i];
    }
    std::size_t pick = m;
    if (total > 0.0) {
      double target = rng.uniform() * total;
      for (std::size_t i = 0; i < m; ++i) {
        if (chosen[i]) continue;
        target -= d2[i];
        if (target <= 0.0) {
          pick = i;
          break;
        }
      }
    }
    if (pick == m) {
      for (std::size_t i = 0; i < m; ++i) {
        if (!chosen[i]) {
          pick = i;
          break;
        }
      }
    }
    chosen[pick] = 1;
    centers.push_back(pick);
    for (std::size_t i = 0; i < m; ++i) {
      d2[i] = std::min(d2[i], sq_dist(points + i * dim, points + pick * dim, dim));
    }
  }

  std::vector<double> centroids(k * dim);
  for (std::size_t c = 0; c < k; ++c) {
    std::copy_n(points + centers[c] * dim, dim, centroids.begin() + c * dim);
  }

  KMeansResult out;
  out.k = k;
  out.assignment.assign(m, 0);
  std::vector<NodeId> prev_assignment;

  for (std::size_t iter = 0; iter < std::max<std::size_t>(iter_cap, 1); ++iter) {
    // Assignment step; ties go to the lower cluster id.
    double wcss = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      std::size_t best = 0;
      double best_d = sq_dist(points + i * dim, centroids.data(), dim);
      for (std::size_t c = 1; c < k; ++c) {
        const double d = sq_dist(points + i * dim, centroids.data() + c * dim, dim);
        if (d < best_d) {
          best = c;
          best_d = d;
        }
      }
      out.assignment[i] = static_cast<NodeId>(best);
      wcss += best_d;
    }
    out.wcss_trace.push_back(wcss);
    if (out.assignment == prev_assignment) break;
    prev_assignment = out.assignment;

    // Update step.
    std::vector<std::size_t> counts(k, 0);
    std::fill(centroids.begin(), centroids.end(), 0.0);
    for (std::size_t i = 0; i < m; ++i) {
      const std::size_t c = out.assignment[i];
      counts[c]++;
      for (std::size_t x = 0; x < dim; ++x) centroids[c * dim + x] += points[i * dim + x];
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] == 0) continue;
      for (std::size_t x = 0; x < dim; ++x) centroids[c * dim + x] /= static_cast<double>(counts[c]);
    }
    // Empty-cluster repair: reseed with the point farthest from its centroid.
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] > 0) continue;
      std::size_t far = 0;
      double far_d = -1.0;
      for (std::size_t i = 0; i < m; ++i) {
        if (counts[out.assignment[i]] <= 1) continue;  // keep nonempty donors nonempty
        const double d = sq_dist(points + i * dim, centroids.data() + out.assignment[i] * dim, dim);
        if (d > far_d) {
          far = i;
          far_d = d;
        }
      }
      counts[out.assignment[far]]--;
      out.assignment[far] = static_cast<NodeId>(c);
      counts[c] = 1;
      std::copy_n(points + far * dim, dim, centroids.begin() + c * dim);
    }
  }

  // Canonicalize cluster ids by ascending minimum member id, so that e.g.
  // singleton clusterings are the identity mapping.
  std::vector<NodeId> first_member(k, kNoNode);
  for (std::size_t i = 0; i < m; ++i) {
    if (first_member[out.assignment[i]] == kNoNode) {
      first_member[out.assignment[i]] = static_cast<NodeId>(i);
    }
  }
  std::vector<std::size_t> order(k);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return first_member[a] < first_member[b]; });
  std::vector<NodeId> relabel(k);
  for (std::size_t pos = 0; pos < k; ++pos) relabel[order[pos]] = static_cast<NodeId>(pos);
  std::vector<double> new_centroids(k * dim);
  for (std::size_t c = 0; c < k; ++c) {
    std::copy_n(centroids.begin() + c * dim, dim, new_centroids.begin() + relabel[c] * dim);
  }
  centroids.swap(new_centroids);
  for (auto& a : out.assignment) a = relabel[a];
  out.centroids = std::move(centroids);
  return out;
}

HierarchyLevel coarsen(const MetricSpace<double>& fine, const CsrGraph& fine_graph, double rho,
                       const HierarchyConfig& cfg) {
  const std::size_t m = fine.n;
  if (rho <= 0.0 || rho > 1.0) throw DataError("coarsen: rho must be in (0, 1]");
  const auto k = static_cast<std::size_t>(std::floor(rho * static_cast<double>(m)));
  if (k < 1) throw DataError("coarsen: floor(rho * N) < 1");

  auto km = kmeans(fine.embeddings, m, fine.dim, k, cfg.kmeans_iter_cap, cfg.kmeans_seed);

  HierarchyLevel level;
  level.cluster_count = k;
  level.dim = fine.dim;
  level.rank = fine.rank;
  level.epsilon = fine.epsilon;
  level.assignment = std::move(km.assignment);
  level.children.assign(k, {});
  for (std::size_t i = 0; i < m; ++i) {
    level.children[level.assignment[i]].push_back(static_cast<NodeId>(i));
  }

  // Pooled embeddings and factors: arithmetic member means, 64-bit.
  level.embeddings.assign(k * fine.dim, 0.0);
  level.factors.assign(k * fine.dim * fine.rank, 0.0);
  const std::size_t slab = fine.dim * fine.rank;
  for (std::size_t c = 0; c < k; ++c) {
    for (NodeId i : level.children[c]) {
      const auto e = fine.emb_row(i);
      const auto f = fine.factor_slab(i);
      for (std::size_t x = 0; x < fine.dim; ++x) level.embeddings[c * fine.dim + x] += e[x];
      for (std::size_t x = 0; x < slab; ++x) level.factors[c * slab + x] += f[x];
    }
    const auto cnt = static_cast<double>(level.children[c].size());
    for (std::size_t x = 0; x < fine.dim; ++x) level.embeddings[c * fine.dim + x] /= cnt;
    for (std::size_t x = 0; x < slab; ++x) level.factors[c * slab + x] /= cnt;
  }

  // Cluster edge (a,b) iff some member edge crosses a<->b.
  std::vector<std::pair<NodeId, NodeId>> cluster_edges;
  for (NodeId u = 0; u < m; ++u) {
    for (NodeId v : fine_graph.neighbors(u)) {
      const NodeId a = level.assignment[u];
      const NodeId b = level.assignment[v];
      if (a != b) cluster_edges.emplace_back(a, b);
    }
  }
  std::sort(cluster_edges.begin(), cluster_edges.end());
  cluster_edges.erase(std::unique(cluster_edges.begin(), cluster_edges.end()), cluster_edges.end());
  level.graph.offsets.assign(k + 1, 0);
  level.graph.indices.reserve(cluster_edges.size());
  for (auto [a, b] : cluster_edges) {
    level.graph.offsets[a + 1]++;
    level.graph.indices.push_back(b);
  }
  for (std::size_t c = 0; c < k; ++c) level.graph.offsets[c + 1] += level.graph.offsets[c];

  // Diameters: max member-to-member local distance (ordered pairs). Exact up
  // to the cutoff, otherwise a sampled lower-bound estimate.
  level.diameters.assign(k, 0.0);
  level.diameter_exact.assign(k, 1);
  Rng diam_rng(cfg.kmeans_seed ^ 0x9e3779b97f4a7c15ull);
  for (std::size_t c = 0; c < k; ++c) {
    const auto& members = level.children[c];
    double diam = 0.0;
    if (members.size() <= cfg.diameter_exact_limit) {
      for (NodeId i : members) {
        for (NodeId j : members) {
          if (i == j) continue;
          diam = std::max(diam, fine.weight(i, j));
        }
      }
    } else {
      level.diameter_exact[c] = 0;
      for (std::size_t t = 0; t < cfg.diameter_sample_pairs; ++t) {
        const NodeId i = members[diam_rng.below(members.size())];
        const NodeId j = members[diam_rng.below(members.size())];
        if (i == j) continue;
        diam = std::max(diam, fine.weight(i, j));
      }
    }
    level.diameters[c] = diam;
  }
  return level;
}

HierarchyLevel coarsen(const EmbeddingMatrix& e, const MetricFactorTensor& f,
                       const CsrGraph& fine_graph, double rho, const HierarchyConfig& cfg) {
  // Widen the base corpus to the 64-bit space used by all coarse levels.
  std::vector<double> emb(e.data.begin(), e.data.end());
  std::vector<double> fac(f.data.begin(), f.data.end());
  MetricSpace<double> fine;
  fine.embeddings = emb.data();
  fine.factors = fac.data();
  fine.n = e.node_count();
  fine.dim = e.dim;
  fine.rank = f.rank;
  fine.epsilon = f.epsilon;
  return coarsen(fine, fine_graph, rho, cfg);
}

Hierarchy build_hierarchy(const Corpus& corpus, const HierarchyConfig& cfg) {
  if (cfg.levels < 1) throw DataError("build_hierarchy: levels must be >= 1");
  Hierarchy h;
  h.config = cfg;
  h.fingerprint = corpus_fingerprint(corpus);

  const EmbeddingMatrix& e = corpus.require_embeddings();
  const MetricFactorTensor& f = corpus.require_factors();

  HierarchyConfig step_cfg = cfg;
  for (std::size_t step = 0; step + 1 < cfg.levels; ++step) {
    step_cfg.kmeans_seed = cfg.kmeans_seed + step;
    if (h.coarse.empty()) {
      h.coarse.push_back(coarsen(e, f, corpus.graph.symmetric_view, cfg.rho, step_cfg));
    } else {
      const HierarchyLevel& prev = h.coarse.back();
      h.coarse.push_back(coarsen(prev.space(), prev.graph, cfg.rho, step_cfg));
    }
  }
  return h;
}

// ---------------------------------------------------------------------------
// Persistence: manifest JSON + f64/u64 binaries, corpus-store convention.

void save_hierarchy(const Hierarchy& h, const std::string& manifest_path) {
  const fs::path dir = fs::path(manifest_path).parent_path();
  if (!dir.empty()) fs::create_directories(dir);

  json m;
  m["format"] = "gss-hierarchy";
  m["version"] = 1;
  m["corpus_fingerprint"] = h.fingerprint;
  m["config"] = {{"rho", h.config.rho},
                 {"levels", h.config.levels},
                 {"kmeans_iter_cap", h.config.kmeans_iter_cap},
                 {"kmeans_seed", h.config.kmeans_seed},
                 {"diameter_sample_pairs", h.config.diameter_sample_pairs},
                 {"diameter_exact_limit", h.config.diameter_exact_limit}};
  m["element_type"] = "f64le";
  json levels = json::array();
  for (std::size_t l = 0; l < h.coarse.size(); ++l) {
    const auto& lv = h.coarse[l];
    const std::string tag = "level" + std::to_string(l + 1);
    auto path_of = [&](const std::string& name) { return (dir / (tag + "_" + name)).string(); };

    std::vector<std::uint64_t> assign(lv.assignment.begin(), lv.assignment.end());
    write_binary_u64(path_of("assignment.u64"), assign);
    write_binary_f64(path_of("embeddings.f64"), lv.embeddings);
    write_binary_f64(path_of("factors.f64"), lv.factors);
    write_binary_u64(path_of("graph_offsets.u64"), lv.graph.offsets);
    std::vector<std::uint64_t> idx(lv.graph.indices.begin(), lv.graph.indices.end());
    write_binary_u64(path_of("graph_indices.u64"), idx);
    write_binary_f64(path_of("diameters.f64"), lv.diameters);
    std::vector<std::uint64_t> exact(lv.diameter_exact.begin(), lv.diameter_exact.end());
    write_binary_u64(path_of("diameter_exact.u64"), exact);

    levels.push_back({{"cluster_count", lv.cluster_count},
                      {"fine_count", lv.assignment.size()},
                      {"dim", lv.dim},
                      {"rank", lv.rank},
                      {"epsilon", lv.epsilon},
                      {"edge_count", lv.graph.edge_count()},
                      {"prefix", tag}});
  }
  m["levels"] = std::move(levels);

  std::ofstream out(manifest_path, std::ios::trunc);
  if (!out) throw DataError("cannot open for write: " + manifest_path);
  out << m.dump(2) << "\n";
}

Hierarchy load_hierarchy(const std::string& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw DataError("missing file: " + manifest_path);
  json m;
  try {
    in >> m;
  } catch (const json::exception& e) {
    throw DataError(manifest_path + ": invalid manifest JSON: " + e.what());
  }
  if (m.value("format", "") != std::string("gss-hierarchy")) {
    throw DataError(manifest_path + ": not a gss-hierarchy manifest");
  }
  const fs::path dir = fs::path(manifest_path).parent_path();

  Hierarchy h;
  h.fingerprint = m.at("corpus_fingerprint").get<std::uint64_t>();
  const auto& cfg = m.at("config");
  h.config.rho = cfg.at("rho").get<double>();
  h.config.levels = cfg.at("levels").get<std::size_t>();
  h.config.kmeans_iter_cap = cfg.at("kmeans_iter_cap").get<std::size_t>();
  h.config.kmeans_seed = cfg.at("kmeans_seed").get<std::uint64_t>();
  h.config.diameter_sample_pairs = cfg.at("diameter_sample_pairs").get<std::size_t>();
  h.config.diameter_exact_limit = cfg.at("diameter_exact_limit").get<std::size_t>();

  for (const auto& lm : m.at("levels")) {
    HierarchyLevel lv;
    lv.cluster_count = lm.at("cluster_count").get<std::size_t>();
    lv.dim = lm.at("dim").get<std::size_t>();
    lv.rank = lm.at("rank").get<std::size_t>();
    lv.epsilon = lm.at("epsilon").get<double>();
    const auto fine_count = lm.at("fine_count").get<std::size_t>();
    const auto edge_count = lm.at("edge_count").get<std::size_t>();
    const std::string tag = lm.at("prefix").get<std::string>();
    auto path_of = [&](const std::string& name) { return (dir / (tag + "_" + name)).string(); };

    auto assign = read_binary_u64(path_of("assignment.u64"), fine_count);
    lv.assignment.assign(assign.begin(), assign.end());
    lv.embeddings = read_binary_f64(path_of("embeddings.f64"), lv.cluster_count * lv.dim);
    lv.factors = read_binary_f64(path_of("factors.f64"), lv.cluster_count * lv.dim * lv.rank);
    lv.graph.offsets = read_binary_u64(path_of("graph_offsets.u64"), lv.cluster_count + 1);
    auto idx = read_binary_u64(path_of("graph_indices.u64"), edge_count);
    lv.graph.indices.assign(idx.begin(), idx.end());
    validate_csr(lv.graph, "hierarchy level graph");
    lv.diameters = read_binary_f64(path_of("diameters.f64"), lv.cluster_count);
    auto exact = read_binary_u64(path_of("diameter_exact.u64"), lv.cluster_count);
    lv.diameter_exact.assign(exact.begin(), exact.end());

    lv.children.assign(lv.cluster_count, {});
    for (std::size_t i = 0; i < lv.assignment.size(); ++i) {
      if (lv.assignment[i] >= lv.cluster_count) throw DataError("hierarchy assignment out of range");
      lv.children[lv.assignment[i]].push_back(static_cast<NodeId>(i));
    }
    h.coarse.push_back(std::move(lv));
  }
  return h;
}

RetrievalResult coarse_to_fine_search(const Query& q, const Hierarchy& h, const Corpus& corpus,
                                      const PipelineConfig& cfg) {
  if (h.fingerprint != corpus_fingerprint(corpus)) {
    throw DataError("hierarchy/corpus mismatch: fingerprints differ");
  }
  if (h.coarse.empty()) return search(q, corpus, cfg);

  const EmbeddingMatrix& emb = corpus.require_embeddings();
  const std::vector<double> qv = query_embedding(q, emb);
  const std::size_t beam = cfg.beam_width > 0 ? cfg.beam_width : 2 * q.k;

  // The query's cluster chain, so that its cluster always survives the beam.
  std::vector<NodeId> query_cluster(h.coarse.size(), kNoNode);
  if (q.kind == Query::Kind::Node) {
    NodeId c = q.node;
    for (std::size_t l = 0; l < h.coarse.size(); ++l) {
      c = h.coarse[l].assignment[c];
      query_cluster[l] = c;
    }
  }

  std::vector<std::size_t> level_settled;
  std::vector<char> allowed;  // at the level currently being searched
  bool restrict = false;

  for (std::size_t li = h.coarse.size(); li-- > 0;) {
    const HierarchyLevel& lv = h.coarse[li];
    const std::size_t C = lv.cluster_count;
    if (!restrict) {
      allowed.assign(C, 1);
      restrict = true;
    }

    // Seed selection over this level's pooled embeddings, restricted to the
    // allowed set.
    std::size_t allowed_count = 0;
    for (char a : allowed) allowed_count += a;
    if (allowed_count == 0) throw DataError("coarse_to_fine_search: empty allowed set");
    const auto S = std::min<std::size_t>(
        static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(C)))), allowed_count);

    const auto space = lv.space();
    std::vector<std::pair<double, NodeId>> scored;
    scored.reserve(allowed_count);
    for (NodeId c = 0; c < C; ++c) {
      if (!allowed[c]) continue;
      scored.emplace_back(cosine(std::span<const double>(qv), space.emb_row(c)), c);
    }
    std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(S), scored.end(),
                      [](const auto& a, const auto& b) {
                        if (a.first != b.first) return a.first > b.first;
                        return a.second < b.second;
                      });
    std::vector<std::pair<NodeId, double>> seeds;
    seeds.reserve(S);
    for (std::size_t t = 0; t < S; ++t) {
      const NodeId c = scored[t].second;
      seeds.emplace_back(c, local_distance_span(space.factor_slab(c), space.dim, space.rank,
                                                space.epsilon, space.emb_row(c),
                                                std::span<const double>(qv)));
    }

    // Full Dijkstra at this level (no early stopping above the base).
    const auto res = multi_source_dijkstra(std::span<const std::pair<NodeId, double>>(seeds),
                                           lv.graph, space, EarlyStopConfig{}, &allowed);
    level_settled.push_back(res.settle_order.size());

    // Beam survivors: the best `beam` settled clusters plus the query's own.
    std::vector<char> survive(C, 0);
    for (std::size_t t = 0; t < res.settle_order.size() && t < beam; ++t) {
      survive[res.settle_order[t]] = 1;
    }
    if (query_cluster[li] != kNoNode && res.settled[query_cluster[li]]) {
      survive[query_cluster[li]] = 1;
    }

    // Children of survivors become the allowed set one level down.
    const std::size_t finer_count = lv.assignment.size();
    std::vector<char> next_allowed(finer_count, 0);
    for (NodeId c = 0; c < C; ++c) {
      if (!survive[c]) continue;
      for (NodeId child : lv.children[c]) next_allowed[child] = 1;
    }
    allowed = std::move(next_allowed);
  }

  RetrievalResult out = search_restricted(q, corpus, cfg, &allowed);
  level_settled.push_back(out.diagnostics.level_settled.back());
  out.diagnostics.level_settled = std::move(level_settled);
  return out;
}

std::vector<BoundTransitionReport> check_hierarchical_bound(const Hierarchy& h,
                                                            const Corpus& corpus,
                                                            std::size_t pairs_per_level,
                                                            std::uint64_t seed) {
  const EmbeddingMatrix& e = corpus.require_embeddings();
  const MetricFactorTensor& f = corpus.require_factors();
  std::vector<double> base_emb(e.data.begin(), e.data.end());
  std::vector<double> base_fac(f.data.begin(), f.data.end());
  MetricSpace<double> base;
  base.embeddings = base_emb.data();
  base.factors = base_fac.data();
  base.n = e.node_count();
  base.dim = e.dim;
  base.rank = f.rank;
  base.epsilon = f.epsilon;

  std::vector<BoundTransitionReport> reports;
  Rng rng(seed);

  for (std::size_t l = 0; l < h.coarse.size(); ++l) {
    const HierarchyLevel& coarse = h.coarse[l];
    const MetricSpace<double> fine_space = (l == 0) ? base : h.coarse[l - 1].space();
    const CsrGraph& fine_graph = (l == 0) ? corpus.graph.symmetric_view : h.coarse[l - 1].graph;
    const std::size_t fine_n = coarse.assignment.size();

    BoundTransitionReport rep;
    rep.level = l;
    rep.fine_diameter_bound =
        (l == 0) ? 0.0
                 : *std::max_element(h.coarse[l - 1].diameters.begin(), h.coarse[l - 1].diameters.end());
    rep.coarse_diameter_bound = *std::max_element(coarse.diameters.begin(), coarse.diameters.end());
    const double bound = rep.fine_diameter_bound + rep.coarse_diameter_bound;

    // Group samples by source so each source costs one Dijkstra per level.
    const std::size_t sources = std::max<std::size_t>(1, pairs_per_level / 20);
    const std::size_t targets_per_source = (pairs_per_level + sources - 1) / sources;
    const auto coarse_space = coarse.space();

    for (std::size_t s = 0; s < sources && rep.sampled + rep.skipped < pairs_per_level; ++s) {
      const auto i = static_cast<NodeId>(rng.below(fine_n));
      const std::pair<NodeId, double> fine_seed{i, 0.0};
      const auto fine_res = multi_source_dijkstra(std::span(&fine_seed, 1), fine_graph, fine_space);
      const std::pair<NodeId, double> coarse_seed{coarse.assignment[i], 0.0};
      const auto coarse_res =
          multi_source_dijkstra(std::span(&coarse_seed, 1), coarse.graph, coarse_space);

      for (std::size_t t = 0; t < targets_per_source && rep.sampled + rep.skipped < pairs_per_level;
           ++t) {
        const auto j = static_cast<NodeId>(rng.below(fine_n));
        const double df = fine_res.dist[j];
        const double dc = coarse_res.dist[coarse.assignment[j]];
        if (!std::isfinite(df) || !std::isfinite(dc)) {
          rep.skipped++;
          continue;
        }
        rep.sampled++;
        const double excess = std::abs(dc - df) - bound;
        if (excess > 1e-9) {
          rep.violations++;
          rep.max_excess = std::max(rep.max_excess, excess);
        }
      }
    }
    reports.push_back(rep);
  }
  return reports;
}

}  // namespace gss
