// gss: geodesic semantic search over citation corpora.
//
// Exit codes: 0 ok, 2 usage, 3 data error, 4 numeric failure.

#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "gss/corpus.hpp"
#include "gss/eval.hpp"
#include "gss/gat.hpp"
#include "gss/geodesic.hpp"
#include "gss/hierarchy.hpp"
#include "gss/metric.hpp"
#include "gss/pipeline.hpp"

namespace {

using nlohmann::json;
using namespace gss;

json config_json(const PipelineConfig& cfg) {
  return json{{"seed_count", cfg.seed_count},
              {"mmr_lambda", cfg.mmr_lambda},
              {"coherence_threshold", cfg.coherence_threshold},
              {"candidate_multiplier", cfg.candidate_multiplier},
              {"early_stop_window", cfg.early_stop_window},
              {"use_symmetric_view", cfg.use_symmetric_view},
              {"exclude_query_node", cfg.exclude_query_node},
              {"beam_width", cfg.beam_width}};
}

json result_json(const RetrievalResult& r) {
  json hits = json::array();
  for (const auto& h : r.hits) {
    hits.push_back({{"node", h.node},
                    {"distance", h.distance},
                    {"mmr_score", h.mmr_score},
                    {"coherence", h.coherence},
                    {"path",
                     {{"nodes", h.path.nodes},
                      {"step_weights", h.path.step_weights},
                      {"step_similarities", h.step_similarities},
                      {"total", h.path.total}}}});
  }
  return json{{"hits", hits},
              {"diagnostics",
               {{"settled", r.diagnostics.settled},
                {"seeds", r.diagnostics.seeds},
                {"candidates", r.diagnostics.candidate_count},
                {"filtered", r.diagnostics.filtered},
                {"level_settled", r.diagnostics.level_settled}}}};
}

std::vector<double> load_embedding_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("missing file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw DataError(path + ": expected a JSON array of numbers: " + e.what());
  }
  return j.get<std::vector<double>>();
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot open for write: " + path);
  out << text;
}

int run(int argc, char** argv) {
  CLI::App app{
      "gss - geodesic semantic search over citation graphs.\n"
      "Distances follow per-node low-rank metrics (G = L L^T + eps I); retrieval runs\n"
      "seed selection, multi-source Dijkstra, MMR reranking and path-coherence\n"
      "filtering, optionally through a k-means cluster hierarchy.\n"
      "Defaults marked 'published' follow the published system configuration\n"
      "(theta_c=0.3, S=ceil(sqrt(N)), lambda_cite=0.5, lambda_smooth=0.1,\n"
      "lambda_hier=0.1, d=256, r=32, L=3 layers, K=4 heads); defaults marked\n"
      "'engineering' (tau, margins, rho, early-stop T, MMR lambda) are unpublished\n"
      "choices of this implementation."};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Expand all subcommand help");

  std::string corpus_path;
  app.add_option("--corpus", corpus_path, "Corpus manifest JSON (env GSS_CORPUS)")
      ->envname("GSS_CORPUS");

  // --- ingest ---------------------------------------------------------
  auto* ingest = app.add_subcommand("ingest", "Validate a corpus and write a normalized copy");
  std::string ingest_out;
  ingest->add_option("--out", ingest_out, "Output directory")->required();

  // --- train-toy ------------------------------------------------------
  auto* train = app.add_subcommand("train-toy", "Train the metric GAT on a desk-scale corpus");
  TrainConfig tcfg;
  std::string train_out;
  train->add_option("--out", train_out, "Output directory (corpus.json + trace.csv)")->required();
  train->add_option("--epochs", tcfg.epochs, "Training epochs")->capture_default_str();
  train->add_option("--lr", tcfg.lr, "Learning rate (published default 1e-3)")
      ->capture_default_str();
  train->add_option("--seed", tcfg.seed, "RNG seed (required; no hidden entropy)")->required();
  train->add_option("--batch-size", tcfg.batch_size,
                    "Positive edges per epoch (published default 512)")
      ->capture_default_str();
  train->add_option("--dim", tcfg.gat.dim, "Embedding width (published setup: 256)")
      ->capture_default_str();
  train->add_option("--rank", tcfg.gat.rank, "Metric rank (published setup: 32)")
      ->capture_default_str();
  train->add_option("--layers", tcfg.gat.layers, "Attention layers (published default 3)")
      ->capture_default_str();
  train->add_option("--heads", tcfg.gat.heads, "Attention heads (published default 4)")
      ->capture_default_str();
  train->add_option("--epsilon", tcfg.gat.epsilon, "Metric epsilon (engineering default)")
      ->capture_default_str();
  train->add_option("--mlp-hidden", tcfg.gat.mlp_hidden,
                    "Head MLP hidden width (0 = dim; engineering default)")
      ->capture_default_str();
  train->add_option("--tau", tcfg.loss.temperature,
                    "Contrastive temperature (engineering default)")
      ->capture_default_str();
  train->add_option("--margin", tcfg.loss.margin, "Ranking margin m (engineering default)")
      ->capture_default_str();
  train->add_option("--hier-margin", tcfg.loss.hier_margin,
                    "Hierarchical margin m_h (engineering default)")
      ->capture_default_str();
  train->add_option("--lambda-cite", tcfg.loss.lambda_cite,
                    "Ranking weight (published default 0.5)")
      ->capture_default_str();
  train->add_option("--lambda-smooth", tcfg.loss.lambda_smooth,
                    "Smoothness weight (published default 0.1)")
      ->capture_default_str();
  train->add_option("--lambda-hier", tcfg.loss.lambda_hier,
                    "Hierarchical weight (published default 0.1)")
      ->capture_default_str();
  train->add_option("--optimizer", tcfg.optimizer, "adam | sgd")->capture_default_str();
  train->add_option("--path-refresh", tcfg.path_refresh,
                    "Epochs between surrogate path refreshes")
      ->capture_default_str();
  train->add_option("--neg-refresh", tcfg.neg_refresh,
                    "Epochs between negative resamples (0 = sample once)")
      ->capture_default_str();

  // --- build-hierarchy --------------------------------------------------
  auto* hier = app.add_subcommand("build-hierarchy", "Coarsen the corpus by k-means pooling");
  HierarchyConfig hcfg;
  std::string hier_out;
  hier->add_option("--out", hier_out, "Output directory (hierarchy.json + levels)")->required();
  hier->add_option("--rho", hcfg.rho, "Pooling ratio in (0,1] (engineering default)")
      ->capture_default_str();
  hier->add_option("--levels", hcfg.levels, "Total levels including the base corpus")
      ->capture_default_str();
  hier->add_option("--seed", hcfg.kmeans_seed, "k-means seed (required)")->required();
  hier->add_option("--kmeans-iters", hcfg.kmeans_iter_cap, "Lloyd iteration cap")
      ->capture_default_str();

  // --- search -----------------------------------------------------------
  auto* search_cmd = app.add_subcommand("search", "Retrieve the top-k nodes for a query");
  PipelineConfig pcfg;
  NodeId search_node = 0;
  std::string search_embedding_file;
  std::size_t search_k = 10;
  std::string search_hier_dir;
  bool search_flat = false;
  bool search_directed = false;
  bool search_include_query = false;
  auto* node_opt = search_cmd->add_option("--node", search_node, "Query node id");
  search_cmd->add_option("--embedding", search_embedding_file,
                         "Query embedding file (JSON array)")
      ->excludes(node_opt);
  search_cmd->add_option("-k,--k", search_k, "Result budget")->capture_default_str();
  search_cmd->add_option("--lambda", pcfg.mmr_lambda, "MMR relevance weight (engineering default)")
      ->capture_default_str();
  search_cmd->add_option("--theta", pcfg.coherence_threshold,
                         "Coherence threshold theta_c (published default 0.3)")
      ->capture_default_str();
  search_cmd->add_option("--seeds", pcfg.seed_count,
                         "Seed count S (0 = ceil(sqrt(N)), the published rule)")
      ->capture_default_str();
  search_cmd->add_option("--early-stop", pcfg.early_stop_window,
                         "Early-stop window T (-1 = 8k engineering default, 0 = exhaustive)")
      ->capture_default_str();
  search_cmd->add_flag("--flat", search_flat, "Force flat search (default unless --hier)");
  search_cmd->add_option("--hier", search_hier_dir, "Hierarchy manifest for coarse-to-fine search");
  search_cmd->add_flag("--directed", search_directed, "Traverse citation direction only");
  search_cmd->add_flag("--include-query", search_include_query,
                       "Keep the query node among candidates");

  // --- evaluate -----------------------------------------------------------
  auto* eval_cmd = app.add_subcommand("evaluate", "Run retrieval methods against judgments");
  ExperimentConfig ecfg;
  std::string eval_queries, eval_judgments, eval_out;
  std::string eval_methods = "cosine,geodesic-flat";
  std::size_t eval_seeds = 1;
  eval_cmd->add_option("--queries", eval_queries, "Queries JSON")->required();
  eval_cmd->add_option("--judgments", eval_judgments, "Judgments JSON")->required();
  eval_cmd->add_option("--methods", eval_methods, "Comma list: cosine,geodesic-flat,geodesic-hier")
      ->capture_default_str();
  eval_cmd->add_option("--seeds", eval_seeds, "Number of seeds (hierarchy rebuilt per seed)")
      ->capture_default_str();
  eval_cmd->add_option("--out", eval_out, "Results CSV path (stdout when omitted)");
  eval_cmd->add_option("--rho", ecfg.hierarchy.rho, "Hierarchy pooling ratio")
      ->capture_default_str();
  eval_cmd->add_option("--levels", ecfg.hierarchy.levels, "Hierarchy levels")
      ->capture_default_str();
  eval_cmd->add_option("--threads", ecfg.threads, "Worker threads for query evaluation")
      ->capture_default_str();
  eval_cmd->add_option("--lambda", ecfg.pipeline.mmr_lambda, "MMR relevance weight")
      ->capture_default_str();
  eval_cmd->add_option("--theta", ecfg.pipeline.coherence_threshold, "Coherence threshold")
      ->capture_default_str();
  eval_cmd->add_option("--early-stop", ecfg.pipeline.early_stop_window,
                       "Early-stop window T (-1 = 8k, 0 = exhaustive)")
      ->capture_default_str();

  // --- bench ---------------------------------------------------------------
  auto* bench = app.add_subcommand("bench", "Micro-benchmarks");
  bench->require_subcommand(1);
  auto* bench_metric = bench->add_subcommand("metric", "Distance-kernel throughput");
  std::size_t bm_dim = 256, bm_rank = 32, bm_iters = 2'000'000;
  std::uint64_t bm_seed = 1;
  bench_metric->add_option("--dim", bm_dim, "Embedding dim (published setup: 256)")
      ->capture_default_str();
  bench_metric->add_option("--rank", bm_rank, "Metric rank (published setup: 32)")
      ->capture_default_str();
  bench_metric->add_option("--iters", bm_iters, "Distance evaluations")->capture_default_str();
  bench_metric->add_option("--seed", bm_seed, "RNG seed")->capture_default_str();

  auto* bench_dijkstra =
      bench->add_subcommand("dijkstra", "Search-stage latency and settled nodes");
  std::size_t bd_queries = 50, bd_k = 10;
  std::uint64_t bd_seed = 1;
  std::int64_t bd_early = -1;
  bench_dijkstra->add_option("--queries", bd_queries, "Number of random node queries")
      ->capture_default_str();
  bench_dijkstra->add_option("-k,--k", bd_k, "Result budget for early stopping")
      ->capture_default_str();
  bench_dijkstra->add_option("--seed", bd_seed, "Query sampling seed")->capture_default_str();
  bench_dijkstra->add_option("--early-stop", bd_early, "Early-stop window T (-1 = 8k, 0 = off)")
      ->capture_default_str();

  // --- fixture ---------------------------------------------------------------
  auto* fixture = app.add_subcommand("fixture", "Generate synthetic corpora");
  fixture->require_subcommand(1);
  auto* fx_barbell = fixture->add_subcommand(
      "barbell", "Two dense areas joined by a coherent bridge chain (task.json + probe.json)");
  BarbellParams bp;
  std::string fx_out;
  fx_barbell->add_option("--out", fx_out, "Output directory")->required();
  fx_barbell->add_option("--seed", bp.seed, "RNG seed (required)")->required();
  fx_barbell->add_option("--cluster-size", bp.cluster_size, "Nodes per area")
      ->capture_default_str();
  fx_barbell->add_option("--path-length", bp.path_length, "Bridge chain intermediates")
      ->capture_default_str();
  fx_barbell->add_option("--distractors", bp.distractors, "High-similarity lookalikes")
      ->capture_default_str();
  fx_barbell->add_option("--separation", bp.separation_deg, "Angular separation (degrees)")
      ->capture_default_str();

  auto* fx_blocks = fixture->add_subcommand("blocks", "Two-block training corpus (features only)");
  std::uint64_t blk_seed = 1;
  std::size_t blk_n = 50, blk_dim = 8;
  std::string blk_out;
  fx_blocks->add_option("--out", blk_out, "Output directory")->required();
  fx_blocks->add_option("--seed", blk_seed, "RNG seed (required)")->required();
  fx_blocks->add_option("--n", blk_n, "Node count (even)")->capture_default_str();
  fx_blocks->add_option("--dim", blk_dim, "Feature dim")->capture_default_str();
  std::size_t blk_cross = 3;
  fx_blocks->add_option("--cross", blk_cross, "Cross-block edges")->capture_default_str();

  auto* fx_blobs = fixture->add_subcommand("blobs", "Clustered corpus with embeddings and factors");
  BlobParams blp;
  std::string blobs_out;
  fx_blobs->add_option("--out", blobs_out, "Output directory")->required();
  fx_blobs->add_option("--seed", blp.seed, "RNG seed (required)")->required();
  fx_blobs->add_option("--n", blp.n, "Node count")->capture_default_str();
  fx_blobs->add_option("--blobs", blp.blobs, "Cluster count")->capture_default_str();
  fx_blobs->add_option("--dim", blp.dim, "Embedding dim")->capture_default_str();
  fx_blobs->add_option("--rank", blp.rank, "Metric rank")->capture_default_str();
  fx_blobs->add_option("--noise", blp.noise, "Within-blob noise")->capture_default_str();
  fx_blobs->add_flag("--homogeneous", blp.homogeneous_factors, "Share one factor slab everywhere");

  // Allow global options (--corpus) after the subcommand name.
  for (auto* sub : app.get_subcommands([](const CLI::App*) { return true; })) {
    sub->fallthrough();
    for (auto* nested : sub->get_subcommands([](const CLI::App*) { return true; })) {
      nested->fallthrough();
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);  // prints help text or the usage error
    return rc == 0 ? 0 : 2;
  }

  auto need_corpus = [&]() -> Corpus {
    if (corpus_path.empty()) {
      throw DataError("--corpus is required (or set GSS_CORPUS)");
    }
    return load_corpus(corpus_path);
  };

  if (*ingest) {
    Corpus c = need_corpus();
    save_corpus(c, ingest_out + "/corpus.json");
    std::cout << json{{"command", "ingest"},
                      {"nodes", c.node_count()},
                      {"edges", c.graph.out_edges.edge_count()},
                      {"out", ingest_out + "/corpus.json"}}
                     .dump(2)
              << "\n";
    return 0;
  }

  if (*train) {
    Corpus c = need_corpus();
    TrainResult r = train_toy(c, tcfg);
    Corpus trained = c;
    trained.embeddings = r.embeddings;
    trained.factors = r.factors;
    save_corpus(trained, train_out + "/corpus.json");
    write_text(train_out + "/trace.csv", trace_csv(r.trace));
    json echo{{"command", "train-toy"},
              {"epochs", tcfg.epochs},
              {"lr", tcfg.lr},
              {"seed", tcfg.seed},
              {"dim", tcfg.gat.dim},
              {"rank", tcfg.gat.rank},
              {"layers", tcfg.gat.layers},
              {"heads", tcfg.gat.heads},
              {"optimizer", tcfg.optimizer},
              {"initial_total", r.trace.front().total},
              {"final_total", r.trace.back().total},
              {"initial_contrast", r.trace.front().contrast},
              {"final_contrast", r.trace.back().contrast},
              {"out", train_out}};
    std::cout << echo.dump(2) << "\n";
    return 0;
  }

  if (*hier) {
    Corpus c = need_corpus();
    Hierarchy h = build_hierarchy(c, hcfg);
    save_hierarchy(h, hier_out + "/hierarchy.json");
    json levels = json::array();
    for (const auto& lv : h.coarse) levels.push_back(lv.cluster_count);
    std::cout << json{{"command", "build-hierarchy"},
                      {"rho", hcfg.rho},
                      {"levels", hcfg.levels},
                      {"seed", hcfg.kmeans_seed},
                      {"cluster_counts", levels},
                      {"out", hier_out + "/hierarchy.json"}}
                     .dump(2)
              << "\n";
    return 0;
  }

  if (*search_cmd) {
    const bool have_node = node_opt->count() > 0;
    if (!have_node && search_embedding_file.empty()) {
      throw CLI::RequiredError("--node or --embedding");
    }
    if (!search_hier_dir.empty() && search_flat) {
      throw CLI::RequiredError("choose one of --flat / --hier");
    }
    Corpus c = need_corpus();
    pcfg.use_symmetric_view = !search_directed;
    pcfg.exclude_query_node = !search_include_query;
    Query q = have_node
                  ? Query::by_node(search_node, search_k)
                  : Query::by_embedding(load_embedding_file(search_embedding_file), search_k);
    RetrievalResult r;
    if (!search_hier_dir.empty()) {
      Hierarchy h = load_hierarchy(search_hier_dir + "/hierarchy.json");
      r = coarse_to_fine_search(q, h, c, pcfg);
    } else {
      r = search(q, c, pcfg);
    }
    json out = result_json(r);
    out["query"] = have_node ? json{{"kind", "node"}, {"node", search_node}, {"k", search_k}}
                             : json{{"kind", "embedding"}, {"k", search_k}};
    out["config"] = config_json(pcfg);
    out["config"]["corpus"] = corpus_path;
    out["config"]["mode"] = search_hier_dir.empty() ? "flat" : "hier";
    std::cout << out.dump(2) << "\n";
    return 0;
  }

  if (*eval_cmd) {
    Corpus c = need_corpus();
    ecfg.methods.clear();
    std::string cur;
    for (char ch : eval_methods + ",") {
      if (ch == ',') {
        if (!cur.empty()) ecfg.methods.push_back(cur);
        cur.clear();
      } else {
        cur += ch;
      }
    }
    ecfg.seeds.clear();
    for (std::uint64_t s = 1; s <= eval_seeds; ++s) ecfg.seeds.push_back(s);
    const auto queries = load_queries_json(eval_queries);
    const auto judgments = load_judgments_json(eval_judgments);
    const auto rows = run_experiment(c, queries, judgments, ecfg);
    const std::string csv = experiment_csv(rows);
    json echo{{"command", "evaluate"},
              {"corpus", corpus_path},
              {"methods", ecfg.methods},
              {"seeds", eval_seeds},
              {"queries", queries.size()},
              {"pipeline", config_json(ecfg.pipeline)},
              {"hierarchy", {{"rho", ecfg.hierarchy.rho}, {"levels", ecfg.hierarchy.levels}}}};
    if (eval_out.empty()) {
      std::cout << csv;
    } else {
      write_text(eval_out, csv);
      echo["out"] = eval_out;
      std::cout << echo.dump(2) << "\n";
    }
    return 0;
  }

  if (*bench_metric) {
    Rng rng(bm_seed);
    const std::size_t n = 64;
    EmbeddingMatrix e;
    e.dim = bm_dim;
    e.data.resize(n * bm_dim);
    for (auto& x : e.data) x = static_cast<float>(rng.normal());
    MetricFactorTensor f;
    f.dim = bm_dim;
    f.rank = bm_rank;
    f.epsilon = 0.01;
    f.data.resize(n * bm_dim * bm_rank);
    for (auto& x : f.data) x = static_cast<float>(rng.normal() * 0.1);

    double checksum = 0.0;
    const auto t0 = std::chrono::steady_clock::now();
    for (std::size_t it = 0; it < bm_iters; ++it) {
      const auto u = static_cast<NodeId>(it % n);
      const auto v = static_cast<NodeId>((it * 7 + 1) % n);
      checksum += edge_weight(u, v, e, f);
    }
    const auto t1 = std::chrono::steady_clock::now();
    const double sec = std::chrono::duration<double>(t1 - t0).count();
    std::cout << json{{"command", "bench metric"},
                      {"dim", bm_dim},
                      {"rank", bm_rank},
                      {"iters", bm_iters},
                      {"seconds", sec},
                      {"ns_per_distance", 1e9 * sec / static_cast<double>(bm_iters)},
                      {"distances_per_sec", static_cast<double>(bm_iters) / sec},
                      {"checksum", checksum}}
                     .dump(2)
              << "\n";
    return 0;
  }

  if (*bench_dijkstra) {
    Corpus c = need_corpus();
    const auto& emb = c.require_embeddings();
    const auto& fac = c.require_factors();
    Rng rng(bd_seed);
    std::vector<double> latencies;
    std::vector<std::size_t> settled;
    for (std::size_t qi = 0; qi < bd_queries; ++qi) {
      const auto node = static_cast<NodeId>(rng.below(c.node_count()));
      const Query q = Query::by_node(node, bd_k);
      const std::size_t S =
          static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(c.node_count()))));
      const auto t0 = std::chrono::steady_clock::now();
      const auto seeds = select_seeds(q, emb, fac, S);
      EarlyStopConfig stop;
      if (bd_early != 0) {
        stop.k = bd_k;
        stop.window = bd_early > 0 ? static_cast<std::size_t>(bd_early) : 8 * bd_k;
      }
      const auto res = multi_source_dijkstra(std::span<const std::pair<NodeId, double>>(seeds),
                                             c.graph.symmetric_view, emb, fac, stop);
      const auto t1 = std::chrono::steady_clock::now();
      latencies.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
      settled.push_back(res.settle_order.size());
    }
    std::sort(latencies.begin(), latencies.end());
    std::sort(settled.begin(), settled.end());
    auto pct = [](const auto& v, double p) {
      const auto idx = static_cast<std::size_t>(p * static_cast<double>(v.size() - 1));
      return v[idx];
    };
    std::cout << json{{"command", "bench dijkstra"},
                      {"queries", bd_queries},
                      {"k", bd_k},
                      {"early_stop_window", bd_early},
                      {"latency_ms_p50", pct(latencies, 0.50)},
                      {"latency_ms_p90", pct(latencies, 0.90)},
                      {"latency_ms_p99", pct(latencies, 0.99)},
                      {"settled_p50", pct(settled, 0.50)},
                      {"settled_p90", pct(settled, 0.90)},
                      {"settled_max", settled.back()}}
                     .dump(2)
              << "\n";
    return 0;
  }

  if (*fx_barbell) {
    BarbellFixture fx = make_barbell_fixture(bp);
    save_corpus(fx.corpus, fx_out + "/corpus.json");
    save_bridge_task_json(fx.task, fx_out + "/task.json");
    save_probe_json(fx.probe, fx_out + "/probe.json");
    std::cout << json{{"command", "fixture barbell"},
                      {"seed", bp.seed},
                      {"nodes", fx.corpus.node_count()},
                      {"bridge", fx.task.bridges.front()},
                      {"probe_margin", fx.probe.margin},
                      {"out", fx_out}}
                     .dump(2)
              << "\n";
    return 0;
  }

  if (*fx_blocks) {
    Corpus c = make_two_block_corpus(blk_seed, blk_n, blk_dim, blk_cross);
    save_corpus(c, blk_out + "/corpus.json");
    std::cout << json{{"command", "fixture blocks"},
                      {"seed", blk_seed},
                      {"nodes", c.node_count()},
                      {"edges", c.graph.out_edges.edge_count()},
                      {"out", blk_out}}
                     .dump(2)
              << "\n";
    return 0;
  }

  if (*fx_blobs) {
    Corpus c = make_blob_corpus(blp);
    save_corpus(c, blobs_out + "/corpus.json");
    std::cout << json{{"command", "fixture blobs"},
                      {"seed", blp.seed},
                      {"nodes", c.node_count()},
                      {"edges", c.graph.out_edges.edge_count()},
                      {"out", blobs_out}}
                     .dump(2)
              << "\n";
    return 0;
  }

  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return 0;
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const gss::NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return 4;
  } catch (const gss::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
