#pragma once

#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "gss/corpus.hpp"

namespace gss {

struct GatConfig {
  std::size_t input_dim = 0;  // taken from corpus features
  std::size_t dim = 8;        // embedding width (published setup uses 256)
  std::size_t rank = 2;       // metric rank (published setup uses 32)
  std::size_t layers = 3;
  std::size_t heads = 4;      // must divide dim
  double leaky_slope = 0.2;
  std::size_t mlp_hidden = 0;  // 0 -> dim
  double epsilon = 0.01;       // metric epsilon used by losses and export

  std::size_t hidden() const { return mlp_hidden == 0 ? dim : mlp_hidden; }
  std::size_t head_out(std::size_t layer) const {
    return layer + 1 == layers ? dim : dim / heads;
  }
  std::size_t layer_in(std::size_t layer) const { return layer == 0 ? input_dim : dim; }
};

// All parameters live in one flat buffer; TensorRef views name the pieces.
struct TensorRef {
  std::size_t offset = 0;
  std::size_t rows = 0;
  std::size_t cols = 1;
  std::size_t size() const { return rows * cols; }
};

struct GATParams {
  GatConfig cfg;
  std::vector<double> theta;
  std::vector<TensorRef> layer_w;  // [layer * heads + head], rows=head_out, cols=layer_in
  std::vector<TensorRef> layer_a;  // [layer * heads + head], rows=2*head_out
  TensorRef emb_w1, emb_b1, emb_w2, emb_b2;
  TensorRef ln_gamma, ln_beta;
  TensorRef met_w1, met_b1, met_w2, met_b2;

  const double* at(const TensorRef& r) const { return theta.data() + r.offset; }
  double* at(const TensorRef& r) { return theta.data() + r.offset; }
};

// Glorot-style uniform init (+/- sqrt(6/(fan_in+fan_out))), layer norm at
// identity, biases zero. Deterministic per seed.
GATParams init_params(const GatConfig& cfg, std::uint64_t seed);

// Sorted self-inclusive neighborhoods over the symmetrized view.
struct NeighborLists {
  std::vector<std::uint64_t> offsets;
  std::vector<NodeId> ids;
  std::span<const NodeId> of(NodeId i) const {
    return {ids.data() + offsets[i], ids.data() + offsets[i + 1]};
  }
};
NeighborLists build_neighbor_lists(const CorpusGraph& g);

struct LayerCache {
  std::vector<double> input;                // N x in
  std::vector<std::vector<double>> proj;    // per head: N x out
  std::vector<std::vector<double>> logits;  // per head: pre-LeakyReLU, neighbor-flattened
  std::vector<std::vector<double>> alpha;   // per head: attention, neighbor-flattened
  std::vector<std::vector<double>> agg;     // per head: N x out, pre-activation
  std::vector<double> avg_pre;              // final layer: N x dim pre-activation
  std::vector<double> out;                  // N x layer width, post-activation
};

struct ForwardResult {
  std::size_t n = 0;
  std::size_t dim = 0;
  std::size_t rank = 0;
  std::vector<double> embeddings;  // N x dim
  std::vector<double> factors;     // N x dim*rank

  bool has_cache = false;
  std::vector<LayerCache> layers;
  std::vector<double> final_gat;        // N x dim
  std::vector<double> emb_hidden;       // N x hidden, pre-tanh
  std::vector<double> emb_hidden_act;   // N x hidden
  std::vector<double> emb_mlp_out;      // N x dim
  std::vector<double> ln_input;         // N x dim residual sum
  std::vector<double> ln_mean;          // N
  std::vector<double> ln_inv_std;       // N
  std::vector<double> met_hidden;       // N x hidden, pre-tanh
  std::vector<double> met_hidden_act;   // N x hidden

  std::span<const double> emb_row(NodeId i) const {
    return {embeddings.data() + std::size_t(i) * dim, dim};
  }
  std::span<const double> factor_slab(NodeId i) const {
    return {factors.data() + std::size_t(i) * dim * rank, dim * rank};
  }
};

// Wraps externally supplied representations for the loss functions.
ForwardResult representations(std::size_t n, std::size_t dim, std::size_t rank,
                              std::vector<double> embeddings, std::vector<double> factors);

// Deterministic forward pass. Attention rows are softmax-normalized over the
// self-inclusive neighborhood; neighbor aggregation uses value-ordered sums so
// relabeling nodes permutes outputs exactly.
ForwardResult gat_forward(const GATParams& p, const NodeFeatures& x, const NeighborLists& nb,
                          bool keep_cache);
ForwardResult gat_forward(const GATParams& p, const NodeFeatures& x, const CorpusGraph& g,
                          bool keep_cache = false);

// Gradient of a scalar loss with respect to theta, given its gradients with
// respect to the forward outputs. Requires a cached forward.
std::vector<double> gat_backward(const GATParams& p, const NeighborLists& nb,
                                 const ForwardResult& f, std::span<const double> d_embeddings,
                                 std::span<const double> d_factors);

EmbeddingMatrix to_embedding_matrix(const ForwardResult& f);
MetricFactorTensor to_factor_tensor(const ForwardResult& f, double epsilon);

// ---------------------------------------------------------------------------
// Losses

struct LossConfig {
  double temperature = 0.1;  // engineering default, unconfirmed
  double margin = 1.0;       // engineering default, unconfirmed
  double hier_margin = 0.1;  // engineering default, unconfirmed
  double lambda_cite = 0.5;
  double lambda_smooth = 0.1;
  double lambda_hier = 0.1;
  std::size_t hard_negatives = 5;
  std::size_t random_negatives = 5;
  std::size_t inbatch_negatives = static_cast<std::size_t>(-1);  // -1 -> batch size - 1
  std::size_t hop_radius = 3;
};

enum class NegativeKind : std::uint8_t { Hard = 0, Random = 1, InBatch = 2 };

struct NegativeSample {
  NodeId anchor = 0;
  std::vector<NodeId> negatives;
  std::vector<NegativeKind> provenance;
};

// Hard = top-cosine non-neighbors, random = uniform non-neighbors, in-batch =
// other batch anchors (minus out-neighbors). The anchor itself and its
// out-neighbors are never negatives. Deterministic under a fixed rng state.
std::vector<NegativeSample> sample_negatives(std::span<const NodeId> anchors,
                                             const ForwardResult& reps, const CorpusGraph& g,
                                             const LossConfig& cfg, Rng& rng);

struct ContrastItem {
  NodeId anchor = 0;
  NodeId positive = 0;
  std::vector<NodeId> negatives;
};
struct RankTriple {
  NodeId i = 0, j = 0, k = 0;  // j cited by i, k not in N(i)
};
struct HierTriple {
  NodeId i = 0, j = 0, k = 0;  // hop(i,j) < hop(i,k)
};

struct TrainBatch {
  std::vector<ContrastItem> contrast;
  std::vector<RankTriple> rank;
  std::vector<HierTriple> hier;
};

// Frozen shortest paths for the differentiable geodesic surrogate: adjacent
// pairs use the one-step local distance, non-adjacent pairs the distance along
// the stored path (path fixed, per-step distances differentiable). Pairs with
// no stored path fall back to the one-step form.
struct FrozenPaths {
  std::unordered_map<std::uint64_t, std::vector<NodeId>> paths;
  static std::uint64_t key(NodeId a, NodeId b) {
    return (static_cast<std::uint64_t>(a) << 32) | b;
  }
  const std::vector<NodeId>* find(NodeId a, NodeId b) const {
    auto it = paths.find(key(a, b));
    return it == paths.end() ? nullptr : &it->second;
  }
};

FrozenPaths compute_frozen_paths(const ForwardResult& reps, const CorpusGraph& g,
                                 const TrainBatch& batch, double epsilon);

struct EmbeddingGrads {
  std::vector<double> d_embeddings;  // N x dim
  std::vector<double> d_factors;     // N x dim*rank
};
EmbeddingGrads zero_grads(const ForwardResult& reps);

// Truncated-BFS hop distances over the symmetrized view.
class HopDistanceCache {
 public:
  HopDistanceCache(const CsrGraph& sym, std::size_t radius) : graph_(&sym), radius_(radius) {}
  void ensure(NodeId anchor);
  std::optional<std::uint32_t> hop(NodeId i, NodeId j) const;
  std::size_t radius() const { return radius_; }

 private:
  const CsrGraph* graph_;
  std::size_t radius_;
  std::unordered_map<std::uint64_t, std::uint32_t> hops_;
  std::unordered_set<NodeId> done_;
};

double loss_contrastive(const ForwardResult& reps, double epsilon, const CorpusGraph& g,
                        std::span<const ContrastItem> items, const FrozenPaths* paths, double tau,
                        EmbeddingGrads* grads);
double loss_ranking(const ForwardResult& reps, double epsilon, const CorpusGraph& g,
                    std::span<const RankTriple> triples, const FrozenPaths* paths, double margin,
                    EmbeddingGrads* grads);
double loss_smoothness(const ForwardResult& reps, const CorpusGraph& g, EmbeddingGrads* grads);
double loss_hierarchical(const ForwardResult& reps, std::span<const HierTriple> triples,
                         double hier_margin, EmbeddingGrads* grads,
                         const HopDistanceCache* validate = nullptr);

struct LossBreakdown {
  double total = 0.0;
  double contrast = 0.0;
  double rank = 0.0;
  double smooth = 0.0;
  double hier = 0.0;
};

LossBreakdown total_loss(const ForwardResult& reps, const CorpusGraph& g, const TrainBatch& batch,
                         const FrozenPaths* paths, const LossConfig& cfg, double epsilon,
                         EmbeddingGrads* grads);

// ---------------------------------------------------------------------------
// Training and verification

struct TrainConfig {
  std::size_t epochs = 200;
  double lr = 1e-3;
  std::uint64_t seed = 1;
  std::size_t batch_size = 512;  // positive edges per epoch, capped at |E|
  std::size_t path_refresh = 5;  // epochs between frozen-path recomputes
  std::size_t neg_refresh = 0;   // 0 -> sample negatives once
  std::string optimizer = "adam";  // adam | sgd
  std::size_t rank_triples_per_edge = 1;
  std::size_t hier_triples_per_anchor = 1;
  GatConfig gat;
  LossConfig loss;
};

struct TrainResult {
  GATParams params;
  std::vector<LossBreakdown> trace;  // evaluated before each step
  EmbeddingMatrix embeddings;        // f32 export, corpus-store convention
  MetricFactorTensor factors;
};

TrainResult train_toy(const Corpus& corpus, const TrainConfig& cfg);
std::string trace_csv(std::span<const LossBreakdown> trace);

// Deterministic batch construction shared by training and grad checks.
TrainBatch build_batch(const Corpus& corpus, const ForwardResult& reps, const LossConfig& loss,
                       std::size_t batch_size, std::size_t rank_per_edge,
                       std::size_t hier_per_anchor, Rng& rng, HopDistanceCache& hops);

enum class LossTerm { Contrastive, Ranking, Smoothness, Hierarchical, Total };

// Max relative error between analytic gradients and central finite
// differences over `probes` parameters spread across all tensors.
double grad_check(const Corpus& corpus, const TrainConfig& cfg, LossTerm term, std::size_t probes,
                  double step);

// Sanity variant on the quadratic ||theta||^2 with known gradient 2*theta.
double quadratic_grad_check(std::size_t nparams, std::uint64_t seed, double step);

}  // namespace gss
