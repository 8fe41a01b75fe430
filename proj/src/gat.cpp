#include "gss/gat.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <map>
#include <numeric>

#include "gss/geodesic.hpp"

namespace gss {

namespace {

double elu(double x) { return x > 0.0 ? x : std::expm1(x); }
double elu_grad(double x) { return x > 0.0 ? 1.0 : std::exp(x); }

void check_config(const GatConfig& cfg) {
  if (cfg.input_dim == 0) throw DataError("gat: input_dim not set");
  if (cfg.dim == 0 || cfg.heads == 0 || cfg.layers == 0) throw DataError("gat: bad shape config");
  if (cfg.dim % cfg.heads != 0) throw DataError("gat: heads must divide dim");
  if (cfg.rank == 0 || cfg.rank > cfg.dim) throw DataError("gat: rank must satisfy 1 <= r <= d");
}

}  // namespace

GATParams init_params(const GatConfig& cfg, std::uint64_t seed) {
  check_config(cfg);
  GATParams p;
  p.cfg = cfg;
  std::size_t off = 0;
  auto alloc = [&off](std::size_t rows, std::size_t cols) {
    TensorRef r{off, rows, cols};
    off += rows * cols;
    return r;
  };
  for (std::size_t l = 0; l < cfg.layers; ++l) {
    for (std::size_t k = 0; k < cfg.heads; ++k) {
      p.layer_w.push_back(alloc(cfg.head_out(l), cfg.layer_in(l)));
      p.layer_a.push_back(alloc(2 * cfg.head_out(l), 1));
    }
  }
  const std::size_t h = cfg.hidden();
  p.emb_w1 = alloc(h, cfg.dim);
  p.emb_b1 = alloc(h, 1);
  p.emb_w2 = alloc(cfg.dim, h);
  p.emb_b2 = alloc(cfg.dim, 1);
  p.ln_gamma = alloc(cfg.dim, 1);
  p.ln_beta = alloc(cfg.dim, 1);
  p.met_w1 = alloc(h, cfg.dim);
  p.met_b1 = alloc(h, 1);
  p.met_w2 = alloc(cfg.dim * cfg.rank, h);
  p.met_b2 = alloc(cfg.dim * cfg.rank, 1);
  p.theta.assign(off, 0.0);

  Rng rng(seed);
  auto glorot = [&](const TensorRef& r, std::size_t fan_in, std::size_t fan_out) {
    const double s = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (std::size_t i = 0; i < r.size(); ++i) p.theta[r.offset + i] = rng.uniform(-s, s);
  };
  for (std::size_t l = 0; l < cfg.layers; ++l) {
    for (std::size_t k = 0; k < cfg.heads; ++k) {
      glorot(p.layer_w[l * cfg.heads + k], cfg.layer_in(l), cfg.head_out(l));
      glorot(p.layer_a[l * cfg.heads + k], 2 * cfg.head_out(l), 1);
    }
  }
  glorot(p.emb_w1, cfg.dim, h);
  glorot(p.emb_w2, h, cfg.dim);
  glorot(p.met_w1, cfg.dim, h);
  glorot(p.met_w2, h, cfg.dim * cfg.rank);
  // Factor output bias starts away from zero: L = 0 is a stationary point of
  // every distance in L (the gradient carries a factor L^T delta), so zero
  // factors would stall the metric pathway at a saddle.
  glorot(p.met_b2, cfg.hidden(), 1);
  for (std::size_t i = 0; i < cfg.dim; ++i) p.theta[p.ln_gamma.offset + i] = 1.0;
  return p;
}

NeighborLists build_neighbor_lists(const CorpusGraph& g) {
  const std::size_t n = g.node_count();
  NeighborLists nb;
  nb.offsets.assign(n + 1, 0);
  nb.ids.reserve(g.symmetric_view.edge_count() + n);
  for (NodeId i = 0; i < n; ++i) {
    auto row = g.symmetric_view.neighbors(i);
    bool self_inserted = false;
    for (NodeId j : row) {
      if (!self_inserted && i < j) {
        nb.ids.push_back(i);
        self_inserted = true;
      }
      nb.ids.push_back(j);
    }
    if (!self_inserted) nb.ids.push_back(i);
    nb.offsets[i + 1] = nb.ids.size();
  }
  return nb;
}

ForwardResult representations(std::size_t n, std::size_t dim, std::size_t rank,
                              std::vector<double> embeddings, std::vector<double> factors) {
  if (embeddings.size() != n * dim || factors.size() != n * dim * rank) {
    throw DataError("representations: shape mismatch");
  }
  ForwardResult f;
  f.n = n;
  f.dim = dim;
  f.rank = rank;
  f.embeddings = std::move(embeddings);
  f.factors = std::move(factors);
  return f;
}

ForwardResult gat_forward(const GATParams& p, const NodeFeatures& x, const NeighborLists& nb,
                          bool keep_cache) {
  const GatConfig& cfg = p.cfg;
  check_config(cfg);
  const std::size_t n = x.node_count();
  if (x.dim != cfg.input_dim) {
    throw DataError("gat_forward: feature dim " + std::to_string(x.dim) + " != input_dim " +
                    std::to_string(cfg.input_dim));
  }
  if (nb.offsets.size() != n + 1) throw DataError("gat_forward: neighbor lists mismatch");

  ForwardResult f;
  f.n = n;
  f.dim = cfg.dim;
  f.rank = cfg.rank;
  f.has_cache = keep_cache;
  f.layers.resize(cfg.layers);

  std::vector<double> cur(x.data.begin(), x.data.end());
  std::vector<double> scratch;

  for (std::size_t l = 0; l < cfg.layers; ++l) {
    const std::size_t in_w = cfg.layer_in(l);
    const std::size_t out_w = cfg.head_out(l);
    const bool final_layer = (l + 1 == cfg.layers);
    LayerCache& lc = f.layers[l];
    lc.input = cur;
    lc.proj.resize(cfg.heads);
    lc.logits.resize(cfg.heads);
    lc.alpha.resize(cfg.heads);
    lc.agg.resize(cfg.heads);
    if (final_layer) lc.avg_pre.assign(n * cfg.dim, 0.0);

    std::vector<double> out(n * cfg.dim, 0.0);

    for (std::size_t k = 0; k < cfg.heads; ++k) {
      const double* W = p.at(p.layer_w[l * cfg.heads + k]);
      const double* a = p.at(p.layer_a[l * cfg.heads + k]);
      const double* a_src = a;
      const double* a_dst = a + out_w;

      auto& proj = lc.proj[k];
      proj.assign(n * out_w, 0.0);
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t c = 0; c < out_w; ++c) {
          double acc = 0.0;
          const double* wrow = W + c * in_w;
          const double* hrow = cur.data() + i * in_w;
          for (std::size_t b = 0; b < in_w; ++b) acc += wrow[b] * hrow[b];
          proj[i * out_w + c] = acc;
        }
      }
      std::vector<double> src_score(n, 0.0), dst_score(n, 0.0);
      for (std::size_t i = 0; i < n; ++i) {
        double s = 0.0, t = 0.0;
        for (std::size_t c = 0; c < out_w; ++c) {
          s += a_src[c] * proj[i * out_w + c];
          t += a_dst[c] * proj[i * out_w + c];
        }
        src_score[i] = s;
        dst_score[i] = t;
      }

      auto& logits = lc.logits[k];
      auto& alpha = lc.alpha[k];
      logits.assign(nb.ids.size(), 0.0);
      alpha.assign(nb.ids.size(), 0.0);
      auto& agg = lc.agg[k];
      agg.assign(n * out_w, 0.0);

      for (NodeId i = 0; i < n; ++i) {
        const auto row = nb.of(i);
        const std::size_t base = nb.offsets[i];
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t jj = 0; jj < row.size(); ++jj) {
          const double z = src_score[i] + dst_score[row[jj]];
          logits[base + jj] = z;
          const double e = z > 0.0 ? z : cfg.leaky_slope * z;
          mx = std::max(mx, e);
        }
        scratch.resize(row.size());
        for (std::size_t jj = 0; jj < row.size(); ++jj) {
          const double z = logits[base + jj];
          const double e = z > 0.0 ? z : cfg.leaky_slope * z;
          scratch[jj] = std::exp(e - mx);
          alpha[base + jj] = scratch[jj];
        }
        const double denom = stable_sum(scratch);
        for (std::size_t jj = 0; jj < row.size(); ++jj) alpha[base + jj] /= denom;

        for (std::size_t c = 0; c < out_w; ++c) {
          scratch.resize(row.size());
          for (std::size_t jj = 0; jj < row.size(); ++jj) {
            scratch[jj] = alpha[base + jj] * proj[row[jj] * out_w + c];
          }
          agg[i * out_w + c] = stable_sum(scratch);
        }
      }

      if (final_layer) {
        for (std::size_t idx = 0; idx < n * out_w; ++idx) {
          lc.avg_pre[idx] += agg[idx] / static_cast<double>(cfg.heads);
        }
      } else {
        for (std::size_t i = 0; i < n; ++i) {
          for (std::size_t c = 0; c < out_w; ++c) {
            out[i * cfg.dim + k * out_w + c] = elu(agg[i * out_w + c]);
          }
        }
      }
    }
    if (final_layer) {
      for (std::size_t idx = 0; idx < n * cfg.dim; ++idx) out[idx] = elu(lc.avg_pre[idx]);
    }
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t c = 0; c < cfg.dim; ++c) {
        if (!std::isfinite(out[i * cfg.dim + c])) {
          throw NumericError("gat_forward: non-finite activation at layer " + std::to_string(l) +
                             ", node " + std::to_string(i));
        }
      }
    }
    lc.out = out;
    cur = std::move(out);
  }

  f.final_gat = cur;
  const std::size_t d = cfg.dim;
  const std::size_t h = cfg.hidden();
  const double ln_eps = 1e-5;

  f.emb_hidden.assign(n * h, 0.0);
  f.emb_hidden_act.assign(n * h, 0.0);
  f.emb_mlp_out.assign(n * d, 0.0);
  f.ln_input.assign(n * d, 0.0);
  f.ln_mean.assign(n, 0.0);
  f.ln_inv_std.assign(n, 0.0);
  f.embeddings.assign(n * d, 0.0);
  f.met_hidden.assign(n * h, 0.0);
  f.met_hidden_act.assign(n * h, 0.0);
  f.factors.assign(n * d * cfg.rank, 0.0);

  const double* W1 = p.at(p.emb_w1);
  const double* b1 = p.at(p.emb_b1);
  const double* W2 = p.at(p.emb_w2);
  const double* b2 = p.at(p.emb_b2);
  const double* gamma = p.at(p.ln_gamma);
  const double* beta = p.at(p.ln_beta);
  const double* M1 = p.at(p.met_w1);
  const double* c1 = p.at(p.met_b1);
  const double* M2 = p.at(p.met_w2);
  const double* c2 = p.at(p.met_b2);

  for (std::size_t i = 0; i < n; ++i) {
    const double* g = f.final_gat.data() + i * d;
    for (std::size_t row = 0; row < h; ++row) {
      double acc = b1[row];
      for (std::size_t c = 0; c < d; ++c) acc += W1[row * d + c] * g[c];
      f.emb_hidden[i * h + row] = acc;
      f.emb_hidden_act[i * h + row] = std::tanh(acc);
    }
    for (std::size_t row = 0; row < d; ++row) {
      double acc = b2[row];
      for (std::size_t c = 0; c < h; ++c) acc += W2[row * h + c] * f.emb_hidden_act[i * h + c];
      f.emb_mlp_out[i * d + row] = acc;
      f.ln_input[i * d + row] = g[row] + acc;  // residual
    }
    double mean = 0.0;
    for (std::size_t c = 0; c < d; ++c) mean += f.ln_input[i * d + c];
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t c = 0; c < d; ++c) {
      const double t = f.ln_input[i * d + c] - mean;
      var += t * t;
    }
    var /= static_cast<double>(d);
    const double inv_std = 1.0 / std::sqrt(var + ln_eps);
    f.ln_mean[i] = mean;
    f.ln_inv_std[i] = inv_std;
    for (std::size_t c = 0; c < d; ++c) {
      const double xhat = (f.ln_input[i * d + c] - mean) * inv_std;
      f.embeddings[i * d + c] = gamma[c] * xhat + beta[c];
    }

    for (std::size_t row = 0; row < h; ++row) {
      double acc = c1[row];
      for (std::size_t c = 0; c < d; ++c) acc += M1[row * d + c] * g[c];
      f.met_hidden[i * h + row] = acc;
      f.met_hidden_act[i * h + row] = std::tanh(acc);
    }
    const std::size_t dr = d * cfg.rank;
    for (std::size_t row = 0; row < dr; ++row) {
      double acc = c2[row];
      for (std::size_t c = 0; c < h; ++c) acc += M2[row * h + c] * f.met_hidden_act[i * h + c];
      f.factors[i * dr + row] = acc;
    }
  }

  for (std::size_t idx = 0; idx < f.embeddings.size(); ++idx) {
    if (!std::isfinite(f.embeddings[idx])) {
      throw NumericError("gat_forward: non-finite embedding at node " + std::to_string(idx / d));
    }
  }
  for (std::size_t idx = 0; idx < f.factors.size(); ++idx) {
    if (!std::isfinite(f.factors[idx])) {
      throw NumericError("gat_forward: non-finite factor at node " +
                         std::to_string(idx / (d * cfg.rank)));
    }
  }
  if (!keep_cache) {
    f.layers.clear();
    f.layers.shrink_to_fit();
  }
  return f;
}

ForwardResult gat_forward(const GATParams& p, const NodeFeatures& x, const CorpusGraph& g,
                          bool keep_cache) {
  return gat_forward(p, x, build_neighbor_lists(g), keep_cache);
}

std::vector<double> gat_backward(const GATParams& p, const NeighborLists& nb,
                                 const ForwardResult& f, std::span<const double> d_embeddings,
                                 std::span<const double> d_factors) {
  if (!f.has_cache) throw DataError("gat_backward: forward cache required");
  const GatConfig& cfg = p.cfg;
  const std::size_t n = f.n;
  const std::size_t d = cfg.dim;
  const std::size_t h = cfg.hidden();
  const std::size_t dr = d * cfg.rank;
  if (d_embeddings.size() != n * d || d_factors.size() != n * dr) {
    throw DataError("gat_backward: gradient shape mismatch");
  }

  std::vector<double> grad(p.theta.size(), 0.0);
  std::vector<double> d_gat(n * d, 0.0);

  const double* W1 = p.at(p.emb_w1);
  const double* W2 = p.at(p.emb_w2);
  const double* gamma = p.at(p.ln_gamma);
  const double* M1 = p.at(p.met_w1);
  const double* M2 = p.at(p.met_w2);
  double* gW1 = grad.data() + p.emb_w1.offset;
  double* gb1 = grad.data() + p.emb_b1.offset;
  double* gW2 = grad.data() + p.emb_w2.offset;
  double* gb2 = grad.data() + p.emb_b2.offset;
  double* ggamma = grad.data() + p.ln_gamma.offset;
  double* gbeta = grad.data() + p.ln_beta.offset;
  double* gM1 = grad.data() + p.met_w1.offset;
  double* gc1 = grad.data() + p.met_b1.offset;
  double* gM2 = grad.data() + p.met_w2.offset;
  double* gc2 = grad.data() + p.met_b2.offset;

  std::vector<double> buf_h(h), buf_d(d);

  for (std::size_t i = 0; i < n; ++i) {
    const double* gat_row = f.final_gat.data() + i * d;

    // Metric head.
    const double* dfac = d_factors.data() + i * dr;
    std::fill(buf_h.begin(), buf_h.end(), 0.0);
    for (std::size_t row = 0; row < dr; ++row) {
      const double dv = dfac[row];
      if (dv == 0.0) continue;
      gc2[row] += dv;
      for (std::size_t c = 0; c < h; ++c) {
        gM2[row * h + c] += dv * f.met_hidden_act[i * h + c];
        buf_h[c] += M2[row * h + c] * dv;
      }
    }
    for (std::size_t c = 0; c < h; ++c) {
      const double act = f.met_hidden_act[i * h + c];
      const double dh = buf_h[c] * (1.0 - act * act);
      gc1[c] += dh;
      for (std::size_t b = 0; b < d; ++b) {
        gM1[c * d + b] += dh * gat_row[b];
        d_gat[i * d + b] += M1[c * d + b] * dh;
      }
    }

    // Embedding head: layer norm, then the residual MLP.
    const double* dy = d_embeddings.data() + i * d;
    const double inv_std = f.ln_inv_std[i];
    double mean_dxh = 0.0, mean_dxh_xh = 0.0;
    for (std::size_t c = 0; c < d; ++c) {
      const double xhat = (f.ln_input[i * d + c] - f.ln_mean[i]) * inv_std;
      ggamma[c] += dy[c] * xhat;
      gbeta[c] += dy[c];
      const double dxh = dy[c] * gamma[c];
      buf_d[c] = dxh;
      mean_dxh += dxh;
      mean_dxh_xh += dxh * xhat;
    }
    mean_dxh /= static_cast<double>(d);
    mean_dxh_xh /= static_cast<double>(d);
    // du in buf_d
    for (std::size_t c = 0; c < d; ++c) {
      const double xhat = (f.ln_input[i * d + c] - f.ln_mean[i]) * inv_std;
      buf_d[c] = inv_std * (buf_d[c] - mean_dxh - xhat * mean_dxh_xh);
      d_gat[i * d + c] += buf_d[c];  // residual branch
    }
    std::fill(buf_h.begin(), buf_h.end(), 0.0);
    for (std::size_t row = 0; row < d; ++row) {
      const double dm = buf_d[row];
      gb2[row] += dm;
      for (std::size_t c = 0; c < h; ++c) {
        gW2[row * h + c] += dm * f.emb_hidden_act[i * h + c];
        buf_h[c] += W2[row * h + c] * dm;
      }
    }
    for (std::size_t c = 0; c < h; ++c) {
      const double act = f.emb_hidden_act[i * h + c];
      const double dh = buf_h[c] * (1.0 - act * act);
      gb1[c] += dh;
      for (std::size_t b = 0; b < d; ++b) {
        gW1[c * d + b] += dh * gat_row[b];
        d_gat[i * d + b] += W1[c * d + b] * dh;
      }
    }
  }

  // Attention layers, top down.
  std::vector<double> dout = std::move(d_gat);
  for (std::size_t l = cfg.layers; l-- > 0;) {
    const LayerCache& lc = f.layers[l];
    const std::size_t in_w = cfg.layer_in(l);
    const std::size_t out_w = cfg.head_out(l);
    const bool final_layer = (l + 1 == cfg.layers);
    std::vector<double> din(n * in_w, 0.0);

    std::vector<double> dagg(n * out_w);
    std::vector<double> dproj(n * out_w);
    std::vector<double> dsrc(n), ddst(n);

    for (std::size_t k = 0; k < cfg.heads; ++k) {
      const double* W = p.at(p.layer_w[l * cfg.heads + k]);
      const double* a = p.at(p.layer_a[l * cfg.heads + k]);
      const double* a_src = a;
      const double* a_dst = a + out_w;
      double* gW = grad.data() + p.layer_w[l * cfg.heads + k].offset;
      double* ga = grad.data() + p.layer_a[l * cfg.heads + k].offset;
      const auto& proj = lc.proj[k];
      const auto& alpha = lc.alpha[k];
      const auto& logits = lc.logits[k];
      const auto& agg = lc.agg[k];

      if (final_layer) {
        for (std::size_t idx = 0; idx < n * out_w; ++idx) {
          dagg[idx] = dout[idx] * elu_grad(lc.avg_pre[idx]) / static_cast<double>(cfg.heads);
        }
      } else {
        for (std::size_t i = 0; i < n; ++i) {
          for (std::size_t c = 0; c < out_w; ++c) {
            dagg[i * out_w + c] =
                dout[i * cfg.dim + k * out_w + c] * elu_grad(agg[i * out_w + c]);
          }
        }
      }

      std::fill(dproj.begin(), dproj.end(), 0.0);
      std::fill(dsrc.begin(), dsrc.end(), 0.0);
      std::fill(ddst.begin(), ddst.end(), 0.0);

      for (NodeId i = 0; i < n; ++i) {
        const auto row = nb.of(i);
        const std::size_t base = nb.offsets[i];
        const double* gi = dagg.data() + i * out_w;

        double dot_alpha = 0.0;
        for (std::size_t jj = 0; jj < row.size(); ++jj) {
          const NodeId j = row[jj];
          double da = 0.0;
          const double* pj = proj.data() + j * out_w;
          for (std::size_t c = 0; c < out_w; ++c) {
            da += gi[c] * pj[c];
            dproj[j * out_w + c] += alpha[base + jj] * gi[c];
          }
          dot_alpha += alpha[base + jj] * da;
        }
        for (std::size_t jj = 0; jj < row.size(); ++jj) {
          const NodeId j = row[jj];
          double da = 0.0;
          const double* pj = proj.data() + j * out_w;
          for (std::size_t c = 0; c < out_w; ++c) da += gi[c] * pj[c];
          const double de = alpha[base + jj] * (da - dot_alpha);
          const double z = logits[base + jj];
          const double dz = de * (z > 0.0 ? 1.0 : cfg.leaky_slope);
          dsrc[i] += dz;
          ddst[j] += dz;
        }
      }

      for (std::size_t i = 0; i < n; ++i) {
        const double* pi = proj.data() + i * out_w;
        for (std::size_t c = 0; c < out_w; ++c) {
          dproj[i * out_w + c] += dsrc[i] * a_src[c] + ddst[i] * a_dst[c];
          ga[c] += dsrc[i] * pi[c];
          ga[out_w + c] += ddst[i] * pi[c];
        }
      }

      for (std::size_t i = 0; i < n; ++i) {
        const double* hin = lc.input.data() + i * in_w;
        const double* dpi = dproj.data() + i * out_w;
        for (std::size_t c = 0; c < out_w; ++c) {
          const double dv = dpi[c];
          if (dv == 0.0) continue;
          const double* wrow = W + c * in_w;
          for (std::size_t b = 0; b < in_w; ++b) {
            gW[c * in_w + b] += dv * hin[b];
            din[i * in_w + b] += wrow[b] * dv;
          }
        }
      }
    }
    dout = std::move(din);
  }
  return grad;
}

EmbeddingMatrix to_embedding_matrix(const ForwardResult& f) {
  EmbeddingMatrix e;
  e.dim = f.dim;
  e.data.assign(f.embeddings.begin(), f.embeddings.end());
  return e;
}

MetricFactorTensor to_factor_tensor(const ForwardResult& f, double epsilon) {
  MetricFactorTensor t;
  t.dim = f.dim;
  t.rank = f.rank;
  t.epsilon = epsilon;
  t.data.assign(f.factors.begin(), f.factors.end());
  return t;
}

// ---------------------------------------------------------------------------
// Hop cache

void HopDistanceCache::ensure(NodeId anchor) {
  if (done_.count(anchor)) return;
  done_.insert(anchor);
  std::deque<NodeId> frontier{anchor};
  std::unordered_map<NodeId, std::uint32_t> local{{anchor, 0}};
  hops_[(static_cast<std::uint64_t>(anchor) << 32) | anchor] = 0;
  while (!frontier.empty()) {
    const NodeId u = frontier.front();
    frontier.pop_front();
    const std::uint32_t du = local[u];
    if (du >= radius_) continue;
    for (NodeId v : graph_->neighbors(u)) {
      if (local.count(v)) continue;
      local[v] = du + 1;
      hops_[(static_cast<std::uint64_t>(anchor) << 32) | v] = du + 1;
      frontier.push_back(v);
    }
  }
}

std::optional<std::uint32_t> HopDistanceCache::hop(NodeId i, NodeId j) const {
  auto it = hops_.find((static_cast<std::uint64_t>(i) << 32) | j);
  if (it != hops_.end()) return it->second;
  it = hops_.find((static_cast<std::uint64_t>(j) << 32) | i);
  if (it != hops_.end()) return it->second;
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Negative sampling

std::vector<NegativeSample> sample_negatives(std::span<const NodeId> anchors,
                                             const ForwardResult& reps, const CorpusGraph& g,
                                             const LossConfig& cfg, Rng& rng) {
  const std::size_t n = g.node_count();
  const std::size_t batch = anchors.size();
  if (batch == 0) throw DataError("sample_negatives: empty anchor batch");
  const std::size_t inbatch_target =
      cfg.inbatch_negatives == static_cast<std::size_t>(-1) ? batch - 1 : cfg.inbatch_negatives;
  if (inbatch_target > batch - 1) {
    throw DataError("sample_negatives: batch of " + std::to_string(batch) +
                    " too small for " + std::to_string(inbatch_target) + " in-batch negatives");
  }

  std::vector<NegativeSample> out;
  out.reserve(batch);
  for (NodeId anchor : anchors) {
    std::vector<char> excluded(n, 0);
    excluded[anchor] = 1;
    for (NodeId j : g.out_edges.neighbors(anchor)) excluded[j] = 1;

    std::vector<NodeId> eligible;
    eligible.reserve(n);
    for (NodeId v = 0; v < n; ++v) {
      if (!excluded[v]) eligible.push_back(v);
    }
    if (eligible.size() < cfg.hard_negatives + cfg.random_negatives) {
      throw DataError("sample_negatives: only " + std::to_string(eligible.size()) +
                      " eligible negatives for anchor " + std::to_string(anchor) + ", need " +
                      std::to_string(cfg.hard_negatives + cfg.random_negatives));
    }

    NegativeSample s;
    s.anchor = anchor;
    std::vector<char> taken(n, 0);

    // Hard: highest cosine similarity among non-neighbors.
    std::vector<std::pair<double, NodeId>> scored;
    scored.reserve(eligible.size());
    for (NodeId v : eligible) {
      scored.emplace_back(cosine(reps.emb_row(anchor), reps.emb_row(v)), v);
    }
    std::partial_sort(scored.begin(),
                      scored.begin() + static_cast<std::ptrdiff_t>(
                                           std::min(cfg.hard_negatives, scored.size())),
                      scored.end(), [](const auto& a, const auto& b) {
                        if (a.first != b.first) return a.first > b.first;
                        return a.second < b.second;
                      });
    for (std::size_t t = 0; t < cfg.hard_negatives; ++t) {
      s.negatives.push_back(scored[t].second);
      s.provenance.push_back(NegativeKind::Hard);
      taken[scored[t].second] = 1;
    }

    // Random: uniform over the remaining eligible pool.
    std::vector<NodeId> pool;
    pool.reserve(eligible.size());
    for (NodeId v : eligible) {
      if (!taken[v]) pool.push_back(v);
    }
    for (std::size_t t = 0; t < cfg.random_negatives && !pool.empty(); ++t) {
      const std::size_t pick = rng.below(pool.size());
      const NodeId v = pool[pick];
      pool[pick] = pool.back();
      pool.pop_back();
      s.negatives.push_back(v);
      s.provenance.push_back(NegativeKind::Random);
      taken[v] = 1;
    }

    // In-batch: other anchors, in batch order.
    std::size_t got = 0;
    for (NodeId other : anchors) {
      if (got >= inbatch_target) break;
      if (other == anchor || excluded[other] || taken[other]) continue;
      s.negatives.push_back(other);
      s.provenance.push_back(NegativeKind::InBatch);
      taken[other] = 1;
      ++got;
    }
    out.push_back(std::move(s));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Losses over representations

EmbeddingGrads zero_grads(const ForwardResult& reps) {
  EmbeddingGrads g;
  g.d_embeddings.assign(reps.n * reps.dim, 0.0);
  g.d_factors.assign(reps.n * reps.dim * reps.rank, 0.0);
  return g;
}

namespace {

// One surrogate step d_{G_u}(u, v) with gradients scaled by gscale.
double step_distance(const ForwardResult& reps, double eps, NodeId u, NodeId v, double gscale,
                     EmbeddingGrads* grads) {
  const std::size_t d = reps.dim;
  const std::size_t r = reps.rank;
  const double* hu = reps.embeddings.data() + std::size_t(u) * d;
  const double* hv = reps.embeddings.data() + std::size_t(v) * d;
  const double* lu = reps.factors.data() + std::size_t(u) * d * r;

  std::vector<double> delta(d), projv(r, 0.0);
  double sq = 0.0;
  for (std::size_t row = 0; row < d; ++row) {
    delta[row] = hu[row] - hv[row];
    sq += delta[row] * delta[row];
    for (std::size_t c = 0; c < r; ++c) projv[c] += lu[row * r + c] * delta[row];
  }
  double quad = 0.0;
  for (std::size_t c = 0; c < r; ++c) quad += projv[c] * projv[c];
  const double val = std::sqrt(quad + eps * sq);

  if (grads && gscale != 0.0 && val > 1e-300) {
    for (std::size_t row = 0; row < d; ++row) {
      double acc = eps * delta[row];
      for (std::size_t c = 0; c < r; ++c) acc += lu[row * r + c] * projv[c];
      const double gd = gscale * acc / val;
      grads->d_embeddings[std::size_t(u) * d + row] += gd;
      grads->d_embeddings[std::size_t(v) * d + row] -= gd;
      for (std::size_t c = 0; c < r; ++c) {
        grads->d_factors[std::size_t(u) * d * r + row * r + c] +=
            gscale * delta[row] * projv[c] / val;
      }
    }
  }
  return val;
}

// Differentiable geodesic surrogate: one step for adjacent pairs, the frozen
// shortest path for non-adjacent ones, one step as a declared fallback.
double surrogate_distance(const ForwardResult& reps, double eps, const CorpusGraph& g,
                          const FrozenPaths* paths, NodeId i, NodeId j, double gscale,
                          EmbeddingGrads* grads) {
  if (g.symmetric_view.has_edge(i, j)) return step_distance(reps, eps, i, j, gscale, grads);
  if (paths) {
    if (const auto* seq = paths->find(i, j)) {
      double acc = 0.0;
      for (std::size_t t = 0; t + 1 < seq->size(); ++t) {
        acc += step_distance(reps, eps, (*seq)[t], (*seq)[t + 1], gscale, grads);
      }
      return acc;
    }
  }
  return step_distance(reps, eps, i, j, gscale, grads);
}

}  // namespace

FrozenPaths compute_frozen_paths(const ForwardResult& reps, const CorpusGraph& g,
                                 const TrainBatch& batch, double epsilon) {
  // Collect the non-adjacent pairs the losses will query, grouped by source.
  std::map<NodeId, std::vector<NodeId>> wanted;
  auto want = [&](NodeId a, NodeId b) {
    if (!g.symmetric_view.has_edge(a, b) && a != b) wanted[a].push_back(b);
  };
  for (const auto& item : batch.contrast) {
    for (NodeId neg : item.negatives) want(item.anchor, neg);
  }
  for (const auto& t : batch.rank) want(t.i, t.k);

  MetricSpace<double> space;
  space.embeddings = reps.embeddings.data();
  space.factors = reps.factors.data();
  space.n = reps.n;
  space.dim = reps.dim;
  space.rank = reps.rank;
  space.epsilon = epsilon;

  FrozenPaths out;
  for (auto& [src, targets] : wanted) {
    const std::pair<NodeId, double> seed{src, 0.0};
    const auto res = multi_source_dijkstra(std::span(&seed, 1), g.symmetric_view, space);
    std::sort(targets.begin(), targets.end());
    targets.erase(std::unique(targets.begin(), targets.end()), targets.end());
    for (NodeId t : targets) {
      if (!res.settled[t]) continue;  // unreachable: losses fall back to one step
      std::vector<NodeId> seq;
      for (NodeId v = t; v != kNoNode; v = res.parent[v]) seq.push_back(v);
      std::reverse(seq.begin(), seq.end());
      out.paths[FrozenPaths::key(src, t)] = std::move(seq);
    }
  }
  return out;
}

double loss_contrastive(const ForwardResult& reps, double epsilon, const CorpusGraph& g,
                        std::span<const ContrastItem> items, const FrozenPaths* paths, double tau,
                        EmbeddingGrads* grads) {
  if (items.empty()) throw DataError("loss_contrastive: empty batch");
  if (tau <= 0.0) throw DataError("loss_contrastive: temperature must be > 0");
  const double inv_b = 1.0 / static_cast<double>(items.size());
  double total = 0.0;

  std::vector<double> dist;
  for (const auto& item : items) {
    if (item.negatives.empty()) {
      throw DataError("loss_contrastive: empty negative set for anchor " +
                      std::to_string(item.anchor));
    }
    dist.clear();
    dist.push_back(surrogate_distance(reps, epsilon, g, paths, item.anchor, item.positive, 0.0, nullptr));
    for (NodeId neg : item.negatives) {
      dist.push_back(surrogate_distance(reps, epsilon, g, paths, item.anchor, neg, 0.0, nullptr));
    }
    // softmax over scores -d/tau; the positive participates in the partition.
    double mx = -std::numeric_limits<double>::infinity();
    for (double dd : dist) mx = std::max(mx, -dd / tau);
    double lse = 0.0;
    for (double dd : dist) lse += std::exp(-dd / tau - mx);
    lse = mx + std::log(lse);
    total += (dist[0] / tau + lse) * inv_b;

    if (grads) {
      const double p_pos = std::exp(-dist[0] / tau - lse);
      surrogate_distance(reps, epsilon, g, paths, item.anchor, item.positive,
                         inv_b * (1.0 - p_pos) / tau, grads);
      for (std::size_t m = 0; m < item.negatives.size(); ++m) {
        const double pm = std::exp(-dist[m + 1] / tau - lse);
        surrogate_distance(reps, epsilon, g, paths, item.anchor, item.negatives[m],
                           -inv_b * pm / tau, grads);
      }
    }
  }
  return total;
}

double loss_ranking(const ForwardResult& reps, double epsilon, const CorpusGraph& g,
                    std::span<const RankTriple> triples, const FrozenPaths* paths, double margin,
                    EmbeddingGrads* grads) {
  if (triples.empty()) throw DataError("loss_ranking: empty batch");
  const double inv_b = 1.0 / static_cast<double>(triples.size());
  double total = 0.0;
  for (const auto& t : triples) {
    if (!g.out_edges.has_edge(t.i, t.j)) {
      throw DataError("loss_ranking: (" + std::to_string(t.i) + "," + std::to_string(t.j) +
                      ") is not a citation edge");
    }
    if (t.k == t.i || g.out_edges.has_edge(t.i, t.k)) {
      throw DataError("loss_ranking: negative " + std::to_string(t.k) + " is a neighbor of " +
                      std::to_string(t.i));
    }
    const double dj = surrogate_distance(reps, epsilon, g, paths, t.i, t.j, 0.0, nullptr);
    const double dk = surrogate_distance(reps, epsilon, g, paths, t.i, t.k, 0.0, nullptr);
    const double hinge = dj - dk + margin;
    if (hinge > 0.0) {
      total += hinge * inv_b;
      if (grads) {
        surrogate_distance(reps, epsilon, g, paths, t.i, t.j, inv_b, grads);
        surrogate_distance(reps, epsilon, g, paths, t.i, t.k, -inv_b, grads);
      }
    }
  }
  return total;
}

double loss_smoothness(const ForwardResult& reps, const CorpusGraph& g, EmbeddingGrads* grads) {
  const std::size_t edges = g.out_edges.edge_count();
  if (edges == 0) return 0.0;
  const double inv_e = 1.0 / static_cast<double>(edges);
  const std::size_t slab = reps.dim * reps.rank;
  double total = 0.0;
  for (NodeId i = 0; i < g.node_count(); ++i) {
    for (NodeId j : g.out_edges.neighbors(i)) {
      const double* li = reps.factors.data() + std::size_t(i) * slab;
      const double* lj = reps.factors.data() + std::size_t(j) * slab;
      for (std::size_t x = 0; x < slab; ++x) {
        const double diff = li[x] - lj[x];
        total += diff * diff * inv_e;
        if (grads) {
          grads->d_factors[std::size_t(i) * slab + x] += 2.0 * diff * inv_e;
          grads->d_factors[std::size_t(j) * slab + x] -= 2.0 * diff * inv_e;
        }
      }
    }
  }
  return total;
}

namespace {

// d cos(a,b) / da accumulated with scale into out.
void add_cosine_grad(std::span<const double> a, std::span<const double> b, double scale,
                     double* out) {
  const double na = norm_f64(a);
  const double nb = norm_f64(b);
  if (na < 1e-12 || nb < 1e-12) return;
  const double sim = dot_f64(a, b) / (na * nb);
  for (std::size_t c = 0; c < a.size(); ++c) {
    out[c] += scale * (b[c] / (na * nb) - sim * a[c] / (na * na));
  }
}

}  // namespace

double loss_hierarchical(const ForwardResult& reps, std::span<const HierTriple> triples,
                         double hier_margin, EmbeddingGrads* grads,
                         const HopDistanceCache* validate) {
  if (triples.empty()) throw DataError("loss_hierarchical: empty batch");
  const double inv_b = 1.0 / static_cast<double>(triples.size());
  const std::size_t d = reps.dim;
  double total = 0.0;
  for (const auto& t : triples) {
    if (validate) {
      const auto hj = validate->hop(t.i, t.j);
      if (!hj) throw DataError("loss_hierarchical: hop(i,j) unknown within the cache radius");
      const auto hk = validate->hop(t.i, t.k);
      if (hk && *hk <= *hj) {
        throw DataError("loss_hierarchical: triple violates hop ordering");
      }
    }
    const auto hi = reps.emb_row(t.i);
    const auto hj = reps.emb_row(t.j);
    const auto hk = reps.emb_row(t.k);
    if (norm_f64(hi) < 1e-12 || norm_f64(hj) < 1e-12 || norm_f64(hk) < 1e-12) continue;
    const double sim_ij = cosine(hi, hj);
    const double sim_ik = cosine(hi, hk);
    const double hinge = sim_ik - sim_ij + hier_margin;
    if (hinge > 0.0) {
      total += hinge * inv_b;
      if (grads) {
        double* gi = grads->d_embeddings.data() + std::size_t(t.i) * d;
        double* gj = grads->d_embeddings.data() + std::size_t(t.j) * d;
        double* gk = grads->d_embeddings.data() + std::size_t(t.k) * d;
        add_cosine_grad(hi, hk, inv_b, gi);
        add_cosine_grad(hk, hi, inv_b, gk);
        add_cosine_grad(hi, hj, -inv_b, gi);
        add_cosine_grad(hj, hi, -inv_b, gj);
      }
    }
  }
  return total;
}

LossBreakdown total_loss(const ForwardResult& reps, const CorpusGraph& g, const TrainBatch& batch,
                         const FrozenPaths* paths, const LossConfig& cfg, double epsilon,
                         EmbeddingGrads* grads) {
  LossBreakdown bd;
  EmbeddingGrads term = grads ? zero_grads(reps) : EmbeddingGrads{};
  auto fold = [&](double weight) {
    if (!grads || weight == 0.0) return;
    for (std::size_t x = 0; x < term.d_embeddings.size(); ++x) {
      grads->d_embeddings[x] += weight * term.d_embeddings[x];
      term.d_embeddings[x] = 0.0;
    }
    for (std::size_t x = 0; x < term.d_factors.size(); ++x) {
      grads->d_factors[x] += weight * term.d_factors[x];
      term.d_factors[x] = 0.0;
    }
  };

  EmbeddingGrads* tp = grads ? &term : nullptr;
  if (!batch.contrast.empty()) {
    bd.contrast = loss_contrastive(reps, epsilon, g, batch.contrast, paths, cfg.temperature, tp);
    fold(1.0);
  }
  if (!batch.rank.empty()) {
    bd.rank = loss_ranking(reps, epsilon, g, batch.rank, paths, cfg.margin, tp);
    fold(cfg.lambda_cite);
  }
  bd.smooth = loss_smoothness(reps, g, tp);
  fold(cfg.lambda_smooth);
  if (!batch.hier.empty()) {
    bd.hier = loss_hierarchical(reps, batch.hier, cfg.hier_margin, tp);
    fold(cfg.lambda_hier);
  }
  bd.total = bd.contrast + cfg.lambda_cite * bd.rank + cfg.lambda_smooth * bd.smooth +
             cfg.lambda_hier * bd.hier;
  return bd;
}

// ---------------------------------------------------------------------------
// Batch construction, training, gradient checks

TrainBatch build_batch(const Corpus& corpus, const ForwardResult& reps, const LossConfig& loss,
                       std::size_t batch_size, std::size_t rank_per_edge,
                       std::size_t hier_per_anchor, Rng& rng, HopDistanceCache& hops) {
  const CorpusGraph& g = corpus.graph;
  const std::size_t n = g.node_count();
  auto edges = g.out_edges.edge_list();
  if (edges.empty()) throw DataError("build_batch: corpus has no citation edges");
  if (edges.size() > batch_size) {
    rng.shuffle(edges);
    edges.resize(batch_size);
    std::sort(edges.begin(), edges.end());
  }

  std::vector<NodeId> anchors;
  anchors.reserve(edges.size());
  for (auto [i, j] : edges) anchors.push_back(i);
  std::sort(anchors.begin(), anchors.end());
  anchors.erase(std::unique(anchors.begin(), anchors.end()), anchors.end());

  const auto negs = sample_negatives(anchors, reps, g, loss, rng);
  std::unordered_map<NodeId, std::size_t> anchor_slot;
  for (std::size_t s = 0; s < anchors.size(); ++s) anchor_slot[anchors[s]] = s;

  TrainBatch batch;
  for (auto [i, j] : edges) {
    ContrastItem item;
    item.anchor = i;
    item.positive = j;
    item.negatives = negs[anchor_slot[i]].negatives;
    batch.contrast.push_back(std::move(item));
  }

  // Ranking triples: reuse the sampled edges, draw k uniformly from the
  // anchor's non-neighbors.
  for (auto [i, j] : edges) {
    std::vector<char> excluded(n, 0);
    excluded[i] = 1;
    for (NodeId v : g.out_edges.neighbors(i)) excluded[v] = 1;
    std::vector<NodeId> pool;
    for (NodeId v = 0; v < n; ++v) {
      if (!excluded[v]) pool.push_back(v);
    }
    for (std::size_t t = 0; t < rank_per_edge && !pool.empty(); ++t) {
      batch.rank.push_back({i, j, pool[rng.below(pool.size())]});
    }
  }

  // Hierarchical triples: j within two hops, k strictly farther (or beyond
  // the cache radius).
  for (NodeId i : anchors) {
    hops.ensure(i);
    std::vector<NodeId> near;
    std::vector<std::pair<NodeId, std::uint32_t>> known;
    for (NodeId v = 0; v < n; ++v) {
      if (v == i) continue;
      const auto hv = hops.hop(i, v);
      if (hv) {
        known.emplace_back(v, *hv);
        if (*hv >= 1 && *hv <= 2) near.push_back(v);
      }
    }
    if (near.empty()) continue;
    for (std::size_t t = 0; t < hier_per_anchor; ++t) {
      const NodeId j = near[rng.below(near.size())];
      const auto hj = *hops.hop(i, j);
      std::vector<NodeId> far;
      for (NodeId v = 0; v < n; ++v) {
        if (v == i || v == j) continue;
        const auto hv = hops.hop(i, v);
        if (!hv || *hv > hj) far.push_back(v);  // unknown hop means > radius
      }
      if (far.empty()) continue;
      batch.hier.push_back({i, j, far[rng.below(far.size())]});
    }
  }
  return batch;
}

namespace {

struct AdamState {
  std::vector<double> m, v;
  std::size_t t = 0;
};

void optimizer_step(std::vector<double>& theta, const std::vector<double>& grad, double lr,
                    const std::string& kind, AdamState& adam) {
  if (kind == "sgd") {
    for (std::size_t i = 0; i < theta.size(); ++i) theta[i] -= lr * grad[i];
    return;
  }
  if (kind != "adam") throw DataError("unknown optimizer '" + kind + "'");
  constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  if (adam.m.empty()) {
    adam.m.assign(theta.size(), 0.0);
    adam.v.assign(theta.size(), 0.0);
  }
  adam.t++;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(adam.t));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(adam.t));
  for (std::size_t i = 0; i < theta.size(); ++i) {
    adam.m[i] = b1 * adam.m[i] + (1.0 - b1) * grad[i];
    adam.v[i] = b2 * adam.v[i] + (1.0 - b2) * grad[i] * grad[i];
    theta[i] -= lr * (adam.m[i] / c1) / (std::sqrt(adam.v[i] / c2) + eps);
  }
}

}  // namespace

TrainResult train_toy(const Corpus& corpus, const TrainConfig& cfg) {
  TrainConfig tc = cfg;
  tc.gat.input_dim = corpus.features.dim;
  check_config(tc.gat);

  GATParams params = init_params(tc.gat, tc.seed);
  const NeighborLists nb = build_neighbor_lists(corpus.graph);
  HopDistanceCache hops(corpus.graph.symmetric_view, tc.loss.hop_radius);
  Rng rng(tc.seed ^ 0xd1b54a32d192ed03ull);

  TrainBatch batch;
  FrozenPaths paths;
  AdamState adam;
  TrainResult out;

  for (std::size_t epoch = 0; epoch < tc.epochs; ++epoch) {
    const bool refresh_batch = epoch == 0 || (tc.neg_refresh > 0 && epoch % tc.neg_refresh == 0);
    const bool refresh_paths = epoch == 0 || (tc.path_refresh > 0 && epoch % tc.path_refresh == 0);
    if (refresh_batch || refresh_paths) {
      const ForwardResult snap = gat_forward(params, corpus.features, nb, false);
      if (refresh_batch) {
        batch = build_batch(corpus, snap, tc.loss, tc.batch_size, tc.rank_triples_per_edge,
                            tc.hier_triples_per_anchor, rng, hops);
      }
      if (refresh_paths) paths = compute_frozen_paths(snap, corpus.graph, batch, tc.gat.epsilon);
    }

    ForwardResult reps = gat_forward(params, corpus.features, nb, true);
    EmbeddingGrads grads = zero_grads(reps);
    const LossBreakdown bd =
        total_loss(reps, corpus.graph, batch, &paths, tc.loss, tc.gat.epsilon, &grads);
    if (!std::isfinite(bd.total)) {
      throw NumericError("train_toy: loss diverged (non-finite) at epoch " +
                         std::to_string(epoch));
    }
    out.trace.push_back(bd);
    const auto grad = gat_backward(params, nb, reps, grads.d_embeddings, grads.d_factors);
    optimizer_step(params.theta, grad, tc.lr, tc.optimizer, adam);
  }

  const ForwardResult final_reps = gat_forward(params, corpus.features, nb, false);
  out.embeddings = to_embedding_matrix(final_reps);
  out.factors = to_factor_tensor(final_reps, tc.gat.epsilon);
  out.params = std::move(params);
  return out;
}

std::string trace_csv(std::span<const LossBreakdown> trace) {
  std::string out = "epoch,total,contrast,rank,smooth,hier\n";
  char buf[192];
  for (std::size_t e = 0; e < trace.size(); ++e) {
    std::snprintf(buf, sizeof(buf), "%zu,%.10f,%.10f,%.10f,%.10f,%.10f\n", e, trace[e].total,
                  trace[e].contrast, trace[e].rank, trace[e].smooth, trace[e].hier);
    out += buf;
  }
  return out;
}

double grad_check(const Corpus& corpus, const TrainConfig& cfg, LossTerm term, std::size_t probes,
                  double step) {
  TrainConfig tc = cfg;
  tc.gat.input_dim = corpus.features.dim;
  check_config(tc.gat);

  GATParams params = init_params(tc.gat, tc.seed);
  const NeighborLists nb = build_neighbor_lists(corpus.graph);
  HopDistanceCache hops(corpus.graph.symmetric_view, tc.loss.hop_radius);
  Rng rng(tc.seed ^ 0xd1b54a32d192ed03ull);

  const ForwardResult snap = gat_forward(params, corpus.features, nb, false);
  const TrainBatch batch = build_batch(corpus, snap, tc.loss, tc.batch_size,
                                       tc.rank_triples_per_edge, tc.hier_triples_per_anchor, rng,
                                       hops);
  const FrozenPaths paths = compute_frozen_paths(snap, corpus.graph, batch, tc.gat.epsilon);

  auto eval_term = [&](const ForwardResult& reps, EmbeddingGrads* grads) -> double {
    switch (term) {
      case LossTerm::Contrastive:
        return loss_contrastive(reps, tc.gat.epsilon, corpus.graph, batch.contrast, &paths,
                                tc.loss.temperature, grads);
      case LossTerm::Ranking:
        return loss_ranking(reps, tc.gat.epsilon, corpus.graph, batch.rank, &paths, tc.loss.margin,
                            grads);
      case LossTerm::Smoothness:
        return loss_smoothness(reps, corpus.graph, grads);
      case LossTerm::Hierarchical:
        return loss_hierarchical(reps, batch.hier, tc.loss.hier_margin, grads);
      case LossTerm::Total:
        if (grads) {
          return total_loss(reps, corpus.graph, batch, &paths, tc.loss, tc.gat.epsilon, grads).total;
        }
        return total_loss(reps, corpus.graph, batch, &paths, tc.loss, tc.gat.epsilon, nullptr).total;
    }
    throw DataError("grad_check: unknown loss term");
  };

  // Analytic gradient.
  ForwardResult reps = gat_forward(params, corpus.features, nb, true);
  EmbeddingGrads grads = zero_grads(reps);
  eval_term(reps, &grads);
  const std::vector<double> analytic =
      gat_backward(params, nb, reps, grads.d_embeddings, grads.d_factors);

  // Probe indices spread across every tensor.
  std::vector<TensorRef> tensors = params.layer_w;
  tensors.insert(tensors.end(), params.layer_a.begin(), params.layer_a.end());
  for (const TensorRef* r : {&params.emb_w1, &params.emb_b1, &params.emb_w2, &params.emb_b2,
                             &params.ln_gamma, &params.ln_beta, &params.met_w1, &params.met_b1,
                             &params.met_w2, &params.met_b2}) {
    tensors.push_back(*r);
  }
  const std::size_t per_tensor = std::max<std::size_t>(1, probes / tensors.size());
  std::vector<std::size_t> idx;
  for (const auto& r : tensors) {
    for (std::size_t t = 0; t < std::min(per_tensor, r.size()); ++t) {
      idx.push_back(r.offset + rng.below(r.size()));
    }
  }
  std::sort(idx.begin(), idx.end());
  idx.erase(std::unique(idx.begin(), idx.end()), idx.end());

  double max_rel = 0.0;
  for (std::size_t i : idx) {
    const double saved = params.theta[i];
    params.theta[i] = saved + step;
    const double fp = eval_term(gat_forward(params, corpus.features, nb, false), nullptr);
    params.theta[i] = saved - step;
    const double fm = eval_term(gat_forward(params, corpus.features, nb, false), nullptr);
    params.theta[i] = saved;
    if (!std::isfinite(fp) || !std::isfinite(fm)) {
      throw NumericError("grad_check: non-finite loss at probe point");
    }
    const double fd = (fp - fm) / (2.0 * step);
    const double rel = std::abs(analytic[i] - fd) / std::max({std::abs(analytic[i]), std::abs(fd), 1e-6});
    max_rel = std::max(max_rel, rel);
  }
  return max_rel;
}

double quadratic_grad_check(std::size_t nparams, std::uint64_t seed, double step) {
  Rng rng(seed);
  std::vector<double> theta(nparams);
  // magnitudes bounded away from zero so relative errors are well conditioned
  for (auto& x : theta) x = (rng.below(2) ? 1.0 : -1.0) * rng.uniform(0.5, 1.5);
  auto f = [&]() {
    double s = 0.0;
    for (double x : theta) s += x * x;
    return s;
  };
  double max_rel = 0.0;
  for (std::size_t i = 0; i < nparams; ++i) {
    const double analytic = 2.0 * theta[i];
    const double saved = theta[i];
    theta[i] = saved + step;
    const double fp = f();
    theta[i] = saved - step;
    const double fm = f();
    theta[i] = saved;
    const double fd = (fp - fm) / (2.0 * step);
    const double rel = std::abs(analytic - fd) / std::max({std::abs(analytic), std::abs(fd), 1e-6});
    max_rel = std::max(max_rel, rel);
  }
  return max_rel;
}

}  // namespace gss
