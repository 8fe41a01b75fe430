#pragma once

#include <span>
#include <vector>

#include "gss/corpus.hpp"

namespace gss {

// d_L(a, b) = sqrt(||L^T (a - b)||^2 + eps * ||a - b||^2), the low-rank form
// of the local Mahalanobis distance under G = L L^T + eps I. O(d*r) work,
// 64-bit accumulation regardless of storage type.
template <typename TL, typename TA, typename TB>
double local_distance_span(std::span<const TL> factor_slab, std::size_t dim, std::size_t rank,
                           double epsilon, std::span<const TA> a, std::span<const TB> b) {
  double quad = 0.0;   // ||L^T delta||^2, accumulated column-wise
  double sq = 0.0;     // ||delta||^2
  std::vector<double> proj(rank, 0.0);
  for (std::size_t row = 0; row < dim; ++row) {
    const double delta = static_cast<double>(a[row]) - static_cast<double>(b[row]);
    sq += delta * delta;
    const TL* lrow = factor_slab.data() + row * rank;
    for (std::size_t c = 0; c < rank; ++c) {
      proj[c] += static_cast<double>(lrow[c]) * delta;
    }
  }
  for (std::size_t c = 0; c < rank; ++c) quad += proj[c] * proj[c];
  return std::sqrt(quad + epsilon * sq);
}

// Local distance from node i to an arbitrary target vector, using node i's
// metric factors.
double local_distance(NodeId i, std::span<const double> target,
                      const MetricFactorTensor& factors, const EmbeddingMatrix& embeddings);
double local_distance(NodeId i, std::span<const float> target,
                      const MetricFactorTensor& factors, const EmbeddingMatrix& embeddings);

// Dense reconstruction G_i = L_i L_i^T + eps I, row-major d x d, 64-bit.
std::vector<double> dense_metric(NodeId i, const MetricFactorTensor& factors);

// Reference evaluation sqrt(delta^T G delta) against a dense metric; the
// oracle counterpart of the low-rank kernel.
double dense_quadratic_distance(std::span<const double> metric, std::size_t dim,
                                std::span<const double> delta);

struct EigenDecomposition {
  std::vector<double> values;   // descending
  std::vector<double> vectors;  // row-major d x d, row k = eigenvector of values[k]
};

// Cyclic Jacobi eigendecomposition for symmetric matrices, d <= 512.
EigenDecomposition jacobi_eigen(std::span<const double> matrix, std::size_t dim);

struct SpectrumReport {
  std::vector<double> eigenvalues;  // descending
  double rank_r_error = 0.0;        // Frobenius error of the rank-r reconstruction
  double closed_form_error = 0.0;   // sqrt(sum_{i>r} (lambda_i - eps)^2)
};

// Builds the rank-r factor from the top-r eigenpairs of a symmetric positive
// definite reference metric (columns sqrt(lambda_k - eps) * u_k), measures the
// Frobenius error of G - (L L^T + eps I), and checks it against the closed
// form within 1e-8. Requires lambda_r >= eps; otherwise the construction is
// inapplicable and a DataError is thrown.
SpectrumReport spectrum_and_rank_error(std::span<const double> metric, std::size_t dim,
                                       std::size_t rank, double epsilon);

double spectrum_closed_form_error(std::span<const double> eigenvalues_desc, std::size_t rank,
                                  double epsilon);

}  // namespace gss
