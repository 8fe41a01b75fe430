#include "gss/metric.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace gss {

double local_distance(NodeId i, std::span<const double> target,
                      const MetricFactorTensor& factors, const EmbeddingMatrix& embeddings) {
  if (target.size() != embeddings.dim) {
    throw DataError("local_distance: target dim " + std::to_string(target.size()) +
                    " != embedding dim " + std::to_string(embeddings.dim));
  }
  return local_distance_span(factors.slab(i), factors.dim, factors.rank, factors.epsilon,
                             embeddings.row(i), target);
}

double local_distance(NodeId i, std::span<const float> target,
                      const MetricFactorTensor& factors, const EmbeddingMatrix& embeddings) {
  if (target.size() != embeddings.dim) {
    throw DataError("local_distance: target dim " + std::to_string(target.size()) +
                    " != embedding dim " + std::to_string(embeddings.dim));
  }
  return local_distance_span(factors.slab(i), factors.dim, factors.rank, factors.epsilon,
                             embeddings.row(i), target);
}

std::vector<double> dense_metric(NodeId i, const MetricFactorTensor& factors) {
  const std::size_t d = factors.dim;
  const std::size_t r = factors.rank;
  const auto slab = factors.slab(i);
  std::vector<double> g(d * d, 0.0);
  for (std::size_t a = 0; a < d; ++a) {
    for (std::size_t b = 0; b <= a; ++b) {
      double acc = 0.0;
      for (std::size_t c = 0; c < r; ++c) {
        acc += static_cast<double>(slab[a * r + c]) * static_cast<double>(slab[b * r + c]);
      }
      g[a * d + b] = acc;
      g[b * d + a] = acc;
    }
    g[a * d + a] += factors.epsilon;
  }
  return g;
}

double dense_quadratic_distance(std::span<const double> metric, std::size_t dim,
                                std::span<const double> delta) {
  double acc = 0.0;
  for (std::size_t a = 0; a < dim; ++a) {
    double row = 0.0;
    for (std::size_t b = 0; b < dim; ++b) row += metric[a * dim + b] * delta[b];
    acc += delta[a] * row;
  }
  return std::sqrt(std::max(acc, 0.0));
}

EigenDecomposition jacobi_eigen(std::span<const double> matrix, std::size_t dim) {
  if (dim == 0 || matrix.size() != dim * dim) throw DataError("jacobi_eigen: bad matrix shape");
  if (dim > 512) throw DataError("jacobi_eigen: dim > 512 unsupported");

  std::vector<double> a(matrix.begin(), matrix.end());
  std::vector<double> v(dim * dim, 0.0);
  for (std::size_t i = 0; i < dim; ++i) v[i * dim + i] = 1.0;

  auto off_norm = [&]() {
    double s = 0.0;
    for (std::size_t p = 0; p < dim; ++p) {
      for (std::size_t q = p + 1; q < dim; ++q) s += a[p * dim + q] * a[p * dim + q];
    }
    return std::sqrt(2.0 * s);
  };

  double scale = 0.0;
  for (double x : a) scale = std::max(scale, std::abs(x));
  const double tol = (scale == 0.0 ? 0.0 : 1e-14 * scale * static_cast<double>(dim));

  const int max_sweeps = 64;
  for (int sweep = 0; sweep < max_sweeps && off_norm() > tol; ++sweep) {
    for (std::size_t p = 0; p < dim; ++p) {
      for (std::size_t q = p + 1; q < dim; ++q) {
        const double apq = a[p * dim + q];
        if (apq == 0.0) continue;
        const double app = a[p * dim + p];
        const double aqq = a[q * dim + q];
        const double theta = (aqq - app) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;

        for (std::size_t k = 0; k < dim; ++k) {
          const double akp = a[k * dim + p];
          const double akq = a[k * dim + q];
          a[k * dim + p] = c * akp - s * akq;
          a[k * dim + q] = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < dim; ++k) {
          const double apk = a[p * dim + k];
          const double aqk = a[q * dim + k];
          a[p * dim + k] = c * apk - s * aqk;
          a[q * dim + k] = s * apk + c * aqk;
        }
        for (std::size_t k = 0; k < dim; ++k) {
          const double vkp = v[k * dim + p];
          const double vkq = v[k * dim + q];
          v[k * dim + p] = c * vkp - s * vkq;
          v[k * dim + q] = s * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<std::size_t> order(dim);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
    return a[x * dim + x] > a[y * dim + y];
  });

  EigenDecomposition out;
  out.values.resize(dim);
  out.vectors.resize(dim * dim);
  for (std::size_t k = 0; k < dim; ++k) {
    out.values[k] = a[order[k] * dim + order[k]];
    for (std::size_t row = 0; row < dim; ++row) {
      out.vectors[k * dim + row] = v[row * dim + order[k]];
    }
  }
  return out;
}

double spectrum_closed_form_error(std::span<const double> eigenvalues_desc, std::size_t rank,
                                  double epsilon) {
  double s = 0.0;
  for (std::size_t i = rank; i < eigenvalues_desc.size(); ++i) {
    const double t = eigenvalues_desc[i] - epsilon;
    s += t * t;
  }
  return std::sqrt(s);
}

SpectrumReport spectrum_and_rank_error(std::span<const double> metric, std::size_t dim,
                                       std::size_t rank, double epsilon) {
  if (rank == 0 || rank > dim) throw DataError("spectrum_and_rank_error: rank out of range");
  double scale = 0.0;
  for (double x : metric) scale = std::max(scale, std::abs(x));
  for (std::size_t i = 0; i < dim; ++i) {
    for (std::size_t j = i + 1; j < dim; ++j) {
      if (std::abs(metric[i * dim + j] - metric[j * dim + i]) > 1e-8 * std::max(scale, 1.0)) {
        throw DataError("spectrum_and_rank_error: input is not symmetric");
      }
    }
  }

  EigenDecomposition eig = jacobi_eigen(metric, dim);
  if (eig.values.back() <= 0.0) {
    throw DataError("spectrum_and_rank_error: input is not positive definite");
  }
  if (eig.values[rank - 1] < epsilon) {
    throw DataError("spectrum_and_rank_error: bound inapplicable, lambda_r = " +
                    std::to_string(eig.values[rank - 1]) + " < epsilon = " +
                    std::to_string(epsilon));
  }

  // Rank-r factor with columns sqrt(lambda_k - eps) * u_k, then measure
  // || G - (L L^T + eps I) ||_F directly.
  std::vector<double> recon(dim * dim, 0.0);
  for (std::size_t k = 0; k < rank; ++k) {
    const double w = eig.values[k] - epsilon;
    const double* u = eig.vectors.data() + k * dim;
    for (std::size_t i = 0; i < dim; ++i) {
      for (std::size_t j = 0; j < dim; ++j) recon[i * dim + j] += w * u[i] * u[j];
    }
  }
  for (std::size_t i = 0; i < dim; ++i) recon[i * dim + i] += epsilon;

  double fro = 0.0;
  for (std::size_t idx = 0; idx < dim * dim; ++idx) {
    const double diff = metric[idx] - recon[idx];
    fro += diff * diff;
  }

  SpectrumReport report;
  report.eigenvalues = eig.values;
  report.rank_r_error = std::sqrt(fro);
  report.closed_form_error = spectrum_closed_form_error(eig.values, rank, epsilon);
  if (std::abs(report.rank_r_error - report.closed_form_error) > 1e-8) {
    throw NumericError("spectrum_and_rank_error: measured error " +
                       std::to_string(report.rank_r_error) + " disagrees with closed form " +
                       std::to_string(report.closed_form_error));
  }
  return report;
}

}  // namespace gss
