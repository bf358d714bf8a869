#pragma once

#include <cmath>
#include <vector>

#include "flowgraph/linalg.hpp"

namespace flowgraph::spectral {

using linalg::Matrix;

/// Symmetric adjacency of a directed graph: an edge in either direction sets
/// both entries. Unweighted entries are 1; weighted ones hold the summed
/// weight of both directions. Self-loop edges are ignored.
template <typename Graph>
Matrix symmetric_adjacency(const Graph& graph, bool weighted = false) {
  const std::size_t n = graph.nodes.size();
  Matrix a(n, n);
  for (const auto& e : graph.edges) {
    if (e.src == e.dst) continue;
    if (weighted) {
      const double w = static_cast<double>(e.weight);
      a(e.src, e.dst) += w;
      a(e.dst, e.src) += w;
    } else {
      a(e.src, e.dst) = a(e.dst, e.src) = 1.0;
    }
  }
  return a;
}

/// D~^(-1/2) (A + I) D~^(-1/2) with D~ the row sums of A + I.
inline Matrix renormalized_adjacency(const Matrix& adjacency) {
  const std::size_t n = adjacency.rows();
  Matrix a = adjacency;
  for (std::size_t i = 0; i < n; ++i) a(i, i) += 1.0;
  std::vector<double> inv_sqrt(n);
  for (std::size_t i = 0; i < n; ++i) {
    double deg = 0.0;
    for (std::size_t j = 0; j < n; ++j) deg += a(i, j);
    inv_sqrt[i] = 1.0 / std::sqrt(deg);
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) a(i, j) *= inv_sqrt[i] * inv_sqrt[j];
  return a;
}

template <typename Graph>
Matrix normalize_renormalized(const Graph& graph, bool weighted = false) {
  return renormalized_adjacency(symmetric_adjacency(graph, weighted));
}

/// Symmetric normalized Laplacian I - D^(-1/2) A D^(-1/2). Isolated nodes
/// take D^(-1/2) = 0, so their row and column are all zero.
inline Matrix normalized_laplacian(const Matrix& adjacency) {
  const std::size_t n = adjacency.rows();
  std::vector<double> inv_sqrt(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double deg = 0.0;
    for (std::size_t j = 0; j < n; ++j) deg += adjacency(i, j);
    if (deg > 0.0) inv_sqrt[i] = 1.0 / std::sqrt(deg);
  }
  Matrix l(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) l(i, j) = -adjacency(i, j) * inv_sqrt[i] * inv_sqrt[j];
    if (inv_sqrt[i] > 0.0) l(i, i) += 1.0;
  }
  return l;
}

struct EigenEstimate {
  double value = 0.0;
  bool converged = false;
  std::size_t iterations = 0;
};

/// Power iteration for the dominant eigenvalue of a symmetric PSD matrix,
/// stopping when successive Rayleigh quotients differ by less than `tol`.
inline EigenEstimate power_iteration(const Matrix& m, double tol = 1e-6, std::size_t max_iter = 1000) {
  const std::size_t n = m.rows();
  EigenEstimate est;
  if (n == 0) return est;
  Matrix v(n, 1);
  // Fixed, generic start vector; never orthogonal to a dominant eigenvector in practice.
  for (std::size_t i = 0; i < n; ++i) v(i, 0) = 1.0 + 0.5 * std::sin(static_cast<double>(i) + 1.0);
  double prev = 0.0;
  for (std::size_t it = 1; it <= max_iter; ++it) {
    double norm = 0.0;
    for (double x : v.data()) norm += x * x;
    norm = std::sqrt(norm);
    if (norm == 0.0 || !std::isfinite(norm)) return est;
    v *= 1.0 / norm;
    Matrix w = linalg::matmul(m, v);
    double rq = 0.0;
    for (std::size_t i = 0; i < n; ++i) rq += v(i, 0) * w(i, 0);
    est.value = rq;
    est.iterations = it;
    if (it > 1 && std::abs(rq - prev) < tol) {
      est.converged = true;
      return est;
    }
    prev = rq;
    v = std::move(w);
  }
  return est;
}

/// Fallback spectral bound used when power iteration fails or the graph has
/// no edges; the normalized Laplacian spectrum never exceeds it.
inline constexpr double kFallbackLambdaMax = 2.0;

struct ScaledLaplacian {
  Matrix matrix;  // (2 / lambda_max) L - I
  double lambda_max = kFallbackLambdaMax;
  bool estimated = false;  // false when the fallback was used
};

inline ScaledLaplacian scale_laplacian(const Matrix& laplacian) {
  ScaledLaplacian out;
  const auto est = power_iteration(laplacian);
  if (est.converged && est.value > 0.0) {
    out.lambda_max = est.value;
    out.estimated = true;
  }
  const std::size_t n = laplacian.rows();
  out.matrix = (2.0 / out.lambda_max) * laplacian;
  for (std::size_t i = 0; i < n; ++i) out.matrix(i, i) -= 1.0;
  return out;
}

template <typename Graph>
ScaledLaplacian scaled_laplacian(const Graph& graph, bool weighted = false) {
  return scale_laplacian(normalized_laplacian(symmetric_adjacency(graph, weighted)));
}

/// [T_0(L)x, ..., T_k(L)x] by the three-term Chebyshev recurrence.
inline std::vector<Matrix> chebyshev_basis(const Matrix& scaled, const Matrix& x, std::size_t k) {
  std::vector<Matrix> basis;
  basis.reserve(k + 1);
  basis.push_back(x);
  if (k >= 1) basis.push_back(linalg::matmul(scaled, x));
  for (std::size_t j = 2; j <= k; ++j) {
    Matrix next = linalg::matmul(scaled, basis[j - 1]);
    next *= 2.0;
    next -= basis[j - 2];
    basis.push_back(std::move(next));
  }
  return basis;
}

/// sum_j T_j(L) c_j via Clenshaw's recurrence; avoids materializing every
/// T_j(L) c_j separately.
inline Matrix chebyshev_combine(const Matrix& scaled, const std::vector<Matrix>& coeffs) {
  if (coeffs.empty()) return {};
  if (coeffs.size() == 1) return coeffs[0];
  const std::size_t k = coeffs.size() - 1;
  Matrix b1(coeffs[0].rows(), coeffs[0].cols());  // b_{j+1}
  Matrix b2 = b1;                                 // b_{j+2}
  for (std::size_t j = k; j >= 1; --j) {
    Matrix b = linalg::matmul(scaled, b1);
    b *= 2.0;
    b -= b2;
    b += coeffs[j];
    b2 = std::move(b1);
    b1 = std::move(b);
  }
  Matrix out = linalg::matmul(scaled, b1);
  out -= b2;
  out += coeffs[0];
  return out;
}

}  // namespace flowgraph::spectral
