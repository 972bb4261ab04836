#pragma once

// Independent reference implementations used by the tests. Nothing here
// calls into the library's numeric kernels.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <utility>
#include <vector>

#include "ielm/linalg.hpp"

namespace oracle {

using ielm::DenseMatrix;

inline DenseMatrix naive_matmul(const DenseMatrix& a, const DenseMatrix& b) {
  DenseMatrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) s += a(i, k) * b(k, j);
      c(i, j) = s;
    }
  return c;
}

inline DenseMatrix transpose(const DenseMatrix& a) {
  DenseMatrix t(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
  return t;
}

// Gaussian elimination with partial pivoting, long double accumulation.
inline DenseMatrix gauss_solve(const DenseMatrix& a, const DenseMatrix& b) {
  const std::size_t n = a.rows();
  const std::size_t m = b.cols();
  std::vector<std::vector<long double>> aug(n, std::vector<long double>(n + m));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) aug[i][j] = a(i, j);
    for (std::size_t j = 0; j < m; ++j) aug[i][n + j] = b(i, j);
  }
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < n; ++r)
      if (std::fabs(aug[r][col]) > std::fabs(aug[piv][col])) piv = r;
    if (aug[piv][col] == 0.0L) throw std::runtime_error("singular");
    std::swap(aug[piv], aug[col]);
    for (std::size_t r = 0; r < n; ++r) {
      if (r == col) continue;
      const long double f = aug[r][col] / aug[col][col];
      for (std::size_t j = col; j < n + m; ++j) aug[r][j] -= f * aug[col][j];
    }
  }
  DenseMatrix x(n, m);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) x(i, j) = static_cast<double>(aug[i][n + j] / aug[i][i]);
  return x;
}

// β = (I/γ + HᵀH)⁻¹ HᵀT formed in one shot.
inline DenseMatrix ridge_beta(const DenseMatrix& h, const DenseMatrix& t, double gamma) {
  const DenseMatrix ht = transpose(h);
  DenseMatrix g = naive_matmul(ht, h);
  for (std::size_t i = 0; i < g.rows(); ++i) g(i, i) += 1.0 / gamma;
  return gauss_solve(g, naive_matmul(ht, t));
}

inline DenseMatrix relu_features(const DenseMatrix& x, const DenseMatrix& w) {
  DenseMatrix h(x.rows(), w.cols());
  for (std::size_t r = 0; r < x.rows(); ++r)
    for (std::size_t i = 0; i < w.cols(); ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < x.cols(); ++j) s += w(j, i) * x(r, j);
      h(r, i) = s > 0.0 ? s : 0.0;
    }
  return h;
}

inline DenseMatrix random_matrix(std::mt19937_64& gen, std::size_t rows, std::size_t cols,
                                 double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> d(lo, hi);
  DenseMatrix m(rows, cols);
  for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = d(gen);
  return m;
}

inline double max_abs_diff(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) return INFINITY;
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    worst = std::fmax(worst, std::fabs(a.data()[i] - b.data()[i]));
  return worst;
}

// Bits for sign plus magnitude of the largest |entry|, by repeated halving.
inline std::uint32_t bits_for(std::int64_t max_abs) {
  if (max_abs == 0) return 1;
  std::uint32_t bits = 0;
  while (max_abs > 0) {
    max_abs /= 2;
    ++bits;
  }
  return bits + 1;
}

}  // namespace oracle
