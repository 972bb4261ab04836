#include "ielm/linalg.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "ielm/error.hpp"

namespace ielm {

namespace {

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Eigen::Map<RowMajor> view(DenseMatrix& m) {
  return {m.data(), static_cast<Eigen::Index>(m.rows()), static_cast<Eigen::Index>(m.cols())};
}
Eigen::Map<const RowMajor> view(const DenseMatrix& m) {
  return {m.data(), static_cast<Eigen::Index>(m.rows()), static_cast<Eigen::Index>(m.cols())};
}

}  // namespace

namespace {

std::string shape(std::size_t r, std::size_t c) {
  std::ostringstream os;
  os << r << 'x' << c;
  return os.str();
}

// Dot product over contiguous spans with four independent partial sums so
// the compiler can keep several FMA chains in flight. Summation order is
// fixed, so results are deterministic.
double dot(const double* a, const double* b, std::size_t n) {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  std::size_t k = 0;
  for (; k + 4 <= n; k += 4) {
    s0 += a[k] * b[k];
    s1 += a[k + 1] * b[k + 1];
    s2 += a[k + 2] * b[k + 2];
    s3 += a[k + 3] * b[k + 3];
  }
  for (; k < n; ++k) s0 += a[k] * b[k];
  return (s0 + s1) + (s2 + s3);
}

}  // namespace

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows * cols) {
    throw DimensionError("matrix data length " + std::to_string(data_.size()) +
                         " does not match shape " + shape(rows, cols));
  }
}

DenseMatrix DenseMatrix::identity(std::size_t n) {
  DenseMatrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

DenseMatrix DenseMatrix::slice_rows(std::size_t first, std::size_t count) const {
  if (first + count > rows_) {
    throw DimensionError("row slice [" + std::to_string(first) + ", " +
                         std::to_string(first + count) + ") out of range for " + shape_string());
  }
  std::vector<double> out(data_.begin() + static_cast<std::ptrdiff_t>(first * cols_),
                          data_.begin() + static_cast<std::ptrdiff_t>((first + count) * cols_));
  return DenseMatrix(count, cols_, std::move(out));
}

bool DenseMatrix::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

double DenseMatrix::max_abs() const noexcept {
  double m = 0.0;
  for (double v : data_) m = std::max(m, std::abs(v));
  return m;
}

double DenseMatrix::frobenius_norm() const noexcept {
  double s = 0.0;
  for (double v : data_) s += v * v;
  return std::sqrt(s);
}

std::string DenseMatrix::shape_string() const { return shape(rows_, cols_); }

SpdSystem::SpdSystem(std::size_t hidden, std::size_t outputs)
    : gram(hidden, hidden), rhs(hidden, outputs) {}

void SpdSystem::add_ridge(double gamma) {
  if (!(gamma > 0.0) || !std::isfinite(gamma)) {
    throw InvalidArgument("regularization gamma must be positive and finite, got " +
                          std::to_string(gamma));
  }
  const double shift = 1.0 / gamma;
  for (std::size_t i = 0; i < gram.rows(); ++i) gram(i, i) += shift;
}

void accumulate_gram(const DenseMatrix& block, const DenseMatrix& targets, SpdSystem& acc) {
  const std::size_t hidden = acc.hidden();
  if (block.cols() != hidden || targets.rows() != block.rows() ||
      targets.cols() != acc.outputs()) {
    throw DimensionError("accumulate_gram: block " + block.shape_string() + ", targets " +
                         targets.shape_string() + ", gram " + acc.gram.shape_string() +
                         ", rhs " + acc.rhs.shape_string());
  }
  if (block.rows() == 0) return;
  if (!block.all_finite() || !targets.all_finite()) {
    throw NumericError("accumulate_gram: non-finite entry in input block");
  }
  auto h = view(block);
  auto gram = view(acc.gram);
  // Upper triangle only, then mirror.
  gram.selfadjointView<Eigen::Upper>().rankUpdate(h.transpose());
  for (std::size_t i = 0; i < hidden; ++i) {
    for (std::size_t j = i + 1; j < hidden; ++j) acc.gram(j, i) = acc.gram(i, j);
  }
  if (acc.outputs() > 0) view(acc.rhs).noalias() += h.transpose() * view(targets);
}

void merge(SpdSystem& into, const SpdSystem& from) {
  if (into.gram.rows() != from.gram.rows() || into.rhs.cols() != from.rhs.cols()) {
    throw DimensionError("merge: gram " + into.gram.shape_string() + " vs " +
                         from.gram.shape_string() + ", rhs " + into.rhs.shape_string() +
                         " vs " + from.rhs.shape_string());
  }
  for (std::size_t i = 0; i < into.gram.size(); ++i) into.gram.data()[i] += from.gram.data()[i];
  for (std::size_t i = 0; i < into.rhs.size(); ++i) into.rhs.data()[i] += from.rhs.data()[i];
}

DenseMatrix cholesky(const DenseMatrix& spd) {
  if (spd.rows() != spd.cols()) {
    throw DimensionError("cholesky: matrix is not square: " + spd.shape_string());
  }
  const std::size_t n = spd.rows();
  DenseMatrix lower(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    const double* li = lower.data() + i * n;
    for (std::size_t j = 0; j < i; ++j) {
      const double* lj = lower.data() + j * n;
      lower(i, j) = (spd(i, j) - dot(li, lj, j)) / lower(j, j);
    }
    const double pivot = spd(i, i) - dot(li, li, i);
    if (!(pivot > 0.0) || !std::isfinite(pivot)) {
      throw NumericError("cholesky: non-positive pivot " + std::to_string(pivot) +
                         " at index " + std::to_string(i) +
                         " (missing ridge shift or non-finite input)");
    }
    lower(i, i) = std::sqrt(pivot);
  }
  return lower;
}

DenseMatrix solve_spd(const SpdSystem& system) {
  const std::size_t n = system.gram.rows();
  if (system.gram.cols() != n || system.rhs.rows() != n) {
    throw DimensionError("solve_spd: gram " + system.gram.shape_string() + ", rhs " +
                         system.rhs.shape_string());
  }
  const DenseMatrix lower = cholesky(system.gram);
  const std::size_t m = system.rhs.cols();

  // Work on rhsᵀ so each right-hand side is contiguous.
  DenseMatrix x(m, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < m; ++c) x(c, i) = system.rhs(i, c);

  for (std::size_t c = 0; c < m; ++c) {
    double* y = x.data() + c * n;
    // L·y = b
    for (std::size_t i = 0; i < n; ++i) {
      y[i] = (y[i] - dot(lower.data() + i * n, y, i)) / lower(i, i);
    }
    // Lᵀ·x = y, column access of L.
    for (std::size_t ii = n; ii-- > 0;) {
      double s = y[ii];
      for (std::size_t k = ii + 1; k < n; ++k) s -= lower(k, ii) * y[k];
      y[ii] = s / lower(ii, ii);
    }
  }

  DenseMatrix out(n, m);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < m; ++c) out(i, c) = x(c, i);
  if (!out.all_finite()) throw NumericError("solve_spd: non-finite solution");
  return out;
}

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.cols() != b.rows()) {
    throw DimensionError("matmul: " + a.shape_string() + " times " + b.shape_string());
  }
  DenseMatrix c(a.rows(), b.cols());
  if (c.empty() || a.cols() == 0) return c;
  view(c).noalias() = view(a) * view(b);
  return c;
}

double relative_residual(const SpdSystem& system, const DenseMatrix& x) {
  const DenseMatrix product = matmul(system.gram, x);
  double worst = 0.0;
  for (std::size_t i = 0; i < product.size(); ++i) {
    worst = std::max(worst, std::abs(product.data()[i] - system.rhs.data()[i]));
  }
  return worst / std::max(1.0, system.rhs.max_abs());
}

}  // namespace ielm
