#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace ielm {

// Row-major dense matrix of doubles. Dimensions are always explicit; no
// operation broadcasts.
class DenseMatrix {
 public:
  DenseMatrix() = default;
  DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  static DenseMatrix identity(std::size_t n);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  double* data() noexcept { return data_.data(); }
  const double* data() const noexcept { return data_.data(); }
  std::span<const double> values() const noexcept { return data_; }

  // Rows [first, first + count) as a new matrix.
  DenseMatrix slice_rows(std::size_t first, std::size_t count) const;

  bool all_finite() const noexcept;
  double max_abs() const noexcept;
  double frobenius_norm() const noexcept;

  std::string shape_string() const;

  friend bool operator==(const DenseMatrix&, const DenseMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// Normal-equation accumulator: gram = (ridge shift) + sum of HbᵀHb over row
// blocks, rhs = sum of HbᵀTb. Gram is kept fully symmetric after every update.
struct SpdSystem {
  DenseMatrix gram;  // L x L
  DenseMatrix rhs;   // L x m

  SpdSystem() = default;
  // Zeroed accumulator.
  SpdSystem(std::size_t hidden, std::size_t outputs);

  std::size_t hidden() const noexcept { return gram.rows(); }
  std::size_t outputs() const noexcept { return rhs.cols(); }

  // Adds I/gamma to the diagonal. gamma must be positive and finite.
  void add_ridge(double gamma);
};

// acc.gram += blockᵀ·block and acc.rhs += blockᵀ·targets, accumulated in
// double precision. Throws DimensionError naming both shapes on mismatch.
void accumulate_gram(const DenseMatrix& block, const DenseMatrix& targets, SpdSystem& acc);

// Entrywise sum of two private accumulators (for per-worker accumulation).
void merge(SpdSystem& into, const SpdSystem& from);

// Lower-triangular Cholesky factor of a symmetric positive-definite matrix.
// Throws NumericError naming the pivot index when a pivot is not positive.
DenseMatrix cholesky(const DenseMatrix& spd);

// Solves gram·X = rhs via Cholesky.
DenseMatrix solve_spd(const SpdSystem& system);

// a·b with dimension checks.
DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b);

// ‖gram·x − rhs‖∞ / max(1, ‖rhs‖∞).
double relative_residual(const SpdSystem& system, const DenseMatrix& x);

}  // namespace ielm
