#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "ielm/linalg.hpp"

namespace ielm {

// Integer output weights. values ≈ β / tau, where tau started as the
// smallest nonzero |β| and doubles with every precision-reduction step.
class IntegerBeta {
 public:
  IntegerBeta() = default;
  IntegerBeta(std::size_t rows, std::size_t cols, std::vector<std::int32_t> values, double tau,
              std::uint32_t ladder_step);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::int32_t operator()(std::size_t r, std::size_t c) const { return values_[r * cols_ + c]; }
  std::span<const std::int32_t> values() const noexcept { return values_; }
  std::span<const std::int32_t> row(std::size_t r) const {
    return {values_.data() + r * cols_, cols_};
  }
  double tau() const noexcept { return tau_; }
  std::uint32_t ladder_step() const noexcept { return ladder_step_; }

  std::int64_t max_abs() const noexcept;

  // tau · values; the real-valued weights this matrix stands for.
  DenseMatrix to_real() const;
  // values as doubles, without the tau scale.
  DenseMatrix values_as_real() const;

  friend bool operator==(const IntegerBeta&, const IntegerBeta&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<std::int32_t> values_;
  double tau_ = 1.0;
  std::uint32_t ladder_step_ = 0;
};

// Nearest integer, halves rounded away from zero.
double round_half_away(double v) noexcept;

// tau = min nonzero |β|; values = round(β / tau). Throws NumericError for an
// all-zero or non-finite β, or when β / tau does not fit in 32 bits.
IntegerBeta quantize_beta(const DenseMatrix& beta);

// v -> round(v / 2) entrywise, tau doubled, ladder_step + 1. Throws
// InvalidArgument once max |v| <= 1.
IntegerBeta reduce_precision_step(const IntegerBeta& b);

// Whether another reduce_precision_step is allowed.
bool can_reduce(const IntegerBeta& b) noexcept;

// Sign bit plus magnitude bits for the largest |entry|; 1 for all-zero.
std::uint32_t bit_width(const IntegerBeta& b) noexcept;

// quantize_beta followed by reduce_precision_step until exhaustion; element
// 0 is the fresh quantization.
std::vector<IntegerBeta> precision_ladder(const DenseMatrix& beta);

}  // namespace ielm
