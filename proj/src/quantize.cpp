#include "ielm/quantize.hpp"

#include <bit>
#include <cmath>
#include <limits>

#include "ielm/error.hpp"

namespace ielm {

IntegerBeta::IntegerBeta(std::size_t rows, std::size_t cols, std::vector<std::int32_t> values,
                         double tau, std::uint32_t ladder_step)
    : rows_(rows), cols_(cols), values_(std::move(values)), tau_(tau), ladder_step_(ladder_step) {
  if (values_.size() != rows * cols) {
    throw DimensionError("integer beta: " + std::to_string(values_.size()) +
                         " values for shape " + std::to_string(rows) + "x" +
                         std::to_string(cols));
  }
  if (!(tau_ > 0.0) || !std::isfinite(tau_)) {
    throw InvalidArgument("integer beta: tau must be positive and finite");
  }
}

std::int64_t IntegerBeta::max_abs() const noexcept {
  std::int64_t m = 0;
  for (std::int32_t v : values_) m = std::max<std::int64_t>(m, std::abs(std::int64_t{v}));
  return m;
}

DenseMatrix IntegerBeta::to_real() const {
  DenseMatrix out(rows_, cols_);
  for (std::size_t i = 0; i < values_.size(); ++i) out.data()[i] = tau_ * values_[i];
  return out;
}

DenseMatrix IntegerBeta::values_as_real() const {
  DenseMatrix out(rows_, cols_);
  for (std::size_t i = 0; i < values_.size(); ++i) out.data()[i] = values_[i];
  return out;
}

double round_half_away(double v) noexcept { return std::round(v); }

IntegerBeta quantize_beta(const DenseMatrix& beta) {
  double tau = std::numeric_limits<double>::infinity();
  for (double v : beta.values()) {
    if (!std::isfinite(v)) throw NumericError("quantize_beta: non-finite entry in beta");
    if (v != 0.0) tau = std::min(tau, std::abs(v));
  }
  if (!std::isfinite(tau)) {
    throw NumericError("quantize_beta: beta is all zero, no scale can be defined");
  }
  constexpr double kLimit = std::numeric_limits<std::int32_t>::max();
  std::vector<std::int32_t> values(beta.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double q = round_half_away(beta.data()[i] / tau);
    if (std::abs(q) > kLimit) {
      throw NumericError("quantize_beta: dynamic range of beta exceeds 32-bit integers (|q| = " +
                         std::to_string(std::abs(q)) + ")");
    }
    values[i] = static_cast<std::int32_t>(q);
  }
  return IntegerBeta(beta.rows(), beta.cols(), std::move(values), tau, 0);
}

bool can_reduce(const IntegerBeta& b) noexcept { return b.max_abs() > 1; }

IntegerBeta reduce_precision_step(const IntegerBeta& b) {
  if (!can_reduce(b)) {
    throw InvalidArgument("reduce_precision_step: ladder exhausted (max |entry| = " +
                          std::to_string(b.max_abs()) + ")");
  }
  std::vector<std::int32_t> values(b.values().size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    // (v ± 1) / 2 with truncation rounds v/2 half away from zero.
    const std::int64_t v = b.values()[i];
    values[i] = static_cast<std::int32_t>((v + (v > 0) - (v < 0)) / 2);
  }
  return IntegerBeta(b.rows(), b.cols(), std::move(values), 2.0 * b.tau(), b.ladder_step() + 1);
}

std::uint32_t bit_width(const IntegerBeta& b) noexcept {
  const auto m = static_cast<std::uint64_t>(b.max_abs());
  if (m == 0) return 1;
  return 1 + static_cast<std::uint32_t>(std::bit_width(m));
}

std::vector<IntegerBeta> precision_ladder(const DenseMatrix& beta) {
  std::vector<IntegerBeta> ladder{quantize_beta(beta)};
  while (can_reduce(ladder.back())) ladder.push_back(reduce_precision_step(ladder.back()));
  return ladder;
}

}  // namespace ielm
