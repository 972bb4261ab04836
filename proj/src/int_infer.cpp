#include "ielm/int_infer.hpp"

#include <algorithm>
#include <cstdlib>
#include <limits>

#include "ielm/error.hpp"

namespace ielm {

// Headroom products can exceed 64 bits before they are compared.
__extension__ using wide_int = __int128;

std::int64_t InputRange::max_magnitude() const noexcept {
  return std::max(std::abs(std::int64_t{lo}), std::abs(std::int64_t{hi}));
}

TernaryProjector::TernaryProjector(const TernaryWeights& weights)
    : inputs_(weights.rows()), hidden_(weights.cols()) {
  plus_off_.assign(hidden_ + 1, 0);
  minus_off_.assign(hidden_ + 1, 0);
  for (std::size_t j = 0; j < inputs_; ++j) {
    for (std::size_t i = 0; i < hidden_; ++i) {
      const auto w = weights(j, i);
      if (w > 0) ++plus_off_[i + 1];
      if (w < 0) ++minus_off_[i + 1];
    }
  }
  for (std::size_t i = 0; i < hidden_; ++i) {
    max_fan_in_ = std::max(max_fan_in_, plus_off_[i + 1] + minus_off_[i + 1]);
    plus_off_[i + 1] += plus_off_[i];
    minus_off_[i + 1] += minus_off_[i];
  }
  plus_idx_.resize(plus_off_[hidden_]);
  minus_idx_.resize(minus_off_[hidden_]);
  std::vector<std::size_t> pfill(plus_off_.begin(), plus_off_.end() - 1);
  std::vector<std::size_t> mfill(minus_off_.begin(), minus_off_.end() - 1);
  for (std::size_t j = 0; j < inputs_; ++j) {
    for (std::size_t i = 0; i < hidden_; ++i) {
      const auto w = weights(j, i);
      if (w > 0) plus_idx_[pfill[i]++] = static_cast<std::uint32_t>(j);
      if (w < 0) minus_idx_[mfill[i]++] = static_cast<std::uint32_t>(j);
    }
  }
}

std::vector<std::int32_t> ternary_project(const TernaryWeights& weights, const IntSample& x) {
  if (x.values.size() != weights.rows()) {
    throw DimensionError("ternary_project: input has " + std::to_string(x.values.size()) +
                         " values, weights expect " + std::to_string(weights.rows()));
  }
  const wide_int bound = static_cast<wide_int>(weights.rows()) * x.range.max_magnitude();
  if (bound > std::numeric_limits<std::int32_t>::max()) {
    throw NumericError("ternary_project: n * max|x| exceeds the 32-bit accumulator");
  }
  for (std::int32_t v : x.values) {
    if (!x.range.contains(v)) throw InvalidArgument("ternary_project: value outside range");
  }
  TernaryProjector proj(weights);
  std::vector<std::int32_t> out(weights.cols());
  NoAudit audit;
  ternary_project(proj, x.values, std::span<std::int32_t>(out), audit);
  return out;
}

std::vector<std::int32_t> relu_int(std::span<const std::int32_t> v) {
  std::vector<std::int32_t> out(v.begin(), v.end());
  NoAudit audit;
  relu_int(std::span<std::int32_t>(out), audit);
  return out;
}

QuantizedModel::QuantizedModel(TernaryWeights weights, IntegerBeta beta, InputRange declared,
                               double gamma, WeightDistribution distribution, std::uint64_t seed,
                               ModelInfo info)
    : weights_(std::move(weights)),
      projector_(weights_),
      beta_(std::move(beta)),
      range_(declared),
      gamma_(gamma),
      distribution_(distribution),
      seed_(seed),
      info_(std::move(info)) {
  if (beta_.rows() != weights_.cols()) {
    throw DimensionError("quantized model: beta has " + std::to_string(beta_.rows()) +
                         " rows, weights have " + std::to_string(weights_.cols()) +
                         " hidden units");
  }
  if (range_.lo > range_.hi) throw InvalidArgument("quantized model: empty input range");
  centers_ = std::find(info_.preprocessing.begin(), info_.preprocessing.end(),
                       PreprocessStep::zero_mean) != info_.preprocessing.end();
  check_headroom();
}

QuantizedModel QuantizedModel::from_float(const FloatModel& model, IntegerBeta beta,
                                          InputRange declared) {
  const auto& w = model.input_weights();
  return QuantizedModel(w.ternary(), std::move(beta), declared, model.gamma(), w.distribution(),
                        w.seed(), model.info());
}

void QuantizedModel::check_headroom() const {
  const wide_int n = static_cast<wide_int>(inputs());
  wide_int input_bound = range_.max_magnitude();
  if (centers_) input_bound = 2 * n * input_bound;
  const wide_int hidden_bound = n * input_bound;
  if (hidden_bound > std::numeric_limits<std::int32_t>::max()) {
    throw NumericError("quantized model: hidden accumulator headroom violated (n=" +
                       std::to_string(inputs()) + ", input range [" + std::to_string(range_.lo) +
                       ", " + std::to_string(range_.hi) + "]" +
                       (centers_ ? ", centred" : "") + ")");
  }
  const wide_int output_bound =
      static_cast<wide_int>(hidden()) * hidden_bound * static_cast<wide_int>(beta_.max_abs());
  if (output_bound > std::numeric_limits<std::int64_t>::max()) {
    throw NumericError("quantized model: output accumulator headroom violated (L=" +
                       std::to_string(hidden()) + ", max|beta|=" +
                       std::to_string(beta_.max_abs()) + ")");
  }
}

FloatModel QuantizedModel::to_float_model() const {
  return FloatModel(WeightMatrix(weights_, distribution_, seed_), beta_.values_as_real(), gamma_,
                    info_);
}

namespace detail {

void check_sample(const QuantizedModel& model, const IntSample& x) {
  if (x.values.size() != model.inputs()) {
    throw DimensionError("classify: input has " + std::to_string(x.values.size()) +
                         " values, model expects " + std::to_string(model.inputs()));
  }
  if (!model.declared_range().contains(x.range)) {
    throw InvalidArgument("classify: sample range [" + std::to_string(x.range.lo) + ", " +
                          std::to_string(x.range.hi) + "] exceeds the model's declared range [" +
                          std::to_string(model.declared_range().lo) + ", " +
                          std::to_string(model.declared_range().hi) + "]");
  }
  for (std::size_t j = 0; j < x.values.size(); ++j) {
    if (!x.range.contains(x.values[j])) {
      throw InvalidArgument("classify: value " + std::to_string(x.values[j]) + " at position " +
                            std::to_string(j) + " outside declared range");
    }
  }
}

void throw_null_input() {
  throw InvalidArgument("classify: input is the null vector (after centring, if any)");
}

}  // namespace detail

std::vector<std::int64_t> scores_int(const QuantizedModel& model, const IntSample& x) {
  NoAudit audit;
  return scores_int(model, x, audit);
}

std::size_t classify_int(const QuantizedModel& model, const IntSample& x) {
  NoAudit audit;
  return classify_int(model, x, audit);
}

std::size_t classify_float_reference(const QuantizedModel& model, const IntSample& x) {
  NoAudit audit;
  return classify_float_reference(model, x, audit);
}

}  // namespace ielm
