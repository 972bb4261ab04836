#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <type_traits>
#include <vector>

#include "ielm/elm.hpp"
#include "ielm/quantize.hpp"

namespace ielm {

// Inclusive range of raw input values, e.g. [0, 255] for 8-bit pixels.
struct InputRange {
  std::int32_t lo = 0;
  std::int32_t hi = 255;

  std::int64_t max_magnitude() const noexcept;
  bool contains(std::int32_t v) const noexcept { return v >= lo && v <= hi; }
  bool contains(const InputRange& other) const noexcept {
    return other.lo >= lo && other.hi <= hi;
  }
  friend bool operator==(const InputRange&, const InputRange&) = default;
};

// A raw integer signal and the range its values were declared to lie in.
struct IntSample {
  std::span<const std::int32_t> values;
  InputRange range;
};

// Arithmetic policies for the inference kernels. Every add, subtract,
// multiply and comparison on the integer path goes through one of these, so
// OpAudit sees exactly the operations the kernel performs.
struct NoAudit {
  template <class T> T add(T a, T b) const { return a + b; }
  template <class T> T sub(T a, T b) const { return a - b; }
  template <class T> T mul(T a, T b) const { return a * b; }
  template <class T> bool greater(T a, T b) const { return a > b; }
  void enter_projection(bool) const noexcept {}
};

class OpAudit {
 public:
  struct Counts {
    std::uint64_t int_add = 0;
    std::uint64_t int_sub = 0;
    std::uint64_t int_mul = 0;
    std::uint64_t int_cmp = 0;
    std::uint64_t float_ops = 0;
    // Multiplies issued while the projection stage was active.
    std::uint64_t projection_mul = 0;
  };

  template <class T> T add(T a, T b) { tally<T>(counts_.int_add); return a + b; }
  template <class T> T sub(T a, T b) { tally<T>(counts_.int_sub); return a - b; }
  template <class T> T mul(T a, T b) {
    tally<T>(counts_.int_mul);
    if (in_projection_) ++counts_.projection_mul;
    return a * b;
  }
  template <class T> bool greater(T a, T b) { tally<T>(counts_.int_cmp); return a > b; }

  void enter_projection(bool on) noexcept { in_projection_ = on; }
  const Counts& counts() const noexcept { return counts_; }
  void reset() noexcept { counts_ = {}; }

 private:
  template <class T> void tally(std::uint64_t& int_counter) {
    if constexpr (std::is_floating_point_v<T>) {
      ++counts_.float_ops;
    } else {
      ++int_counter;
    }
  }

  Counts counts_;
  bool in_projection_ = false;
};

// Column-wise index lists of a ternary matrix: for each hidden unit, the
// input positions with weight +1 and those with weight -1. Projection then
// needs nothing but additions and subtractions.
class TernaryProjector {
 public:
  TernaryProjector() = default;
  explicit TernaryProjector(const TernaryWeights& weights);

  std::size_t inputs() const noexcept { return inputs_; }
  std::size_t hidden() const noexcept { return hidden_; }
  std::span<const std::uint32_t> plus(std::size_t unit) const {
    return {plus_idx_.data() + plus_off_[unit], plus_off_[unit + 1] - plus_off_[unit]};
  }
  std::span<const std::uint32_t> minus(std::size_t unit) const {
    return {minus_idx_.data() + minus_off_[unit], minus_off_[unit + 1] - minus_off_[unit]};
  }
  // Largest number of nonzero weights feeding any hidden unit.
  std::size_t max_fan_in() const noexcept { return max_fan_in_; }

 private:
  std::size_t inputs_ = 0;
  std::size_t hidden_ = 0;
  std::size_t max_fan_in_ = 0;
  std::vector<std::size_t> plus_off_, minus_off_;
  std::vector<std::uint32_t> plus_idx_, minus_idx_;
};

template <class Audit>
void ternary_project(const TernaryProjector& proj, std::span<const std::int32_t> x,
                     std::span<std::int32_t> out, Audit& audit) {
  audit.enter_projection(true);
  for (std::size_t unit = 0; unit < proj.hidden(); ++unit) {
    std::int32_t acc = 0;
    for (std::uint32_t j : proj.plus(unit)) acc = audit.add(acc, x[j]);
    for (std::uint32_t j : proj.minus(unit)) acc = audit.sub(acc, x[j]);
    out[unit] = acc;
  }
  audit.enter_projection(false);
}

// result[i] = Σⱼ W[j,i]·x[j] via additions and subtractions only. Throws
// DimensionError if x has the wrong length.
std::vector<std::int32_t> ternary_project(const TernaryWeights& weights, const IntSample& x);

template <class Audit>
void relu_int(std::span<std::int32_t> v, Audit& audit) {
  for (auto& e : v) {
    if (!audit.greater(e, std::int32_t{0})) e = 0;
  }
}

std::vector<std::int32_t> relu_int(std::span<const std::int32_t> v);

// Ternary input weights plus integer output weights, validated against a
// declared input range so neither accumulator can overflow:
//   hidden (32-bit): n · max|x| fits in int32
//   output (64-bit): L · max_hidden · max|β| fits in int64
// (with centring, max|x| is replaced by the centred bound 2·n·max|x|).
// When the model was trained on zero-mean rows the integer path centres
// each input exactly as n·x − Σx, which is n times the real-valued centred
// row.
class QuantizedModel {
 public:
  QuantizedModel(TernaryWeights weights, IntegerBeta beta, InputRange declared, double gamma,
                 WeightDistribution distribution, std::uint64_t seed, ModelInfo info);

  // Uses the float model's ternary weights and provenance.
  static QuantizedModel from_float(const FloatModel& model, IntegerBeta beta,
                                   InputRange declared);

  const TernaryWeights& weights() const noexcept { return weights_; }
  const TernaryProjector& projector() const noexcept { return projector_; }
  const IntegerBeta& beta() const noexcept { return beta_; }
  const InputRange& declared_range() const noexcept { return range_; }
  double gamma() const noexcept { return gamma_; }
  WeightDistribution distribution() const noexcept { return distribution_; }
  std::uint64_t seed() const noexcept { return seed_; }
  const ModelInfo& info() const noexcept { return info_; }
  bool centers_inputs() const noexcept { return centers_; }

  std::size_t inputs() const noexcept { return weights_.rows(); }
  std::size_t hidden() const noexcept { return weights_.cols(); }
  std::size_t classes() const noexcept { return beta_.cols(); }

  // Same weights as a FloatModel whose β holds the integer values (no tau).
  FloatModel to_float_model() const;

 private:
  void check_headroom() const;

  TernaryWeights weights_;
  TernaryProjector projector_;
  IntegerBeta beta_;
  InputRange range_;
  double gamma_;
  WeightDistribution distribution_;
  std::uint64_t seed_;
  ModelInfo info_;
  bool centers_ = false;
};

namespace detail {
void check_sample(const QuantizedModel& model, const IntSample& x);
[[noreturn]] void throw_null_input();
}  // namespace detail

// Integer output scores o = βᵀ·relu(project(x)) with 64-bit accumulation.
template <class Audit>
std::vector<std::int64_t> scores_int(const QuantizedModel& model, const IntSample& x,
                                     Audit& audit) {
  detail::check_sample(model, x);
  const std::size_t n = model.inputs();
  std::span<const std::int32_t> input = x.values;
  std::vector<std::int32_t> centred;
  if (model.centers_inputs()) {
    std::int32_t total = 0;
    for (std::int32_t v : x.values) total = audit.add(total, v);
    centred.resize(n);
    const auto count = static_cast<std::int32_t>(n);
    for (std::size_t j = 0; j < n; ++j) centred[j] = audit.sub(audit.mul(count, x.values[j]), total);
    input = centred;
  }
  bool any = false;
  for (std::int32_t v : input) any = any || v != 0;
  if (!any) detail::throw_null_input();

  std::vector<std::int32_t> hidden(model.hidden());
  ternary_project(model.projector(), input, std::span<std::int32_t>(hidden), audit);
  relu_int(std::span<std::int32_t>(hidden), audit);

  std::vector<std::int64_t> out(model.classes(), 0);
  for (std::size_t i = 0; i < hidden.size(); ++i) {
    if (hidden[i] == 0) continue;
    const std::int64_t h = hidden[i];
    const auto row = model.beta().row(i);
    for (std::size_t k = 0; k < out.size(); ++k) {
      out[k] = audit.add(out[k], audit.mul(h, std::int64_t{row[k]}));
    }
  }
  return out;
}

template <class Audit>
std::size_t classify_int(const QuantizedModel& model, const IntSample& x, Audit& audit) {
  const std::vector<std::int64_t> o = scores_int(model, x, audit);
  std::size_t best = 0;
  for (std::size_t k = 1; k < o.size(); ++k) {
    if (audit.greater(o[k], o[best])) best = k;
  }
  return best;
}

std::vector<std::int64_t> scores_int(const QuantizedModel& model, const IntSample& x);
std::size_t classify_int(const QuantizedModel& model, const IntSample& x);

// The same computation carried out in double arithmetic on identical
// weights; the independent reference for integer/float agreement checks.
template <class Audit>
std::size_t classify_float_reference(const QuantizedModel& model, const IntSample& x,
                                     Audit& audit) {
  detail::check_sample(model, x);
  const std::size_t n = model.inputs();
  std::vector<double> input(x.values.begin(), x.values.end());
  if (model.centers_inputs()) {
    double total = 0.0;
    for (double v : input) total = audit.add(total, v);
    for (auto& v : input) v = audit.sub(audit.mul(static_cast<double>(n), v), total);
  }
  bool any = false;
  for (double v : input) any = any || v != 0.0;
  if (!any) detail::throw_null_input();

  const auto& w = model.weights();
  std::vector<double> hidden(model.hidden(), 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t i = 0; i < hidden.size(); ++i) {
      hidden[i] = audit.add(hidden[i], audit.mul(static_cast<double>(w(j, i)), input[j]));
    }
  }
  std::vector<double> out(model.classes(), 0.0);
  for (std::size_t i = 0; i < hidden.size(); ++i) {
    const double h = audit.greater(hidden[i], 0.0) ? hidden[i] : 0.0;
    for (std::size_t k = 0; k < out.size(); ++k) {
      out[k] = audit.add(out[k], audit.mul(h, static_cast<double>(model.beta()(i, k))));
    }
  }
  std::size_t best = 0;
  for (std::size_t k = 1; k < out.size(); ++k) {
    if (audit.greater(out[k], out[best])) best = k;
  }
  return best;
}

std::size_t classify_float_reference(const QuantizedModel& model, const IntSample& x);

}  // namespace ielm
