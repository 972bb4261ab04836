#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "ielm/linalg.hpp"

namespace ielm {

// How input weights were drawn. Only uniform01 and ternary are the primary
// arms; binary and symmetric exist for comparison runs.
enum class WeightDistribution : std::uint8_t {
  uniform01 = 0,  // i.i.d. uniform on (0, 1)
  ternary = 1,    // i.i.d. uniform on {-1, 0, 1}
  binary = 2,     // i.i.d. uniform on {-1, 1}
  symmetric = 3,  // i.i.d. uniform on (-1, 1)
};

std::string to_string(WeightDistribution d);
WeightDistribution parse_distribution(const std::string& name);

// Per-row preprocessing applied to training (and float-path test) signals.
enum class PreprocessStep : std::uint8_t {
  zero_mean = 1,
  l2_normalize = 2,
};

std::string to_string(PreprocessStep s);
PreprocessStep parse_preprocess_step(const std::string& name);

// n x L matrix with entries in {-1, 0, 1}, one signed byte per entry.
class TernaryWeights {
 public:
  TernaryWeights() = default;
  // Throws InvalidArgument if any entry is outside {-1, 0, 1}.
  TernaryWeights(std::size_t rows, std::size_t cols, std::vector<std::int8_t> entries);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::int8_t operator()(std::size_t r, std::size_t c) const { return entries_[r * cols_ + c]; }
  std::span<const std::int8_t> entries() const noexcept { return entries_; }

  DenseMatrix to_dense() const;

  friend bool operator==(const TernaryWeights&, const TernaryWeights&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<std::int8_t> entries_;
};

// Input weights with the provenance needed to regenerate them.
class WeightMatrix {
 public:
  WeightMatrix() = default;
  WeightMatrix(DenseMatrix continuous, WeightDistribution dist, std::uint64_t seed);
  WeightMatrix(TernaryWeights ternary, WeightDistribution dist, std::uint64_t seed);

  std::size_t rows() const noexcept;
  std::size_t cols() const noexcept;
  bool is_ternary() const noexcept { return std::holds_alternative<TernaryWeights>(storage_); }
  WeightDistribution distribution() const noexcept { return distribution_; }
  std::uint64_t seed() const noexcept { return seed_; }

  // Throws InvalidArgument when the storage kind does not match.
  const TernaryWeights& ternary() const;
  const DenseMatrix& continuous() const;

  DenseMatrix to_dense() const;

  friend bool operator==(const WeightMatrix&, const WeightMatrix&) = default;

 private:
  std::variant<DenseMatrix, TernaryWeights> storage_;
  WeightDistribution distribution_ = WeightDistribution::uniform01;
  std::uint64_t seed_ = 0;
};

WeightMatrix gen_weights_continuous(std::size_t n, std::size_t hidden, std::uint64_t seed);
TernaryWeights gen_weights_ternary(std::size_t n, std::size_t hidden, std::uint64_t seed);
// Any distribution; ternary and binary land in TernaryWeights storage.
WeightMatrix gen_weights(WeightDistribution dist, std::size_t n, std::size_t hidden,
                         std::uint64_t seed);

// Class labels plus {0,1} one-hot encoding, produced block by block so the
// full N x m matrix is never required.
class LabeledTargets {
 public:
  LabeledTargets(std::vector<std::uint32_t> labels, std::size_t classes);

  std::size_t size() const noexcept { return labels_.size(); }
  std::size_t classes() const noexcept { return classes_; }
  std::span<const std::uint32_t> labels() const noexcept { return labels_; }

  DenseMatrix onehot(std::size_t first, std::size_t count) const;
  DenseMatrix onehot() const { return onehot(0, size()); }

 private:
  std::vector<std::uint32_t> labels_;
  std::size_t classes_;
};

// Everything besides weights that a model file records.
struct ModelInfo {
  std::string prng_id;
  std::vector<PreprocessStep> preprocessing;
  // 0 = {0,1} one-hot targets; the only encoding implemented.
  std::uint8_t target_encoding = 0;

  friend bool operator==(const ModelInfo&, const ModelInfo&) = default;
};

// Zero-bias ReLU ELM with real output weights. Immutable.
class FloatModel {
 public:
  FloatModel(WeightMatrix input_weights, DenseMatrix beta, double gamma, ModelInfo info);

  const WeightMatrix& input_weights() const noexcept { return weights_; }
  // Input weights as doubles (cached for the float path).
  const DenseMatrix& dense_weights() const noexcept { return dense_; }
  const DenseMatrix& beta() const noexcept { return beta_; }
  double gamma() const noexcept { return gamma_; }
  const ModelInfo& info() const noexcept { return info_; }

  std::size_t inputs() const noexcept { return dense_.rows(); }
  std::size_t hidden() const noexcept { return dense_.cols(); }
  std::size_t classes() const noexcept { return beta_.cols(); }

  // o = βᵀ·max(0, Wᵀx).
  std::vector<double> scores(std::span<const double> x) const;

  friend bool operator==(const FloatModel& a, const FloatModel& b) {
    return a.weights_ == b.weights_ && a.beta_ == b.beta_ && a.gamma_ == b.gamma_ &&
           a.info_ == b.info_;
  }

 private:
  WeightMatrix weights_;
  DenseMatrix dense_;
  DenseMatrix beta_;
  double gamma_;
  ModelInfo info_;
};

// H[j, i] = max(0, w_iᵀ x_j). X is N x n, W is n x L.
DenseMatrix hidden_features(const DenseMatrix& weights, const DenseMatrix& x);
DenseMatrix hidden_features(const WeightMatrix& weights, const DenseMatrix& x);

struct TrainOptions {
  std::size_t block_rows = 2048;
  std::vector<PreprocessStep> preprocessing;  // recorded in the model
};

struct TrainStats {
  double residual = 0.0;  // relative_residual of the solved system
  double seconds = 0.0;
};

// β = (I/γ + HᵀH)⁻¹ HᵀT with HᵀH and HᵀT accumulated over row blocks.
FloatModel train(const DenseMatrix& x, const LabeledTargets& targets, const WeightMatrix& weights,
                 double gamma, const TrainOptions& options = {}, TrainStats* stats = nullptr);

// Index of the largest value; ties go to the lowest index.
template <class T>
std::size_t argmax(std::span<const T> values) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

std::size_t predict_float(const FloatModel& model, std::span<const double> x);

// Row-wise prediction through one dense product; same tie rule as predict_float.
std::vector<std::uint32_t> predict_batch(const FloatModel& model, const DenseMatrix& x);

}  // namespace ielm
