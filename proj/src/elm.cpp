#include "ielm/elm.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "ielm/error.hpp"
#include "ielm/rng.hpp"

namespace ielm {

std::string to_string(WeightDistribution d) {
  switch (d) {
    case WeightDistribution::uniform01: return "continuous";
    case WeightDistribution::ternary: return "ternary";
    case WeightDistribution::binary: return "binary";
    case WeightDistribution::symmetric: return "symmetric";
  }
  return "unknown";
}

WeightDistribution parse_distribution(const std::string& name) {
  if (name == "continuous" || name == "uniform01") return WeightDistribution::uniform01;
  if (name == "ternary") return WeightDistribution::ternary;
  if (name == "binary") return WeightDistribution::binary;
  if (name == "symmetric") return WeightDistribution::symmetric;
  throw InvalidArgument("unknown weight distribution '" + name +
                        "' (expected continuous, ternary, binary or symmetric)");
}

std::string to_string(PreprocessStep s) {
  return s == PreprocessStep::zero_mean ? "zero_mean" : "l2";
}

PreprocessStep parse_preprocess_step(const std::string& name) {
  if (name == "zero_mean") return PreprocessStep::zero_mean;
  if (name == "l2" || name == "l2_normalize") return PreprocessStep::l2_normalize;
  throw InvalidArgument("unknown preprocessing step '" + name + "' (expected zero_mean or l2)");
}

TernaryWeights::TernaryWeights(std::size_t rows, std::size_t cols, std::vector<std::int8_t> entries)
    : rows_(rows), cols_(cols), entries_(std::move(entries)) {
  if (entries_.size() != rows * cols) {
    throw DimensionError("ternary weights: " + std::to_string(entries_.size()) +
                         " entries for shape " + std::to_string(rows) + "x" +
                         std::to_string(cols));
  }
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (entries_[i] < -1 || entries_[i] > 1) {
      throw InvalidArgument("ternary weights: entry " + std::to_string(i) + " is " +
                            std::to_string(entries_[i]) + ", not in {-1,0,1}");
    }
  }
}

DenseMatrix TernaryWeights::to_dense() const {
  std::vector<double> out(entries_.begin(), entries_.end());
  return DenseMatrix(rows_, cols_, std::move(out));
}

WeightMatrix::WeightMatrix(DenseMatrix continuous, WeightDistribution dist, std::uint64_t seed)
    : storage_(std::move(continuous)), distribution_(dist), seed_(seed) {}

WeightMatrix::WeightMatrix(TernaryWeights ternary, WeightDistribution dist, std::uint64_t seed)
    : storage_(std::move(ternary)), distribution_(dist), seed_(seed) {}

std::size_t WeightMatrix::rows() const noexcept {
  return std::visit([](const auto& w) { return w.rows(); }, storage_);
}

std::size_t WeightMatrix::cols() const noexcept {
  return std::visit([](const auto& w) { return w.cols(); }, storage_);
}

const TernaryWeights& WeightMatrix::ternary() const {
  if (!is_ternary()) throw InvalidArgument("input weights are continuous, not ternary");
  return std::get<TernaryWeights>(storage_);
}

const DenseMatrix& WeightMatrix::continuous() const {
  if (is_ternary()) throw InvalidArgument("input weights are ternary, not continuous");
  return std::get<DenseMatrix>(storage_);
}

DenseMatrix WeightMatrix::to_dense() const {
  if (is_ternary()) return ternary().to_dense();
  return continuous();
}

namespace {

void require_sizes(std::size_t n, std::size_t hidden) {
  if (n == 0 || hidden == 0) {
    throw InvalidArgument("weight matrix dimensions must be positive, got " + std::to_string(n) +
                          "x" + std::to_string(hidden));
  }
}

}  // namespace

WeightMatrix gen_weights_continuous(std::size_t n, std::size_t hidden, std::uint64_t seed) {
  return gen_weights(WeightDistribution::uniform01, n, hidden, seed);
}

TernaryWeights gen_weights_ternary(std::size_t n, std::size_t hidden, std::uint64_t seed) {
  return gen_weights(WeightDistribution::ternary, n, hidden, seed).ternary();
}

WeightMatrix gen_weights(WeightDistribution dist, std::size_t n, std::size_t hidden,
                         std::uint64_t seed) {
  require_sizes(n, hidden);
  Rng rng(seed);
  const std::size_t count = n * hidden;
  switch (dist) {
    case WeightDistribution::uniform01:
    case WeightDistribution::symmetric: {
      std::vector<double> w(count);
      for (auto& v : w) {
        const double u = rng.uniform_open01();
        v = dist == WeightDistribution::uniform01 ? u : 2.0 * u - 1.0;
      }
      return {DenseMatrix(n, hidden, std::move(w)), dist, seed};
    }
    case WeightDistribution::ternary:
    case WeightDistribution::binary: {
      std::vector<std::int8_t> w(count);
      for (auto& v : w) v = dist == WeightDistribution::ternary ? rng.ternary() : rng.binary();
      return {TernaryWeights(n, hidden, std::move(w)), dist, seed};
    }
  }
  throw InvalidArgument("unsupported weight distribution");
}

LabeledTargets::LabeledTargets(std::vector<std::uint32_t> labels, std::size_t classes)
    : labels_(std::move(labels)), classes_(classes) {
  if (classes_ == 0) throw InvalidArgument("targets need at least one class");
  for (std::size_t j = 0; j < labels_.size(); ++j) {
    if (labels_[j] >= classes_) {
      throw InvalidArgument("label " + std::to_string(labels_[j]) + " at sample " +
                            std::to_string(j) + " outside [0, " + std::to_string(classes_) +
                            ")");
    }
  }
}

DenseMatrix LabeledTargets::onehot(std::size_t first, std::size_t count) const {
  if (first + count > labels_.size()) throw DimensionError("onehot range out of bounds");
  DenseMatrix t(count, classes_);
  for (std::size_t j = 0; j < count; ++j) t(j, labels_[first + j]) = 1.0;
  return t;
}

FloatModel::FloatModel(WeightMatrix input_weights, DenseMatrix beta, double gamma, ModelInfo info)
    : weights_(std::move(input_weights)),
      dense_(weights_.to_dense()),
      beta_(std::move(beta)),
      gamma_(gamma),
      info_(std::move(info)) {
  if (beta_.rows() != dense_.cols()) {
    throw DimensionError("beta " + beta_.shape_string() + " does not match " +
                         std::to_string(dense_.cols()) + " hidden units");
  }
  if (!(gamma_ > 0.0) || !std::isfinite(gamma_)) {
    throw InvalidArgument("gamma must be positive, got " + std::to_string(gamma_));
  }
}

std::vector<double> FloatModel::scores(std::span<const double> x) const {
  if (x.size() != inputs()) {
    throw DimensionError("input has " + std::to_string(x.size()) + " features, model expects " +
                         std::to_string(inputs()));
  }
  const std::size_t l = hidden();
  std::vector<double> h(l, 0.0);
  for (std::size_t j = 0; j < x.size(); ++j) {
    const double xj = x[j];
    const auto wrow = dense_.row(j);
    for (std::size_t i = 0; i < l; ++i) h[i] += wrow[i] * xj;
  }
  std::vector<double> o(classes(), 0.0);
  for (std::size_t i = 0; i < l; ++i) {
    const double hi = std::max(0.0, h[i]);
    if (hi == 0.0) continue;
    const auto brow = beta_.row(i);
    for (std::size_t k = 0; k < o.size(); ++k) o[k] += hi * brow[k];
  }
  return o;
}

DenseMatrix hidden_features(const DenseMatrix& weights, const DenseMatrix& x) {
  if (x.cols() != weights.rows()) {
    throw DimensionError("hidden_features: X " + x.shape_string() + " vs W " +
                         weights.shape_string());
  }
  DenseMatrix h = matmul(x, weights);
  for (std::size_t i = 0; i < h.size(); ++i) h.data()[i] = std::max(0.0, h.data()[i]);
  return h;
}

DenseMatrix hidden_features(const WeightMatrix& weights, const DenseMatrix& x) {
  return hidden_features(weights.to_dense(), x);
}

FloatModel train(const DenseMatrix& x, const LabeledTargets& targets, const WeightMatrix& weights,
                 double gamma, const TrainOptions& options, TrainStats* stats) {
  const auto start = std::chrono::steady_clock::now();
  if (x.rows() != targets.size()) {
    throw DimensionError("train: " + std::to_string(x.rows()) + " samples but " +
                         std::to_string(targets.size()) + " targets");
  }
  if (x.cols() != weights.rows()) {
    throw DimensionError("train: X " + x.shape_string() + " vs W " +
                         std::to_string(weights.rows()) + "x" + std::to_string(weights.cols()));
  }
  const DenseMatrix dense = weights.to_dense();
  SpdSystem system(weights.cols(), targets.classes());
  system.add_ridge(gamma);
  const std::size_t block = std::max<std::size_t>(1, options.block_rows);
  for (std::size_t first = 0; first < x.rows(); first += block) {
    const std::size_t count = std::min(block, x.rows() - first);
    const DenseMatrix h = hidden_features(dense, x.slice_rows(first, count));
    accumulate_gram(h, targets.onehot(first, count), system);
  }
  DenseMatrix beta = solve_spd(system);
  if (stats) {
    stats->residual = relative_residual(system, beta);
    stats->seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
  ModelInfo info{std::string(kPrngId), options.preprocessing, 0};
  return FloatModel(weights, std::move(beta), gamma, std::move(info));
}

std::size_t predict_float(const FloatModel& model, std::span<const double> x) {
  const std::vector<double> o = model.scores(x);
  return argmax(std::span<const double>(o));
}

std::vector<std::uint32_t> predict_batch(const FloatModel& model, const DenseMatrix& x) {
  if (x.cols() != model.inputs()) {
    throw DimensionError("predict: X " + x.shape_string() + " but model expects " +
                         std::to_string(model.inputs()) + " features");
  }
  std::vector<std::uint32_t> out;
  out.reserve(x.rows());
  constexpr std::size_t kBlock = 1024;
  for (std::size_t first = 0; first < x.rows(); first += kBlock) {
    const std::size_t count = std::min(kBlock, x.rows() - first);
    const DenseMatrix h = hidden_features(model.dense_weights(), x.slice_rows(first, count));
    const DenseMatrix o = matmul(h, model.beta());
    for (std::size_t r = 0; r < count; ++r) {
      out.push_back(static_cast<std::uint32_t>(argmax(o.row(r))));
    }
  }
  return out;
}

}  // namespace ielm
