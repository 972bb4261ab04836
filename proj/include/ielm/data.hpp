#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ielm/elm.hpp"
#include "ielm/int_infer.hpp"
#include "ielm/linalg.hpp"

namespace ielm {

enum class DataSource : std::uint8_t { mnist, cifar10, patches, csv };

std::string to_string(DataSource s);

// N x n raw integer samples with class labels in [0, classes).
struct RawDataset {
  std::size_t count = 0;
  std::size_t features = 0;
  std::vector<std::int32_t> samples;  // row-major, count x features
  std::vector<std::uint32_t> labels;
  std::size_t classes = 0;
  DataSource source = DataSource::csv;
  InputRange range{0, 255};

  std::span<const std::int32_t> sample(std::size_t i) const {
    return {samples.data() + i * features, features};
  }
  IntSample int_sample(std::size_t i) const { return {sample(i), range}; }

  // Checks shapes, label bounds and value range. With require_all_classes,
  // every class must occur at least once.
  void validate(bool require_all_classes) const;
};

struct NormalizedDataset {
  DenseMatrix samples;
  std::vector<std::uint32_t> labels;
  std::size_t classes = 0;
  std::vector<PreprocessStep> steps;

  std::size_t count() const noexcept { return samples.rows(); }
};

// ---- IDX (MNIST) ---------------------------------------------------------
// Images: magic 0x00000803, u32 N, u32 rows, u32 cols, then N·rows·cols u8.
// Labels: magic 0x00000801, u32 N, then N u8. All integers big-endian.
RawDataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels);
RawDataset parse_idx(std::span<const std::uint8_t> images, std::span<const std::uint8_t> labels);
std::vector<std::uint8_t> encode_idx_images(const RawDataset& data, std::uint32_t rows,
                                            std::uint32_t cols);
std::vector<std::uint8_t> encode_idx_labels(const RawDataset& data);
void write_idx(const RawDataset& data, std::uint32_t rows, std::uint32_t cols,
               const std::filesystem::path& images, const std::filesystem::path& labels);

// ---- CIFAR-10 binary batches ---------------------------------------------
// Records of 3073 bytes: 1 label byte then 3072 pixel bytes (R, G, B planes).
inline constexpr std::size_t kCifarRecordBytes = 3073;
inline constexpr std::size_t kCifarPixels = 3072;

using ClassPair = std::pair<std::uint32_t, std::uint32_t>;

// With a class filter (a, b) only those classes are kept, relabelled a→0,
// b→1.
RawDataset load_cifar10(std::span<const std::filesystem::path> batches,
                        std::optional<ClassPair> class_filter = std::nullopt);
RawDataset parse_cifar10(std::span<const std::uint8_t> bytes,
                         std::optional<ClassPair> class_filter = std::nullopt);
std::vector<std::uint8_t> encode_cifar10(const RawDataset& data);

// ---- Grayscale raw matrices (texture images) ------------------------------
// magic "GRAY", u32 rows, u32 cols (little-endian), then rows·cols u8,
// row-major.
struct GrayImage {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::uint8_t> pixels;

  std::uint8_t operator()(std::size_t r, std::size_t c) const { return pixels[r * cols + c]; }
  friend bool operator==(const GrayImage&, const GrayImage&) = default;
};

GrayImage read_gray(const std::filesystem::path& path);
void write_gray(const GrayImage& image, const std::filesystem::path& path);
GrayImage parse_gray(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> encode_gray(const GrayImage& image);

// Oriented sinusoidal grating plus Gaussian noise, clamped to [0, 255].
struct GratingSpec {
  double orientation_deg = 30.0;
  double period_px = 6.0;
  double amplitude = 60.0;
  double noise_sd = 40.0;
  double mean = 128.0;
};

GrayImage synth_texture(const GratingSpec& spec, std::size_t rows, std::size_t cols,
                        std::uint64_t seed);

// The two stand-in textures used when no texture images are supplied.
std::pair<GratingSpec, GratingSpec> default_texture_pair();

enum class Half : std::uint8_t { left, right };

struct PatchSet {
  std::size_t patch_size = 0;
  std::vector<std::int32_t> values;  // count x patch_size², row-major
  std::vector<std::pair<std::size_t, std::size_t>> origins;  // (row, col) of top-left

  std::size_t count() const noexcept { return origins.size(); }
};

// count patches drawn uniformly (positions may repeat) from the selected
// column half of the image.
PatchSet extract_patches(const GrayImage& image, std::size_t patch_size, std::size_t count,
                         Half half, std::uint64_t seed);

// One class per image; patches_per_class patches from the given half of
// each.
RawDataset texture_dataset(std::span<const GrayImage> images, std::size_t patch_size,
                           std::size_t patches_per_class, Half half, std::uint64_t seed);

// ---- CSV -----------------------------------------------------------------
// Header row required. The label column is found by name; every other
// column is an integer feature. The declared range is [min, max] of the
// observed values unless given.
RawDataset load_csv(const std::filesystem::path& path, const std::string& label_column,
                    std::optional<InputRange> range = std::nullopt);
RawDataset parse_csv(const std::string& text, const std::string& label_column,
                     std::optional<InputRange> range = std::nullopt);

// ---- Preprocessing and splitting ------------------------------------------
NormalizedDataset preprocess(const RawDataset& raw, std::span<const PreprocessStep> steps);
std::vector<double> preprocess_row(std::span<const std::int32_t> row,
                                   std::span<const PreprocessStep> steps);

RawDataset subset(const RawDataset& data, std::span<const std::size_t> indices);

// Stratified by class; train gets round(fraction·count) of each class
// (at least one sample left on each side). Requires 0 < fraction < 1.
std::pair<RawDataset, RawDataset> split_train_val(const RawDataset& data, double fraction,
                                                  std::uint64_t seed);

// Uniformly random subset of `count` samples, kept in original order.
RawDataset random_subset(const RawDataset& data, std::size_t count, std::uint64_t seed);

}  // namespace ielm
