#include "ielm/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numbers>
#include <sstream>

#include "ielm/error.hpp"
#include "ielm/model_io.hpp"
#include "ielm/rng.hpp"

namespace ielm {

std::string to_string(DataSource s) {
  switch (s) {
    case DataSource::mnist: return "mnist";
    case DataSource::cifar10: return "cifar10";
    case DataSource::patches: return "patches";
    case DataSource::csv: return "csv";
  }
  return "unknown";
}

void RawDataset::validate(bool require_all_classes) const {
  if (samples.size() != count * features || labels.size() != count) {
    throw DimensionError("dataset: " + std::to_string(samples.size()) + " values and " +
                         std::to_string(labels.size()) + " labels for " + std::to_string(count) +
                         "x" + std::to_string(features));
  }
  std::vector<bool> seen(classes, false);
  for (std::size_t i = 0; i < count; ++i) {
    if (labels[i] >= classes) {
      throw InvalidArgument("dataset: label " + std::to_string(labels[i]) + " at sample " +
                            std::to_string(i) + " outside [0, " + std::to_string(classes) + ")");
    }
    seen[labels[i]] = true;
  }
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (!range.contains(samples[i])) {
      throw InvalidArgument("dataset: value " + std::to_string(samples[i]) + " at sample " +
                            std::to_string(i / std::max<std::size_t>(features, 1)) +
                            " outside declared range");
    }
  }
  if (require_all_classes) {
    for (std::size_t c = 0; c < classes; ++c) {
      if (!seen[c]) throw InvalidArgument("dataset: class " + std::to_string(c) + " has no samples");
    }
  }
}

// ---- IDX -------------------------------------------------------------------

namespace {

constexpr std::uint32_t kIdxImages = 0x00000803;
constexpr std::uint32_t kIdxLabels = 0x00000801;

std::uint32_t be32(std::span<const std::uint8_t> b, std::size_t offset, const char* what) {
  if (b.size() < offset + 4) {
    throw FormatError(std::string(what) + ": truncated header at offset " + std::to_string(offset));
  }
  return (std::uint32_t{b[offset]} << 24) | (std::uint32_t{b[offset + 1]} << 16) |
         (std::uint32_t{b[offset + 2]} << 8) | std::uint32_t{b[offset + 3]};
}

void put_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int s = 24; s >= 0; s -= 8) out.push_back(static_cast<std::uint8_t>(v >> s));
}

std::uint8_t as_byte(std::int32_t v, const char* what) {
  if (v < 0 || v > 255) {
    throw InvalidArgument(std::string(what) + ": value " + std::to_string(v) +
                          " does not fit in a byte");
  }
  return static_cast<std::uint8_t>(v);
}

}  // namespace

RawDataset parse_idx(std::span<const std::uint8_t> images, std::span<const std::uint8_t> labels) {
  const std::uint32_t magic = be32(images, 0, "idx images");
  if (magic != kIdxImages) {
    std::ostringstream os;
    os << "idx images: bad magic 0x" << std::hex << magic << " at offset 0";
    throw FormatError(os.str());
  }
  const std::uint32_t n = be32(images, 4, "idx images");
  const std::uint32_t rows = be32(images, 8, "idx images");
  const std::uint32_t cols = be32(images, 12, "idx images");
  const std::size_t pixels = std::size_t{rows} * cols;
  const std::size_t expected = 16 + std::size_t{n} * pixels;
  if (images.size() < expected) {
    throw FormatError("idx images: truncated at offset " + std::to_string(images.size()) +
                      ", expected " + std::to_string(expected) + " bytes");
  }
  if (images.size() > expected) {
    throw FormatError("idx images: trailing bytes at offset " + std::to_string(expected));
  }

  const std::uint32_t lmagic = be32(labels, 0, "idx labels");
  if (lmagic != kIdxLabels) {
    std::ostringstream os;
    os << "idx labels: bad magic 0x" << std::hex << lmagic << " at offset 0";
    throw FormatError(os.str());
  }
  const std::uint32_t ln = be32(labels, 4, "idx labels");
  if (ln != n) {
    throw FormatError("idx labels: count " + std::to_string(ln) + " at offset 4 does not match " +
                      std::to_string(n) + " images");
  }
  if (labels.size() != 8 + std::size_t{n}) {
    throw FormatError("idx labels: expected " + std::to_string(8 + std::size_t{n}) +
                      " bytes, file has " + std::to_string(labels.size()) + " (offset " +
                      std::to_string(std::min(labels.size(), 8 + std::size_t{n})) + ")");
  }

  RawDataset d;
  d.count = n;
  d.features = pixels;
  d.samples.assign(images.begin() + 16, images.end());
  d.labels.assign(labels.begin() + 8, labels.end());
  std::uint32_t max_label = 0;
  for (auto l : d.labels) max_label = std::max(max_label, l);
  d.classes = n == 0 ? 10 : std::max<std::size_t>(10, max_label + 1);
  d.source = DataSource::mnist;
  d.range = {0, 255};
  return d;
}

RawDataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels) {
  return parse_idx(read_file(images), read_file(labels));
}

std::vector<std::uint8_t> encode_idx_images(const RawDataset& data, std::uint32_t rows,
                                            std::uint32_t cols) {
  if (std::size_t{rows} * cols != data.features) {
    throw DimensionError("idx: " + std::to_string(rows) + "x" + std::to_string(cols) +
                         " does not match " + std::to_string(data.features) + " features");
  }
  std::vector<std::uint8_t> out;
  out.reserve(16 + data.samples.size());
  put_be32(out, kIdxImages);
  put_be32(out, static_cast<std::uint32_t>(data.count));
  put_be32(out, rows);
  put_be32(out, cols);
  for (auto v : data.samples) out.push_back(as_byte(v, "idx images"));
  return out;
}

std::vector<std::uint8_t> encode_idx_labels(const RawDataset& data) {
  std::vector<std::uint8_t> out;
  out.reserve(8 + data.count);
  put_be32(out, kIdxLabels);
  put_be32(out, static_cast<std::uint32_t>(data.count));
  for (auto l : data.labels) out.push_back(as_byte(static_cast<std::int32_t>(l), "idx labels"));
  return out;
}

void write_idx(const RawDataset& data, std::uint32_t rows, std::uint32_t cols,
               const std::filesystem::path& images, const std::filesystem::path& labels) {
  write_file(images, encode_idx_images(data, rows, cols));
  write_file(labels, encode_idx_labels(data));
}

// ---- CIFAR-10 ----------------------------------------------------------------

RawDataset parse_cifar10(std::span<const std::uint8_t> bytes, std::optional<ClassPair> filter) {
  if (bytes.size() % kCifarRecordBytes != 0) {
    throw FormatError("cifar10: size " + std::to_string(bytes.size()) +
                      " is not a multiple of 3073; partial record at offset " +
                      std::to_string(bytes.size() - bytes.size() % kCifarRecordBytes));
  }
  RawDataset d;
  d.features = kCifarPixels;
  d.source = DataSource::cifar10;
  d.range = {0, 255};
  d.classes = filter ? 2 : 10;
  const std::size_t records = bytes.size() / kCifarRecordBytes;
  for (std::size_t r = 0; r < records; ++r) {
    const std::size_t offset = r * kCifarRecordBytes;
    const std::uint32_t label = bytes[offset];
    if (label > 9) {
      throw FormatError("cifar10: label " + std::to_string(label) + " at offset " +
                        std::to_string(offset));
    }
    std::uint32_t out_label = label;
    if (filter) {
      if (label == filter->first) out_label = 0;
      else if (label == filter->second) out_label = 1;
      else continue;
    }
    d.labels.push_back(out_label);
    d.samples.insert(d.samples.end(), bytes.begin() + static_cast<std::ptrdiff_t>(offset + 1),
                     bytes.begin() + static_cast<std::ptrdiff_t>(offset + kCifarRecordBytes));
  }
  d.count = d.labels.size();
  return d;
}

RawDataset load_cifar10(std::span<const std::filesystem::path> batches,
                        std::optional<ClassPair> filter) {
  RawDataset all;
  bool first = true;
  for (const auto& path : batches) {
    RawDataset part = parse_cifar10(read_file(path), filter);
    if (first) {
      all = std::move(part);
      first = false;
      continue;
    }
    all.samples.insert(all.samples.end(), part.samples.begin(), part.samples.end());
    all.labels.insert(all.labels.end(), part.labels.begin(), part.labels.end());
    all.count += part.count;
  }
  if (first) throw InvalidArgument("cifar10: no batch files given");
  return all;
}

std::vector<std::uint8_t> encode_cifar10(const RawDataset& data) {
  if (data.features != kCifarPixels) {
    throw DimensionError("cifar10: records need 3072 features, got " +
                         std::to_string(data.features));
  }
  std::vector<std::uint8_t> out;
  out.reserve(data.count * kCifarRecordBytes);
  for (std::size_t i = 0; i < data.count; ++i) {
    out.push_back(as_byte(static_cast<std::int32_t>(data.labels[i]), "cifar10 label"));
    for (auto v : data.sample(i)) out.push_back(as_byte(v, "cifar10 pixel"));
  }
  return out;
}

// ---- Gray images and textures ---------------------------------------------------

GrayImage parse_gray(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "GRAY", 4) != 0) {
    throw FormatError("gray image: missing GRAY magic at offset 0");
  }
  auto le32 = [&](std::size_t o) {
    return std::uint32_t{bytes[o]} | (std::uint32_t{bytes[o + 1]} << 8) |
           (std::uint32_t{bytes[o + 2]} << 16) | (std::uint32_t{bytes[o + 3]} << 24);
  };
  GrayImage img;
  img.rows = le32(4);
  img.cols = le32(8);
  const std::size_t expected = 12 + img.rows * img.cols;
  if (bytes.size() != expected) {
    throw FormatError("gray image: expected " + std::to_string(expected) + " bytes, got " +
                      std::to_string(bytes.size()) + " (offset " +
                      std::to_string(std::min(bytes.size(), expected)) + ")");
  }
  img.pixels.assign(bytes.begin() + 12, bytes.end());
  return img;
}

std::vector<std::uint8_t> encode_gray(const GrayImage& image) {
  std::vector<std::uint8_t> out{'G', 'R', 'A', 'Y'};
  for (std::uint32_t v : {static_cast<std::uint32_t>(image.rows),
                          static_cast<std::uint32_t>(image.cols)}) {
    for (int s = 0; s < 32; s += 8) out.push_back(static_cast<std::uint8_t>(v >> s));
  }
  out.insert(out.end(), image.pixels.begin(), image.pixels.end());
  return out;
}

GrayImage read_gray(const std::filesystem::path& path) { return parse_gray(read_file(path)); }

void write_gray(const GrayImage& image, const std::filesystem::path& path) {
  write_file(path, encode_gray(image));
}

GrayImage synth_texture(const GratingSpec& spec, std::size_t rows, std::size_t cols,
                        std::uint64_t seed) {
  Rng rng(seed);
  const double theta = spec.orientation_deg * std::numbers::pi / 180.0;
  const double k = 2.0 * std::numbers::pi / spec.period_px;
  const double phase = 2.0 * std::numbers::pi * rng.uniform_open01();
  GrayImage img{rows, cols, std::vector<std::uint8_t>(rows * cols)};
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      // Box-Muller; one normal per pixel.
      const double u1 = rng.uniform_open01();
      const double u2 = rng.uniform_open01();
      const double noise = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
      const double t = k * (static_cast<double>(c) * std::cos(theta) +
                            static_cast<double>(r) * std::sin(theta)) + phase;
      const double v = spec.mean + spec.amplitude * std::sin(t) + spec.noise_sd * noise;
      img.pixels[r * cols + c] = static_cast<std::uint8_t>(std::clamp(std::round(v), 0.0, 255.0));
    }
  }
  return img;
}

std::pair<GratingSpec, GratingSpec> default_texture_pair() {
  // Calibrated so the continuous-weight baseline lands near 92% at L = 2500.
  return {GratingSpec{30.0, 6.0, 40.0, 45.0}, GratingSpec{40.0, 6.5, 40.0, 45.0}};
}

PatchSet extract_patches(const GrayImage& image, std::size_t patch_size, std::size_t count,
                         Half half, std::uint64_t seed) {
  const std::size_t half_cols = image.cols / 2;
  const std::size_t col_begin = half == Half::left ? 0 : half_cols;
  const std::size_t col_end = half == Half::left ? half_cols : image.cols;
  if (patch_size == 0 || image.rows < patch_size || col_end - col_begin < patch_size) {
    throw InvalidArgument("extract_patches: " + std::to_string(patch_size) + "x" +
                          std::to_string(patch_size) + " patch does not fit in the " +
                          (half == Half::left ? "left" : "right") + " half of a " +
                          std::to_string(image.rows) + "x" + std::to_string(image.cols) +
                          " image");
  }
  Rng rng(seed);
  const std::size_t row_choices = image.rows - patch_size + 1;
  const std::size_t col_choices = col_end - col_begin - patch_size + 1;
  PatchSet set;
  set.patch_size = patch_size;
  set.values.reserve(count * patch_size * patch_size);
  for (std::size_t p = 0; p < count; ++p) {
    const std::size_t r0 = rng.below(row_choices);
    const std::size_t c0 = col_begin + rng.below(col_choices);
    set.origins.emplace_back(r0, c0);
    for (std::size_t r = 0; r < patch_size; ++r)
      for (std::size_t c = 0; c < patch_size; ++c) set.values.push_back(image(r0 + r, c0 + c));
  }
  return set;
}

RawDataset texture_dataset(std::span<const GrayImage> images, std::size_t patch_size,
                           std::size_t patches_per_class, Half half, std::uint64_t seed) {
  RawDataset d;
  d.features = patch_size * patch_size;
  d.classes = images.size();
  d.source = DataSource::patches;
  d.range = {0, 255};
  for (std::size_t c = 0; c < images.size(); ++c) {
    const PatchSet set = extract_patches(images[c], patch_size, patches_per_class, half,
                                         derive_seed(seed, {c, static_cast<std::uint64_t>(half)}));
    d.samples.insert(d.samples.end(), set.values.begin(), set.values.end());
    d.labels.insert(d.labels.end(), set.count(), static_cast<std::uint32_t>(c));
  }
  d.count = d.labels.size();
  return d;
}

// ---- CSV -----------------------------------------------------------------------

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, ',')) {
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
    while (!cell.empty() && cell.front() == ' ') cell.erase(cell.begin());
    out.push_back(cell);
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::int64_t parse_int(const std::string& s, std::size_t line, std::size_t col) {
  std::size_t used = 0;
  std::int64_t v = 0;
  try {
    v = std::stoll(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != s.size()) {
    throw FormatError("csv: non-integer value '" + s + "' at line " + std::to_string(line) +
                      ", column " + std::to_string(col + 1));
  }
  return v;
}

}  // namespace

RawDataset parse_csv(const std::string& text, const std::string& label_column,
                     std::optional<InputRange> range) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw FormatError("csv: missing header row");
  const auto header = split_csv_line(line);
  const auto it = std::find(header.begin(), header.end(), label_column);
  if (it == header.end()) throw FormatError("csv: no column named '" + label_column + "'");
  const auto label_idx = static_cast<std::size_t>(it - header.begin());

  RawDataset d;
  d.features = header.size() - 1;
  d.source = DataSource::csv;
  std::int64_t lo = 0, hi = 0;
  bool any = false;
  std::uint32_t max_label = 0;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != header.size()) {
      throw FormatError("csv: line " + std::to_string(line_no) + " has " +
                        std::to_string(cells.size()) + " fields, header has " +
                        std::to_string(header.size()));
    }
    for (std::size_t c = 0; c < cells.size(); ++c) {
      const std::int64_t v = parse_int(cells[c], line_no, c);
      if (c == label_idx) {
        if (v < 0) throw FormatError("csv: negative label at line " + std::to_string(line_no));
        d.labels.push_back(static_cast<std::uint32_t>(v));
        max_label = std::max(max_label, static_cast<std::uint32_t>(v));
        continue;
      }
      if (v < INT32_MIN || v > INT32_MAX) {
        throw FormatError("csv: value out of 32-bit range at line " + std::to_string(line_no));
      }
      lo = any ? std::min(lo, v) : v;
      hi = any ? std::max(hi, v) : v;
      any = true;
      d.samples.push_back(static_cast<std::int32_t>(v));
    }
  }
  d.count = d.labels.size();
  d.classes = d.count == 0 ? 0 : max_label + 1;
  d.range = range ? *range
                  : InputRange{static_cast<std::int32_t>(lo), static_cast<std::int32_t>(hi)};
  d.validate(false);
  return d;
}

RawDataset load_csv(const std::filesystem::path& path, const std::string& label_column,
                    std::optional<InputRange> range) {
  const auto bytes = read_file(path);
  return parse_csv(std::string(bytes.begin(), bytes.end()), label_column, range);
}

// ---- Preprocessing and splitting -------------------------------------------------

namespace {

// Returns false for a zero row under l2 normalisation.
bool apply_steps(std::span<double> row, std::span<const PreprocessStep> steps) {
  for (auto step : steps) {
    if (step == PreprocessStep::zero_mean) {
      double sum = 0.0;
      for (double v : row) sum += v;
      const double mean = sum / static_cast<double>(row.size());
      for (double& v : row) v -= mean;
    } else {
      double sq = 0.0;
      for (double v : row) sq += v * v;
      if (sq == 0.0) return false;
      const double inv = 1.0 / std::sqrt(sq);
      for (double& v : row) v *= inv;
    }
  }
  return true;
}

}  // namespace

std::vector<double> preprocess_row(std::span<const std::int32_t> row,
                                   std::span<const PreprocessStep> steps) {
  std::vector<double> out(row.begin(), row.end());
  if (!apply_steps(out, steps)) throw InvalidArgument("preprocess: zero row cannot be l2-normalized");
  return out;
}

NormalizedDataset preprocess(const RawDataset& raw, std::span<const PreprocessStep> steps) {
  NormalizedDataset out;
  out.samples = DenseMatrix(raw.count, raw.features);
  out.labels = raw.labels;
  out.classes = raw.classes;
  out.steps.assign(steps.begin(), steps.end());
  for (std::size_t i = 0; i < raw.count; ++i) {
    auto row = out.samples.row(i);
    const auto src = raw.sample(i);
    std::copy(src.begin(), src.end(), row.begin());
    if (!apply_steps(row, steps)) {
      throw InvalidArgument("preprocess: row " + std::to_string(i) +
                            " is zero and cannot be l2-normalized");
    }
  }
  return out;
}

RawDataset subset(const RawDataset& data, std::span<const std::size_t> indices) {
  RawDataset out;
  out.features = data.features;
  out.classes = data.classes;
  out.source = data.source;
  out.range = data.range;
  out.count = indices.size();
  out.samples.reserve(indices.size() * data.features);
  out.labels.reserve(indices.size());
  for (std::size_t i : indices) {
    if (i >= data.count) throw DimensionError("subset: index " + std::to_string(i) + " out of range");
    const auto s = data.sample(i);
    out.samples.insert(out.samples.end(), s.begin(), s.end());
    out.labels.push_back(data.labels[i]);
  }
  return out;
}

namespace {

void shuffle(std::vector<std::size_t>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng.below(i)]);
}

}  // namespace

std::pair<RawDataset, RawDataset> split_train_val(const RawDataset& data, double fraction,
                                                  std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0)) {
    throw InvalidArgument("split: fraction must be in (0, 1), got " + std::to_string(fraction));
  }
  if (data.count < 2 * data.classes) {
    throw InvalidArgument("split: need at least 2 samples per class");
  }
  std::vector<std::vector<std::size_t>> by_class(data.classes);
  for (std::size_t i = 0; i < data.count; ++i) by_class[data.labels[i]].push_back(i);
  Rng rng(seed);
  std::vector<std::size_t> train_idx, val_idx;
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    auto& idx = by_class[c];
    if (idx.size() < 2) {
      throw InvalidArgument("split: class " + std::to_string(c) + " has " +
                            std::to_string(idx.size()) + " samples, need at least 2");
    }
    shuffle(idx, rng);
    auto take = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(idx.size())));
    take = std::clamp<std::size_t>(take, 1, idx.size() - 1);
    train_idx.insert(train_idx.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(take));
    val_idx.insert(val_idx.end(), idx.begin() + static_cast<std::ptrdiff_t>(take), idx.end());
  }
  std::sort(train_idx.begin(), train_idx.end());
  std::sort(val_idx.begin(), val_idx.end());
  return {subset(data, train_idx), subset(data, val_idx)};
}

RawDataset random_subset(const RawDataset& data, std::size_t count, std::uint64_t seed) {
  if (count >= data.count) return data;
  std::vector<std::size_t> idx(data.count);
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  Rng rng(seed);
  shuffle(idx, rng);
  idx.resize(count);
  std::sort(idx.begin(), idx.end());
  return subset(data, idx);
}

}  // namespace ielm
