#include "ielm/model_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <string>

#include "ielm/error.hpp"

namespace ielm {

namespace {

constexpr char kMagic[8] = {'I', 'E', 'L', 'M', 'M', 'O', 'D', 'L'};

class Writer {
 public:
  template <class U>
  void le(U v) {
    for (std::size_t i = 0; i < sizeof(U); ++i) {
      bytes_.push_back(static_cast<std::uint8_t>(static_cast<std::uint64_t>(v) >> (8 * i)));
    }
  }
  void u8(std::uint8_t v) { bytes_.push_back(v); }
  void u16(std::uint16_t v) { le(v); }
  void u32(std::uint32_t v) { le(v); }
  void i32(std::int32_t v) { le(static_cast<std::uint32_t>(v)); }
  void u64(std::uint64_t v) { le(v); }
  void f64(double v) { le(std::bit_cast<std::uint64_t>(v)); }
  void raw(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    bytes_.insert(bytes_.end(), b, b + n);
  }
  std::vector<std::uint8_t> take() { return std::move(bytes_); }

 private:
  std::vector<std::uint8_t> bytes_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  template <class U>
  U le(const char* field) {
    need(sizeof(U), field);
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) v |= std::uint64_t{bytes_[pos_ + i]} << (8 * i);
    pos_ += sizeof(U);
    return static_cast<U>(v);
  }
  std::uint8_t u8(const char* f) { return le<std::uint8_t>(f); }
  std::uint16_t u16(const char* f) { return le<std::uint16_t>(f); }
  std::uint32_t u32(const char* f) { return le<std::uint32_t>(f); }
  std::int32_t i32(const char* f) { return static_cast<std::int32_t>(le<std::uint32_t>(f)); }
  std::uint64_t u64(const char* f) { return le<std::uint64_t>(f); }
  double f64(const char* f) { return std::bit_cast<double>(le<std::uint64_t>(f)); }
  std::span<const std::uint8_t> take(std::size_t n, const char* field) {
    need(n, field);
    auto s = bytes_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  std::size_t offset() const noexcept { return pos_; }
  std::size_t remaining() const noexcept { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n, const char* field) const {
    if (bytes_.size() - pos_ < n) {
      throw FormatError(std::string("model file truncated reading ") + field + " at offset " +
                        std::to_string(pos_));
    }
  }
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

struct Header {
  std::uint8_t weight_storage = 0;
  std::uint8_t output_kind = 0;
  WeightDistribution distribution{};
  std::uint32_t n = 0, hidden = 0, classes = 0;
  double gamma = 1.0;
  std::uint64_t seed = 0;
  ModelInfo info;
};

void write_header(Writer& w, const Header& h) {
  w.raw(kMagic, sizeof kMagic);
  w.u32(kModelFormatVersion);
  w.u8(h.weight_storage);
  w.u8(h.output_kind);
  w.u8(static_cast<std::uint8_t>(h.distribution));
  w.u8(h.info.target_encoding);
  w.u32(h.n);
  w.u32(h.hidden);
  w.u32(h.classes);
  w.f64(h.gamma);
  w.u64(h.seed);
  w.u16(static_cast<std::uint16_t>(h.info.prng_id.size()));
  w.raw(h.info.prng_id.data(), h.info.prng_id.size());
  w.u8(static_cast<std::uint8_t>(h.info.preprocessing.size()));
  for (auto s : h.info.preprocessing) w.u8(static_cast<std::uint8_t>(s));
}

void write_weights(Writer& w, const WeightMatrix& weights) {
  if (weights.is_ternary()) {
    for (auto v : weights.ternary().entries()) w.u8(static_cast<std::uint8_t>(v));
  } else {
    for (double v : weights.continuous().values()) w.f64(v);
  }
}

std::uint32_t narrow(std::size_t v, const char* what) {
  if (v > 0xffffffffu) throw InvalidArgument(std::string("model dimension too large: ") + what);
  return static_cast<std::uint32_t>(v);
}

Header header_for(const WeightMatrix& w, std::size_t classes, double gamma, const ModelInfo& info) {
  Header h;
  h.weight_storage = w.is_ternary() ? 1 : 0;
  h.distribution = w.distribution();
  h.n = narrow(w.rows(), "n");
  h.hidden = narrow(w.cols(), "L");
  h.classes = narrow(classes, "m");
  h.gamma = gamma;
  h.seed = w.seed();
  h.info = info;
  return h;
}

}  // namespace

std::vector<std::uint8_t> encode_model(const FloatModel& model) {
  Writer w;
  Header h = header_for(model.input_weights(), model.classes(), model.gamma(), model.info());
  h.output_kind = 0;
  write_header(w, h);
  write_weights(w, model.input_weights());
  for (double v : model.beta().values()) w.f64(v);
  return w.take();
}

std::vector<std::uint8_t> encode_model(const QuantizedModel& model) {
  Writer w;
  const WeightMatrix weights(model.weights(), model.distribution(), model.seed());
  Header h = header_for(weights, model.classes(), model.gamma(), model.info());
  h.output_kind = 1;
  write_header(w, h);
  w.f64(model.beta().tau());
  w.u32(model.beta().ladder_step());
  w.i32(model.declared_range().lo);
  w.i32(model.declared_range().hi);
  write_weights(w, weights);
  for (std::int32_t v : model.beta().values()) w.i32(v);
  return w.take();
}

AnyModel decode_model(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  const auto magic = r.take(sizeof kMagic, "magic");
  if (std::memcmp(magic.data(), kMagic, sizeof kMagic) != 0) {
    throw FormatError("not a model file: bad magic at offset 0");
  }
  const std::uint32_t version = r.u32("version");
  if (version != kModelFormatVersion) {
    throw FormatError("unsupported model format version " + std::to_string(version));
  }
  Header h;
  h.weight_storage = r.u8("weight storage");
  h.output_kind = r.u8("output kind");
  const std::uint8_t dist = r.u8("distribution");
  if (dist > 3) throw FormatError("unknown weight distribution code " + std::to_string(dist));
  h.distribution = static_cast<WeightDistribution>(dist);
  h.info.target_encoding = r.u8("target encoding");
  h.n = r.u32("n");
  h.hidden = r.u32("L");
  h.classes = r.u32("m");
  h.gamma = r.f64("gamma");
  h.seed = r.u64("seed");
  const std::uint16_t id_len = r.u16("prng id length");
  const auto id = r.take(id_len, "prng id");
  h.info.prng_id.assign(id.begin(), id.end());
  const std::uint8_t steps = r.u8("preprocessing count");
  for (std::uint8_t i = 0; i < steps; ++i) {
    const std::uint8_t code = r.u8("preprocessing step");
    if (code != 1 && code != 2) {
      throw FormatError("unknown preprocessing code " + std::to_string(code) + " at offset " +
                        std::to_string(r.offset() - 1));
    }
    h.info.preprocessing.push_back(static_cast<PreprocessStep>(code));
  }
  if (h.weight_storage > 1 || h.output_kind > 1) {
    throw FormatError("unknown weight storage/output kind");
  }

  double tau = 1.0;
  std::uint32_t ladder = 0;
  InputRange range;
  if (h.output_kind == 1) {
    tau = r.f64("tau");
    ladder = r.u32("ladder step");
    range.lo = r.i32("range lo");
    range.hi = r.i32("range hi");
  }

  const std::size_t wcount = std::size_t{h.n} * h.hidden;
  const std::size_t bcount = std::size_t{h.hidden} * h.classes;
  WeightMatrix weights;
  if (h.weight_storage == 1) {
    const auto raw = r.take(wcount, "ternary weights");
    std::vector<std::int8_t> entries(wcount);
    for (std::size_t i = 0; i < wcount; ++i) entries[i] = static_cast<std::int8_t>(raw[i]);
    weights = WeightMatrix(TernaryWeights(h.n, h.hidden, std::move(entries)), h.distribution,
                           h.seed);
  } else {
    std::vector<double> w(wcount);
    for (auto& v : w) v = r.f64("weights");
    weights = WeightMatrix(DenseMatrix(h.n, h.hidden, std::move(w)), h.distribution, h.seed);
  }

  if (h.output_kind == 1) {
    if (!weights.is_ternary()) throw FormatError("integer output weights require ternary inputs");
    std::vector<std::int32_t> b(bcount);
    for (auto& v : b) v = r.i32("beta");
    if (r.remaining() != 0) {
      throw FormatError("trailing bytes after payload at offset " + std::to_string(r.offset()));
    }
    return QuantizedModel(weights.ternary(), IntegerBeta(h.hidden, h.classes, std::move(b), tau, ladder),
                          range, h.gamma, h.distribution, h.seed, std::move(h.info));
  }
  std::vector<double> b(bcount);
  for (auto& v : b) v = r.f64("beta");
  if (r.remaining() != 0) {
    throw FormatError("trailing bytes after payload at offset " + std::to_string(r.offset()));
  }
  return FloatModel(std::move(weights), DenseMatrix(h.hidden, h.classes, std::move(b)), h.gamma,
                    std::move(h.info));
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open file", path.string());
  in.seekg(0, std::ios::end);
  const auto size = in.tellg();
  in.seekg(0, std::ios::beg);
  std::vector<std::uint8_t> bytes(static_cast<std::size_t>(size));
  if (size > 0 && !in.read(reinterpret_cast<char*>(bytes.data()), size)) {
    throw IoError("cannot read file", path.string());
  }
  return bytes;
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open file for writing", path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("cannot write file", path.string());
}

void save_model(const FloatModel& model, const std::filesystem::path& path) {
  write_file(path, encode_model(model));
}

void save_model(const QuantizedModel& model, const std::filesystem::path& path) {
  write_file(path, encode_model(model));
}

AnyModel load_model(const std::filesystem::path& path) { return decode_model(read_file(path)); }

}  // namespace ielm
