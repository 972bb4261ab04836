#include <gtest/gtest.h>

#include <filesystem>
#include <random>

#include "ielm/elm.hpp"
#include "ielm/error.hpp"
#include "ielm/model_io.hpp"
#include "ielm/quantize.hpp"
#include "ielm/rng.hpp"
#include "oracles.hpp"

using namespace ielm;
namespace fs = std::filesystem;

namespace {

ModelInfo info_with(std::vector<PreprocessStep> steps) {
  ModelInfo info;
  info.prng_id = std::string(kPrngId);
  info.preprocessing = std::move(steps);
  return info;
}

FloatModel sample_float(WeightDistribution d, std::uint64_t seed = 9) {
  std::mt19937_64 gen(seed);
  return FloatModel(gen_weights(d, 7, 5, seed), oracle::random_matrix(gen, 5, 3), 0.75,
                    info_with({PreprocessStep::zero_mean, PreprocessStep::l2_normalize}));
}

QuantizedModel sample_quantized() {
  const auto f = sample_float(WeightDistribution::ternary);
  auto ladder = precision_ladder(f.beta());
  return QuantizedModel::from_float(f, ladder.at(1), {-3, 300});
}

// Little-endian u32 at a byte offset.
void put_u32(std::vector<std::uint8_t>& b, std::size_t at, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) b[at + i] = static_cast<std::uint8_t>(v >> (8 * i));
}

class TempDir : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("ielm_io_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) + "_" +
            ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  fs::path dir_;
};

}  // namespace

TEST(ModelCodec, FloatRoundTripEveryDistribution) {
  for (auto d : {WeightDistribution::uniform01, WeightDistribution::ternary,
                 WeightDistribution::binary, WeightDistribution::symmetric}) {
    const auto m = sample_float(d);
    const auto decoded = std::get<FloatModel>(decode_model(encode_model(m)));
    EXPECT_EQ(decoded, m) << to_string(d);
    EXPECT_EQ(decoded.input_weights().seed(), m.input_weights().seed());
    EXPECT_EQ(decoded.input_weights().distribution(), d);
    EXPECT_EQ(decoded.input_weights().is_ternary(), m.input_weights().is_ternary());
  }
}

TEST(ModelCodec, QuantizedRoundTrip) {
  const auto q = sample_quantized();
  const auto bytes = encode_model(q);
  const auto back = std::get<QuantizedModel>(decode_model(bytes));
  EXPECT_EQ(back.weights(), q.weights());
  EXPECT_EQ(back.beta(), q.beta());
  EXPECT_EQ(back.beta().ladder_step(), 1u);
  EXPECT_EQ(back.declared_range(), (InputRange{-3, 300}));
  EXPECT_EQ(back.gamma(), 0.75);
  EXPECT_EQ(back.seed(), q.seed());
  EXPECT_EQ(back.info(), q.info());
  EXPECT_TRUE(back.centers_inputs());
  EXPECT_EQ(encode_model(back), bytes);
}

TEST(ModelCodec, HeaderLayout) {
  const auto m = sample_float(WeightDistribution::ternary);
  const auto b = encode_model(m);
  EXPECT_EQ(std::string(b.begin(), b.begin() + 8), "IELMMODL");
  EXPECT_EQ(b[8], 1);  // version, little-endian
  EXPECT_EQ(b[12], 1);  // ternary i8 storage
  EXPECT_EQ(b[13], 0);  // real beta
  EXPECT_EQ(b[14], 1);  // ternary distribution
  EXPECT_EQ(b[16], 7);
  EXPECT_EQ(b[20], 5);
  EXPECT_EQ(b[24], 3);
  // header + prng id + steps + payload (i8 weights, f64 beta)
  const std::size_t expect = 44 + 2 + kPrngId.size() + 1 + 2 + 7 * 5 + 5 * 3 * 8;
  EXPECT_EQ(b.size(), expect);
}

TEST(ModelCodec, RejectsBadMagicVersionAndCodes) {
  auto b = encode_model(sample_float(WeightDistribution::uniform01));
  auto bad = b;
  bad[0] = 'X';
  EXPECT_THROW(decode_model(bad), FormatError);
  bad = b;
  put_u32(bad, 8, 2);
  EXPECT_THROW(decode_model(bad), FormatError);
  bad = b;
  bad[14] = 9;
  EXPECT_THROW(decode_model(bad), FormatError);
  bad = b;
  bad[13] = 7;
  EXPECT_THROW(decode_model(bad), FormatError);
}

TEST(ModelCodec, RejectsEveryTruncationAndTrailingBytes) {
  for (const auto& b : {encode_model(sample_float(WeightDistribution::uniform01)),
                        encode_model(sample_quantized())}) {
    for (std::size_t len = 0; len < b.size(); ++len) {
      ASSERT_THROW(decode_model(std::span(b.data(), len)), FormatError) << len;
    }
    auto longer = b;
    longer.push_back(0);
    EXPECT_THROW(decode_model(longer), FormatError);
  }
}

TEST(ModelCodec, IntegerBetaNeedsTernaryInputs) {
  auto b = encode_model(sample_quantized());
  b[12] = 0;  // claim f64 storage; the payload no longer lines up either way
  EXPECT_THROW(decode_model(b), FormatError);
}

TEST_F(TempDir, SaveLoadFiles) {
  const auto f = sample_float(WeightDistribution::ternary);
  const auto q = sample_quantized();
  save_model(f, dir_ / "f.bin");
  save_model(q, dir_ / "q.bin");
  EXPECT_EQ(std::get<FloatModel>(load_model(dir_ / "f.bin")), f);
  EXPECT_EQ(std::get<QuantizedModel>(load_model(dir_ / "q.bin")).beta(), q.beta());
  EXPECT_EQ(read_file(dir_ / "f.bin"), encode_model(f));
}

TEST_F(TempDir, MissingFileIsIoErrorWithPath) {
  try {
    load_model(dir_ / "nope.bin");
    FAIL();
  } catch (const IoError& e) {
    EXPECT_EQ(e.path(), (dir_ / "nope.bin").string());
  }
  EXPECT_THROW(write_file(dir_ / "no" / "such" / "dir.bin", std::vector<std::uint8_t>{1}),
               IoError);
}
