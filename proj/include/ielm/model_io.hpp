#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <variant>
#include <vector>

#include "ielm/elm.hpp"
#include "ielm/int_infer.hpp"

namespace ielm {

// Binary model file, version 1. All multi-byte fields little-endian.
//
//   offset size field
//   0      8    magic "IELMMODL"
//   8      4    u32 format version (1)
//   12     1    u8 input weight storage: 0 = f64, 1 = i8 ternary
//   13     1    u8 output weight kind:   0 = f64 real, 1 = i32 integer
//   14     1    u8 weight distribution (0 continuous (0,1), 1 ternary,
//                 2 binary {-1,1}, 3 symmetric (-1,1))
//   15     1    u8 target encoding (0 = {0,1} one-hot)
//   16     4    u32 n
//   20     4    u32 L
//   24     4    u32 m
//   28     8    f64 gamma
//   36     8    u64 seed
//   44     2    u16 PRNG id length k, then k bytes of PRNG id
//   ..     1    u8 preprocessing step count p, then p step codes
//                 (1 zero_mean, 2 l2) in application order
//   integer output only:
//   ..     8    f64 tau
//   ..     4    u32 ladder step
//   ..     4    i32 declared input range lo
//   ..     4    i32 declared input range hi
//   payload: weights n·L (f64 or i8, row-major), then beta L·m (f64 or i32,
//   row-major). No trailing bytes.
inline constexpr std::uint32_t kModelFormatVersion = 1;

using AnyModel = std::variant<FloatModel, QuantizedModel>;

std::vector<std::uint8_t> encode_model(const FloatModel& model);
std::vector<std::uint8_t> encode_model(const QuantizedModel& model);
AnyModel decode_model(std::span<const std::uint8_t> bytes);

void save_model(const FloatModel& model, const std::filesystem::path& path);
void save_model(const QuantizedModel& model, const std::filesystem::path& path);
AnyModel load_model(const std::filesystem::path& path);

// Whole-file helpers shared with the dataset parsers.
std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace ielm
