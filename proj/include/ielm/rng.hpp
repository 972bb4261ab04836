#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <string_view>

namespace ielm {

// Identifier written into model files. Bump the suffix if the draw
// procedures below ever change.
inline constexpr std::string_view kPrngId = "mt19937_64/splitmix64-v1";

// SplitMix64 finalizer; used to derive independent stream seeds.
std::uint64_t splitmix64(std::uint64_t x) noexcept;

// Seed for a sub-stream identified by a path of integers, e.g.
// derive_seed(root, {arm, L, model_index}).
std::uint64_t derive_seed(std::uint64_t root, std::initializer_list<std::uint64_t> path) noexcept;

// Deterministic generator. The engine's output sequence is fixed by the C++
// standard; the conversions to doubles and ternary symbols are done here by
// hand so draws are identical across standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(splitmix64(seed)) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform on the open interval (0, 1).
  double uniform_open01();

  // Uniform over {-1, 0, 1} (rejection sampling on two bits).
  std::int8_t ternary();

  // Uniform over {-1, 1}.
  std::int8_t binary();

  // Uniform integer in [0, bound). bound must be nonzero.
  std::uint64_t below(std::uint64_t bound);

  // Child generator for an independent sub-stream.
  Rng split(std::uint64_t stream) { return Rng(derive_seed(engine_(), {stream})); }

 private:
  std::mt19937_64 engine_;
};

}  // namespace ielm
