#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace azsearch {

// Named substreams used by the pipeline. Every random draw in the project
// descends from a single user seed through one of these tags.
namespace streams {
inline constexpr std::string_view scene = "scene";
inline constexpr std::string_view render = "render";
inline constexpr std::string_view mining = "mining";
inline constexpr std::string_view shuffle = "shuffle";
inline constexpr std::string_view init = "init";
inline constexpr std::string_view minibatch = "minibatch";
inline constexpr std::string_view random_predictor = "random-predictor";
}  // namespace streams

std::uint64_t splitmix64(std::uint64_t x) noexcept;

/// Stable 64-bit hash of a string (FNV-1a followed by a splitmix finalizer).
std::uint64_t hash_string(std::string_view text) noexcept;

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) noexcept;
std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag) noexcept;

/// Portable random source. std::mt19937_64 is fully specified by the
/// standard, but the std:: distributions are not, so the conversions to
/// uniform/normal/integer draws live here to keep outputs identical across
/// standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [lo, hi], inclusive. Rejection sampling, no modulo bias.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);

  /// Standard normal via Box-Muller (no cached second value, so every call
  /// consumes exactly two engine outputs).
  double normal();

  bool bernoulli(double p) { return uniform() < p; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace azsearch
