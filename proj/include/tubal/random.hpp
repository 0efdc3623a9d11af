#pragma once

#include <bit>
#include <cstdint>
#include <random>

namespace tubal {

using Seed = std::uint64_t;

/// Stream tags. Each random draw in the library comes from an engine seeded
/// with derive_seed(parent, tag, ...) so that changing how many numbers one
/// consumer draws never shifts another consumer's sequence.
enum class Stream : std::uint64_t {
  truth = 0x7472757468ULL,
  operator_entries = 0x6f70657261ULL,
  noise = 0x6e6f697365ULL,
  init = 0x696e6974ULL,
  split = 0x73706c6974ULL,
  mask = 0x6d61736bULL,
  probe = 0x70726f6265ULL,
  grid = 0x67726964ULL,
};

/// splitmix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr Seed combine(Seed acc, std::uint64_t part) noexcept { return mix64(acc ^ mix64(part)); }

inline std::uint64_t seed_part(double v) noexcept { return std::bit_cast<std::uint64_t>(v); }
inline std::uint64_t seed_part(Stream s) noexcept { return static_cast<std::uint64_t>(s); }
template <class T>
  requires std::is_integral_v<T>
constexpr std::uint64_t seed_part(T v) noexcept {
  return static_cast<std::uint64_t>(v);
}

template <class... Parts>
Seed derive_seed(Seed parent, Parts... parts) noexcept {
  Seed s = mix64(parent);
  ((s = combine(s, seed_part(parts))), ...);
  return s;
}

/// Portable sampler: std::mt19937_64 is fully specified by the standard and
/// the Boost distributions have one implementation on every platform, unlike
/// the <random> distributions.
class Rng {
 public:
  explicit Rng(Seed seed) : engine_(seed) {}

  double normal();
  double normal(double mean, double stddev);
  double laplace(double mu, double b);
  double exponential(double lambda);
  bool bernoulli(double p);
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);

  std::mt19937_64& engine() noexcept { return engine_; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace tubal
